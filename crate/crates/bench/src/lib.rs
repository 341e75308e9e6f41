//! Shared fixtures for the benchmarks.

use thz_planner::{FrequencyGrid, Scenario, UserProfile};

/// Ten users on carriers 100..190 GHz with the reference link and edge.
pub fn ten_user_scenario() -> Scenario {
    let lambdas = [30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 80.0];
    let f_l = [1.0e9, 1.2e9, 1.4e9, 1.5e9, 1.6e9, 1.8e9, 1.3e9, 1.7e9, 2.0e9, 1.1e9];
    let users = lambdas
        .iter()
        .zip(f_l)
        .map(|(&l, f)| UserProfile::new(l, f).expect("valid user"))
        .collect();
    let grid = FrequencyGrid::new((0..10).map(|i| 100.0 + 10.0 * i as f64).collect())
        .expect("distinct carriers");
    Scenario::with_reference_parameters(users, grid)
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_plans() {
        let plan = thz_planner::optimizer::plan(&super::ten_user_scenario()).unwrap();
        assert!(plan.all_feasible());
    }
}

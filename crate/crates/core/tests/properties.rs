use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thz_planner::optimizer::{self, PlanOptions};
use thz_planner::reliability::{self, ThresholdSource, THRESHOLD_RESIDUAL};
use thz_planner::simulator::{self, SimConfig, SimMode};
use thz_planner::{
    EdgeProfile, FrequencyGrid, QosTarget, Scenario, TaskProfile, UserProfile,
};

fn ten_users() -> Scenario {
    let lambdas = [30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 80.0];
    let f_l = [1.0e9, 1.2e9, 1.4e9, 1.5e9, 1.6e9, 1.8e9, 1.3e9, 1.7e9, 2.0e9, 1.1e9];
    let users = lambdas
        .iter()
        .zip(f_l)
        .map(|(&l, f)| UserProfile::new(l, f).unwrap())
        .collect();
    let grid = FrequencyGrid::new((0..10).map(|i| 100.0 + 10.0 * i as f64).collect()).unwrap();
    Scenario::with_reference_parameters(users, grid)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_threshold_agrees_with_bisection(
        lambda in 5.0f64..120.0,
        local_extra in -0.8f64..1.5,
        mu_m in 150.0f64..3000.0,
        eps in 0.02f64..0.2,
        nines in 1.0f64..7.0,
        beta_frac in 0.01f64..1.0,
    ) {
        let task = TaskProfile::reference();
        let user = UserProfile::new(lambda, (lambda * (1.0 + local_extra)).max(0.0) * task.cycles_per_job).unwrap();
        let edge = EdgeProfile::new(mu_m * task.cycles_per_job).unwrap();
        let qos = QosTarget::new(eps, 1.0 - 10f64.powf(-nines)).unwrap();
        let lo = (1.0 - user.local_service_rate(&task) / lambda).max(0.0);
        let beta = lo + (1.0 - lo) * beta_frac;
        let closed = reliability::rate_threshold_detail(&user, &task, &edge, &qos, beta);
        let oracle = reliability::rate_threshold_oracle(&user, &task, &edge, &qos, beta);
        match (closed, oracle) {
            (Ok(c), Ok(o)) => {
                prop_assert!(((c.rate_bps - o) / o).abs() <= 1e-6, "{} vs {o}", c.rate_bps);
                let phi = reliability::system_reliability(&user, &task, &edge, beta, c.rate_bps, eps).unwrap();
                if c.source == ThresholdSource::StabilityFloor {
                    prop_assert!(phi >= qos.reliability_target);
                } else {
                    prop_assert!((phi - qos.reliability_target).abs() <= THRESHOLD_RESIDUAL);
                }
            }
            (Err(_), Err(_)) => {}
            (c, o) => prop_assert!(false, "routes disagree: {c:?} vs {o:?}"),
        }
    }

    #[test]
    fn d_star_monotone_in_qos(eps in 0.04f64..0.12, nines in 3.0f64..6.5) {
        let base = ten_users();
        let mut tight = base.clone();
        tight.qos = QosTarget::new(eps, 1.0 - 10f64.powf(-nines)).unwrap();
        let mut tighter = tight.clone();
        tighter.qos.reliability_target = 1.0 - 10f64.powf(-(nines + 0.25));
        let mut looser = tight.clone();
        looser.qos.delay_budget_s = eps * 1.1;
        let d = optimizer::plan(&tight).unwrap().d_star_m;
        prop_assert!(optimizer::plan(&tighter).unwrap().d_star_m <= d);
        prop_assert!(optimizer::plan(&looser).unwrap().d_star_m >= d);
    }
}

#[test]
fn offload_dominance_on_random_scenarios() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let k = rng.random_range(1..=6);
        let users = (0..k)
            .map(|_| {
                let lambda = rng.random_range(10.0..90.0);
                UserProfile::new(lambda, rng.random_range(0.5..1.5) * (lambda + 60.0) * 1e7).unwrap()
            })
            .collect();
        let grid = FrequencyGrid::new((0..k).map(|i| 100.0 + 15.0 * i as f64).collect()).unwrap();
        let s = Scenario::with_reference_parameters(users, grid);
        let opt = optimizer::plan(&s).unwrap();
        let base = optimizer::plan_with(&s, PlanOptions { force_beta_one: true }).unwrap();
        if opt.all_feasible() && base.all_feasible() {
            assert!(opt.d_star_m >= base.d_star_m);
        }
    }
}

#[test]
fn mm1_sojourn_matches_closed_form_on_random_queues() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..20 {
        let mu = rng.random_range(20.0..400.0);
        let lambda = mu * rng.random_range(0.1..0.8);
        let eps = rng.random_range(0.2..3.0) / (mu - lambda);
        let cfg = SimConfig::new(1_000_000, 100 + i, SimMode::Isolated);
        let est = simulator::simulate_mm1_sojourn(lambda, mu, eps, &cfg).unwrap();
        let exact = -(-(mu - lambda) * eps).exp_m1();
        assert!(
            (est.probability() - exact).abs() <= est.ci_radius(),
            "λ={lambda} μ={mu} ε={eps}: {} vs {exact}",
            est.probability()
        );
    }
}

#[test]
fn ten_user_plan_simulates_within_radius() {
    let s = ten_users();
    let plan = optimizer::plan(&s).unwrap();
    let report = simulator::simulate_system(&plan, &s, &SimConfig::new(1_000_000, 17, SimMode::Isolated)).unwrap();
    for row in &report.rows {
        assert!(row.within_ci(), "{row:?}");
    }
    assert_eq!(
        report,
        simulator::simulate_system(&plan, &s, &SimConfig::new(1_000_000, 17, SimMode::Isolated)).unwrap()
    );
}

#[test]
fn shared_edge_never_beats_isolated_by_much() {
    // shared queueing only adds delay; allow noise of one radius
    let mut s = ten_users();
    s.qos = QosTarget::new(0.08, 0.96).unwrap();
    s.edge = EdgeProfile::new(6e9).unwrap();
    for u in &mut s.users {
        u.local_cpu_hz = (u.arrival_rate + 30.0) * 1e7;
    }
    let plan = optimizer::plan(&s).unwrap();
    assert!(plan.edge_stable);
    let iso = simulator::simulate_system(&plan, &s, &SimConfig::new(400_000, 5, SimMode::Isolated)).unwrap();
    let shared = simulator::simulate_system(&plan, &s, &SimConfig::new(400_000, 5, SimMode::SharedEdge)).unwrap();
    for (a, b) in iso.rows.iter().zip(&shared.rows) {
        assert!(b.empirical <= a.empirical + a.ci_radius + b.ci_radius, "{a:?} {b:?}");
    }
}

#[test]
fn optimised_offload_beats_full_offload_empirically_at_equal_rate() {
    let users = [(50.0, 0.8e9), (60.0, 0.9e9), (70.0, 1.0e9)]
        .iter()
        .map(|&(l, f)| UserProfile::new(l, f).unwrap())
        .collect();
    let mut s = Scenario::with_reference_parameters(users, FrequencyGrid::new(vec![120.0, 140.0, 160.0]).unwrap());
    s.edge = EdgeProfile::new(1.5e9).unwrap();
    s.qos = QosTarget::new(0.08, 0.96).unwrap();
    let plan = optimizer::plan(&s).unwrap();
    let cfg = SimConfig::new(400_000, 8, SimMode::Isolated);
    for (i, (user, up)) in s.users.iter().zip(&plan.users).enumerate() {
        assert!(up.beta_star > 0.0 && up.beta_star < 1.0, "user {i} should split its load");
        let opt = simulator::simulate_user(i, user, &s.task, &s.edge, up.beta_star, up.r_th_bps, &s.qos, &cfg).unwrap();
        // an uplink sized for partial offload may not even carry the full stream
        let full = simulator::simulate_user(i, user, &s.task, &s.edge, 1.0, up.r_th_bps, &s.qos, &cfg)
            .map_or(0.0, |row| row.empirical);
        assert!(opt.empirical > full, "user {i}: {} vs {full}", opt.empirical);
    }
}

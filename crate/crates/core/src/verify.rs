//! Property checks run against a concrete scenario: rate/distance inversion,
//! supermodularity of the distance, closed-form thresholds against
//! bisection, and sorted against exhaustive carrier assignment.

use std::fmt;

use crate::channel::SORTED_ASSIGNMENT_MAX_GHZ;
use crate::error::Result;
use crate::optimizer::{self, Scenario, UserStatus, BRUTE_FORCE_MAX_USERS};
use crate::reliability::{self, ThresholdSource, THRESHOLD_RESIDUAL};

pub const ROUND_TRIP_TOLERANCE: f64 = 1e-9;
pub const ORACLE_TOLERANCE: f64 = 1e-6;
pub const ASSIGNMENT_TOLERANCE: f64 = 1e-12;
pub const BETA_GRID_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, status: CheckStatus, detail: impl Into<String>) -> Self {
        Self {
            name,
            status,
            detail: detail.into(),
        }
    }

    fn judged(name: &'static str, ok: bool, detail: impl Into<String>) -> Self {
        let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
        Self::new(name, status, detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }
}

fn relative(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Every grid carrier against rates from 1 Mbit/s to 1 Tbit/s.
pub fn check_round_trip(scenario: &Scenario) -> CheckResult {
    let ch = scenario.channel();
    let mut worst = 0.0f64;
    for &f in scenario.grid.as_slice() {
        for e in 0..24 {
            let rate = 10f64.powf(6.0 + 6.0 * e as f64 / 23.0);
            let err = ch
                .distance(f, rate)
                .and_then(|d| ch.data_rate(f, d))
                .map(|back| relative(back, rate))
                .unwrap_or(f64::INFINITY);
            worst = worst.max(err);
        }
    }
    CheckResult::judged(
        "round-trip",
        worst <= ROUND_TRIP_TOLERANCE,
        format!("max relative rate error {worst:.3e} (limit {ROUND_TRIP_TOLERANCE:e})"),
    )
}

/// Mixed second difference of distance on a 20×20 (rate, carrier) grid
/// spanning the scenario's carriers.
pub fn check_supermodularity(scenario: &Scenario) -> CheckResult {
    const NAME: &str = "supermodularity";
    const DF: f64 = 5.0;
    if scenario.grid.exceeds_sorted_guarantee() {
        return CheckResult::new(
            NAME,
            CheckStatus::Skipped,
            format!("grid has carriers above {SORTED_ASSIGNMENT_MAX_GHZ} GHz where the property does not hold"),
        );
    }
    let freqs = scenario.grid.as_slice();
    let f_lo = freqs[0].min(SORTED_ASSIGNMENT_MAX_GHZ - DF);
    let f_hi = (freqs[freqs.len() - 1] - DF).clamp(f_lo, SORTED_ASSIGNMENT_MAX_GHZ - DF);
    let ch = scenario.channel();
    let mut min_gap = f64::INFINITY;
    for i in 0..20 {
        let rate = 10f64.powf(8.0 + 3.0 * i as f64 / 19.0);
        for j in 0..20 {
            let f = f_lo + (f_hi - f_lo) * j as f64 / 19.0;
            let gap = ch
                .supermodularity_gap(rate, f, 0.5 * rate, DF)
                .unwrap_or(f64::NEG_INFINITY);
            min_gap = min_gap.min(gap);
        }
    }
    CheckResult::judged(
        NAME,
        min_gap > 0.0,
        format!("smallest mixed difference {min_gap:.3e} m on [{f_lo}, {f_hi}] GHz"),
    )
}

/// Closed-form threshold against bisection on a β grid, per user.
pub fn check_thresholds(scenario: &Scenario) -> CheckResult {
    const NAME: &str = "threshold-oracle";
    let mut compared = 0usize;
    let mut worst_rel = 0.0f64;
    let mut worst_residual = 0.0f64;
    let mut mismatches = Vec::new();
    let eps = scenario.qos.delay_budget_s;
    for (i, user) in scenario.users.iter().enumerate() {
        let Ok((lo, hi)) = optimizer::feasible_beta_range(scenario, i) else {
            continue;
        };
        for k in 1..=BETA_GRID_POINTS {
            let beta = lo + (hi - lo) * k as f64 / BETA_GRID_POINTS as f64;
            let closed = reliability::rate_threshold_detail(
                user,
                &scenario.task,
                &scenario.edge,
                &scenario.qos,
                beta,
            );
            let oracle = reliability::rate_threshold_oracle(
                user,
                &scenario.task,
                &scenario.edge,
                &scenario.qos,
                beta,
            );
            match (closed, oracle) {
                (Ok(c), Ok(o)) => {
                    compared += 1;
                    worst_rel = worst_rel.max(relative(c.rate_bps, o));
                    let phi = reliability::system_reliability(
                        user,
                        &scenario.task,
                        &scenario.edge,
                        beta,
                        c.rate_bps,
                        eps,
                    )
                    .unwrap_or(f64::NAN);
                    let target = scenario.qos.reliability_target;
                    if c.source == ThresholdSource::StabilityFloor {
                        if !(phi >= target) {
                            mismatches.push(format!("user {i} β={beta:.4}: floor misses target"));
                        }
                    } else {
                        let residual = (phi - target).abs();
                        worst_residual = worst_residual.max(if residual.is_nan() {
                            f64::INFINITY
                        } else {
                            residual
                        });
                    }
                }
                (Err(_), Err(_)) => {}
                (c, o) => mismatches.push(format!(
                    "user {i} β={beta:.4}: closed form {} but bisection {}",
                    if c.is_ok() { "succeeds" } else { "fails" },
                    if o.is_ok() { "succeeds" } else { "fails" },
                )),
            }
        }
    }
    let ok = mismatches.is_empty()
        && worst_rel <= ORACLE_TOLERANCE
        && worst_residual <= THRESHOLD_RESIDUAL;
    let mut detail = format!(
        "{compared} points, max relative gap {worst_rel:.3e}, max reliability residual {worst_residual:.3e}"
    );
    if let Some(first) = mismatches.first() {
        detail.push_str(&format!("; {} disagreements, first: {first}", mismatches.len()));
    }
    CheckResult::judged(NAME, ok, detail)
}

/// Sorted assignment of the planned thresholds against every injective
/// user→carrier map.
pub fn check_assignment(scenario: &Scenario) -> Result<CheckResult> {
    const NAME: &str = "assignment";
    let plan = optimizer::plan(scenario)?;
    let thresholds: Vec<f64> = plan
        .users
        .iter()
        .filter(|u| u.status == UserStatus::Constrained)
        .map(|u| u.r_th_bps)
        .collect();
    if thresholds.is_empty() {
        return Ok(CheckResult::new(NAME, CheckStatus::Skipped, "no rate-constrained users"));
    }
    if thresholds.len() > BRUTE_FORCE_MAX_USERS {
        return Ok(CheckResult::new(
            NAME,
            CheckStatus::Skipped,
            format!(
                "{} constrained users exceed the exhaustive-search limit of {BRUTE_FORCE_MAX_USERS}",
                thresholds.len()
            ),
        ));
    }
    let ch = scenario.channel();
    let exhaustive = match optimizer::brute_force_assignment(&thresholds, &scenario.grid, &ch) {
        Ok(e) => e,
        Err(e) => return Ok(CheckResult::new(NAME, CheckStatus::Skipped, e.to_string())),
    };
    let sorted = optimizer::assign_frequencies(&thresholds, &scenario.grid)?;
    let sorted_total = optimizer::total_distance(&ch, &thresholds, &sorted)?;
    let gap = relative(sorted_total, exhaustive.best_total_m);
    let detail = format!(
        "sorted {sorted_total:.6} m vs exhaustive best {:.6} m over {} maps (relative gap {gap:.3e})",
        exhaustive.best_total_m, exhaustive.maps_evaluated
    );
    if scenario.grid.exceeds_sorted_guarantee() {
        // no optimality guarantee: report the exhaustive optimum, do not judge
        return Ok(CheckResult::new(
            NAME,
            CheckStatus::Pass,
            format!("{detail}; heuristic above {SORTED_ASSIGNMENT_MAX_GHZ} GHz, exhaustive optimum reported"),
        ));
    }
    Ok(CheckResult::judged(NAME, gap <= ASSIGNMENT_TOLERANCE, detail))
}

pub fn verify_scenario(scenario: &Scenario) -> Result<VerifyReport> {
    scenario.validate()?;
    Ok(VerifyReport {
        checks: vec![
            check_round_trip(scenario),
            check_supermodularity(scenario),
            check_thresholds(scenario),
            check_assignment(scenario)?,
        ],
    })
}

//! Release gate: nine numbered criteria, one PASS/FAIL line each, with a
//! wall-clock budget per criterion. Runs without the libtest harness so the
//! lines are always visible; exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thz_planner::numerics::{lambert_w, Branch, BRANCH_POINT};
use thz_planner::optimizer::{self, PlanOptions};
use thz_planner::reliability::{self, ThresholdSource, THRESHOLD_RESIDUAL};
use thz_planner::simulator::{self, SimConfig, SimMode};
use thz_planner::{
    Channel, EdgeProfile, FrequencyGrid, GaussianFit, QosTarget, QueueRates, Scenario, SweepAxis, TaskProfile,
    UserProfile, UserStatus,
};
use thz_planner_cli::load_scenario;

type Outcome = Result<String, String>;

struct Criterion {
    id: u8,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn reference_k10() -> Scenario {
    load_scenario(&scenario_path("reference_k10.toml")).expect("reference scenario loads").scenario
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn log_space(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

fn lambert_residuals() -> Outcome {
    const PER_BRANCH: usize = 10_000;
    let half = PER_BRANCH / 2;
    let principal = log_space(1e-300, -BRANCH_POINT, half)
        .map(|m| -m)
        .chain(log_space(1e-300, 1e300, PER_BRANCH - half));
    let minus_one = log_space(1e-300, -BRANCH_POINT, PER_BRANCH).map(|m| -m);
    let mut worst = 0.0f64;
    for (branch, xs) in [
        (Branch::Principal, principal.collect::<Vec<_>>()),
        (Branch::MinusOne, minus_one.collect::<Vec<_>>()),
    ] {
        ensure(xs.len() == PER_BRANCH, || "argument count".into())?;
        for x in xs {
            let w = lambert_w(branch, x).map_err(|e| format!("{branch:?} at {x:e}: {e}"))?;
            let scaled = (w * w.exp() - x).abs() / x.abs().max(1.0);
            ensure(scaled <= 1e-12, || format!("{branch:?} at {x:e}: residual {scaled:e}"))?;
            worst = worst.max(scaled);
        }
    }
    Ok(format!("2×{PER_BRANCH} arguments, worst scaled residual {worst:.2e}"))
}

fn attenuation_crossover() -> Outcome {
    let f = GaussianFit::default()
        .attenuation_crossover()
        .map_err(|e| e.to_string())?;
    ensure((f - 216.5692).abs() <= 0.05, || format!("crossover at {f} GHz"))?;
    Ok(format!("{f:.4} GHz"))
}

fn rate_distance_round_trip() -> Outcome {
    let ch = Channel::default();
    let freqs: Vec<f64> = (0..24).map(|i| 100.0 + 115.0 * i as f64 / 23.0).collect();
    let rates: Vec<f64> = log_space(1e6, 1e12, 24).collect();
    let mut worst = 0.0f64;
    for &f in &freqs {
        for &r in &rates {
            let d = ch.distance(f, r).map_err(|e| format!("d({f}, {r:e}): {e}"))?;
            let back = ch.data_rate(f, d).map_err(|e| e.to_string())?;
            let rel = ((back - r) / r).abs();
            ensure(rel <= 1e-9, || format!("f={f} R={r:e}: relative error {rel:e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("24×24 grid, worst relative error {worst:.2e}"))
}

/// Adaptive Simpson on `[a, b]` with Richardson correction.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `P(X + Y ≤ ε)` for independent `X ~ Exp(u)`, `Y ~ Exp(v)` by direct integration.
fn convolution_cdf(u: f64, v: f64, eps: f64) -> f64 {
    let integrand = |x: f64| u * (-u * x).exp() * -(-v * (eps - x)).exp_m1();
    simpson(&integrand, 0.0, eps, 1e-14)
}

fn closed_form_vs_quadrature() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let u: f64 = rng.random_range(5.0..500.0);
        let v = if i < 10 {
            u * (1.0 + rng.random_range(-1e-7..1e-7))
        } else {
            rng.random_range(5.0..500.0)
        };
        let eps = rng.random_range(0.1..4.0) / u.min(v);
        let closed = reliability::edge_reliability(&QueueRates::new(u, v).map_err(|e| e.to_string())?, eps)
            .map_err(|e| e.to_string())?;
        let quad = convolution_cdf(u, v, eps);
        let err = (closed - quad).abs();
        ensure(err <= 1e-9, || format!("u={u} v={v} ε={eps}: {closed} vs {quad}"))?;
        worst = worst.max(err);
    }
    Ok(format!("100 cases (10 near-degenerate), worst error {worst:.2e}"))
}

fn threshold_vs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let task = TaskProfile::reference();
    let (mut compared, mut floors, mut infeasible) = (0usize, 0usize, 0usize);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let lambda = rng.random_range(10.0..100.0);
        let user = UserProfile::new(lambda, lambda * rng.random_range(0.7..3.0) * task.cycles_per_job)
            .map_err(|e| e.to_string())?;
        let edge = EdgeProfile::new((lambda * rng.random_range(5.0..150.0)) * task.cycles_per_job)
            .map_err(|e| e.to_string())?;
        let qos = QosTarget::new(rng.random_range(0.03..0.3), 1.0 - 10f64.powf(-rng.random_range(0.5..6.0)))
            .map_err(|e| e.to_string())?;
        let lo = (1.0 - user.local_service_rate(&task) / lambda).max(0.0);
        for i in 0..100 {
            let beta = lo + (1.0 - lo) * (i + 1) as f64 / 100.0;
            let closed = reliability::rate_threshold_detail(&user, &task, &edge, &qos, beta);
            let oracle = reliability::rate_threshold_oracle(&user, &task, &edge, &qos, beta);
            match (closed, oracle) {
                (Ok(c), Ok(o)) => {
                    let rel = ((c.rate_bps - o) / o).abs();
                    ensure(rel <= 1e-6, || format!("β={beta}: {} vs oracle {o}", c.rate_bps))?;
                    worst = worst.max(rel);
                    let phi = reliability::system_reliability(&user, &task, &edge, beta, c.rate_bps, qos.delay_budget_s)
                        .map_err(|e| e.to_string())?;
                    if c.source == ThresholdSource::StabilityFloor {
                        floors += 1;
                        ensure(phi >= qos.reliability_target, || format!("floor at β={beta} misses target: Φ={phi}"))?;
                    } else {
                        let residual = (phi - qos.reliability_target).abs();
                        ensure(residual <= THRESHOLD_RESIDUAL, || format!("β={beta}: residual {residual:e}"))?;
                    }
                    compared += 1;
                }
                (Err(_), Err(_)) => infeasible += 1,
                (c, o) => return Err(format!("β={beta}: routes disagree ({c:?} vs {o:?})")),
            }
        }
    }
    Ok(format!(
        "{compared} thresholds ({floors} at the stability floor), {infeasible} jointly infeasible, worst relative gap {worst:.2e}"
    ))
}

fn sorted_assignment_optimal() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ch = Channel::default();
    let mut maps = 0u64;
    for _ in 0..200 {
        let k = rng.random_range(2..=8);
        let mut freqs: Vec<f64> = Vec::with_capacity(k);
        while freqs.len() < k {
            let f = rng.random_range(100.0..215.0);
            if freqs.iter().all(|&g: &f64| (g - f).abs() > 1e-6) {
                freqs.push(f);
            }
        }
        let grid = FrequencyGrid::new(freqs).map_err(|e| e.to_string())?;
        let r_th: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(8.0..11.0))).collect();
        let sorted = optimizer::assign_frequencies(&r_th, &grid).map_err(|e| e.to_string())?;
        let sorted_total = optimizer::total_distance(&ch, &r_th, &sorted).map_err(|e| e.to_string())?;
        let exhaustive = optimizer::brute_force_assignment(&r_th, &grid, &ch).map_err(|e| e.to_string())?;
        maps += exhaustive.maps_evaluated;
        let gap = (exhaustive.best_total_m - sorted_total) / exhaustive.best_total_m;
        ensure(gap.abs() <= 1e-12, || format!("K={k}: sorted {sorted_total} vs best {}", exhaustive.best_total_m))?;

        // lowest thresholds on the highest carriers
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| r_th[a].total_cmp(&r_th[b]));
        let mut reversed = vec![0.0; k];
        let desc: Vec<f64> = grid.as_slice().iter().rev().copied().collect();
        for (rank, &user) in order.iter().enumerate() {
            reversed[user] = desc[rank];
        }
        let reversed_total = optimizer::total_distance(&ch, &r_th, &reversed).map_err(|e| e.to_string())?;
        let gap = (reversed_total - exhaustive.worst_total_m) / exhaustive.worst_total_m;
        ensure(gap.abs() <= 1e-12, || {
            format!("K={k}: reversed {reversed_total} vs worst {}", exhaustive.worst_total_m)
        })?;
    }
    Ok(format!("200 instances, {maps} maps enumerated"))
}

fn monte_carlo_agreement() -> Outcome {
    let task = TaskProfile::reference();
    let user = UserProfile::new(50.0, 1e9).map_err(|e| e.to_string())?;
    let edge = EdgeProfile::new(1e9).map_err(|e| e.to_string())?;
    let qos = QosTarget::new(0.06, 0.9).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for (i, beta) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        // uplink drains 100 jobs/s above its offered load
        let rate = (beta * user.arrival_rate + 100.0) * task.input_bits;
        let cfg = SimConfig::new(1_000_000, 70 + i as u64, SimMode::Isolated);
        let row = simulator::simulate_user(i, &user, &task, &edge, beta, rate, &qos, &cfg).map_err(|e| e.to_string())?;
        ensure((0.90..=0.99).contains(&row.analytic), || format!("β={beta}: Φ={} not moderate", row.analytic))?;
        ensure(row.within_ci(), || {
            format!("β={beta}: empirical {} vs analytic {} (radius {:e})", row.empirical, row.analytic, row.ci_radius)
        })?;
        parts.push(format!("β={beta}: Δ={:.1e} ≤ {:.1e}", row.delta.abs(), row.ci_radius));
    }
    Ok(parts.join(", "))
}

fn non_decreasing(xs: &[f64]) -> bool {
    // optimiser noise only; a real decrease is orders of magnitude larger
    xs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9))
}

fn system_trends() -> Outcome {
    let s = reference_k10();
    let opt = optimizer::plan(&s).map_err(|e| e.to_string())?;
    let base = optimizer::plan_with(&s, PlanOptions { force_beta_one: true }).map_err(|e| e.to_string())?;
    ensure(opt.all_feasible() && base.all_feasible(), || "reference plan has infeasible users".into())?;
    ensure(opt.d_star_m >= base.d_star_m, || format!("optimised {} < baseline {}", opt.d_star_m, base.d_star_m))?;

    let d = |axis, values: &[f64]| -> Result<Vec<f64>, String> {
        Ok(optimizer::sweep(&s, axis, values)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|p| p.d_star_m)
            .collect())
    };
    let f_m = [1e9, 2e9, 4e9, 6e9, 8e9, 1e10, 2e10, 5e10, 1e11, 2e11, 5e11, 1e12];
    let by_fm = d(SweepAxis::EdgeCpu, &f_m)?;
    ensure(non_decreasing(&by_fm), || format!("f_m sweep decreases: {by_fm:?}"))?;
    let n = by_fm.len();
    let tail = (by_fm[n - 1] - by_fm[n - 2]) / by_fm[n - 1];
    let early = (by_fm[2] - by_fm[1]) / by_fm[2];
    ensure(tail < 1e-3 && early > 1e-2, || format!("f_m sweep not saturating: {by_fm:?}"))?;

    let by_eps = d(SweepAxis::DelayBudget, &[0.04, 0.05, 0.06, 0.07, 0.08, 0.1, 0.12])?;
    ensure(non_decreasing(&by_eps), || format!("ε sweep decreases: {by_eps:?}"))?;
    let mut by_theta = d(SweepAxis::ReliabilityTarget, &[0.9, 0.99, 0.999, 0.9999, 0.99999, 0.999999, 0.9999999])?;
    by_theta.reverse();
    ensure(non_decreasing(&by_theta), || format!("ϑ sweep increases: {by_theta:?}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("plan.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_thz-planner"))
        .arg("plan")
        .arg(scenario_path("infeasible.toml"))
        .arg("-o")
        .arg(&csv)
        .output()
        .map_err(|e| e.to_string())?
        .status;
    ensure(status.code() == Some(2), || format!("infeasible scenario exit {status}"))?;
    let text = std::fs::read_to_string(&csv).map_err(|e| e.to_string())?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut users = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let dist: f64 = rec[4].parse().map_err(|e| format!("dist_m {:?}: {e}", &rec[4]))?;
        ensure(dist == 0.0, || format!("row {:?} has non-zero distance", rec))?;
        users += usize::from(&rec[0] != "total");
    }
    ensure(users == 10, || format!("expected 10 user rows, got {users}"))?;

    Ok(format!(
        "d*={:.2} m vs β=1 {:.2} m; f_m sweep {:.2}→{:.2} m, last step {tail:.1e}; infeasible exit 2",
        opt.d_star_m, base.d_star_m, by_fm[1], by_fm[n - 1]
    ))
}

fn offload_dominance() -> Outcome {
    let s = reference_k10();
    let plan = optimizer::plan(&s).map_err(|e| e.to_string())?;
    let eps = s.qos.delay_budget_s;
    let mut margin = f64::INFINITY;
    for (i, (user, up)) in s.users.iter().zip(&plan.users).enumerate() {
        let rate = up.r_th_bps;
        let optimised = if up.status == UserStatus::Unconstrained {
            reliability::local_reliability(user, &s.task, 0.0, eps)
        } else {
            reliability::system_reliability(user, &s.task, &s.edge, up.beta_star, rate, eps)
        }
        .map_err(|e| e.to_string())?;
        // offloading everything through an uplink that cannot carry it never meets the deadline
        let all_offload = reliability::system_reliability(user, &s.task, &s.edge, 1.0, rate, eps).unwrap_or(0.0);
        ensure(optimised >= all_offload, || format!("user {i}: {optimised} < {all_offload}"))?;
        margin = margin.min(optimised - all_offload);
    }
    Ok(format!("{} users, smallest margin {margin:.3e}", s.users.len()))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "Lambert W residuals", budget: Duration::from_secs(1), run: lambert_residuals },
        Criterion { id: 2, title: "attenuation crossover", budget: Duration::from_secs(1), run: attenuation_crossover },
        Criterion { id: 3, title: "rate/distance round trip", budget: Duration::from_secs(1), run: rate_distance_round_trip },
        Criterion { id: 4, title: "edge reliability vs quadrature", budget: Duration::from_secs(5), run: closed_form_vs_quadrature },
        Criterion { id: 5, title: "rate threshold vs bisection", budget: Duration::from_secs(30), run: threshold_vs_oracle },
        Criterion { id: 6, title: "sorted assignment vs exhaustive", budget: Duration::from_secs(120), run: sorted_assignment_optimal },
        Criterion { id: 7, title: "Monte-Carlo agreement", budget: Duration::from_secs(120), run: monte_carlo_agreement },
        Criterion { id: 8, title: "system-level trends", budget: Duration::from_secs(60), run: system_trends },
        Criterion { id: 9, title: "partial offload dominance", budget: Duration::from_secs(1), run: offload_dominance },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; over budget {:?}", c.budget)),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} [{}] {} ({:.3} s): {detail}", c.id, c.title, elapsed.as_secs_f64());
        failed += usize::from(outcome.is_err());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}

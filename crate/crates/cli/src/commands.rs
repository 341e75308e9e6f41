use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thz_planner::optimizer::{self, PlanOptions, SweepAxis};
use thz_planner::simulator::{self, SimConfig, SimMode};
use thz_planner::verify;

use crate::scenario_file::{load_scenario, LoadedScenario};
use crate::{CliError, EXIT_DISCREPANCY, EXIT_INFEASIBLE, EXIT_OK, EXIT_VERIFY_FAILED};

const TOOL: &str = "thz-planner";

/// Twelve significant digits; non-finite values become empty fields.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        String::new()
    }
}

fn open_csv(path: &Path, loaded: &LoadedScenario, seed: Option<u64>) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    writeln!(
        out,
        "# {TOOL} {} scenario_sha256={} seed={seed}",
        env!("CARGO_PKG_VERSION"),
        loaded.sha256
    )?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out))
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> Result<(), CliError> {
    w.flush()?;
    let inner = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    inner.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    Ok(())
}

fn report_warnings(loaded: &LoadedScenario) {
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
}

/// Plans the scenario and writes one row per user plus a `total` row
/// carrying the summed distance and the edge-stability flag.
pub fn cmd_plan(scenario_path: &Path, out_csv: &Path, beta_one: bool) -> Result<u8, CliError> {
    let loaded = load_scenario(scenario_path)?;
    report_warnings(&loaded);
    let options = PlanOptions { force_beta_one: beta_one };
    let plan = optimizer::plan_with(&loaded.scenario, options)?;
    for w in &plan.warnings {
        log::warn!("{w}");
    }

    let mut w = open_csv(out_csv, &loaded, None)?;
    w.write_record(["user_id", "beta_star", "r_th_bps", "freq_ghz", "dist_m", "feasible"])?;
    for (i, u) in plan.users.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format_number(u.beta_star),
            format_number(u.r_th_bps),
            u.freq_ghz.map_or_else(String::new, format_number),
            format_number(u.dist_m),
            u.is_feasible().to_string(),
        ])?;
    }
    w.write_record([
        "total".to_string(),
        String::new(),
        String::new(),
        String::new(),
        format_number(plan.d_star_m),
        plan.edge_stable.to_string(),
    ])?;
    finish(w)?;

    println!(
        "d_star = {:.6} m over {} users ({} infeasible), edge stable: {}",
        plan.d_star_m,
        plan.users.len(),
        plan.n_infeasible(),
        plan.edge_stable
    );
    Ok(if plan.all_feasible() { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn cmd_sweep(
    scenario_path: &Path,
    axis: SweepAxis,
    values: &[f64],
    out_csv: &Path,
) -> Result<u8, CliError> {
    let loaded = load_scenario(scenario_path)?;
    report_warnings(&loaded);
    if values.is_empty() {
        return Err(CliError::Input("sweep needs at least one value".into()));
    }
    let points = optimizer::sweep(&loaded.scenario, axis, values)
        .map_err(|e| CliError::Validation(format!("sweep value: {e}")))?;

    let mut w = open_csv(out_csv, &loaded, None)?;
    w.write_record(["axis_value", "d_star_m", "n_infeasible"])?;
    for p in &points {
        w.write_record([
            format_number(p.value),
            format_number(p.d_star_m),
            p.n_infeasible.to_string(),
        ])?;
    }
    finish(w)?;
    println!("{} sweep points written", points.len());
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy)]
pub struct SimulateArgs {
    pub mode: SimMode,
    pub jobs: u64,
    pub seed: u64,
    /// Defaults to the simulator's standard warmup.
    pub warmup: Option<u64>,
    pub beta_one: bool,
}

/// Plans, simulates at the planned operating points and compares the
/// empirical reliabilities with the closed forms.
pub fn cmd_simulate(scenario_path: &Path, args: SimulateArgs, out_csv: &Path) -> Result<u8, CliError> {
    let loaded = load_scenario(scenario_path)?;
    report_warnings(&loaded);
    let plan = optimizer::plan_with(&loaded.scenario, PlanOptions { force_beta_one: args.beta_one })?;
    if !plan.all_feasible() {
        return Err(CliError::Infeasible(format!(
            "{} users have no feasible operating point to simulate",
            plan.n_infeasible()
        )));
    }
    let mut cfg = SimConfig::new(args.jobs, args.seed, args.mode);
    if let Some(warmup) = args.warmup {
        cfg.warmup = warmup;
    }
    cfg.validate()?;
    let report = match simulator::simulate_system(&plan, &loaded.scenario, &cfg) {
        Ok(r) => r,
        Err(thz_planner::Error::Unstable(msg)) => return Err(CliError::Infeasible(msg)),
        Err(e) => return Err(e.into()),
    };

    let mut w = open_csv(out_csv, &loaded, Some(args.seed))?;
    w.write_record(["user_id", "analytic_phi", "empirical_phi", "ci_radius", "delta", "mode"])?;
    for r in &report.rows {
        w.write_record([
            r.user_id.to_string(),
            format_number(r.analytic),
            format_number(r.empirical),
            format_number(r.ci_radius),
            format_number(r.delta),
            r.mode.to_string(),
        ])?;
    }
    finish(w)?;

    let outside = report.rows.iter().filter(|r| !r.within_ci()).count();
    println!(
        "{} users simulated in {} mode, {outside} outside the 3-sigma radius",
        report.rows.len(),
        report.mode
    );
    Ok(if outside == 0 { EXIT_OK } else { EXIT_DISCREPANCY })
}

/// Runs the property suite and prints a pass/fail table.
pub fn cmd_verify(scenario_path: &Path, out: &mut impl Write) -> Result<u8, CliError> {
    let loaded = load_scenario(scenario_path)?;
    report_warnings(&loaded);
    let report = verify::verify_scenario(&loaded.scenario)?;
    for c in &report.checks {
        writeln!(out, "{:<4}  {:<17} {}", c.status, c.name, c.detail)?;
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_twelve_significant_digits() {
        assert_eq!(format_number(1_493_248_618.082_255), "1.49324861808e9");
        assert_eq!(format_number(0.75), "7.50000000000e-1");
        assert_eq!(format_number(f64::NAN), "");
    }
}

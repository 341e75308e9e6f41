use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thz_planner::simulator::{DEFAULT_JOBS, SimMode};
use thz_planner::SweepAxis;
use thz_planner_cli::{cmd_plan, cmd_simulate, cmd_sweep, cmd_verify, CliError, SimulateArgs, EXIT_INPUT};

const THREADS_ENV: &str = "THZ_PLANNER_THREADS";

#[derive(Parser)]
#[command(name = "thz-planner", version, about = "Coverage planning for THz links carrying delay-critical offloaded jobs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Choose offloading probabilities and carriers; write the per-user plan.
    Plan {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Offload every job instead of optimising the probability.
        #[arg(long)]
        beta_one: bool,
    },
    /// Re-plan while varying one scenario parameter.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Monte-Carlo check of the planned reliabilities.
    Simulate {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "isolated")]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_JOBS)]
        jobs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        warmup: Option<u64>,
        #[arg(long)]
        beta_one: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the property suite against a scenario.
    Verify { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    #[value(name = "f_m")]
    EdgeCpu,
    #[value(name = "epsilon")]
    Epsilon,
    #[value(name = "theta_th")]
    ThetaTh,
    #[value(name = "f_l")]
    LocalCpu,
}

impl From<Axis> for SweepAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::EdgeCpu => SweepAxis::EdgeCpu,
            Axis::Epsilon => SweepAxis::DelayBudget,
            Axis::ThetaTh => SweepAxis::ReliabilityTarget,
            Axis::LocalCpu => SweepAxis::LocalCpu,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Isolated,
    SharedEdge,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("{THREADS_ENV} must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Plan { scenario, output, beta_one } => cmd_plan(&scenario, &output, beta_one),
        Command::Sweep { scenario, axis, values, output } => {
            cmd_sweep(&scenario, axis.into(), &values, &output)
        }
        Command::Simulate { scenario, mode, jobs, seed, warmup, beta_one, output } => {
            let mode = match mode {
                Mode::Isolated => SimMode::Isolated,
                Mode::SharedEdge => SimMode::SharedEdge,
            };
            let args = SimulateArgs { mode, jobs, seed, warmup, beta_one };
            cmd_simulate(&scenario, args, &output)
        }
        Command::Verify { scenario } => cmd_verify(&scenario, &mut io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

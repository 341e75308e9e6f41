//! Batch front end: scenario files in, CSV tables out.
//!
//! Exit codes are stable: 0 success, 1 input error, 2 infeasible plan,
//! 3 simulation discrepancy, 4 verification failure.

pub mod commands;
pub mod scenario_file;

pub use commands::{cmd_plan, cmd_simulate, cmd_sweep, cmd_verify, SimulateArgs};
pub use scenario_file::{load_scenario, parse_scenario, LoadedScenario};

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_DISCREPANCY: u8 = 3;
pub const EXIT_VERIFY_FAILED: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// The plan cannot be carried out, e.g. some user is infeasible.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),

    #[error(transparent)]
    Planner(#[from] thz_planner::Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(std::io::Error::other(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_INPUT,
        }
    }
}

//! TOML scenario files. Every key carries its unit; unknown keys are errors.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thz_planner::channel::SORTED_ASSIGNMENT_MAX_GHZ;
use thz_planner::optimizer::DEFAULT_MAX_DISTANCE_M;
use thz_planner::{
    EdgeProfile, FrequencyGrid, GaussianFit, GaussianTerm, QosTarget, RadioParams, Scenario,
    TaskProfile, UserProfile,
};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub task: TaskSection,
    pub radio: RadioSection,
    pub edge: EdgeSection,
    pub qos: QosSection,
    pub grid: GridSection,
    pub users: Vec<UserSection>,
    pub fit: Option<FitSection>,
    pub caps: Option<CapsSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct TaskSection {
    pub L_a_bits: f64,
    pub mu_a_cycles: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct RadioSection {
    pub B_hz: f64,
    pub p_w: f64,
    pub gt_dbi: f64,
    pub gr_dbi: f64,
    pub noise_dbm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSection {
    pub f_m_cycles_per_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosSection {
    pub epsilon_s: f64,
    pub theta_th: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub freqs_ghz: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSection {
    pub lambda_jobs_per_s: f64,
    pub f_l_cycles_per_s: f64,
}

/// Seven `[amplitude_db_per_km, center_ghz, width_ghz]` triples.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub terms: [[f64; 3]; 7],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsSection {
    pub max_distance_m: f64,
}

/// A validated scenario plus what the CSV header needs to identify it.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub sha256: String,
    pub warnings: Vec<String>,
}

fn invalid(key: &str) -> impl Fn(thz_planner::Error) -> CliError + '_ {
    move |e| CliError::Validation(format!("{key}: {e}"))
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario, CliError> {
        let task = TaskProfile::new(self.task.L_a_bits, self.task.mu_a_cycles)
            .map_err(invalid("task"))?;
        let r = self.radio;
        let radio = RadioParams::new(r.B_hz, r.p_w, r.gt_dbi, r.gr_dbi, r.noise_dbm)
            .map_err(invalid("radio"))?;
        let edge = EdgeProfile::new(self.edge.f_m_cycles_per_s).map_err(invalid("edge"))?;
        let qos = QosTarget::new(self.qos.epsilon_s, self.qos.theta_th).map_err(invalid("qos"))?;
        let grid = FrequencyGrid::new(self.grid.freqs_ghz).map_err(invalid("grid.freqs_ghz"))?;
        let users = self
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                UserProfile::new(u.lambda_jobs_per_s, u.f_l_cycles_per_s)
                    .map_err(|e| CliError::Validation(format!("users[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let fit = match self.fit {
            Some(f) => GaussianFit::new(f.terms.map(|[a, b, c]| GaussianTerm::new(a, b, c)))
                .map_err(invalid("fit.terms"))?,
            None => GaussianFit::default(),
        };
        let max_distance_m = self
            .caps
            .map_or(DEFAULT_MAX_DISTANCE_M, |c| c.max_distance_m);
        let scenario = Scenario {
            task,
            users,
            edge,
            radio,
            fit,
            grid,
            qos,
            max_distance_m,
        };
        scenario.validate().map_err(invalid("scenario"))?;
        Ok(scenario)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    file.into_scenario()
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Parse(format!("{} is not UTF-8: {e}", path.display())))?;
    let scenario = parse_scenario(text)?;
    let mut warnings = Vec::new();
    if scenario.grid.exceeds_sorted_guarantee() {
        warnings.push(format!(
            "grid has carriers above {SORTED_ASSIGNMENT_MAX_GHZ} GHz: sorted assignment is not guaranteed optimal"
        ));
    }
    Ok(LoadedScenario {
        scenario,
        sha256: hex::encode(Sha256::digest(&bytes)),
        warnings,
    })
}

//! Two-stage coverage planner: each user's offloading probability is chosen
//! to minimise its uplink rate threshold, then carriers are matched to users
//! in threshold order, which maximises the summed coverage distance while
//! every carrier stays below the supermodularity crossover.

use rayon::prelude::*;

use crate::channel::{Channel, FrequencyGrid, GaussianFit, RadioParams, SORTED_ASSIGNMENT_MAX_GHZ};
use crate::error::{Error, Result};
use crate::numerics;
use crate::reliability::{
    self, EdgeProfile, QosTarget, TaskProfile, ThresholdSource, UserProfile,
};

/// Distance reported for users whose reliability target is met without
/// offloading, meters.
pub const DEFAULT_MAX_DISTANCE_M: f64 = 1000.0;

/// Width to which the optimal offloading probability is refined.
pub const BETA_TOLERANCE: f64 = 1e-8;

/// Largest user count accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_MAX_USERS: usize = 9;

/// Largest number of injective user→carrier maps enumerated.
pub const BRUTE_FORCE_MAX_MAPS: u64 = 20_000_000;

/// Complete planning input.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub task: TaskProfile,
    pub users: Vec<UserProfile>,
    pub edge: EdgeProfile,
    pub radio: RadioParams,
    pub fit: GaussianFit,
    pub grid: FrequencyGrid,
    pub qos: QosTarget,
    /// Distance credited to users that need no uplink at all.
    pub max_distance_m: f64,
}

impl Scenario {
    /// Reference radio, task, edge and QoS parameters with the given users
    /// and carriers.
    pub fn with_reference_parameters(users: Vec<UserProfile>, grid: FrequencyGrid) -> Self {
        Self {
            task: TaskProfile::reference(),
            users,
            edge: EdgeProfile { cpu_hz: 1e10 },
            radio: RadioParams::reference(),
            fit: GaussianFit::default(),
            grid,
            qos: QosTarget::reference(),
            max_distance_m: DEFAULT_MAX_DISTANCE_M,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.edge.validate()?;
        self.radio.validate()?;
        self.qos.validate()?;
        if self.users.is_empty() {
            return Err(Error::Invalid("scenario has no users".into()));
        }
        for (i, user) in self.users.iter().enumerate() {
            user.validate()
                .map_err(|e| Error::Invalid(format!("user {i}: {e}")))?;
        }
        if self.grid.len() < self.users.len() {
            return Err(Error::Invalid(format!(
                "{} users need at least as many distinct carriers, grid has {}",
                self.users.len(),
                self.grid.len()
            )));
        }
        if !(self.max_distance_m > 0.0 && self.max_distance_m.is_finite()) {
            return Err(Error::Invalid(format!(
                "maximum distance must be positive, got {} m",
                self.max_distance_m
            )));
        }
        Ok(())
    }

    pub fn channel(&self) -> Channel {
        Channel::new(self.fit.clone(), self.radio)
    }

    pub fn edge_service_rate(&self) -> f64 {
        self.edge.service_rate(&self.task)
    }
}

/// Outcome of the offloading stage for one user.
#[derive(Debug, Clone, PartialEq)]
pub enum UserStatus {
    /// Reliability target binds the uplink rate.
    Constrained,
    /// Local processing alone meets the target; the link is unconstrained.
    Unconstrained,
    /// No offloading probability meets the target.
    Infeasible { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPlan {
    /// Optimal offloading probability; NaN when infeasible.
    pub beta_star: f64,
    /// Minimum uplink rate threshold, bit/s; NaN when infeasible.
    pub r_th_bps: f64,
    pub freq_ghz: Option<f64>,
    pub dist_m: f64,
    pub status: UserStatus,
    /// How the threshold at `beta_star` was computed.
    pub source: Option<ThresholdSource>,
}

impl UserPlan {
    pub fn is_feasible(&self) -> bool {
        !matches!(self.status, UserStatus::Infeasible { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub users: Vec<UserPlan>,
    pub d_star_m: f64,
    /// Aggregate offloaded load `Σ β*λ`, jobs/s.
    pub edge_load: f64,
    pub edge_stable: bool,
    pub warnings: Vec<String>,
}

impl Plan {
    pub fn all_feasible(&self) -> bool {
        self.users.iter().all(UserPlan::is_feasible)
    }

    pub fn n_infeasible(&self) -> usize {
        self.users.iter().filter(|u| !u.is_feasible()).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanOptions {
    /// Offload every job (β = 1): the edge-only baseline.
    pub force_beta_one: bool,
}

fn user(scenario: &Scenario, index: usize) -> Result<&UserProfile> {
    scenario.users.get(index).ok_or_else(|| {
        Error::Invalid(format!(
            "user index {index} out of range for {} users",
            scenario.users.len()
        ))
    })
}

/// True when the local processor alone meets the target at `β = 0`.
pub fn meets_target_locally(scenario: &Scenario, index: usize) -> Result<bool> {
    let u = user(scenario, index)?;
    Ok(
        reliability::local_reliability(u, &scenario.task, 0.0, scenario.qos.delay_budget_s)
            .map(|phi| phi >= scenario.qos.reliability_target)
            .unwrap_or(false),
    )
}

/// Offloading probabilities that keep the local queue stable: `[lo, 1]`.
pub fn feasible_beta_range(scenario: &Scenario, index: usize) -> Result<(f64, f64)> {
    let u = user(scenario, index)?;
    let lo = if u.arrival_rate > 0.0 {
        (1.0 - u.local_service_rate(&scenario.task) / u.arrival_rate).max(0.0)
    } else {
        0.0
    };
    Ok((lo, 1.0))
}

/// Offloading probability minimising the rate threshold of user `index`,
/// and the threshold there.
///
/// Users that meet the target locally get `(0, 0)`.
pub fn minimize_rate_threshold(scenario: &Scenario, index: usize) -> Result<(f64, f64)> {
    if meets_target_locally(scenario, index)? {
        return Ok((0.0, 0.0));
    }
    let u = user(scenario, index)?;
    let objective = |beta: f64| {
        reliability::rate_threshold(u, &scenario.task, &scenario.edge, &scenario.qos, beta)
            .unwrap_or(f64::INFINITY)
    };
    let (lo, hi) = feasible_beta_range(scenario, index)?;
    let best = if hi - lo <= BETA_TOLERANCE {
        let r = objective(hi);
        r.is_finite().then_some((hi, r))
    } else {
        numerics::minimize_scalar(objective, lo, hi, BETA_TOLERANCE).ok()
    };
    best.ok_or_else(|| {
        Error::Infeasible(format!(
            "user {index}: no offloading probability in [{lo}, {hi}] meets reliability {} within {} s",
            scenario.qos.reliability_target, scenario.qos.delay_budget_s
        ))
    })
}

fn sorted_order(r_th: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..r_th.len()).collect();
    order.sort_by(|&a, &b| r_th[a].total_cmp(&r_th[b]));
    order
}

/// Matches thresholds to the lowest carriers rank by rank: the smallest
/// threshold gets the lowest carrier. Ties keep user order.
pub fn assign_frequencies(r_th: &[f64], grid: &FrequencyGrid) -> Result<Vec<f64>> {
    if grid.len() < r_th.len() {
        return Err(Error::Invalid(format!(
            "{} users need at least as many distinct carriers, grid has {}",
            r_th.len(),
            grid.len()
        )));
    }
    let carriers = grid.as_slice();
    let mut assignment = vec![0.0; r_th.len()];
    for (rank, user) in sorted_order(r_th).into_iter().enumerate() {
        assignment[user] = carriers[rank];
    }
    Ok(assignment)
}

/// Summed coverage distance of users with thresholds `r_th` on `carriers`.
pub fn total_distance(channel: &Channel, r_th: &[f64], carriers: &[f64]) -> Result<f64> {
    if r_th.len() != carriers.len() {
        return Err(Error::Invalid(format!(
            "{} thresholds but {} carriers",
            r_th.len(),
            carriers.len()
        )));
    }
    r_th.iter()
        .zip(carriers)
        .map(|(&r, &f)| channel.distance(f, r))
        .sum()
}

/// Best and worst carrier assignments found by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveAssignment {
    pub best: Vec<f64>,
    pub best_total_m: f64,
    pub worst: Vec<f64>,
    pub worst_total_m: f64,
    pub maps_evaluated: u64,
}

fn count_maps(carriers: usize, users: usize) -> u64 {
    ((carriers - users + 1)..=carriers).fold(1u64, |acc, n| acc.saturating_mul(n as u64))
}

/// Enumerates every injective map from users to grid carriers and returns
/// the maps with the largest and smallest summed distance.
pub fn brute_force_assignment(
    r_th: &[f64],
    grid: &FrequencyGrid,
    channel: &Channel,
) -> Result<ExhaustiveAssignment> {
    let k = r_th.len();
    let m = grid.len();
    if k == 0 {
        return Err(Error::Invalid("no users to assign".into()));
    }
    if k > BRUTE_FORCE_MAX_USERS {
        return Err(Error::TooLarge(format!(
            "{k} users exceed the exhaustive-search limit of {BRUTE_FORCE_MAX_USERS}"
        )));
    }
    if m < k {
        return Err(Error::Invalid(format!("{k} users but only {m} carriers")));
    }
    let maps = count_maps(m, k);
    if maps > BRUTE_FORCE_MAX_MAPS {
        return Err(Error::TooLarge(format!(
            "{maps} assignments of {k} users to {m} carriers exceed the limit of {BRUTE_FORCE_MAX_MAPS}"
        )));
    }

    let carriers = grid.as_slice();
    let table: Vec<Vec<f64>> = r_th
        .iter()
        .map(|&r| carriers.iter().map(|&f| channel.distance(f, r)).collect())
        .collect::<Result<_>>()?;

    struct Search<'a> {
        table: &'a [Vec<f64>],
        used: Vec<bool>,
        current: Vec<usize>,
        best: (f64, Vec<usize>),
        worst: (f64, Vec<usize>),
        count: u64,
    }

    impl Search<'_> {
        fn descend(&mut self, user: usize, partial: f64) {
            if user == self.table.len() {
                self.count += 1;
                if partial > self.best.0 {
                    self.best = (partial, self.current.clone());
                }
                if partial < self.worst.0 {
                    self.worst = (partial, self.current.clone());
                }
                return;
            }
            for c in 0..self.used.len() {
                if !self.used[c] {
                    self.used[c] = true;
                    self.current.push(c);
                    self.descend(user + 1, partial + self.table[user][c]);
                    self.current.pop();
                    self.used[c] = false;
                }
            }
        }
    }

    let mut search = Search {
        table: &table,
        used: vec![false; m],
        current: Vec::with_capacity(k),
        best: (f64::NEG_INFINITY, Vec::new()),
        worst: (f64::INFINITY, Vec::new()),
        count: 0,
    };
    search.descend(0, 0.0);

    let pick = |idx: &[usize]| idx.iter().map(|&c| carriers[c]).collect::<Vec<_>>();
    Ok(ExhaustiveAssignment {
        best: pick(&search.best.1),
        best_total_m: search.best.0,
        worst: pick(&search.worst.1),
        worst_total_m: search.worst.0,
        maps_evaluated: search.count,
    })
}

/// True iff the aggregate offloaded load keeps the shared edge stable.
pub fn check_edge_stability(plan: &Plan, scenario: &Scenario) -> bool {
    let load: f64 = plan
        .users
        .iter()
        .zip(&scenario.users)
        .filter(|(p, _)| p.is_feasible())
        .map(|(p, u)| p.beta_star * u.arrival_rate)
        .sum();
    load < scenario.edge_service_rate()
}

struct Offload {
    beta: f64,
    r_th: f64,
    status: UserStatus,
    source: Option<ThresholdSource>,
}

fn offload_stage(scenario: &Scenario, index: usize, options: PlanOptions) -> Offload {
    let infeasible = |e: Error| Offload {
        beta: f64::NAN,
        r_th: f64::NAN,
        status: UserStatus::Infeasible { reason: e.to_string() },
        source: None,
    };
    let u = &scenario.users[index];
    let beta = if options.force_beta_one {
        1.0
    } else {
        match minimize_rate_threshold(scenario, index) {
            Ok((0.0, _)) => {
                return Offload {
                    beta: 0.0,
                    r_th: 0.0,
                    status: UserStatus::Unconstrained,
                    source: None,
                }
            }
            Ok((beta, _)) => beta,
            Err(e) => return infeasible(e),
        }
    };
    match reliability::rate_threshold_detail(u, &scenario.task, &scenario.edge, &scenario.qos, beta)
    {
        Ok(t) => Offload {
            beta,
            r_th: t.rate_bps,
            status: UserStatus::Constrained,
            source: Some(t.source),
        },
        Err(e) => infeasible(e),
    }
}

/// Optimised plan; see [`plan_with`].
pub fn plan(scenario: &Scenario) -> Result<Plan> {
    plan_with(scenario, PlanOptions::default())
}

/// Runs both planning stages.
///
/// Users whose target is unreachable are flagged, get no carrier and
/// contribute zero distance. Unconstrained users are credited the
/// scenario's distance cap and take the carriers left after constrained
/// users are matched.
pub fn plan_with(scenario: &Scenario, options: PlanOptions) -> Result<Plan> {
    scenario.validate()?;
    let offloads: Vec<Offload> = (0..scenario.users.len())
        .into_par_iter()
        .map(|i| offload_stage(scenario, i, options))
        .collect();

    let constrained: Vec<usize> = (0..offloads.len())
        .filter(|&i| offloads[i].status == UserStatus::Constrained)
        .collect();
    let unconstrained = (0..offloads.len()).filter(|&i| offloads[i].status == UserStatus::Unconstrained);

    let thresholds: Vec<f64> = constrained.iter().map(|&i| offloads[i].r_th).collect();
    let matched = assign_frequencies(&thresholds, &scenario.grid)?;
    let mut freqs = vec![None; offloads.len()];
    for (&i, &f) in constrained.iter().zip(&matched) {
        freqs[i] = Some(f);
    }
    for (i, &f) in unconstrained.zip(&scenario.grid.as_slice()[constrained.len()..]) {
        freqs[i] = Some(f);
    }

    let channel = scenario.channel();
    let users = offloads
        .into_iter()
        .zip(freqs)
        .map(|(o, freq)| {
            let dist_m = match (&o.status, freq) {
                (UserStatus::Constrained, Some(f)) => channel.distance(f, o.r_th)?,
                (UserStatus::Unconstrained, _) => scenario.max_distance_m,
                _ => 0.0,
            };
            Ok(UserPlan {
                beta_star: o.beta,
                r_th_bps: o.r_th,
                freq_ghz: freq,
                dist_m,
                status: o.status,
                source: o.source,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut plan = Plan {
        d_star_m: users.iter().map(|u| u.dist_m).sum(),
        edge_load: users
            .iter()
            .zip(&scenario.users)
            .filter(|(p, _)| p.is_feasible())
            .map(|(p, u)| p.beta_star * u.arrival_rate)
            .sum(),
        edge_stable: false,
        users,
        warnings: Vec::new(),
    };
    plan.edge_stable = check_edge_stability(&plan, scenario);

    if scenario.grid.exceeds_sorted_guarantee() {
        plan.warnings.push(format!(
            "grid has carriers above {SORTED_ASSIGNMENT_MAX_GHZ} GHz; sorted assignment is a heuristic there"
        ));
    }
    if !plan.edge_stable {
        plan.warnings.push(format!(
            "aggregate offloaded load {:.6} jobs/s is not below edge service rate {:.6} jobs/s",
            plan.edge_load,
            scenario.edge_service_rate()
        ));
    }
    for (i, u) in plan.users.iter().enumerate() {
        if let UserStatus::Infeasible { reason } = &u.status {
            plan.warnings.push(format!("user {i}: {reason}"));
        }
    }
    Ok(plan)
}

/// Scenario parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Edge CPU frequency, cycles/s.
    EdgeCpu,
    /// Delay threshold, seconds.
    DelayBudget,
    /// Reliability target.
    ReliabilityTarget,
    /// Local CPU frequency of every user, cycles/s.
    LocalCpu,
}

impl SweepAxis {
    pub fn apply(self, scenario: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = scenario.clone();
        match self {
            SweepAxis::EdgeCpu => s.edge.cpu_hz = value,
            SweepAxis::DelayBudget => s.qos.delay_budget_s = value,
            SweepAxis::ReliabilityTarget => s.qos.reliability_target = value,
            SweepAxis::LocalCpu => s.users.iter_mut().for_each(|u| u.local_cpu_hz = value),
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub d_star_m: f64,
    pub n_infeasible: usize,
}

/// One plan per axis value, in input order.
pub fn sweep(scenario: &Scenario, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Invalid("sweep needs at least one value".into()));
    }
    values
        .par_iter()
        .map(|&value| {
            let p = plan(&axis.apply(scenario, value)?)?;
            Ok(SweepPoint {
                value,
                d_star_m: p.d_star_m,
                n_infeasible: p.n_infeasible(),
            })
        })
        .collect()
}

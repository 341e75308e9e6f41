//! Discrete-event Monte-Carlo estimate of `Pr{T ≤ ε}` for planned users.
//!
//! Each user's Poisson stream is split by an independent coin. Local jobs
//! queue at an M/M/1 processor; offloaded jobs queue at an M/M/1 uplink and
//! then at an M/M/1 edge server. In isolated mode every user owns its edge
//! server; in shared-edge mode all offloaded jobs meet at one FIFO edge
//! queue in order of uplink departure.
//!
//! Every (user, phase) pair draws from its own ChaCha substream of the
//! configured seed, so runs are reproducible and modes share random numbers.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optimizer::{Plan, Scenario};
use crate::reliability::{self, EdgeProfile, QosTarget, TaskProfile, UserProfile};

pub const DEFAULT_JOBS: u64 = 1_000_000;
pub const DEFAULT_WARMUP: u64 = 10_000;

/// Width of the reported confidence radius in binomial standard errors.
pub const CI_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    Isolated,
    SharedEdge,
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimMode::Isolated => "isolated",
            SimMode::SharedEdge => "shared-edge",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Measured jobs per user.
    pub n_jobs: u64,
    pub seed: u64,
    /// Jobs discarded before measurement starts.
    pub warmup: u64,
    pub mode: SimMode,
}

impl SimConfig {
    /// Default warmup, capped so that `n_jobs ≥ 10·warmup`.
    pub fn new(n_jobs: u64, seed: u64, mode: SimMode) -> Self {
        Self {
            n_jobs,
            seed,
            warmup: DEFAULT_WARMUP.min(n_jobs / 10),
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_jobs == 0 {
            return Err(Error::Invalid("simulation needs at least one job".into()));
        }
        if self.n_jobs < self.warmup.saturating_mul(10) {
            return Err(Error::Invalid(format!(
                "{} measured jobs is below ten times the warmup of {}",
                self.n_jobs, self.warmup
            )));
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::new(DEFAULT_JOBS, 0, SimMode::Isolated)
    }
}

/// Batches used for the variance of an estimate; sojourn indicators of
/// successive jobs are correlated, so a plain binomial variance understates
/// the error.
pub const BATCHES: usize = 100;

/// Probability estimate from contiguous batches of scored jobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Estimate {
    pub hits: u64,
    pub trials: u64,
    batch_hits: Vec<u64>,
    batch_trials: Vec<u64>,
}

impl Estimate {
    fn empty() -> Self {
        Self {
            hits: 0,
            trials: 0,
            batch_hits: vec![0; BATCHES],
            batch_trials: vec![0; BATCHES],
        }
    }

    /// `position` in `[0, 1)` locates the job within the measured window.
    fn record(&mut self, position: f64, hit: bool) {
        let b = ((position * BATCHES as f64) as usize).min(BATCHES - 1);
        self.trials += 1;
        self.batch_trials[b] += 1;
        if hit {
            self.hits += 1;
            self.batch_hits[b] += 1;
        }
    }

    pub fn probability(&self) -> f64 {
        if self.trials == 0 {
            f64::NAN
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    /// Sample size an independent binomial would need to match the
    /// batch-means variance, capped at the number of scored jobs.
    pub fn n_effective(&self) -> f64 {
        let p = self.probability();
        let used: Vec<(f64, f64)> = self
            .batch_hits
            .iter()
            .zip(&self.batch_trials)
            .filter(|(_, &n)| n > 0)
            .map(|(&h, &n)| (h as f64, n as f64))
            .collect();
        let b = used.len() as f64;
        if used.len() < 2 {
            return self.trials as f64;
        }
        let mean_n = self.trials as f64 / b;
        // ratio-estimator variance of p̂ over batches
        let var = used
            .iter()
            .map(|&(h, n)| (h - p * n).powi(2))
            .sum::<f64>()
            / (b * (b - 1.0) * mean_n * mean_n);
        let binomial = p * (1.0 - p);
        if var > 0.0 {
            (binomial / var).min(self.trials as f64)
        } else {
            self.trials as f64
        }
    }

    /// `3·sqrt(p̂(1-p̂)/n_effective)`.
    pub fn ci_radius(&self) -> f64 {
        let p = self.probability();
        CI_SIGMAS * (p * (1.0 - p) / self.n_effective()).sqrt()
    }

    fn merge(mut self, other: &Self) -> Self {
        self.hits += other.hits;
        self.trials += other.trials;
        for b in 0..BATCHES {
            self.batch_hits[b] += other.batch_hits[b];
            self.batch_trials[b] += other.batch_trials[b];
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub user_id: usize,
    pub analytic: f64,
    pub empirical: f64,
    pub ci_radius: f64,
    /// `empirical - analytic`.
    pub delta: f64,
    /// Jobs scored for this user.
    pub n_jobs: u64,
    pub n_effective: f64,
    pub mode: SimMode,
}

impl SimRow {
    fn new(user_id: usize, analytic: f64, estimate: &Estimate, mode: SimMode) -> Self {
        let empirical = estimate.probability();
        Self {
            user_id,
            analytic,
            empirical,
            ci_radius: estimate.ci_radius(),
            delta: empirical - analytic,
            n_jobs: estimate.trials,
            n_effective: estimate.n_effective(),
            mode,
        }
    }

    pub fn within_ci(&self) -> bool {
        self.delta.abs() <= self.ci_radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub mode: SimMode,
    pub rows: Vec<SimRow>,
}

impl SimReport {
    pub fn all_within_ci(&self) -> bool {
        self.rows.iter().all(SimRow::within_ci)
    }
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Arrivals = 0,
    Coin = 1,
    Local = 2,
    Uplink = 3,
    Edge = 4,
}

fn substream(seed: u64, user: usize, phase: Phase) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((user as u64) << 8) | phase as u64);
    rng
}

fn exp_dist(rate: f64) -> Result<Exp<f64>> {
    Exp::new(rate).map_err(|e| Error::Domain(format!("exponential rate {rate}: {e}")))
}

/// One arrival of a split Poisson stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    /// Time since the previous arrival of the whole stream, seconds.
    pub gap: f64,
    pub offloaded: bool,
}

/// Poisson arrivals thinned by an independent offloading coin.
#[derive(Debug, Clone)]
pub struct JobStream {
    gaps: Option<(ChaCha8Rng, Exp<f64>)>,
    coin: ChaCha8Rng,
    beta: f64,
}

impl JobStream {
    pub fn new(seed: u64, user: usize, arrival_rate: f64, beta: f64) -> Result<Self> {
        if !(arrival_rate >= 0.0 && arrival_rate.is_finite()) {
            return Err(Error::Domain(format!("arrival rate {arrival_rate} is not valid")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!("offloading probability {beta} outside [0, 1]")));
        }
        let gaps = if arrival_rate > 0.0 {
            Some((substream(seed, user, Phase::Arrivals), exp_dist(arrival_rate)?))
        } else {
            None
        };
        Ok(Self {
            gaps,
            coin: substream(seed, user, Phase::Coin),
            beta,
        })
    }
}

impl Iterator for JobStream {
    type Item = Arrival;

    fn next(&mut self) -> Option<Arrival> {
        let gap = match &mut self.gaps {
            Some((rng, dist)) => dist.sample(rng),
            None => f64::INFINITY,
        };
        let offloaded = self.coin.random::<f64>() < self.beta;
        Some(Arrival { gap, offloaded })
    }
}

/// Fraction of post-warmup jobs of a FIFO M/M/1 queue whose sojourn time is
/// at most `epsilon`.
pub fn simulate_mm1_sojourn(
    arrival_rate: f64,
    service_rate: f64,
    epsilon: f64,
    cfg: &SimConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if !(arrival_rate < service_rate) {
        return Err(Error::Unstable(format!(
            "arrival rate {arrival_rate} is not below service rate {service_rate}"
        )));
    }
    let mut arrivals = JobStream::new(cfg.seed, 0, arrival_rate, 0.0)?;
    let service = exp_dist(service_rate)?;
    let mut rng = substream(cfg.seed, 0, Phase::Local);
    // Lindley recursion on the waiting time of successive jobs.
    let mut wait = 0.0f64;
    let mut estimate = Estimate::empty();
    for i in 0..cfg.warmup + cfg.n_jobs {
        let s = service.sample(&mut rng);
        if i >= cfg.warmup {
            let position = (i - cfg.warmup) as f64 / cfg.n_jobs as f64;
            estimate.record(position, wait + s <= epsilon);
        }
        let gap = arrivals.next().map_or(f64::INFINITY, |a| a.gap);
        wait = (wait + s - gap).max(0.0);
    }
    Ok(estimate)
}

/// Offloaded job leaving the uplink.
#[derive(Debug, Clone, Copy)]
struct UplinkDeparture {
    arrival: f64,
    departure: f64,
    edge_service: f64,
    /// Location in the measured window; `None` during warmup.
    position: Option<f64>,
}

/// Measurement window: by job count in isolated mode, by time in
/// shared-edge mode.
#[derive(Debug, Clone, Copy)]
enum Window {
    Jobs { warmup: u64, measured: u64 },
    Time { warm_until: f64, horizon: f64 },
}

impl Window {
    fn stop(&self, index: u64, t: f64) -> bool {
        match *self {
            Window::Jobs { warmup, measured } => index >= warmup + measured,
            Window::Time { horizon, .. } => t > horizon,
        }
    }

    fn position(&self, index: u64, t: f64) -> Option<f64> {
        match *self {
            Window::Jobs { warmup, measured } => {
                (index >= warmup).then(|| (index - warmup) as f64 / measured as f64)
            }
            Window::Time { warm_until, horizon } => {
                (t >= warm_until).then(|| (t - warm_until) / (horizon - warm_until))
            }
        }
    }
}

/// Event-ordered generator for one user's jobs in absolute time.
struct UserJobs {
    stream: JobStream,
    local: Exp<f64>,
    uplink: Option<Exp<f64>>,
    edge: Exp<f64>,
    local_rng: ChaCha8Rng,
    uplink_rng: ChaCha8Rng,
    edge_rng: ChaCha8Rng,
    epsilon: f64,
    clock: f64,
    local_free: f64,
    uplink_free: f64,
    index: u64,
    local_hits: Estimate,
}

struct UserSetup<'a> {
    id: usize,
    user: &'a UserProfile,
    beta: f64,
    rate_bps: f64,
}

impl UserJobs {
    fn new(
        setup: &UserSetup<'_>,
        task: &TaskProfile,
        edge: &EdgeProfile,
        epsilon: f64,
        seed: u64,
    ) -> Result<Self> {
        let UserSetup { id, user, beta, rate_bps } = *setup;
        let uplink = if beta > 0.0 {
            Some(exp_dist(rate_bps / task.input_bits)?)
        } else {
            None
        };
        Ok(Self {
            stream: JobStream::new(seed, id, user.arrival_rate, beta)?,
            local: exp_dist(user.local_service_rate(task))?,
            uplink,
            edge: exp_dist(edge.service_rate(task))?,
            local_rng: substream(seed, id, Phase::Local),
            uplink_rng: substream(seed, id, Phase::Uplink),
            edge_rng: substream(seed, id, Phase::Edge),
            epsilon,
            clock: 0.0,
            local_free: 0.0,
            uplink_free: 0.0,
            index: 0,
            local_hits: Estimate::empty(),
        })
    }

    /// Advances to the next offloaded job. Local jobs met on the way are
    /// scored directly. Stops once `window.stop(index, arrival_time)` holds.
    fn next_offloaded(&mut self, window: &Window) -> Option<UplinkDeparture> {
        loop {
            let arrival = self.stream.next()?;
            let t = self.clock + arrival.gap;
            if window.stop(self.index, t) {
                return None;
            }
            self.clock = t;
            let position = window.position(self.index, t);
            self.index += 1;
            match (&self.uplink, arrival.offloaded) {
                (Some(uplink), true) => {
                    let departure = self.uplink_free.max(t) + uplink.sample(&mut self.uplink_rng);
                    self.uplink_free = departure;
                    return Some(UplinkDeparture {
                        arrival: t,
                        departure,
                        edge_service: self.edge.sample(&mut self.edge_rng),
                        position,
                    });
                }
                _ => {
                    let done = self.local_free.max(t) + self.local.sample(&mut self.local_rng);
                    self.local_free = done;
                    if let Some(pos) = position {
                        self.local_hits.record(pos, done - t <= self.epsilon);
                    }
                }
            }
        }
    }
}

fn check_user(
    user: &UserProfile,
    task: &TaskProfile,
    edge: &EdgeProfile,
    beta: f64,
    rate_bps: f64,
    epsilon: f64,
) -> Result<f64> {
    if !(user.arrival_rate > 0.0) {
        return Err(Error::Domain("user generates no jobs to simulate".into()));
    }
    reliability::system_reliability(user, task, edge, beta, rate_bps, epsilon)
}

fn isolated_estimate(
    setup: &UserSetup<'_>,
    task: &TaskProfile,
    edge: &EdgeProfile,
    epsilon: f64,
    cfg: &SimConfig,
) -> Result<Estimate> {
    let mut jobs = UserJobs::new(setup, task, edge, epsilon, cfg.seed)?;
    let window = Window::Jobs {
        warmup: cfg.warmup,
        measured: cfg.n_jobs,
    };
    let mut edge_free = 0.0f64;
    let mut offloaded = Estimate::empty();
    while let Some(job) = jobs.next_offloaded(&window) {
        edge_free = edge_free.max(job.departure) + job.edge_service;
        if let Some(pos) = job.position {
            offloaded.record(pos, edge_free - job.arrival <= epsilon);
        }
    }
    Ok(jobs.local_hits.merge(&offloaded))
}

/// Simulates one user with its own edge server.
///
/// The analytic column is the closed-form mixture reliability at the same
/// operating point.
#[allow(clippy::too_many_arguments)]
pub fn simulate_user(
    user_id: usize,
    user: &UserProfile,
    task: &TaskProfile,
    edge: &EdgeProfile,
    beta: f64,
    rate_bps: f64,
    qos: &QosTarget,
    cfg: &SimConfig,
) -> Result<SimRow> {
    cfg.validate()?;
    let epsilon = qos.delay_budget_s;
    let analytic = check_user(user, task, edge, beta, rate_bps, epsilon)?;
    let setup = UserSetup { id: user_id, user, beta, rate_bps };
    let estimate = isolated_estimate(&setup, task, edge, epsilon, cfg)?;
    Ok(SimRow::new(user_id, analytic, &estimate, SimMode::Isolated))
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    departure: f64,
    user: usize,
    job: UplinkDeparture,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // reversed: BinaryHeap is a max-heap and the earliest departure must pop first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .departure
            .total_cmp(&self.departure)
            .then_with(|| other.user.cmp(&self.user))
    }
}

fn shared_edge_estimates(
    setups: &[UserSetup<'_>],
    scenario: &Scenario,
    cfg: &SimConfig,
) -> Result<Vec<Estimate>> {
    let epsilon = scenario.qos.delay_budget_s;
    // common horizon sized so the busiest user generates warmup + n_jobs jobs
    let peak = setups
        .iter()
        .map(|s| s.user.arrival_rate)
        .fold(0.0, f64::max);
    let window = Window::Time {
        warm_until: cfg.warmup as f64 / peak,
        horizon: (cfg.warmup + cfg.n_jobs) as f64 / peak,
    };

    let mut gens = setups
        .iter()
        .map(|s| UserJobs::new(s, &scenario.task, &scenario.edge, epsilon, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut offloaded = vec![Estimate::empty(); setups.len()];
    let mut heap = BinaryHeap::with_capacity(setups.len());
    for (user, g) in gens.iter_mut().enumerate() {
        if let Some(job) = g.next_offloaded(&window) {
            heap.push(HeapEntry { departure: job.departure, user, job });
        }
    }
    let mut edge_free = 0.0f64;
    while let Some(HeapEntry { user, job, .. }) = heap.pop() {
        edge_free = edge_free.max(job.departure) + job.edge_service;
        if let Some(pos) = job.position {
            offloaded[user].record(pos, edge_free - job.arrival <= epsilon);
        }
        if let Some(next) = gens[user].next_offloaded(&window) {
            heap.push(HeapEntry { departure: next.departure, user, job: next });
        }
    }
    Ok(gens
        .into_iter()
        .zip(offloaded)
        .map(|(g, o)| g.local_hits.merge(&o))
        .collect())
}

/// Simulates every user of a feasible plan at its planned `(β*, R_th)`.
///
/// Shared-edge mode runs all users over a common time horizon long enough
/// for the busiest user to produce `warmup + n_jobs` jobs; quieter users
/// therefore contribute fewer measured jobs and wider confidence radii.
pub fn simulate_system(plan: &Plan, scenario: &Scenario, cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    scenario.validate()?;
    if plan.users.len() != scenario.users.len() {
        return Err(Error::Invalid(format!(
            "plan covers {} users, scenario has {}",
            plan.users.len(),
            scenario.users.len()
        )));
    }
    if let Some(i) = plan.users.iter().position(|u| !u.is_feasible()) {
        return Err(Error::Infeasible(format!("user {i} has no feasible plan to simulate")));
    }
    let epsilon = scenario.qos.delay_budget_s;
    let setups: Vec<UserSetup<'_>> = plan
        .users
        .iter()
        .zip(&scenario.users)
        .enumerate()
        .map(|(id, (p, user))| UserSetup { id, user, beta: p.beta_star, rate_bps: p.r_th_bps })
        .collect();
    let analytic = setups
        .iter()
        .map(|s| check_user(s.user, &scenario.task, &scenario.edge, s.beta, s.rate_bps, epsilon))
        .collect::<Result<Vec<_>>>()?;

    let estimates = match cfg.mode {
        SimMode::Isolated => setups
            .par_iter()
            .map(|s| isolated_estimate(s, &scenario.task, &scenario.edge, epsilon, cfg))
            .collect::<Result<Vec<_>>>()?,
        SimMode::SharedEdge => {
            let load: f64 = setups.iter().map(|s| s.beta * s.user.arrival_rate).sum();
            if !(load < scenario.edge_service_rate()) {
                return Err(Error::Unstable(format!(
                    "shared edge overloaded: offloaded load {load} jobs/s ≥ service rate {} jobs/s",
                    scenario.edge_service_rate()
                )));
            }
            shared_edge_estimates(&setups, scenario, cfg)?
        }
    };
    Ok(SimReport {
        mode: cfg.mode,
        rows: analytic
            .into_iter()
            .zip(estimates)
            .enumerate()
            .map(|(id, (a, e))| SimRow::new(id, a, &e, cfg.mode))
            .collect(),
    })
}

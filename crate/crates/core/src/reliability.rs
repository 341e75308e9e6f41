//! End-to-end delay reliability of a user that splits its Poisson job stream
//! between a local M/M/1 processor and an offload path (M/M/1 uplink queue
//! followed by edge execution), and the minimum uplink rate that meets a
//! reliability target.
//!
//! Reliability is `Pr{T ≤ ε}` where `T` is the sojourn time of a job. The
//! local branch is the M/M/1 sojourn CDF; the offload branch is the
//! convolution of the uplink sojourn CDF with the edge-execution density.

use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::{self, Branch};

/// Relative headroom `η` that turns the open uplink-stability bound
/// `R > β·λ·L_a` into a representable rate.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// A closed-form threshold is accepted only if the reliability it yields
/// matches the target this closely.
pub const THRESHOLD_RESIDUAL: f64 = 1e-8;

/// `|u - v| ≤ DEGENERATE_REL_TOL·max(u, v)` switches the offload CDF to its
/// `u = v` limit.
pub const DEGENERATE_REL_TOL: f64 = 1e-9;

/// Largest rate the bisection oracle will search up to, bit/s.
pub const ORACLE_MAX_RATE: f64 = 1e15;

/// Mean job size and mean compute demand shared by all users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskProfile {
    /// Mean input size per job `L_a`, bits.
    pub input_bits: f64,
    /// Mean CPU cycles per job `μ_a`.
    pub cycles_per_job: f64,
}

impl TaskProfile {
    pub fn new(input_bits: f64, cycles_per_job: f64) -> Result<Self> {
        let task = Self {
            input_bits,
            cycles_per_job,
        };
        task.validate()?;
        Ok(task)
    }

    /// 8 Mbit jobs of 10⁷ cycles.
    pub fn reference() -> Self {
        Self {
            input_bits: 8e6,
            cycles_per_job: 1e7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_bits > 0.0 && self.input_bits.is_finite()) {
            return Err(Error::Invalid(format!(
                "job size must be positive, got {} bits",
                self.input_bits
            )));
        }
        if !(self.cycles_per_job > 0.0 && self.cycles_per_job.is_finite()) {
            return Err(Error::Invalid(format!(
                "cycles per job must be positive, got {}",
                self.cycles_per_job
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserProfile {
    /// Job arrival rate `λ`, jobs/s.
    pub arrival_rate: f64,
    /// Local CPU frequency `f_l`, cycles/s.
    pub local_cpu_hz: f64,
}

impl UserProfile {
    pub fn new(arrival_rate: f64, local_cpu_hz: f64) -> Result<Self> {
        let user = Self {
            arrival_rate,
            local_cpu_hz,
        };
        user.validate()?;
        Ok(user)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::Invalid(format!(
                "arrival rate must be non-negative, got {}",
                self.arrival_rate
            )));
        }
        if !(self.local_cpu_hz >= 0.0 && self.local_cpu_hz.is_finite()) {
            return Err(Error::Invalid(format!(
                "local CPU frequency must be non-negative, got {}",
                self.local_cpu_hz
            )));
        }
        Ok(())
    }

    /// Local service rate `μ_l = f_l / μ_a`, jobs/s.
    pub fn local_service_rate(&self, task: &TaskProfile) -> f64 {
        self.local_cpu_hz / task.cycles_per_job
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeProfile {
    /// Edge CPU frequency `f_m`, cycles/s.
    pub cpu_hz: f64,
}

impl EdgeProfile {
    pub fn new(cpu_hz: f64) -> Result<Self> {
        let edge = Self { cpu_hz };
        edge.validate()?;
        Ok(edge)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cpu_hz > 0.0 && self.cpu_hz.is_finite()) {
            return Err(Error::Invalid(format!(
                "edge CPU frequency must be positive, got {}",
                self.cpu_hz
            )));
        }
        Ok(())
    }

    /// Edge service rate `μ_m = f_m / μ_a`, jobs/s.
    pub fn service_rate(&self, task: &TaskProfile) -> f64 {
        self.cpu_hz / task.cycles_per_job
    }
}

/// Delay budget and reliability target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosTarget {
    /// Delay threshold `ε`, seconds.
    pub delay_budget_s: f64,
    /// Required `Pr{T ≤ ε}`.
    pub reliability_target: f64,
}

impl QosTarget {
    pub fn new(delay_budget_s: f64, reliability_target: f64) -> Result<Self> {
        let qos = Self {
            delay_budget_s,
            reliability_target,
        };
        qos.validate()?;
        Ok(qos)
    }

    /// 80 ms at 99.999 %.
    pub fn reference() -> Self {
        Self {
            delay_budget_s: 0.08,
            reliability_target: 0.99999,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay_budget_s > 0.0 && self.delay_budget_s.is_finite()) {
            return Err(Error::Invalid(format!(
                "delay threshold must be positive, got {} s",
                self.delay_budget_s
            )));
        }
        if !(self.reliability_target > 0.0 && self.reliability_target < 1.0) {
            return Err(Error::Invalid(format!(
                "reliability threshold must lie in (0, 1), got {}",
                self.reliability_target
            )));
        }
        Ok(())
    }
}

/// Decay rates of the offload path: `u = R/L_a - βλ` for the uplink
/// sojourn and `v = μ_m - βλ` for edge execution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueRates {
    pub u: f64,
    pub v: f64,
}

impl QueueRates {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        if !(u > 0.0) {
            return Err(Error::Unstable(format!(
                "uplink queue unstable: u = R/L_a - βλ = {u} ≤ 0"
            )));
        }
        if !(v > 0.0) {
            return Err(Error::Unstable(format!(
                "edge queue unstable: v = μ_m - βλ = {v} ≤ 0"
            )));
        }
        Ok(Self { u, v })
    }

    pub fn for_user(
        user: &UserProfile,
        task: &TaskProfile,
        edge: &EdgeProfile,
        beta: f64,
        rate_bps: f64,
    ) -> Result<Self> {
        let offered = beta * user.arrival_rate;
        Self::new(
            rate_bps / task.input_bits - offered,
            edge.service_rate(task) - offered,
        )
    }

    /// `x = v - u`.
    pub fn gap(&self) -> f64 {
        self.v - self.u
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "offloading probability must lie in [0, 1], got {beta}"
        )))
    }
}

fn check_delay(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delay threshold must be positive, got {epsilon}")))
    }
}

/// `Φ_l = 1 - exp(-(μ_l - (1-β)λ)·ε)`, the M/M/1 sojourn CDF of the
/// locally processed share of the stream.
pub fn local_reliability(
    user: &UserProfile,
    task: &TaskProfile,
    beta: f64,
    epsilon: f64,
) -> Result<f64> {
    check_beta(beta)?;
    check_delay(epsilon)?;
    let margin = local_miss_rate(user, task, beta)?;
    Ok(-(-margin * epsilon).exp_m1())
}

/// Decay rate `μ_l - (1-β)λ` of the local sojourn tail.
fn local_miss_rate(user: &UserProfile, task: &TaskProfile, beta: f64) -> Result<f64> {
    let margin = user.local_service_rate(task) - (1.0 - beta) * user.arrival_rate;
    if margin > 0.0 {
        Ok(margin)
    } else {
        Err(Error::Unstable(format!(
            "local queue unstable: (1-β)λ = {} ≥ μ_l = {}",
            (1.0 - beta) * user.arrival_rate,
            user.local_service_rate(task)
        )))
    }
}

/// Offload-path reliability: the uplink sojourn CDF `1 - e^{-uτ}` convolved
/// with the edge density `v·e^{-vτ}`, evaluated at `ε`.
pub fn edge_reliability(rates: &QueueRates, epsilon: f64) -> Result<f64> {
    let QueueRates { u, v } = QueueRates::new(rates.u, rates.v)?;
    check_delay(epsilon)?;
    let x = v - u;
    let edge_only = -(-v * epsilon).exp_m1();
    let phi = if x.abs() <= DEGENERATE_REL_TOL * u.max(v) {
        edge_only - v * epsilon * (-v * epsilon).exp()
    } else {
        // e^{-vε} - e^{-uε}, without cancellation when u ≈ v
        let diff = if (x * epsilon).abs() < 1.0 {
            (-u * epsilon).exp() * (-x * epsilon).exp_m1()
        } else {
            (-v * epsilon).exp() - (-u * epsilon).exp()
        };
        edge_only + v / x * diff
    };
    Ok(phi.clamp(0.0, 1.0))
}

/// Mixture `(1-β)·Φ_l + β·Φ_m` at uplink rate `rate_bps`.
///
/// Only the branches with non-zero weight are evaluated, so `β = 0` needs
/// no uplink and `β = 1` needs no local processor.
pub fn system_reliability(
    user: &UserProfile,
    task: &TaskProfile,
    edge: &EdgeProfile,
    beta: f64,
    rate_bps: f64,
    epsilon: f64,
) -> Result<f64> {
    check_beta(beta)?;
    check_delay(epsilon)?;
    let local = if beta < 1.0 {
        (1.0 - beta) * local_reliability(user, task, beta, epsilon)?
    } else {
        0.0
    };
    let offload = if beta > 0.0 {
        let rates = QueueRates::for_user(user, task, edge, beta, rate_bps)?;
        beta * edge_reliability(&rates, epsilon)?
    } else {
        0.0
    };
    Ok(local + offload)
}

/// Smallest representable rate satisfying uplink stability, `βλL_a(1+η)`.
pub fn stability_floor(user: &UserProfile, task: &TaskProfile, beta: f64) -> f64 {
    beta * user.arrival_rate * task.input_bits * (1.0 + STABILITY_MARGIN)
}

/// How a rate threshold was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThresholdSource {
    /// The local share alone meets the target; only uplink stability binds.
    StabilityFloor,
    /// Closed form on the principal Lambert branch.
    Principal,
    /// Closed form on the `-1` Lambert branch.
    MinusOne,
    /// Closed form rejected; bisection on the reliability equation.
    Oracle,
}

impl fmt::Display for ThresholdSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdSource::StabilityFloor => "stability-floor",
            ThresholdSource::Principal => "lambert-principal",
            ThresholdSource::MinusOne => "lambert-minus-one",
            ThresholdSource::Oracle => "bisection",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateThreshold {
    pub rate_bps: f64,
    pub source: ThresholdSource,
    /// Reliability the offload path must reach, `(ϑ - (1-β)Φ_l)/β`.
    pub required_edge_reliability: f64,
}

struct ThresholdSetup {
    /// Largest miss probability `1 - r` the offload path may have.
    allowed_edge_miss: f64,
    edge_rate: f64,
    floor: f64,
}

fn threshold_setup(
    user: &UserProfile,
    task: &TaskProfile,
    edge: &EdgeProfile,
    qos: &QosTarget,
    beta: f64,
) -> Result<ThresholdSetup> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!(
            "rate threshold needs 0 < β ≤ 1, got {beta}"
        )));
    }
    let epsilon = qos.delay_budget_s;
    check_delay(epsilon)?;
    // Worked in miss probabilities: r is close to 1 in the regime of
    // interest and `ceiling - r` would cancel catastrophically.
    let local_miss = if beta < 1.0 {
        (-local_miss_rate(user, task, beta)? * epsilon).exp()
    } else {
        0.0
    };
    let edge_rate = edge.service_rate(task);
    let v = edge_rate - beta * user.arrival_rate;
    if !(v > 0.0) {
        return Err(Error::Unstable(format!(
            "edge queue unstable: βλ = {} ≥ μ_m = {edge_rate}",
            beta * user.arrival_rate
        )));
    }
    Ok(ThresholdSetup {
        allowed_edge_miss: ((1.0 - qos.reliability_target) - (1.0 - beta) * local_miss) / beta,
        edge_rate,
        floor: stability_floor(user, task, beta),
    })
}

/// Minimum uplink rate meeting the reliability target at offloading
/// probability `beta`, in closed form through the Lambert W function.
///
/// The reliability constraint reduces to `(e^{xε} - 1)/x ≤ Λ` with
/// `x = v - u`. Its boundary solves `s·e^{-zs} = e^{-z}` for `z = ε/Λ`, which
/// always has the trivial root `s = 1` (`u = v`) on one Lambert branch; the
/// useful root lives on the other branch. Both candidates are evaluated and
/// the one that actually reproduces the target is kept. If neither does,
/// the bisection oracle is used and the discrepancy is logged.
pub fn rate_threshold_detail(
    user: &UserProfile,
    task: &TaskProfile,
    edge: &EdgeProfile,
    qos: &QosTarget,
    beta: f64,
) -> Result<RateThreshold> {
    let setup = threshold_setup(user, task, edge, qos, beta)?;
    let required = 1.0 - setup.allowed_edge_miss;
    if setup.allowed_edge_miss >= 1.0 {
        return Ok(RateThreshold {
            rate_bps: setup.floor,
            source: ThresholdSource::StabilityFloor,
            required_edge_reliability: required,
        });
    }

    let epsilon = qos.delay_budget_s;
    let v = setup.edge_rate - beta * user.arrival_rate;
    // Offload reliability saturates at the edge-execution CDF as R → ∞.
    let headroom = setup.allowed_edge_miss - (-v * epsilon).exp();
    if !(headroom > 0.0) {
        return Err(Error::Infeasible(format!(
            "offload path must reach reliability {required:.12}, \
             above its ceiling {:.12} at β = {beta}",
            -(-v * epsilon).exp_m1()
        )));
    }

    // Λ = e^{vε}/v · headroom, kept in log form: e^{vε} overflows for large μ_m.
    let ln_lambda = v * epsilon - v.ln() + headroom.ln();
    let ln_z = epsilon.ln() - ln_lambda;
    let z = ln_z.exp();

    let mut candidates = Vec::with_capacity(2);
    if z.is_finite() {
        let arg = -z * (-z).exp();
        if let Ok(w) = numerics::lambert_w(Branch::Principal, arg) {
            candidates.push((ThresholdSource::Principal, w));
        }
    }
    if let Ok(w) = numerics::lambert_w_minus_one_neg_exp(ln_z - z) {
        candidates.push((ThresholdSource::MinusOne, w));
    }

    let target = qos.reliability_target;
    let best = candidates
        .into_iter()
        .filter_map(|(source, w)| {
            let rate = (setup.edge_rate + (w + z) / epsilon) * task.input_bits;
            if !rate.is_finite() {
                return None;
            }
            let phi = system_reliability(user, task, edge, beta, rate, epsilon).ok()?;
            let residual = (phi - target).abs();
            (residual <= THRESHOLD_RESIDUAL).then_some((source, rate, residual))
        })
        .min_by(|a, b| a.2.total_cmp(&b.2));

    match best {
        Some((source, rate, _)) => Ok(RateThreshold {
            rate_bps: rate.max(setup.floor),
            source,
            required_edge_reliability: required,
        }),
        None => {
            let rate = rate_threshold_oracle(user, task, edge, qos, beta)?;
            log::warn!(
                "closed-form rate threshold failed verification at β = {beta} \
                 (ε/Λ = {z:e}); using bisection result {rate:e} bit/s"
            );
            Ok(RateThreshold {
                rate_bps: rate,
                source: ThresholdSource::Oracle,
                required_edge_reliability: required,
            })
        }
    }
}

/// Rate threshold in bit/s; see [`rate_threshold_detail`].
pub fn rate_threshold(
    user: &UserProfile,
    task: &TaskProfile,
    edge: &EdgeProfile,
    qos: &QosTarget,
    beta: f64,
) -> Result<f64> {
    rate_threshold_detail(user, task, edge, qos, beta).map(|t| t.rate_bps)
}

/// Independent route to the rate threshold: bisection of
/// `system_reliability(R) - ϑ`, which is increasing in `R`, starting at the
/// stability floor and doubling the upper end until the target is met.
pub fn rate_threshold_oracle(
    user: &UserProfile,
    task: &TaskProfile,
    edge: &EdgeProfile,
    qos: &QosTarget,
    beta: f64,
) -> Result<f64> {
    let setup = threshold_setup(user, task, edge, qos, beta)?;
    let epsilon = qos.delay_budget_s;
    let target = qos.reliability_target;
    let excess = |rate: f64| {
        system_reliability(user, task, edge, beta, rate, epsilon)
            .map(|phi| phi - target)
            .unwrap_or(f64::NAN)
    };

    let lo = setup.floor;
    if lo > 0.0 && excess(lo) >= 0.0 {
        return Ok(lo);
    }
    let mut hi = (2.0 * lo).max(task.input_bits);
    while !(excess(hi) >= 0.0) {
        hi *= 2.0;
        if hi > ORACLE_MAX_RATE {
            return Err(Error::Infeasible(format!(
                "no rate up to {ORACLE_MAX_RATE:e} bit/s meets reliability {target} at β = {beta}"
            )));
        }
    }
    // lo can be 0 when λ = 0; the uplink queue is then stable at any R > 0.
    let lo = if lo > 0.0 { lo } else { hi * f64::EPSILON };
    if excess(lo) >= 0.0 {
        return Ok(lo);
    }
    numerics::find_root(excess, lo, hi, hi * 1e-15)
}

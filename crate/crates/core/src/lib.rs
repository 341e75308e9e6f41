//! Coverage planning for THz links serving delay-critical offloaded jobs.
//!
//! [`optimizer::plan`] picks each user's offloading probability to minimise
//! the uplink rate its reliability target demands, then matches users to
//! carriers so that the summed coverage distance is largest.
//! [`simulator`] and [`verify`] check the closed forms against Monte-Carlo
//! and exhaustive oracles.

// Guards are written as `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod numerics;
pub mod optimizer;
pub mod reliability;
pub mod simulator;
pub mod verify;

pub use channel::{Channel, FrequencyGrid, GaussianFit, GaussianTerm, RadioParams};
pub use error::{Error, Result};
pub use numerics::Branch;
pub use optimizer::{Plan, PlanOptions, Scenario, SweepAxis, SweepPoint, UserPlan, UserStatus};
pub use reliability::{
    EdgeProfile, QosTarget, QueueRates, RateThreshold, TaskProfile, ThresholdSource, UserProfile,
};
pub use simulator::{SimConfig, SimMode, SimReport, SimRow};
pub use verify::{CheckResult, CheckStatus, VerifyReport};

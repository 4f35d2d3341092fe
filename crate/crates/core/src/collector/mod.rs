//! Collection of node streams onto a common time base.
//!
//! Node clocks are synchronized with two-way exchanges and disciplined by a
//! line fit, raw samples are re-stamped with their residual timing
//! uncertainty, and streams are aligned onto a grid before virtual-sensor
//! rules run over them.

mod align;
mod clock;
mod collect;
mod discipline;
pub mod persist;
mod rules;
mod sync;

use thiserror::Error;

use crate::fusion::FusionError;

pub use align::{align_streams, Grid};
pub use clock::{local_time, ClockModel, MAX_SKEW};
pub use collect::{collect, ClockRegistry, RawSample};
pub use discipline::{discipline_clock, ClockEstimate};
pub use rules::{run_virtual_sensor_rule, VirtualOutput, VirtualRule};
pub use sync::{estimate_offset, simulate_exchange, OffsetEstimate, SyncExchange, SyncNoiseModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyncError {
    #[error("invalid clock: {0}")]
    InvalidClock(String),
    #[error("exchange timestamps are inconsistent")]
    InconsistentExchange,
    #[error("negative mean path delay {0} s")]
    NegativeDelay(f64),
    #[error("clock discipline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("offset history spans a single instant")]
    DegenerateFit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CollectError {
    #[error("no clock estimate for node `{0}`")]
    UnknownNode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("stream {index} is empty")]
    EmptyStream { index: usize },
    #[error("stream {index} is not strictly time-ordered")]
    NotTimeOrdered { index: usize },
    #[error("no grid point lies inside every stream")]
    GridOutsideStream,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("rule syntax: {0}")]
    Parse(String),
    #[error("rule references unknown stream `{0}`")]
    UnknownStreamRef(String),
    #[error("rule combines incompatible units: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Fusion(FusionError),
}

impl From<FusionError> for RuleError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::MixedUnits(a, b) => RuleError::DimensionMismatch(format!("{a} vs {b}")),
            other => RuleError::Fusion(other),
        }
    }
}

//! Cross-sensor redundancy: consensus references, drift scoring and in-field
//! recalibration.

mod consensus;
mod drift;
mod recalibrate;
mod workflow;

use thiserror::Error;

use crate::fusion::FusionError;

pub use consensus::{consensus_estimate, consensus_excluding, consensus_id, consensus_stream};
pub use drift::{detect_drift, drift_score, DriftReport, DEFAULT_THRESHOLD_K, MIN_WINDOW_POINTS};
pub use recalibrate::{infield_recalibrate, RecalibrationOptions, RecalibrationResult};
pub use workflow::{
    recalibration_workflow, write_audit_log, AuditRecord, RecalibrationPolicy, WorkflowEvent, WorkflowState,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RedundancyError {
    #[error("{available} redundant inputs available, {required} required")]
    InsufficientRedundancy { available: usize, required: usize },
    #[error("window holds {points} aligned points, {required} required")]
    WindowTooSmall { points: usize, required: usize },
    #[error("{pairs} aligned pairs available, {required} required")]
    InsufficientPairs { pairs: usize, required: usize },
    #[error("raw readings do not identify a gain and offset-only fitting is disabled")]
    RankDeficient,
    #[error("streams are not aligned to a common grid")]
    Misaligned,
    #[error("consensus unit {found} does not match certificate unit {expected}")]
    UnitMismatch { expected: String, found: String },
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

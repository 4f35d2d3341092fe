//! Digital twins of calibrated sensors.
//!
//! A twin follows the observer/controller split: the observer enriches and
//! buffers incoming readings and keeps running statistics, the controller
//! maps the resulting flags and external directives to actions.

mod certificate;
mod sensor;
mod state;

use thiserror::Error;

use crate::time::Timestamp;
use crate::uncertainty::UncertaintyError;
use crate::units::QuantityKind;

pub use certificate::{apply_calibration, load_certificate, Calibrated, CalibrationCertificate, FitMode, Provenance};
pub use sensor::{sample_sensor, Fault, FaultKind, RawReading, SensorModel, SignalPrimitive};
pub use state::{
    twin_control, twin_observe, Action, ControllerFlag, Directive, ObserverStats, TwinState, DEFAULT_CAPACITY,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("certificate document: {0}")]
    Parse(String),
    #[error("reading certificate: {0}")]
    Io(String),
    #[error("certificate {id}: {field} is not finite")]
    NonFinite { id: String, field: &'static str },
    #[error("certificate {id}: {field} must be >= 0")]
    NegativeUncertainty { id: String, field: &'static str },
    #[error("certificate {id}: |cov_ab| exceeds u_a·u_b")]
    CovarianceBound { id: String },
    #[error("certificate {id}: valid_until must be after calibrated_at")]
    ValidityWindow { id: String },
    #[error("certificate {id}: calibration degree {degree} is not supported")]
    UnsupportedDegree { id: String, degree: u32 },
    #[error("certificate {id}: quantity kind {kind} does not match unit {unit}")]
    KindUnitMismatch { id: String, kind: QuantityKind, unit: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TwinError {
    #[error("raw reading {0} is not finite")]
    NonFiniteRaw(f64),
    #[error("timestamp {got} does not follow {last}")]
    NonMonotonicTimestamp { last: Timestamp, got: Timestamp },
    #[error("range start {from} is after its end {to}")]
    InvertedRange { from: Timestamp, to: Timestamp },
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}

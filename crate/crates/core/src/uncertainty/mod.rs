//! Uncertain quantities, first-order propagation and the Monte Carlo oracle.

mod measurement;
mod monte_carlo;
mod propagate;
pub mod summation;

use thiserror::Error;

use crate::units::QuantityKind;

pub use measurement::{coverage_interval, Measurement};
pub use monte_carlo::{
    monte_carlo_propagate, shortest_interval, std_normal_cdf, DistributionSpec, MonteCarloResult, COVERAGE_PROBABILITY,
    MIN_DRAWS,
};
pub use propagate::{combine_linear, Sensitivity, UncertainVector, PSD_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UncertaintyError {
    #[error("dimension mismatch at input {index}: expected {expected}, found {found}")]
    DimensionMismatch { index: usize, expected: String, found: String },
    #[error("covariance is not positive semidefinite (quadratic form {quadratic_form:e})")]
    NonPsdCovariance { quadratic_form: f64 },
    #[error("correlation matrix rejected: {0}")]
    NonPsdCorrelation(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("covariance is not symmetric at ({row}, {col})")]
    NonSymmetric { row: usize, col: usize },
    #[error("uncertainty must be finite and non-negative, got {0}")]
    NegativeUncertainty(f64),
    #[error("quantity kind {kind} does not match unit `{unit}`")]
    QuantityMismatch { kind: QuantityKind, unit: String },
    #[error("invalid distribution {0:?}")]
    InvalidDistribution(DistributionSpec),
    #[error("at least {minimum} draws required, got {requested}")]
    TooFewDraws { requested: usize, minimum: usize },
    #[error("model returned a non-finite value at draw {draw}")]
    ModelEvaluationFailure { draw: usize },
}

use serde::{Deserialize, Serialize};

use super::UncertaintyError;
use crate::time::Timestamp;
use crate::units::{QuantityKind, Unit};

/// An uncertainty-enriched sample.
///
/// `u_random` is uncorrelated between samples; `u_systematic` is fully
/// correlated between samples of the same source and independent between
/// sources. `u_timestamp` (seconds) is the residual clock-sync uncertainty of
/// `timestamp`; it is consumed and zeroed by stream alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    pub u_random: f64,
    pub u_systematic: f64,
    pub unit: Unit,
    pub quantity_kind: QuantityKind,
    pub timestamp: Timestamp,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub u_timestamp: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl Measurement {
    pub fn new(
        value: f64,
        u_random: f64,
        u_systematic: f64,
        unit: Unit,
        quantity_kind: QuantityKind,
    ) -> Result<Self, UncertaintyError> {
        let m = Measurement {
            value,
            u_random,
            u_systematic,
            unit,
            quantity_kind,
            timestamp: Timestamp::ZERO,
            source_id: String::new(),
            u_timestamp: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    /// Measurement whose quantity kind is inferred from the unit's dimension.
    pub fn with_unit(value: f64, u_random: f64, u_systematic: f64, unit: Unit) -> Result<Self, UncertaintyError> {
        let kind = QuantityKind::for_dimension(unit.dims());
        Self::new(value, u_random, u_systematic, unit, kind)
    }

    pub fn at(mut self, t: Timestamp) -> Self {
        self.timestamp = t;
        self
    }

    pub fn from_source(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn validate(&self) -> Result<(), UncertaintyError> {
        for u in [self.u_random, self.u_systematic, self.u_timestamp] {
            if !(u >= 0.0) || !u.is_finite() {
                return Err(UncertaintyError::NegativeUncertainty(u));
            }
        }
        if !self.quantity_kind.accepts(&self.unit) {
            return Err(UncertaintyError::QuantityMismatch {
                kind: self.quantity_kind,
                unit: self.unit.symbol().to_string(),
            });
        }
        Ok(())
    }

    /// Combined standard uncertainty.
    pub fn u_c(&self) -> f64 {
        self.u_random.hypot(self.u_systematic)
    }
}

/// Expanded-uncertainty interval `value ± k·u_c`.
///
/// # Panics
/// If `k` is not strictly positive.
pub fn coverage_interval(m: &Measurement, k: f64) -> (f64, f64) {
    assert!(k > 0.0, "coverage factor must be positive, got {k}");
    let half = k * m.u_c();
    (m.value - half, m.value + half)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: f64, ur: f64, us: f64) -> Measurement {
        Measurement::with_unit(v, ur, us, Unit::dimensionless()).unwrap()
    }

    #[test]
    fn combined_uncertainty_is_quadrature() {
        assert_eq!(m(0.0, 0.3, 0.4).u_c(), 0.5);
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage_interval(&m(10.0, 0.5, 0.0), 2.0), (9.0, 11.0));
        assert_eq!(coverage_interval(&m(0.0, 0.0, 0.0), 2.0), (0.0, 0.0));
        let (lo, hi) = coverage_interval(&m(3.0, 0.3, 0.4), 1.0);
        assert!((lo - 2.5).abs() < 1e-15 && (hi - 3.5).abs() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn coverage_rejects_nonpositive_k() {
        coverage_interval(&m(1.0, 0.1, 0.0), 0.0);
    }

    #[test]
    fn rejects_negative_and_mismatched() {
        assert!(Measurement::with_unit(1.0, -0.1, 0.0, Unit::dimensionless()).is_err());
        assert!(Measurement::with_unit(1.0, f64::NAN, 0.0, Unit::dimensionless()).is_err());
        let k: Unit = "K".parse().unwrap();
        assert!(Measurement::new(1.0, 0.1, 0.0, k, QuantityKind::Pressure).is_err());
    }

    #[test]
    fn json_shape() {
        let k: Unit = "K".parse().unwrap();
        let x = Measurement::new(293.15, 0.1, 0.05, k, QuantityKind::Temperature).unwrap().from_source("T1");
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(
            s,
            r#"{"value":293.15,"u_random":0.1,"u_systematic":0.05,"unit":"K","quantity_kind":"temperature","timestamp":0,"source_id":"T1"}"#
        );
        assert_eq!(serde_json::from_str::<Measurement>(&s).unwrap(), x);
    }
}

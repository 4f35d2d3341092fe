//! Calibration certificates and their application to raw readings.
//!
//! The calibration model is linear, `y = a·raw + b`. A certificate's drift
//! rate describes how fast its systematic uncertainty grows after
//! calibration; drift is never applied as a value correction because its sign
//! is unknown to the twin.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{CertificateError, TwinError};
use crate::time::{self, Timestamp};
use crate::uncertainty::{combine_linear, Measurement, Sensitivity, UncertainVector};
use crate::units::{QuantityKind, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Laboratory,
    InField,
}

/// How the gain and offset were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    #[default]
    Linear,
    /// Gain carried over from the previous certificate; only the offset was fitted.
    OffsetOnly,
}

fn default_degree() -> u32 {
    1
}

fn default_raw_unit() -> Unit {
    Unit::dimensionless()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCertificate {
    pub certificate_id: String,
    /// Gain, output unit per raw unit.
    pub gain: f64,
    pub u_a: f64,
    /// Offset, output unit.
    pub offset: f64,
    pub u_b: f64,
    pub cov_ab: f64,
    /// Per-sample random uncertainty of the calibrated instrument, output unit.
    pub u_noise: f64,
    /// Output unit per second.
    pub drift_rate: f64,
    pub u_drift: f64,
    #[serde(with = "time::rfc3339")]
    pub calibrated_at: Timestamp,
    #[serde(with = "time::rfc3339")]
    pub valid_until: Timestamp,
    pub provenance: Provenance,
    pub unit: Unit,
    #[serde(default = "default_raw_unit")]
    pub raw_unit: Unit,
    pub quantity_kind: QuantityKind,
    /// Polynomial degree of the calibration curve. Only 1 is supported.
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub fit_mode: FitMode,
}

impl CalibrationCertificate {
    /// `y = raw` with zero uncertainty, valid for `[calibrated_at, valid_until)`.
    pub fn identity(id: impl Into<String>, unit: Unit, calibrated_at: Timestamp, valid_until: Timestamp) -> Self {
        CalibrationCertificate {
            certificate_id: id.into(),
            gain: 1.0,
            u_a: 0.0,
            offset: 0.0,
            u_b: 0.0,
            cov_ab: 0.0,
            u_noise: 0.0,
            drift_rate: 0.0,
            u_drift: 0.0,
            calibrated_at,
            valid_until,
            provenance: Provenance::Laboratory,
            quantity_kind: QuantityKind::for_dimension(unit.dims()),
            raw_unit: unit.clone(),
            unit,
            degree: 1,
            fit_mode: FitMode::Linear,
        }
    }

    pub fn validate(&self) -> Result<(), CertificateError> {
        let id = || self.certificate_id.clone();
        for (name, v) in [
            ("gain", self.gain),
            ("u_a", self.u_a),
            ("offset", self.offset),
            ("u_b", self.u_b),
            ("cov_ab", self.cov_ab),
            ("u_noise", self.u_noise),
            ("drift_rate", self.drift_rate),
            ("u_drift", self.u_drift),
        ] {
            if !v.is_finite() {
                return Err(CertificateError::NonFinite { id: id(), field: name });
            }
        }
        for (name, v) in [("u_a", self.u_a), ("u_b", self.u_b), ("u_noise", self.u_noise), ("u_drift", self.u_drift)] {
            if v < 0.0 {
                return Err(CertificateError::NegativeUncertainty { id: id(), field: name });
            }
        }
        if self.cov_ab.abs() > self.u_a * self.u_b * (1.0 + 1e-12) {
            return Err(CertificateError::CovarianceBound { id: id() });
        }
        if self.valid_until <= self.calibrated_at {
            return Err(CertificateError::ValidityWindow { id: id() });
        }
        if self.degree != 1 {
            return Err(CertificateError::UnsupportedDegree { id: id(), degree: self.degree });
        }
        if !self.quantity_kind.accepts(&self.unit) {
            return Err(CertificateError::KindUnitMismatch {
                id: id(),
                kind: self.quantity_kind,
                unit: self.unit.symbol().to_string(),
            });
        }
        Ok(())
    }

    pub fn is_expired(&self, t: Timestamp) -> bool {
        t > self.valid_until
    }

    pub fn gain_unit(&self) -> Unit {
        self.unit.div(&self.raw_unit)
    }

    pub fn from_json(text: &str) -> Result<Self, CertificateError> {
        let cert: CalibrationCertificate =
            serde_json::from_str(text).map_err(|e| CertificateError::Parse(e.to_string()))?;
        cert.validate()?;
        Ok(cert)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

pub fn load_certificate(path: &Path) -> Result<CalibrationCertificate, CertificateError> {
    let text = fs::read_to_string(path).map_err(|e| CertificateError::Io(format!("{}: {e}", path.display())))?;
    CalibrationCertificate::from_json(&text)
}

/// A calibrated reading and whether it was taken after the certificate expired.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated {
    pub measurement: Measurement,
    pub expired: bool,
}

/// `y = a·raw + b` with `u_random = u_noise` and
/// `u_systematic² = raw²u_a² + u_b² + 2·raw·cov_ab + (Δt·u_drift)²`,
/// `Δt = t − calibrated_at`.
pub fn apply_calibration(raw: f64, cert: &CalibrationCertificate, t: Timestamp) -> Result<Calibrated, TwinError> {
    if !raw.is_finite() {
        return Err(TwinError::NonFiniteRaw(raw));
    }
    let dt = t.secs_since(cert.calibrated_at);
    let cov = DMatrix::from_row_slice(
        3,
        3,
        &[
            cert.u_a * cert.u_a,
            cert.cov_ab,
            0.0,
            cert.cov_ab,
            cert.u_b * cert.u_b,
            0.0,
            0.0,
            0.0,
            cert.u_drift * cert.u_drift,
        ],
    );
    let drift_unit = cert.unit.div(&Unit::seconds());
    let inputs = UncertainVector::new(
        vec![cert.gain, cert.offset, 0.0],
        cov,
        vec![cert.gain_unit(), cert.unit.clone(), drift_unit],
    )?
    .with_systematic(vec![true; 3])?;
    let sens =
        [Sensitivity::new(raw, cert.raw_unit.clone()), Sensitivity::from(1.0), Sensitivity::new(dt, Unit::seconds())];
    let mut m = combine_linear(&sens, &inputs, &cert.unit)?;
    m.u_random = cert.u_noise;
    m.quantity_kind = cert.quantity_kind;
    m.timestamp = t;
    Ok(Calibrated { measurement: m, expired: cert.is_expired(t) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cert() -> CalibrationCertificate {
        CalibrationCertificate::identity("C1", "K".parse().unwrap(), Timestamp::ZERO, Timestamp::from_secs_f64(1e7))
    }

    #[test]
    fn identity_calibration() {
        let c = CalibrationCertificate { u_noise: 0.1, ..cert() };
        let out = apply_calibration(293.15, &c, Timestamp::ZERO).unwrap();
        assert_eq!(out.measurement.value, 293.15);
        assert_eq!(out.measurement.u_random, 0.1);
        assert_eq!(out.measurement.u_systematic, 0.0);
        assert_eq!(out.measurement.quantity_kind, QuantityKind::Temperature);
        assert!(!out.expired);
    }

    #[test]
    fn gain_and_offset_uncertainty() {
        let c = CalibrationCertificate { u_a: 0.05, u_b: 0.1, ..cert() };
        let out = apply_calibration(2.0, &c, Timestamp::ZERO).unwrap();
        assert!((out.measurement.u_systematic - 0.02f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn drift_term_alone() {
        let c = CalibrationCertificate { u_drift: 1e-7, ..cert() };
        let out = apply_calibration(0.0, &c, Timestamp::from_secs_f64(1e6)).unwrap();
        assert!((out.measurement.u_systematic - 0.1).abs() < 1e-15);
    }

    #[test]
    fn expired_still_computes() {
        let c = CalibrationCertificate { u_drift: 1e-7, ..cert() };
        let out = apply_calibration(1.0, &c, Timestamp::from_secs_f64(2e7)).unwrap();
        assert!(out.expired);
        assert!((out.measurement.u_systematic - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_raw() {
        assert!(matches!(apply_calibration(f64::NAN, &cert(), Timestamp::ZERO), Err(TwinError::NonFiniteRaw(_))));
    }

    #[test]
    fn raw_unit_conversion() {
        let mut c = cert();
        c.unit = "Pa".parse().unwrap();
        c.quantity_kind = QuantityKind::Pressure;
        c.raw_unit = "mV".parse().unwrap();
        c.gain = 2.0;
        let out = apply_calibration(3.0, &c, Timestamp::ZERO).unwrap();
        assert_eq!(out.measurement.value, 6.0);
        assert_eq!(out.measurement.unit.symbol(), "Pa");
    }

    #[test]
    fn validation() {
        let bad = CalibrationCertificate { u_a: 0.1, u_b: 0.1, cov_ab: 0.02, ..cert() };
        assert!(matches!(bad.validate(), Err(CertificateError::CovarianceBound { .. })));
        let bad = CalibrationCertificate { valid_until: Timestamp::ZERO, ..cert() };
        assert!(matches!(bad.validate(), Err(CertificateError::ValidityWindow { .. })));
        let bad = CalibrationCertificate { u_noise: -1.0, ..cert() };
        assert!(matches!(bad.validate(), Err(CertificateError::NegativeUncertainty { field: "u_noise", .. })));
        let bad = CalibrationCertificate { degree: 2, ..cert() };
        assert!(matches!(bad.validate(), Err(CertificateError::UnsupportedDegree { .. })));
        let bad = CalibrationCertificate { quantity_kind: QuantityKind::Pressure, ..cert() };
        assert!(matches!(bad.validate(), Err(CertificateError::KindUnitMismatch { .. })));
    }

    #[test]
    fn json_roundtrip_uses_rfc3339() {
        let c = CalibrationCertificate {
            calibrated_at: Timestamp::parse_rfc3339("2024-03-01T12:00:00Z").unwrap(),
            valid_until: Timestamp::parse_rfc3339("2025-03-01T12:00:00Z").unwrap(),
            u_b: 0.05,
            ..cert()
        };
        let text = c.to_json();
        assert!(text.contains("\"calibrated_at\": \"2024-03-01T12:00:00Z\""), "{text}");
        assert!(text.contains("\"provenance\": \"laboratory\""));
        assert_eq!(CalibrationCertificate::from_json(&text).unwrap(), c);
    }

    #[test]
    fn drift_monotone_in_time() {
        let c = CalibrationCertificate { u_a: 0.01, u_b: 0.02, u_drift: 1e-6, ..cert() };
        let mut last = 0.0;
        for s in [0.0, 1.0, 10.0, 1e3, 1e5, 1e6] {
            let u = apply_calibration(5.0, &c, Timestamp::from_secs_f64(s)).unwrap().measurement.u_systematic;
            assert!(u >= last);
            last = u;
        }
    }
}

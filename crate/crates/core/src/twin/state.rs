//! Twin state, observer and controller.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::certificate::{apply_calibration, CalibrationCertificate};
use super::TwinError;
use crate::time::Timestamp;
use crate::uncertainty::Measurement;

pub const DEFAULT_CAPACITY: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerFlag {
    DriftSuspected,
    CertificateExpired,
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    ForceRecalibration,
    AcknowledgeAlerts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    EmitAlert,
    RequestRecalibration,
    AnnotateStream,
}

/// Running statistics over every accepted sample (Welford recurrence).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObserverStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
    pub first: Option<Timestamp>,
    pub last: Option<Timestamp>,
}

impl ObserverStats {
    pub fn push(&mut self, x: f64, t: Timestamp) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
        self.first.get_or_insert(t);
        self.last = Some(t);
    }

    /// Sample variance; 0 below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Samples per second over the observed span; 0 below two samples.
    pub fn rate(&self) -> f64 {
        match (self.first, self.last) {
            (Some(a), Some(b)) if b > a => (self.count - 1) as f64 / b.secs_since(a),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinState {
    pub sensor_id: String,
    pub certificate: CalibrationCertificate,
    buffer: VecDeque<Measurement>,
    capacity: usize,
    pub stats: ObserverStats,
    pub flags: BTreeSet<ControllerFlag>,
    /// Plausible value range `[lo, hi]` in the certificate unit.
    pub plausible_range: Option<(f64, f64)>,
    /// Samples dropped for non-monotonic timestamps.
    pub dropped: u64,
    /// Superseded certificate ids, oldest first.
    pub certificate_history: Vec<String>,
}

impl TwinState {
    pub fn new(sensor_id: impl Into<String>, certificate: CalibrationCertificate, capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        TwinState {
            sensor_id: sensor_id.into(),
            certificate,
            buffer: VecDeque::with_capacity(capacity.min(DEFAULT_CAPACITY)),
            capacity,
            stats: ObserverStats::default(),
            flags: BTreeSet::new(),
            plausible_range: None,
            dropped: 0,
            certificate_history: Vec::new(),
        }
    }

    pub fn with_plausible_range(mut self, lo: f64, hi: f64) -> Self {
        self.plausible_range = Some((lo, hi));
        self
    }

    pub fn buffer(&self) -> impl ExactSizeIterator<Item = &Measurement> {
        self.buffer.iter()
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn latest(&self) -> Option<&Measurement> {
        self.buffer.back()
    }

    /// Observer step: buffers `m` and updates statistics and range flag.
    pub fn observe(&mut self, m: Measurement) -> Result<(), TwinError> {
        if let Some(last) = self.stats.last {
            if m.timestamp <= last {
                self.dropped += 1;
                return Err(TwinError::NonMonotonicTimestamp { last, got: m.timestamp });
            }
        }
        self.stats.push(m.value, m.timestamp);
        match self.plausible_range {
            Some((lo, hi)) if !(lo..=hi).contains(&m.value) => self.flags.insert(ControllerFlag::OutOfRange),
            _ => self.flags.remove(&ControllerFlag::OutOfRange),
        };
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(m);
        Ok(())
    }

    /// Calibrates a raw reading taken at `t` (common time base) and observes it.
    pub fn ingest(&mut self, raw: f64, t: Timestamp) -> Result<Measurement, TwinError> {
        let c = apply_calibration(raw, &self.certificate, t)?;
        let mut m = c.measurement;
        m.source_id = self.sensor_id.clone();
        if c.expired {
            self.flags.insert(ControllerFlag::CertificateExpired);
        }
        self.observe(m.clone())?;
        Ok(m)
    }

    pub fn set_flag(&mut self, flag: ControllerFlag) {
        self.flags.insert(flag);
    }

    /// Replaces the certificate. Buffered data is kept as enriched at the time.
    pub fn install_certificate(&mut self, cert: CalibrationCertificate) {
        let old = std::mem::replace(&mut self.certificate, cert);
        self.certificate_history.push(old.certificate_id);
        self.flags.remove(&ControllerFlag::DriftSuspected);
        self.flags.remove(&ControllerFlag::CertificateExpired);
    }

    /// Buffered measurements with `from ≤ timestamp ≤ to`.
    pub fn request_enriched(&self, from: Timestamp, to: Timestamp) -> Result<Vec<Measurement>, TwinError> {
        if from > to {
            return Err(TwinError::InvertedRange { from, to });
        }
        let (a, b) = self.buffer.as_slices();
        Ok(a.iter().chain(b).filter(|m| m.timestamp >= from && m.timestamp <= to).cloned().collect())
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("twin state serializes");
        hex::encode(Sha256::digest(&json))
    }
}

pub fn twin_observe(state: &mut TwinState, m: Measurement) -> Result<(), TwinError> {
    state.observe(m)
}

/// Controller decision table.
///
/// | condition                       | actions                                  |
/// |---------------------------------|------------------------------------------|
/// | `drift_suspected`               | request_recalibration, annotate_stream   |
/// | `certificate_expired`           | request_recalibration                    |
/// | `out_of_range`                  | emit_alert                               |
/// | directive `force_recalibration` | request_recalibration                    |
/// | directive `acknowledge_alerts`  | suppresses emit_alert                    |
pub fn twin_control(state: &TwinState, directives: &BTreeSet<Directive>) -> BTreeSet<Action> {
    let mut actions = BTreeSet::new();
    for flag in &state.flags {
        match flag {
            ControllerFlag::DriftSuspected => {
                actions.insert(Action::RequestRecalibration);
                actions.insert(Action::AnnotateStream);
            }
            ControllerFlag::CertificateExpired => {
                actions.insert(Action::RequestRecalibration);
            }
            ControllerFlag::OutOfRange => {
                actions.insert(Action::EmitAlert);
            }
        }
    }
    if directives.contains(&Directive::ForceRecalibration) {
        actions.insert(Action::RequestRecalibration);
    }
    if directives.contains(&Directive::AcknowledgeAlerts) {
        actions.remove(&Action::EmitAlert);
    }
    actions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::summation::{mean, sample_variance};
    use crate::units::Unit;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn cert() -> CalibrationCertificate {
        CalibrationCertificate::identity("C", "K".parse().unwrap(), Timestamp::ZERO, Timestamp::from_secs_f64(100.0))
    }

    fn m(t: i64, v: f64) -> Measurement {
        Measurement::with_unit(v, 0.1, 0.0, Unit::dimensionless()).unwrap().at(Timestamp(t)).from_source("S")
    }

    #[test]
    fn first_sample() {
        let mut s = TwinState::new("S", cert(), 8);
        s.observe(m(1, 4.5)).unwrap();
        assert_eq!(s.stats.mean, 4.5);
        assert_eq!(s.stats.variance(), 0.0);
    }

    #[test]
    fn welford_matches_two_pass() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let dist = Normal::new(1e3, 2.0).unwrap();
        let xs: Vec<f64> = (0..1000).map(|_| dist.sample(&mut rng)).collect();
        let mut s = TwinState::new("S", cert(), DEFAULT_CAPACITY);
        for (i, x) in xs.iter().enumerate() {
            s.observe(m(i as i64 + 1, *x)).unwrap();
        }
        let v = sample_variance(&xs);
        assert!(((s.stats.variance() - v) / v).abs() < 1e-10);
        assert!(((s.stats.mean - mean(&xs)) / mean(&xs)).abs() < 1e-12);
        assert!((s.stats.rate() - 1e9).abs() < 1e-3);
    }

    #[test]
    fn ring_eviction() {
        let mut s = TwinState::new("S", cert(), 8);
        for i in 0..9 {
            s.observe(m(i + 1, i as f64)).unwrap();
        }
        assert_eq!(s.len(), 8);
        assert_eq!(s.buffer().next().unwrap().value, 1.0);
        assert_eq!(s.stats.count, 9);
    }

    #[test]
    fn non_monotonic_dropped() {
        let mut s = TwinState::new("S", cert(), 8);
        s.observe(m(5, 0.0)).unwrap();
        assert_eq!(
            s.observe(m(5, 1.0)),
            Err(TwinError::NonMonotonicTimestamp { last: Timestamp(5), got: Timestamp(5) })
        );
        assert!(s.observe(m(4, 1.0)).is_err());
        assert_eq!((s.dropped, s.len()), (2, 1));
    }

    #[test]
    fn out_of_range_flag_follows_latest() {
        let mut s = TwinState::new("S", cert(), 8).with_plausible_range(0.0, 10.0);
        s.observe(m(1, 11.0)).unwrap();
        assert!(s.flags.contains(&ControllerFlag::OutOfRange));
        s.observe(m(2, 5.0)).unwrap();
        assert!(s.flags.is_empty());
    }

    #[test]
    fn decision_table() {
        let mut s = TwinState::new("S", cert(), 8);
        let none = BTreeSet::new();
        assert!(twin_control(&s, &none).is_empty());
        s.set_flag(ControllerFlag::DriftSuspected);
        assert_eq!(twin_control(&s, &none), BTreeSet::from([Action::RequestRecalibration, Action::AnnotateStream]));
        s.flags.clear();
        s.set_flag(ControllerFlag::CertificateExpired);
        s.set_flag(ControllerFlag::OutOfRange);
        assert_eq!(twin_control(&s, &none), BTreeSet::from([Action::EmitAlert, Action::RequestRecalibration]));
        let ack = BTreeSet::from([Directive::AcknowledgeAlerts]);
        assert_eq!(twin_control(&s, &ack), BTreeSet::from([Action::RequestRecalibration]));
        s.flags.clear();
        let force = BTreeSet::from([Directive::ForceRecalibration]);
        assert_eq!(twin_control(&s, &force), BTreeSet::from([Action::RequestRecalibration]));
    }

    #[test]
    fn request_enriched_closed_interval() {
        let mut s = TwinState::new("S", cert(), 8);
        for i in 1..=5 {
            s.observe(m(i * 10, i as f64)).unwrap();
        }
        assert_eq!(s.request_enriched(Timestamp(0), Timestamp(100)).unwrap().len(), 5);
        assert!(s.request_enriched(Timestamp(51), Timestamp(100)).unwrap().is_empty());
        let r = s.request_enriched(Timestamp(20), Timestamp(40)).unwrap();
        assert_eq!(r.iter().map(|x| x.value).collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
        assert!(matches!(s.request_enriched(Timestamp(2), Timestamp(1)), Err(TwinError::InvertedRange { .. })));
    }

    #[test]
    fn ingest_flags_expiry_and_swap_clears() {
        let mut s = TwinState::new("S", cert(), 8);
        s.ingest(1.0, Timestamp::from_secs_f64(200.0)).unwrap();
        assert!(s.flags.contains(&ControllerFlag::CertificateExpired));
        let digest = s.digest();
        let mut fresh = cert();
        fresh.certificate_id = "C2".into();
        fresh.valid_until = Timestamp::from_secs_f64(1000.0);
        s.install_certificate(fresh);
        assert!(s.flags.is_empty());
        assert_eq!(s.certificate_history, vec!["C".to_string()]);
        assert_ne!(s.digest(), digest);
        let next = s.ingest(1.0, Timestamp::from_secs_f64(201.0)).unwrap();
        assert!(next.timestamp > s.buffer().next().unwrap().timestamp);
    }
}

use serde::{Deserialize, Serialize};

use super::SyncError;
use crate::rng::keyed_standard_normal;
use crate::time::Timestamp;

/// Upper bound on the magnitude of a modelled clock rate error.
pub const MAX_SKEW: f64 = 1e-3;

/// Distortion of a node's local clock relative to true time:
/// `local = t + skew·(t − reference) + offset + jitter`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockModel {
    pub node_id: String,
    /// Seconds.
    pub offset: f64,
    /// Dimensionless rate error.
    pub skew: f64,
    /// Standard deviation of timestamping noise, seconds.
    pub jitter_sigma: f64,
    /// Instant at which `offset` applies.
    #[serde(default)]
    pub reference: Timestamp,
}

impl ClockModel {
    pub fn perfect(node_id: impl Into<String>) -> Self {
        ClockModel { node_id: node_id.into(), offset: 0.0, skew: 0.0, jitter_sigma: 0.0, reference: Timestamp::ZERO }
    }

    pub fn validate(&self) -> Result<(), SyncError> {
        if !(self.jitter_sigma >= 0.0) || !self.jitter_sigma.is_finite() {
            return Err(SyncError::InvalidClock(format!("{}: jitter_sigma must be >= 0", self.node_id)));
        }
        if !(self.skew.abs() < MAX_SKEW) || !self.offset.is_finite() {
            return Err(SyncError::InvalidClock(format!("{}: |skew| must be < {MAX_SKEW:e}", self.node_id)));
        }
        Ok(())
    }

    /// Deterministic part of the distortion at `true_time`, in nanoseconds.
    pub fn deviation_ns(&self, true_time: Timestamp) -> f64 {
        self.skew * (true_time - self.reference).nanos() as f64 + self.offset * 1e9
    }
}

/// Reading of `clock` at `true_time`. The jitter draw is keyed by
/// `(seed, true_time)`, so repeated reads of one instant agree.
pub fn local_time(clock: &ClockModel, true_time: Timestamp, seed: u64) -> Timestamp {
    let mut dev = clock.deviation_ns(true_time);
    if clock.jitter_sigma > 0.0 {
        dev += clock.jitter_sigma * 1e9 * keyed_standard_normal(seed, true_time.nanos() as u64);
    }
    Timestamp(true_time.nanos() + dev.round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clock(offset: f64, skew: f64, jitter: f64) -> ClockModel {
        ClockModel { node_id: "n".into(), offset, skew, jitter_sigma: jitter, reference: Timestamp::ZERO }
    }

    #[test]
    fn examples() {
        let t = Timestamp::from_secs_f64(10.0);
        assert_eq!(local_time(&clock(0.0, 0.0, 0.0), t, 1), t);
        assert_eq!(local_time(&clock(1.0, 0.0, 0.0), t, 1), Timestamp::from_secs_f64(11.0));
        let t = Timestamp::from_secs_f64(1e6);
        assert_eq!(local_time(&clock(0.0, 1e-6, 0.0), t, 1), Timestamp::from_secs_f64(1e6 + 1.0));
    }

    #[test]
    fn jitter_is_deterministic_and_scaled() {
        let c = clock(0.0, 0.0, 1e-5);
        let devs: Vec<f64> = (0..20_000)
            .map(|i| {
                let t = Timestamp::from_secs_f64(i as f64);
                assert_eq!(local_time(&c, t, 9), local_time(&c, t, 9));
                (local_time(&c, t, 9) - t).as_secs_f64()
            })
            .collect();
        let sd = crate::uncertainty::summation::sample_std(&devs);
        assert!((sd / 1e-5 - 1.0).abs() < 0.03, "{sd}");
    }

    #[test]
    fn validation() {
        assert!(clock(0.0, 2e-3, 0.0).validate().is_err());
        assert!(clock(0.0, 0.0, -1.0).validate().is_err());
        assert!(clock(0.5, 2e-6, 1e-5).validate().is_ok());
    }
}

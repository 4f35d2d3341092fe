//! Two-way (delay request / response) offset estimation.
//!
//! A reference node sends a request at `t1` (reference clock), the node under
//! sync receives it at `t2` and replies at `t3` (node clock), and the reply
//! reaches the reference at `t4`. The node's offset relative to the reference
//! is `θ = ((t2 − t1) − (t4 − t3)) / 2`; the mean path delay is
//! `δ = ((t2 − t1) + (t4 − t3)) / 2`. Path asymmetry biases `θ` by half the
//! difference between forward and reverse delays.

use serde::{Deserialize, Serialize};

use super::clock::{local_time, ClockModel};
use super::SyncError;
use crate::time::{Duration, Timestamp};
use crate::uncertainty::Measurement;
use crate::units::{QuantityKind, Unit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncExchange {
    pub t1: Timestamp,
    pub t2: Timestamp,
    pub t3: Timestamp,
    pub t4: Timestamp,
    /// Simulated ground truth, never read by the estimator. Seconds.
    pub path_delay_fwd: f64,
    pub path_delay_rev: f64,
}

/// Assumed noise of the exchange, used to attach an uncertainty to `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncNoiseModel {
    /// Timestamping jitter of the reference clock (t1, t4), seconds.
    pub reference_jitter: f64,
    /// Timestamping jitter of the node clock (t2, t3), seconds.
    pub node_jitter: f64,
    /// Largest path asymmetry |fwd − rev| considered possible, seconds.
    pub asym_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetEstimate {
    /// `θ` in seconds, stamped at the exchange midpoint on the reference clock.
    /// Jitter enters `u_random`, the asymmetry bound `u_systematic`.
    pub offset: Measurement,
    /// Mean path delay `δ`, seconds.
    pub mean_path_delay: f64,
}

/// Estimates the node-minus-reference offset from one exchange.
pub fn estimate_offset(x: &SyncExchange, noise: &SyncNoiseModel) -> Result<OffsetEstimate, SyncError> {
    if x.t4 <= x.t1 || x.t3 < x.t2 {
        return Err(SyncError::InconsistentExchange);
    }
    let fwd = (x.t2 - x.t1).nanos();
    let rev = (x.t4 - x.t3).nanos();
    let delay = (fwd + rev) as f64 / 2e9;
    if delay < 0.0 {
        return Err(SyncError::NegativeDelay(delay));
    }
    let theta = (fwd - rev) as f64 / 2e9;
    let jitter_var = (2.0 * noise.reference_jitter.powi(2) + 2.0 * noise.node_jitter.powi(2)) / 4.0;
    let midpoint = Timestamp(x.t1.nanos() + (x.t4 - x.t1).nanos() / 2);
    let offset =
        Measurement::new(theta, jitter_var.sqrt(), noise.asym_bound / 3f64.sqrt(), Unit::seconds(), QuantityKind::Time)
            .map_err(|e| SyncError::InvalidClock(e.to_string()))?
            .at(midpoint);
    Ok(OffsetEstimate { offset, mean_path_delay: delay })
}

/// Simulates one exchange that starts at true time `send`.
///
/// `seed` keys the jitter draws; the four stamps use distinct sub-seeds.
pub fn simulate_exchange(
    reference: &ClockModel,
    node: &ClockModel,
    send: Timestamp,
    path_delay_fwd: f64,
    path_delay_rev: f64,
    turnaround: Duration,
    seed: u64,
) -> SyncExchange {
    let arrive = send.offset_secs(path_delay_fwd);
    let reply = arrive + turnaround;
    let back = reply.offset_secs(path_delay_rev);
    SyncExchange {
        t1: local_time(reference, send, seed ^ 0x1),
        t2: local_time(node, arrive, seed ^ 0x2),
        t3: local_time(node, reply, seed ^ 0x3),
        t4: local_time(reference, back, seed ^ 0x4),
        path_delay_fwd,
        path_delay_rev,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const QUIET: SyncNoiseModel = SyncNoiseModel { reference_jitter: 0.0, node_jitter: 0.0, asym_bound: 0.0 };

    fn node(offset: f64) -> ClockModel {
        ClockModel { offset, ..ClockModel::perfect("node") }
    }

    #[test]
    fn symmetric_delay_cancels() {
        let x = simulate_exchange(
            &ClockModel::perfect("ref"),
            &node(0.005),
            Timestamp::from_secs_f64(100.0),
            0.002,
            0.002,
            Duration::from_secs_f64(1e-4),
            1,
        );
        let e = estimate_offset(&x, &QUIET).unwrap();
        assert_eq!(e.offset.value, 0.005);
        assert!((e.mean_path_delay - 0.002).abs() < 1e-15);
    }

    #[test]
    fn asymmetry_biases_by_half() {
        let x = simulate_exchange(
            &ClockModel::perfect("ref"),
            &node(0.0),
            Timestamp::from_secs_f64(1.0),
            0.002,
            0.001,
            Duration::from_secs_f64(0.0),
            1,
        );
        let e = estimate_offset(&x, &QUIET).unwrap();
        assert!((e.offset.value - 0.0005).abs() < 1e-15);
    }

    #[test]
    fn uncertainty_budget() {
        let x = simulate_exchange(
            &ClockModel::perfect("ref"),
            &node(0.0),
            Timestamp::from_secs_f64(1.0),
            0.001,
            0.001,
            Duration::from_secs_f64(0.0),
            1,
        );
        let noise = SyncNoiseModel { reference_jitter: 1e-5, node_jitter: 1e-5, asym_bound: 3e-4 * 3f64.sqrt() };
        let e = estimate_offset(&x, &noise).unwrap();
        assert!((e.offset.u_random - 1e-5).abs() < 1e-18);
        assert!((e.offset.u_systematic - 3e-4).abs() < 1e-15);
    }

    #[test]
    fn negative_delay_rejected() {
        // Node clock far behind: t2 earlier than t1 by more than the return trip.
        let x = SyncExchange {
            t1: Timestamp(1_000),
            t2: Timestamp(100),
            t3: Timestamp(200),
            t4: Timestamp(1_050),
            path_delay_fwd: 0.0,
            path_delay_rev: 0.0,
        };
        assert!(matches!(estimate_offset(&x, &QUIET), Err(SyncError::NegativeDelay(_))));
        let bad = SyncExchange { t4: Timestamp(900), ..x };
        assert_eq!(estimate_offset(&bad, &QUIET), Err(SyncError::InconsistentExchange));
    }

    proptest! {
        #[test]
        fn exact_under_symmetric_delay(offset_us in -50_000i64..50_000, delay_us in 1i64..20_000, start in 0i64..1_000_000) {
            let offset = offset_us as f64 / 1e6;
            let delay = delay_us as f64 / 1e6;
            let x = simulate_exchange(&ClockModel::perfect("ref"), &node(offset), Timestamp::from_secs_f64(start as f64),
                delay, delay, Duration::from_nanos(50_000), 3);
            prop_assert_eq!(estimate_offset(&x, &QUIET).unwrap().offset.value, offset);
        }

        #[test]
        fn bias_is_half_asymmetry(fwd_us in 1i64..10_000, rev_us in 1i64..10_000) {
            let x = simulate_exchange(&ClockModel::perfect("ref"), &node(0.0), Timestamp::from_secs_f64(5.0),
                fwd_us as f64 * 1e-6, rev_us as f64 * 1e-6, Duration::from_nanos(0), 3);
            let theta = estimate_offset(&x, &QUIET).unwrap().offset.value;
            prop_assert!((theta - (fwd_us - rev_us) as f64 * 0.5e-6).abs() < 1e-12);
        }
    }
}

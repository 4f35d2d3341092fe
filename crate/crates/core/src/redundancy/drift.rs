use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::consensus::consensus_stream;
use super::RedundancyError;
use crate::time::Timestamp;
use crate::uncertainty::summation::pairwise_sum_by;
use crate::uncertainty::Measurement;

/// Smallest number of aligned points a scoring window may hold.
pub const MIN_WINDOW_POINTS: usize = 10;

pub const DEFAULT_THRESHOLD_K: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub sensor_id: String,
    /// Half-open window `[from, to)`.
    pub window: (Timestamp, Timestamp),
    pub normalized_error: f64,
    pub threshold_k: f64,
    pub flagged: bool,
    /// Identifier of the consensus the sensor was compared against.
    pub consensus_trace: String,
}

/// Mean of a single-source series over a window with its standard
/// uncertainty: random parts average down, systematic parts do not.
fn window_mean(points: &[&Measurement]) -> (f64, f64) {
    let n = points.len() as f64;
    let mean = pairwise_sum_by(points.iter(), |m| m.value) / n;
    let u_r = pairwise_sum_by(points.iter(), |m| m.u_random * m.u_random).sqrt() / n;
    let u_s = pairwise_sum_by(points.iter(), |m| m.u_systematic) / n;
    (mean, u_r.hypot(u_s))
}

/// Normalized error `Eₙ = |x̄ − x̄_cons| / sqrt(u²(x̄) + u²(x̄_cons))` of a
/// sensor against a consensus stream over `[from, to)`. Points are paired by
/// timestamp.
pub fn drift_score(
    sensor: &[Measurement],
    consensus: &[Measurement],
    window: (Timestamp, Timestamp),
    threshold_k: f64,
) -> Result<DriftReport, RedundancyError> {
    let (from, to) = window;
    let mut xs = Vec::new();
    let mut cs = Vec::new();
    let mut j = 0;
    for m in sensor.iter().filter(|m| m.timestamp >= from && m.timestamp < to) {
        while j < consensus.len() && consensus[j].timestamp < m.timestamp {
            j += 1;
        }
        if j < consensus.len() && consensus[j].timestamp == m.timestamp {
            xs.push(m);
            cs.push(&consensus[j]);
        }
    }
    if xs.len() < MIN_WINDOW_POINTS {
        return Err(RedundancyError::WindowTooSmall { points: xs.len(), required: MIN_WINDOW_POINTS });
    }
    let (xm, ux) = window_mean(&xs);
    let (cm, uc) = window_mean(&cs);
    let denom = ux.hypot(uc);
    let diff = (xm - cm).abs();
    let normalized_error = if denom > 0.0 {
        diff / denom
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(DriftReport {
        sensor_id: xs[0].source_id.clone(),
        window,
        normalized_error,
        threshold_k,
        flagged: normalized_error > threshold_k,
        consensus_trace: cs[0].source_id.clone(),
    })
}

/// Scores every sensor of a redundancy group over one window.
///
/// Greedy leave-one-out: each remaining sensor is scored against the
/// consensus of the other remaining ones; the worst sensor above `k` is
/// flagged and removed from the pool, and scoring repeats until no sensor
/// exceeds `k` or fewer than three remain. Returns one report per sensor, in
/// id order.
pub fn detect_drift(
    aligned: &BTreeMap<String, Vec<Measurement>>,
    window: (Timestamp, Timestamp),
    threshold_k: f64,
) -> Result<Vec<DriftReport>, RedundancyError> {
    if aligned.len() < 3 {
        return Err(RedundancyError::InsufficientRedundancy { available: aligned.len(), required: 3 });
    }
    let (from, to) = window;
    let windowed: BTreeMap<String, Vec<Measurement>> = aligned
        .iter()
        .map(|(id, s)| (id.clone(), s.iter().filter(|m| m.timestamp >= from && m.timestamp < to).cloned().collect()))
        .collect();
    let mut pool: Vec<&str> = windowed.keys().map(String::as_str).collect();
    let mut reports: BTreeMap<String, DriftReport> = BTreeMap::new();
    loop {
        let sub: BTreeMap<String, Vec<Measurement>> =
            pool.iter().map(|id| (id.to_string(), windowed[*id].clone())).collect();
        let mut round = Vec::with_capacity(pool.len());
        for id in &pool {
            let cons = consensus_stream(&sub, &[id])?;
            round.push(drift_score(&windowed[*id], &cons, window, threshold_k)?);
        }
        let worst = round
            .iter()
            .enumerate()
            .filter(|(_, r)| r.flagged)
            .max_by(|a, b| a.1.normalized_error.total_cmp(&b.1.normalized_error).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        match worst {
            Some(i) if pool.len() > 3 => {
                let r = round.swap_remove(i);
                pool.retain(|p| *p != r.sensor_id);
                reports.insert(r.sensor_id.clone(), r);
            }
            _ => {
                for r in round {
                    reports.insert(r.sensor_id.clone(), r);
                }
                break;
            }
        }
    }
    Ok(reports.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::keyed_standard_normal;
    use crate::units::Unit;
    use proptest::prelude::*;

    fn series(id: &str, n: usize, f: impl Fn(usize) -> (f64, f64, f64)) -> Vec<Measurement> {
        (0..n)
            .map(|i| {
                let (v, ur, us) = f(i);
                Measurement::with_unit(v, ur, us, Unit::dimensionless())
                    .unwrap()
                    .at(Timestamp::from_secs_f64(i as f64))
                    .from_source(id)
            })
            .collect()
    }

    fn whole(n: usize) -> (Timestamp, Timestamp) {
        (Timestamp::ZERO, Timestamp::from_secs_f64(n as f64))
    }

    #[test]
    fn identical_is_zero() {
        let s = series("A", 20, |i| (i as f64, 0.1, 0.05));
        let mut c = s.clone();
        c.iter_mut().for_each(|m| m.source_id = "consensus[B,C]".into());
        let r = drift_score(&s, &c, whole(20), 2.0).unwrap();
        assert_eq!(r.normalized_error, 0.0);
        assert!(!r.flagged);
        assert_eq!(r.consensus_trace, "consensus[B,C]");
    }

    #[test]
    fn window_too_small() {
        let s = series("A", 9, |_| (0.0, 1.0, 0.0));
        assert!(matches!(drift_score(&s, &s, whole(9), 2.0), Err(RedundancyError::WindowTooSmall { points: 9, .. })));
    }

    #[test]
    fn flags_offset_sensor_and_keeps_others() {
        let mut net = BTreeMap::new();
        for (k, id) in ["A", "B", "C", "D", "E"].into_iter().enumerate() {
            let bias = if id == "C" { 10.0 } else { 0.0 };
            net.insert(
                id.to_string(),
                series(id, 60, |i| (bias + 0.1 * keyed_standard_normal(k as u64, i as u64), 0.1, 0.0)),
            );
        }
        let reports = detect_drift(&net, whole(60), 2.0).unwrap();
        assert_eq!(reports.len(), 5);
        let flagged: Vec<&str> = reports.iter().filter(|r| r.flagged).map(|r| r.sensor_id.as_str()).collect();
        assert_eq!(flagged, vec!["C"]);
        for r in &reports {
            assert!(!r.consensus_trace.contains(&r.sensor_id), "{r:?}");
            if r.sensor_id != "C" {
                assert!(!r.consensus_trace.contains('C'));
            }
        }
    }

    #[test]
    fn two_drifters_among_five() {
        let mut net = BTreeMap::new();
        for (k, id) in ["A", "B", "C", "D", "E"].into_iter().enumerate() {
            let bias = match id {
                "B" => 5.0,
                "D" => -3.0,
                _ => 0.0,
            };
            net.insert(
                id.to_string(),
                series(id, 30, |i| (bias + 0.1 * keyed_standard_normal(k as u64, i as u64), 0.1, 0.0)),
            );
        }
        let reports = detect_drift(&net, whole(30), 2.0).unwrap();
        let flagged: Vec<&str> = reports.iter().filter(|r| r.flagged).map(|r| r.sensor_id.as_str()).collect();
        assert_eq!(flagged, vec!["B", "D"]);
        let healthy = reports.iter().find(|r| r.sensor_id == "A").unwrap();
        assert_eq!(healthy.consensus_trace, "consensus[C,E]");
    }

    proptest! {
        #[test]
        fn scale_invariant(vals in prop::collection::vec(-5.0f64..5.0, 12), off in -1.0f64..1.0, lambda in 0.01f64..100.0) {
            let s = series("A", 12, |i| (vals[i] + off, 0.3, 0.1));
            let c = series("K", 12, |i| (vals[i], 0.2, 0.05));
            let scaled = |xs: &[Measurement]| -> Vec<Measurement> { xs.iter().cloned().map(|mut m| {
                m.value *= lambda; m.u_random *= lambda; m.u_systematic *= lambda; m }).collect() };
            let a = drift_score(&s, &c, whole(12), 2.0).unwrap().normalized_error;
            let b = drift_score(&scaled(&s), &scaled(&c), whole(12), 2.0).unwrap().normalized_error;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn flag_iff_above_k(off in 0.0f64..3.0, k in 0.5f64..4.0) {
            let s = series("A", 10, |_| (off, 1.0, 0.0));
            let c = series("K", 10, |_| (0.0, 1.0, 0.0));
            let r = drift_score(&s, &c, whole(10), k).unwrap();
            prop_assert_eq!(r.flagged, r.normalized_error > k);
        }
    }
}

//! Fusion operators on measurement streams: window averaging, FIR low-pass
//! filtering, inverse-variance virtual sensors and uncertainty-aware labels.
//!
//! All operators are pure. Sums over many samples use pairwise summation on a
//! canonical ordering of the inputs, so results do not depend on input order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Duration, Timestamp};
use crate::uncertainty::summation::{pairwise_sum, pairwise_sum_by};
use crate::uncertainty::{std_normal_cdf, Measurement};

/// Relative tolerance on sample spacing accepted by [`fir_low_pass`].
pub const SPACING_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("no input samples")]
    EmptyInput,
    #[error("inputs mix units or quantity kinds ({0} vs {1})")]
    MixedUnits(String, String),
    #[error("inputs mix sources ({0} vs {1})")]
    MixedSources(String, String),
    #[error("sample spacing deviates more than 1% from nominal at index {index}")]
    NonUniformSpacing { index: usize },
    #[error("filter has {taps} taps but the stream only {samples} samples")]
    FilterLongerThanStream { taps: usize, samples: usize },
    #[error("input {index} has zero uncertainty; pass it through instead of fusing")]
    ZeroUncertaintyInput { index: usize },
    #[error("inputs are not aligned to one instant ({0} vs {1})")]
    MisalignedInputs(Timestamp, Timestamp),
    #[error("filter needs at least one finite coefficient")]
    InvalidFilter,
    #[error("window must be positive")]
    InvalidWindow,
}

fn ensure_compatible(samples: &[Measurement], same_source: bool) -> Result<(), FusionError> {
    let first = samples.first().ok_or(FusionError::EmptyInput)?;
    for s in &samples[1..] {
        if s.unit != first.unit || s.quantity_kind != first.quantity_kind {
            return Err(FusionError::MixedUnits(
                format!("{} {}", first.unit, first.quantity_kind),
                format!("{} {}", s.unit, s.quantity_kind),
            ));
        }
        if same_source && s.source_id != first.source_id {
            return Err(FusionError::MixedSources(first.source_id.clone(), s.source_id.clone()));
        }
    }
    Ok(())
}

fn canonical_cmp(a: &Measurement, b: &Measurement) -> Ordering {
    a.timestamp
        .cmp(&b.timestamp)
        .then_with(|| a.source_id.cmp(&b.source_id))
        .then_with(|| a.value.total_cmp(&b.value))
        .then_with(|| a.u_random.total_cmp(&b.u_random))
        .then_with(|| a.u_systematic.total_cmp(&b.u_systematic))
}

/// Output of [`window_average`]: one measurement per non-empty window, plus
/// the windows that held no sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowedStream {
    pub measurements: Vec<Measurement>,
    pub gaps: Vec<(Timestamp, Timestamp)>,
}

/// Averages one source's samples over consecutive windows `[k·w, (k+1)·w)`.
///
/// Random parts shrink as `sqrt(Σ u_r²)/N`; systematic parts are fully
/// correlated within a source and are averaged linearly. The output is
/// stamped at the window midpoint.
pub fn window_average(samples: &[Measurement], window: Duration) -> Result<WindowedStream, FusionError> {
    if window.nanos() <= 0 {
        return Err(FusionError::InvalidWindow);
    }
    ensure_compatible(samples, true)?;
    let mut sorted: Vec<&Measurement> = samples.iter().collect();
    sorted.sort_by(|a, b| canonical_cmp(a, b));

    let w = window.nanos();
    let mut out = WindowedStream::default();
    let mut start = 0;
    let mut prev_index: Option<i64> = None;
    while start < sorted.len() {
        let idx = sorted[start].timestamp.nanos().div_euclid(w);
        let end = start + sorted[start..].iter().take_while(|m| m.timestamp.nanos().div_euclid(w) == idx).count();
        if let Some(p) = prev_index {
            for gap in (p + 1)..idx {
                out.gaps.push((Timestamp(gap * w), Timestamp((gap + 1) * w)));
            }
        }
        out.measurements.push(average(&sorted[start..end], Timestamp(idx * w + w / 2)));
        prev_index = Some(idx);
        start = end;
    }
    Ok(out)
}

fn average(group: &[&Measurement], at: Timestamp) -> Measurement {
    let n = group.len() as f64;
    let first = group[0];
    Measurement {
        value: pairwise_sum_by(group, |m| m.value) / n,
        u_random: pairwise_sum_by(group, |m| m.u_random * m.u_random).sqrt() / n,
        u_systematic: pairwise_sum_by(group, |m| m.u_systematic) / n,
        unit: first.unit.clone(),
        quantity_kind: first.quantity_kind,
        timestamp: at,
        source_id: first.source_id.clone(),
        u_timestamp: pairwise_sum_by(group, |m| m.u_timestamp) / n,
    }
}

/// Finite impulse response filter `y[n] = Σ b[j]·x[n−j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    coefficients: Vec<f64>,
}

impl FirFilter {
    pub fn new(coefficients: Vec<f64>) -> Result<Self, FusionError> {
        if coefficients.is_empty() || coefficients.iter().any(|b| !b.is_finite()) {
            return Err(FusionError::InvalidFilter);
        }
        Ok(FirFilter { coefficients })
    }

    /// `k`-tap moving average.
    pub fn moving_average(k: usize) -> Result<Self, FusionError> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn taps(&self) -> usize {
        self.coefficients.len()
    }

    /// Noise gain `sqrt(Σ b²)` applied to uncorrelated components.
    pub fn noise_gain(&self) -> f64 {
        pairwise_sum_by(&self.coefficients, |b| b * b).sqrt()
    }

    /// DC gain `Σ b`.
    pub fn dc_gain(&self) -> f64 {
        pairwise_sum(&self.coefficients)
    }
}

/// Filters a uniformly sampled stream, emitting only the valid region
/// (the first `k − 1` outputs are dropped, no padding).
pub fn fir_low_pass(samples: &[Measurement], filter: &FirFilter) -> Result<Vec<Measurement>, FusionError> {
    ensure_compatible(samples, true)?;
    let k = filter.taps();
    if k > samples.len() {
        return Err(FusionError::FilterLongerThanStream { taps: k, samples: samples.len() });
    }
    check_uniform_spacing(samples)?;
    let b = filter.coefficients();
    let out = (k - 1..samples.len())
        .map(|n| {
            let window = (0..k).map(|j| (b[j], &samples[n - j]));
            let (mut vals, mut rand, mut sys, mut ts) =
                (Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k));
            for (bj, x) in window {
                vals.push(bj * x.value);
                rand.push(bj * bj * x.u_random * x.u_random);
                sys.push(bj * x.u_systematic);
                ts.push(bj.abs() * x.u_timestamp);
            }
            let cur = &samples[n];
            let span = &samples[n + 1 - k..=n];
            // On constant stretches Σ b·x collapses to (Σ b)·x.
            let value = if span.iter().all(|x| x.value == cur.value) {
                filter.dc_gain() * cur.value
            } else {
                pairwise_sum(&vals)
            };
            let u_systematic = if span.iter().all(|x| x.u_systematic == cur.u_systematic) {
                (filter.dc_gain() * cur.u_systematic).abs()
            } else {
                pairwise_sum(&sys).abs()
            };
            Measurement {
                value,
                u_random: pairwise_sum(&rand).sqrt(),
                u_systematic,
                unit: cur.unit.clone(),
                quantity_kind: cur.quantity_kind,
                timestamp: cur.timestamp,
                source_id: cur.source_id.clone(),
                u_timestamp: pairwise_sum(&ts),
            }
        })
        .collect();
    Ok(out)
}

fn check_uniform_spacing(samples: &[Measurement]) -> Result<(), FusionError> {
    if samples.len() < 3 {
        if samples.len() == 2 && samples[1].timestamp <= samples[0].timestamp {
            return Err(FusionError::NonUniformSpacing { index: 1 });
        }
        return Ok(());
    }
    let span = (samples[samples.len() - 1].timestamp - samples[0].timestamp).nanos() as f64;
    let nominal = span / (samples.len() - 1) as f64;
    for i in 1..samples.len() {
        let dt = (samples[i].timestamp - samples[i - 1].timestamp).nanos() as f64;
        if nominal <= 0.0 || (dt - nominal).abs() > SPACING_TOLERANCE * nominal {
            return Err(FusionError::NonUniformSpacing { index: i });
        }
    }
    Ok(())
}

/// Result of [`virtual_sensor_fuse`].
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub measurement: Measurement,
    /// Set when only one input was given and it was passed through unchanged.
    pub single_input: bool,
}

/// Identifier given to a fused stream when none is supplied.
pub fn default_virtual_id<'a>(sources: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = sources.into_iter().collect();
    ids.sort_unstable();
    ids.dedup();
    format!("fuse({})", ids.join("+"))
}

/// Inverse-variance weighted mean of measurements taken at one instant.
///
/// Weights are `1/u_c²`; each output component is the weighted quadrature
/// of the input components, so `u_c(out) = 1/sqrt(Σ wᵢ)`.
pub fn virtual_sensor_fuse(aligned: &[Measurement], virtual_id: Option<&str>) -> Result<Fused, FusionError> {
    ensure_compatible(aligned, false)?;
    if aligned.len() == 1 {
        return Ok(Fused { measurement: aligned[0].clone(), single_input: true });
    }
    let t0 = aligned[0].timestamp;
    for (i, m) in aligned.iter().enumerate() {
        if m.u_c() == 0.0 {
            return Err(FusionError::ZeroUncertaintyInput { index: i });
        }
        if m.timestamp != t0 {
            return Err(FusionError::MisalignedInputs(t0, m.timestamp));
        }
    }
    let mut sorted: Vec<&Measurement> = aligned.iter().collect();
    sorted.sort_by(|a, b| canonical_cmp(a, b));

    let weights: Vec<f64> = sorted.iter().map(|m| 1.0 / (m.u_c() * m.u_c())).collect();
    let total = pairwise_sum(&weights);
    let norm: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let weighted = |f: &dyn Fn(&Measurement) -> f64| {
        pairwise_sum(&norm.iter().zip(&sorted).map(|(a, m)| a * f(m)).collect::<Vec<_>>())
    };
    let quadrature = |f: &dyn Fn(&Measurement) -> f64| {
        pairwise_sum(&norm.iter().zip(&sorted).map(|(a, m)| (a * f(m)).powi(2)).collect::<Vec<_>>()).sqrt()
    };

    let id = match virtual_id {
        Some(id) => id.to_string(),
        None => default_virtual_id(sorted.iter().map(|m| m.source_id.as_str())),
    };
    let first = sorted[0];
    let measurement = Measurement {
        value: pairwise_sum(&weights.iter().zip(&sorted).map(|(w, m)| w * m.value).collect::<Vec<_>>()) / total,
        u_random: quadrature(&|m| m.u_random),
        u_systematic: quadrature(&|m| m.u_systematic),
        unit: first.unit.clone(),
        quantity_kind: first.quantity_kind,
        timestamp: t0,
        source_id: id,
        u_timestamp: weighted(&|m| m.u_timestamp),
    };
    Ok(Fused { measurement, single_input: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Below,
    Above,
}

/// A threshold decision with the probability that it is wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledValue {
    pub label: Label,
    pub p_wrong: f64,
    pub source: Measurement,
    pub threshold: f64,
}

/// Labels `m` against `threshold`, assuming a gaussian measurand with
/// standard deviation `u_c`.
pub fn label_with_uncertainty(m: &Measurement, threshold: f64) -> LabeledValue {
    let label = if m.value >= threshold { Label::Above } else { Label::Below };
    let distance = (m.value - threshold).abs();
    let u = m.u_c();
    let p_wrong = if u > 0.0 { std_normal_cdf(-distance / u) } else { 0.0 };
    LabeledValue { label, p_wrong, source: m.clone(), threshold }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Unit;
    use proptest::prelude::*;

    fn meas(v: f64, ur: f64, us: f64, t_s: f64, src: &str) -> Measurement {
        Measurement::with_unit(v, ur, us, "K".parse::<Unit>().unwrap())
            .unwrap()
            .at(Timestamp::from_secs_f64(t_s))
            .from_source(src)
    }

    fn stream(vals: &[f64], ur: f64, us: f64) -> Vec<Measurement> {
        vals.iter().enumerate().map(|(i, &v)| meas(v, ur, us, i as f64, "S")).collect()
    }

    #[test]
    fn window_average_one_over_sqrt_n() {
        let s = stream(&[2.0; 4], 0.4, 0.1);
        let out = window_average(&s, Duration::from_secs_f64(4.0)).unwrap();
        assert_eq!(out.measurements.len(), 1);
        let m = &out.measurements[0];
        assert_eq!(m.value, 2.0);
        assert!((m.u_random - 0.2).abs() < 1e-15);
        assert_eq!(m.u_systematic, 0.1);
        assert_eq!(m.timestamp, Timestamp::from_secs_f64(2.0));
    }

    #[test]
    fn window_average_single_sample_is_identity_in_value() {
        let s = stream(&[3.5], 0.4, 0.1);
        let out = window_average(&s, Duration::from_secs_f64(1.0)).unwrap();
        let m = &out.measurements[0];
        assert_eq!((m.value, m.u_random, m.u_systematic), (3.5, 0.4, 0.1));
    }

    #[test]
    fn window_average_unequal_uncertainties() {
        let mut s = stream(&[1.0, 2.0, 3.0], 0.0, 0.0);
        for (m, u) in s.iter_mut().zip([0.3, 0.4, 1.2]) {
            m.u_random = u;
        }
        let m = &window_average(&s, Duration::from_secs_f64(3.0)).unwrap().measurements[0];
        assert_eq!(m.value, 2.0);
        assert!((m.u_random - 1.3 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn window_average_reports_gaps_and_errors() {
        let mut s = stream(&[1.0, 1.0], 0.1, 0.0);
        s[1].timestamp = Timestamp::from_secs_f64(5.5);
        let out = window_average(&s, Duration::from_secs_f64(2.0)).unwrap();
        assert_eq!(out.measurements.len(), 2);
        assert_eq!(out.gaps, vec![(Timestamp::from_secs_f64(2.0), Timestamp::from_secs_f64(4.0))]);
        let mut mixed = stream(&[1.0, 1.0], 0.1, 0.0);
        mixed[1].unit = "Pa".parse().unwrap();
        mixed[1].quantity_kind = crate::units::QuantityKind::Pressure;
        assert!(matches!(window_average(&mixed, Duration::from_secs_f64(2.0)), Err(FusionError::MixedUnits(..))));
        let mut sources = stream(&[1.0, 1.0], 0.1, 0.0);
        sources[1].source_id = "other".into();
        assert!(matches!(window_average(&sources, Duration::from_secs_f64(2.0)), Err(FusionError::MixedSources(..))));
        assert_eq!(window_average(&[], Duration::from_secs_f64(1.0)), Err(FusionError::EmptyInput));
    }

    #[test]
    fn fir_two_tap_mean() {
        let s = stream(&[1.0; 5], 1.0, 0.0);
        let out = fir_low_pass(&s, &FirFilter::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(out.len(), 4);
        for m in &out {
            assert_eq!(m.value, 1.0);
            assert!((m.u_random - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert_eq!(out[0].timestamp, s[1].timestamp);
    }

    #[test]
    fn fir_identity_and_three_tap() {
        let s = stream(&[1.0, 4.0, -2.0, 7.0], 0.3, 0.2);
        assert_eq!(fir_low_pass(&s, &FirFilter::new(vec![1.0]).unwrap()).unwrap(), s);
        let s = stream(&[5.0; 6], 1.0, 1.0);
        let out = fir_low_pass(&s, &FirFilter::new(vec![0.25, 0.5, 0.25]).unwrap()).unwrap();
        assert_eq!(out.len(), 4);
        assert!((out[0].u_random - 0.375f64.sqrt()).abs() < 1e-15);
        assert_eq!(out[0].u_systematic, 1.0);
        assert_eq!(out[0].value, 5.0);
    }

    #[test]
    fn fir_errors() {
        let s = stream(&[1.0, 2.0], 0.1, 0.0);
        assert!(matches!(
            fir_low_pass(&s, &FirFilter::new(vec![1.0; 3]).unwrap()),
            Err(FusionError::FilterLongerThanStream { taps: 3, samples: 2 })
        ));
        let mut s = stream(&[1.0; 5], 0.1, 0.0);
        s[3].timestamp = Timestamp::from_secs_f64(3.05);
        assert!(matches!(
            fir_low_pass(&s, &FirFilter::new(vec![0.5, 0.5]).unwrap()),
            Err(FusionError::NonUniformSpacing { .. })
        ));
        let mut ok = stream(&[1.0; 5], 0.1, 0.0);
        ok[2].timestamp = Timestamp::from_secs_f64(2.005);
        assert!(fir_low_pass(&ok, &FirFilter::new(vec![0.5, 0.5]).unwrap()).is_ok());
        assert_eq!(FirFilter::new(vec![]), Err(FusionError::InvalidFilter));
        assert_eq!(FirFilter::new(vec![f64::NAN]), Err(FusionError::InvalidFilter));
    }

    #[test]
    fn fuse_examples() {
        let f = virtual_sensor_fuse(&[meas(10.0, 2.0, 0.0, 0.0, "A"), meas(10.0, 2.0, 0.0, 0.0, "B")], None).unwrap();
        assert_eq!(f.measurement.value, 10.0);
        assert!((f.measurement.u_c() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.measurement.source_id, "fuse(A+B)");

        let f =
            virtual_sensor_fuse(&[meas(1.0, 1.0, 0.0, 0.0, "A"), meas(3.0, 0.0, 1.0, 0.0, "B")], Some("V")).unwrap();
        assert_eq!(f.measurement.value, 2.0);
        assert!((f.measurement.u_c() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((f.measurement.u_random - 0.5).abs() < 1e-15 && (f.measurement.u_systematic - 0.5).abs() < 1e-15);
        assert_eq!(f.measurement.source_id, "V");

        let f = virtual_sensor_fuse(
            &[meas(0.0, 1.0, 0.0, 0.0, "A"), meas(0.0, 2.0, 0.0, 0.0, "B"), meas(0.0, 2.0, 0.0, 0.0, "C")],
            None,
        )
        .unwrap();
        assert!((f.measurement.u_c() - 1.0 / 1.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fuse_single_and_errors() {
        let a = meas(4.0, 0.5, 0.0, 0.0, "A");
        let f = virtual_sensor_fuse(std::slice::from_ref(&a), None).unwrap();
        assert!(f.single_input);
        assert_eq!(f.measurement, a);
        assert!(matches!(
            virtual_sensor_fuse(&[a.clone(), meas(4.0, 0.0, 0.0, 0.0, "B")], None),
            Err(FusionError::ZeroUncertaintyInput { index: 1 })
        ));
        assert!(matches!(
            virtual_sensor_fuse(&[a.clone(), meas(4.0, 1.0, 0.0, 1.0, "B")], None),
            Err(FusionError::MisalignedInputs(..))
        ));
        assert_eq!(virtual_sensor_fuse(&[], None), Err(FusionError::EmptyInput));
    }

    #[test]
    fn label_examples() {
        let m = meas(5.0, 1.0, 0.0, 0.0, "A");
        let l = label_with_uncertainty(&m, 5.0);
        assert_eq!((l.label, l.p_wrong), (Label::Above, 0.5));
        let l = label_with_uncertainty(&meas(8.0, 0.6, 0.8, 0.0, "A"), 5.0);
        assert!((l.p_wrong - 0.001_349_898_031_630_093_3).abs() < 1e-12);
        let l = label_with_uncertainty(&meas(10.0, 1.0, 0.0, 0.0, "A"), 9.0);
        assert!((l.p_wrong - 0.158_655_253_931_457_07).abs() < 1e-12, "{}", l.p_wrong);
        let l = label_with_uncertainty(&meas(2.0, 0.0, 0.0, 0.0, "A"), 9.0);
        assert_eq!((l.label, l.p_wrong), (Label::Below, 0.0));
    }

    proptest! {
        #[test]
        fn fusion_dominance(us in prop::collection::vec(0.01f64..10.0, 2..12)) {
            let ms: Vec<_> = us.iter().enumerate().map(|(i, &u)| meas(i as f64, u, 0.0, 0.0, &format!("S{i}"))).collect();
            let f = virtual_sensor_fuse(&ms, None).unwrap();
            let min = us.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(f.measurement.u_c() < min);
        }

        #[test]
        fn permutation_invariance(
            vals in prop::collection::vec((-100.0f64..100.0, 0.01f64..5.0, 0.0f64..2.0), 2..16),
            rot in 0usize..16,
        ) {
            let ms: Vec<_> = vals.iter().enumerate().map(|(i, &(v, ur, us))| meas(v, ur, us, 0.0, &format!("S{i:02}"))).collect();
            let mut shuffled = ms.clone();
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
            shuffled.reverse();
            prop_assert_eq!(virtual_sensor_fuse(&ms, None).unwrap(), virtual_sensor_fuse(&shuffled, None).unwrap());

            let series: Vec<_> = vals.iter().enumerate().map(|(i, &(v, ur, us))| meas(v, ur, us, i as f64 * 0.5, "S")).collect();
            let mut shuffled = series.clone();
            shuffled.rotate_left(r);
            shuffled.reverse();
            let w = Duration::from_secs_f64(2.0);
            prop_assert_eq!(window_average(&series, w).unwrap(), window_average(&shuffled, w).unwrap());
        }

        #[test]
        fn unit_gain_fir_preserves_constant(v in -1e3f64..1e3, us in 0.0f64..3.0, k in 1usize..6) {
            // Dyadic taps sum to exactly one.
            let mut b = vec![1.0 / (1u64 << k) as f64; (1usize << k) - 1];
            b.push(1.0 / (1u64 << k) as f64);
            let f = FirFilter::new(b).unwrap();
            prop_assert_eq!(f.dc_gain(), 1.0);
            let s = stream(&vec![v; f.taps() + 3], 0.5, us);
            for m in fir_low_pass(&s, &f).unwrap() {
                prop_assert_eq!(m.value, v);
                prop_assert_eq!(m.u_systematic, us);
            }
        }

        #[test]
        fn window_average_sqrt_n_law(n in 1usize..200, u in 0.001f64..10.0) {
            let s = stream(&vec![1.0; n], u, 0.0);
            let out = window_average(&s, Duration::from_secs_f64(1e6)).unwrap();
            let expected = u / (n as f64).sqrt();
            prop_assert!((out.measurements[0].u_random - expected).abs() <= 1e-12 * expected);
        }

        #[test]
        fn label_p_wrong_monotone(d1 in 0.0f64..10.0, d2 in 0.0f64..10.0, u in 0.01f64..5.0) {
            let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let p_near = label_with_uncertainty(&meas(near, u, 0.0, 0.0, "A"), 0.0).p_wrong;
            let p_far = label_with_uncertainty(&meas(far, u, 0.0, 0.0, "A"), 0.0).p_wrong;
            prop_assert!(p_far <= p_near);
            prop_assert!((0.0..=0.5).contains(&p_near));
        }
    }
}

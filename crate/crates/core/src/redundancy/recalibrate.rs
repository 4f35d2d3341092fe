//! In-field recalibration against a consensus reference.

use serde::{Deserialize, Serialize};

use super::RedundancyError;
use crate::time::{Duration, Timestamp};
use crate::twin::{CalibrationCertificate, FitMode, Provenance};
use crate::uncertainty::summation::{pairwise_sum, pairwise_sum_by};
use crate::uncertainty::Measurement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecalibrationOptions {
    /// Fall back to an offset-only fit when the raw spread cannot identify a gain.
    pub offset_only_fallback: bool,
    pub min_pairs: usize,
    /// A gain fit needs the calibrated raw span to exceed this many median
    /// consensus `u_c`, and the raw standard deviation to exceed this many
    /// raw noise standard deviations. The second condition bounds the
    /// attenuation of the gain by noise in the regressor at `1/spread_factor²`.
    pub spread_factor: f64,
    /// Validity of the new certificate; the previous one's length when unset.
    pub validity: Option<Duration>,
    /// Drift parameters of the new certificate; the previous ones when unset.
    pub drift_rate: Option<f64>,
    pub u_drift: Option<f64>,
}

impl Default for RecalibrationOptions {
    fn default() -> Self {
        RecalibrationOptions {
            offset_only_fallback: true,
            min_pairs: 30,
            spread_factor: 10.0,
            validity: None,
            drift_rate: None,
            u_drift: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationResult {
    pub new_certificate: CalibrationCertificate,
    pub fit_residual_rms: f64,
    pub n_points: usize,
    pub condition_number: f64,
}

struct Pair {
    x: f64,
    y: f64,
    w: f64,
    u_r: f64,
    u_s: f64,
    u_c: f64,
}

/// Fits `consensus = a·raw + b` over the window `[from, to)`.
///
/// `raw` holds uncalibrated readings of the sensor in its raw unit, `consensus`
/// a reference that excludes the sensor. Pairs are matched by timestamp.
/// Points are weighted by the consensus random variance; the parameter
/// covariance is scaled by the reduced χ² when that exceeds one, which
/// absorbs the sensor's own noise. The consensus systematic uncertainty is
/// common to every pair and is added to `u_b`.
pub fn infield_recalibrate(
    raw: &[Measurement],
    consensus: &[Measurement],
    window: (Timestamp, Timestamp),
    previous: &CalibrationCertificate,
    options: &RecalibrationOptions,
    at: Timestamp,
) -> Result<RecalibrationResult, RedundancyError> {
    let pairs = pair_up(raw, consensus, window, previous)?;
    let n = pairs.len();
    if n < options.min_pairs.max(2) {
        return Err(RedundancyError::InsufficientPairs { pairs: n, required: options.min_pairs.max(2) });
    }
    let uniform = pairs.iter().any(|p| p.u_r == 0.0);
    let pairs: Vec<Pair> =
        pairs.into_iter().map(|p| Pair { w: if uniform { 1.0 } else { 1.0 / (p.u_r * p.u_r) }, ..p }).collect();

    let (lo, hi) = pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let mut u_cs: Vec<f64> = pairs.iter().map(|p| p.u_c).collect();
    u_cs.sort_by(f64::total_cmp);
    let median_uc = if n % 2 == 1 { u_cs[n / 2] } else { 0.5 * (u_cs[n / 2 - 1] + u_cs[n / 2]) };
    let x_mean = pairwise_sum_by(&pairs, |p| p.x) / n as f64;
    let s_x = (pairwise_sum_by(&pairs, |p| (p.x - x_mean).powi(2)) / (n - 1) as f64).sqrt();
    let raw_noise = previous.u_noise / previous.gain.abs();
    let identifiable =
        (hi - lo) * previous.gain.abs() > options.spread_factor * median_uc && s_x > options.spread_factor * raw_noise;

    let w_total = pairwise_sum_by(&pairs, |p| p.w);
    let x_bar = pairwise_sum_by(&pairs, |p| p.w * p.x) / w_total;
    let y_bar = pairwise_sum_by(&pairs, |p| p.w * p.y) / w_total;
    let u_s_cons = pairwise_sum_by(&pairs, |p| p.u_s) / n as f64;

    let fit = if identifiable {
        let sxx = pairwise_sum_by(&pairs, |p| p.w * (p.x - x_bar).powi(2));
        if !(sxx > 0.0) {
            return Err(RedundancyError::RankDeficient);
        }
        let sxy = pairwise_sum_by(&pairs, |p| p.w * (p.x - x_bar) * (p.y - y_bar));
        let a = sxy / sxx;
        let b = y_bar - a * x_bar;
        let resid: Vec<f64> = pairs.iter().map(|p| p.y - a * p.x - b).collect();
        let s = scale(&pairs, &resid, 2, uniform);
        let sum_wx2 = pairwise_sum_by(&pairs, |p| p.w * p.x * p.x);
        Fit {
            a,
            u_a: (s / sxx).sqrt(),
            b,
            var_b: s * (1.0 / w_total + x_bar * x_bar / sxx),
            cov_ab: -x_bar * s / sxx,
            resid,
            params: 2,
            condition_number: condition_2x2(w_total, w_total * x_bar, sum_wx2),
            mode: FitMode::Linear,
        }
    } else if options.offset_only_fallback {
        let a = previous.gain;
        let r: Vec<f64> = pairs.iter().map(|p| p.y - a * p.x).collect();
        let b = pairwise_sum(&pairs.iter().zip(&r).map(|(p, ri)| p.w * ri).collect::<Vec<_>>()) / w_total;
        let resid: Vec<f64> = r.iter().map(|ri| ri - b).collect();
        let s = scale(&pairs, &resid, 1, uniform);
        Fit {
            a,
            u_a: previous.u_a,
            b,
            var_b: s / w_total + (x_bar * previous.u_a).powi(2),
            cov_ab: -x_bar * previous.u_a * previous.u_a,
            resid,
            params: 1,
            condition_number: 1.0,
            mode: FitMode::OffsetOnly,
        }
    } else {
        return Err(RedundancyError::RankDeficient);
    };

    let rss = pairwise_sum_by(&fit.resid, |r| r * r);
    let s2_resid = rss / (n - fit.params).max(1) as f64;
    let mean_ur2 = pairwise_sum_by(&pairs, |p| p.u_r * p.u_r) / n as f64;
    let excess = s2_resid - mean_ur2;
    let u_noise = if excess > 0.0 { excess.sqrt() } else { previous.u_noise };
    let validity = options.validity.unwrap_or(previous.valid_until - previous.calibrated_at);

    let new_certificate = CalibrationCertificate {
        certificate_id: format!("{}@{}", previous.certificate_id.split('@').next().unwrap_or_default(), at.nanos()),
        gain: fit.a,
        u_a: fit.u_a,
        offset: fit.b,
        u_b: (fit.var_b + u_s_cons * u_s_cons).sqrt(),
        cov_ab: fit.cov_ab,
        u_noise,
        drift_rate: options.drift_rate.unwrap_or(previous.drift_rate),
        u_drift: options.u_drift.unwrap_or(previous.u_drift),
        calibrated_at: at,
        valid_until: at + validity,
        provenance: Provenance::InField,
        unit: previous.unit.clone(),
        raw_unit: previous.raw_unit.clone(),
        quantity_kind: previous.quantity_kind,
        degree: 1,
        fit_mode: fit.mode,
    };
    Ok(RecalibrationResult {
        new_certificate,
        fit_residual_rms: (rss / n as f64).sqrt(),
        n_points: n,
        condition_number: fit.condition_number,
    })
}

struct Fit {
    a: f64,
    u_a: f64,
    b: f64,
    var_b: f64,
    cov_ab: f64,
    resid: Vec<f64>,
    params: usize,
    condition_number: f64,
    mode: FitMode,
}

/// Covariance scale: reduced χ² when above one. Uniform weights carry no
/// absolute scale, so there the reduced χ² is used as is.
fn scale(pairs: &[Pair], resid: &[f64], params: usize, uniform: bool) -> f64 {
    let dof = pairs.len().saturating_sub(params);
    if dof == 0 {
        return if uniform { 0.0 } else { 1.0 };
    }
    let chi2 = pairwise_sum(&pairs.iter().zip(resid).map(|(p, r)| p.w * r * r).collect::<Vec<_>>());
    let red = chi2 / dof as f64;
    if uniform {
        red
    } else {
        red.max(1.0)
    }
}

/// Condition number of the symmetric matrix `[[p, q], [q, r]]`.
fn condition_2x2(p: f64, q: f64, r: f64) -> f64 {
    let mean = 0.5 * (p + r);
    let rad = (0.25 * (p - r).powi(2) + q * q).sqrt();
    let (hi, lo) = (mean + rad, mean - rad);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn pair_up(
    raw: &[Measurement],
    consensus: &[Measurement],
    (from, to): (Timestamp, Timestamp),
    previous: &CalibrationCertificate,
) -> Result<Vec<Pair>, RedundancyError> {
    let mut out = Vec::new();
    let mut j = 0;
    for r in raw.iter().filter(|m| m.timestamp >= from && m.timestamp < to) {
        while j < consensus.len() && consensus[j].timestamp < r.timestamp {
            j += 1;
        }
        let Some(c) = consensus.get(j).filter(|c| c.timestamp == r.timestamp) else { continue };
        if c.unit != previous.unit {
            return Err(RedundancyError::UnitMismatch {
                expected: previous.unit.symbol().to_string(),
                found: c.unit.symbol().to_string(),
            });
        }
        out.push(Pair { x: r.value, y: c.value, w: 1.0, u_r: c.u_random, u_s: c.u_systematic, u_c: c.u_c() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Unit;

    fn stream(id: &str, f: impl Fn(usize) -> (f64, f64), n: usize) -> Vec<Measurement> {
        (0..n)
            .map(|i| {
                let (v, u) = f(i);
                Measurement::with_unit(v, u, 0.0, Unit::dimensionless())
                    .unwrap()
                    .at(Timestamp::from_secs_f64(i as f64))
                    .from_source(id)
            })
            .collect()
    }

    fn prev() -> CalibrationCertificate {
        CalibrationCertificate::identity("S1", Unit::dimensionless(), Timestamp::ZERO, Timestamp::from_secs_f64(1e6))
    }

    fn window(n: usize) -> (Timestamp, Timestamp) {
        (Timestamp::ZERO, Timestamp::from_secs_f64(n as f64))
    }

    #[test]
    fn noiseless_line_is_exact() {
        let raw = stream("S1", |i| (i as f64, 0.0), 40);
        let cons = stream("K", |i| (2.0 * i as f64 + 1.0, 0.0), 40);
        let at = Timestamp::from_secs_f64(50.0);
        let r = infield_recalibrate(&raw, &cons, window(40), &prev(), &RecalibrationOptions::default(), at).unwrap();
        let c = &r.new_certificate;
        assert!((c.gain - 2.0).abs() < 1e-14);
        assert!((c.offset - 1.0).abs() < 1e-12);
        assert!(c.u_a < 1e-14 && c.u_b < 1e-12, "{c:?}");
        assert_eq!(c.provenance, Provenance::InField);
        assert_eq!(c.calibrated_at, at);
        assert_eq!(c.valid_until, at + Duration::from_secs_f64(1e6));
        assert_eq!(r.n_points, 40);
        assert!(r.condition_number > 1.0 && r.condition_number.is_finite());
        c.validate().unwrap();
    }

    #[test]
    fn constant_raw_offset_only() {
        let raw = stream("S1", |_| (4.0, 0.0), 40);
        let cons = stream("K", |i| (4.5 + if i % 2 == 0 { 0.01 } else { -0.01 }, 0.01), 40);
        let r =
            infield_recalibrate(&raw, &cons, window(40), &prev(), &RecalibrationOptions::default(), Timestamp::ZERO)
                .unwrap();
        assert_eq!(r.new_certificate.fit_mode, FitMode::OffsetOnly);
        assert_eq!(r.new_certificate.gain, 1.0);
        assert!((r.new_certificate.offset - 0.5).abs() < 1e-12);
        let strict = RecalibrationOptions { offset_only_fallback: false, ..Default::default() };
        assert_eq!(
            infield_recalibrate(&raw, &cons, window(40), &prev(), &strict, Timestamp::ZERO),
            Err(RedundancyError::RankDeficient)
        );
    }

    #[test]
    fn too_few_pairs() {
        let raw = stream("S1", |i| (i as f64, 0.0), 20);
        let cons = stream("K", |i| (i as f64, 0.1), 20);
        assert_eq!(
            infield_recalibrate(&raw, &cons, window(20), &prev(), &RecalibrationOptions::default(), Timestamp::ZERO),
            Err(RedundancyError::InsufficientPairs { pairs: 20, required: 30 })
        );
    }
}

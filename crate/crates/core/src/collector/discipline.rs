//! Clock discipline: a weighted straight-line fit of offset against time.

use serde::{Deserialize, Serialize};

use super::clock::ClockModel;
use super::SyncError;
use crate::time::Timestamp;
use crate::uncertainty::summation::{pairwise_sum, pairwise_sum_by};
use crate::uncertainty::Measurement;

/// Fitted clock model with parameter uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockEstimate {
    pub node_id: String,
    pub reference: Timestamp,
    /// Offset at `reference`, seconds.
    pub offset: f64,
    pub skew: f64,
    pub u_offset: f64,
    pub u_skew: f64,
    pub cov_offset_skew: f64,
    /// Fit residuals in input order, seconds.
    pub residuals: Vec<f64>,
    pub reduced_chi2: f64,
}

impl ClockEstimate {
    /// Estimate for a node known to run on the reference clock.
    pub fn exact(node_id: impl Into<String>, reference: Timestamp) -> Self {
        ClockEstimate {
            node_id: node_id.into(),
            reference,
            offset: 0.0,
            skew: 0.0,
            u_offset: 0.0,
            u_skew: 0.0,
            cov_offset_skew: 0.0,
            residuals: Vec::new(),
            reduced_chi2: 0.0,
        }
    }

    pub fn to_clock_model(&self, jitter_sigma: f64) -> ClockModel {
        ClockModel {
            node_id: self.node_id.clone(),
            offset: self.offset,
            skew: self.skew,
            jitter_sigma,
            reference: self.reference,
        }
    }

    /// Inverts the clock model: maps a local reading to the common time base,
    /// returning the mapped instant and its standard uncertainty in seconds
    /// from the parameter covariance.
    pub fn to_common_time(&self, local: Timestamp) -> (Timestamp, f64) {
        if self.offset == 0.0 && self.skew == 0.0 {
            return (local, self.u_offset);
        }
        let local_ns = (local - self.reference).nanos() as f64;
        let tau_ns = (local_ns - self.offset * 1e9) / (1.0 + self.skew);
        let tau = tau_ns * 1e-9;
        let g = 1.0 / (1.0 + self.skew);
        let var = g * g * (self.u_offset.powi(2) + tau * tau * self.u_skew.powi(2) + 2.0 * tau * self.cov_offset_skew);
        (Timestamp(self.reference.nanos() + tau_ns.round() as i64), var.max(0.0).sqrt())
    }

    /// Offset predicted at `t`, seconds.
    pub fn offset_at(&self, t: Timestamp) -> f64 {
        self.offset + self.skew * t.secs_since(self.reference)
    }
}

/// Fits `offset(t) = offset₀ + skew·(t − reference)` to a history of offset
/// measurements.
///
/// Weights are `1/u_random²` (uniform when any point has zero random
/// uncertainty). The parameter covariance is scaled by the reduced χ² when it
/// exceeds one. The mean systematic uncertainty of the history is common to
/// all points and is added to the offset uncertainty.
pub fn discipline_clock(
    node_id: &str,
    history: &[Measurement],
    reference: Timestamp,
) -> Result<ClockEstimate, SyncError> {
    if history.len() < 2 {
        return Err(SyncError::TooFewPoints(history.len()));
    }
    let tau: Vec<f64> = history.iter().map(|m| m.timestamp.secs_since(reference)).collect();
    let y: Vec<f64> = history.iter().map(|m| m.value).collect();
    let weights: Vec<f64> = if history.iter().all(|m| m.u_random > 0.0) {
        history.iter().map(|m| 1.0 / (m.u_random * m.u_random)).collect()
    } else {
        vec![1.0; history.len()]
    };
    let uniform = history.iter().any(|m| m.u_random == 0.0);

    let w_total = pairwise_sum(&weights);
    let wmean = |v: &[f64]| pairwise_sum(&weights.iter().zip(v).map(|(w, x)| w * x).collect::<Vec<_>>()) / w_total;
    let tau_bar = wmean(&tau);
    let y_bar = wmean(&y);
    let dt: Vec<f64> = tau.iter().map(|t| t - tau_bar).collect();
    let sxx = pairwise_sum(&weights.iter().zip(&dt).map(|(w, d)| w * d * d).collect::<Vec<_>>());
    if !(sxx > 0.0) || dt.iter().all(|d| *d == 0.0) {
        return Err(SyncError::DegenerateFit);
    }
    let sxy =
        pairwise_sum(&weights.iter().zip(&dt).zip(&y).map(|((w, d), yi)| w * d * (yi - y_bar)).collect::<Vec<_>>());
    let skew = sxy / sxx;
    let offset = y_bar - skew * tau_bar;

    let residuals: Vec<f64> = y.iter().zip(&dt).map(|(yi, d)| yi - y_bar - skew * d).collect();
    let n = history.len();
    let chi2 = pairwise_sum(&weights.iter().zip(&residuals).map(|(w, r)| w * r * r).collect::<Vec<_>>());
    let reduced_chi2 = if n > 2 { chi2 / (n - 2) as f64 } else { 0.0 };
    // Unweighted fits have no absolute scale; their covariance comes from the residuals.
    let scale = if uniform { reduced_chi2 } else { reduced_chi2.max(1.0) };

    let var_skew = scale / sxx;
    let var_mean = scale / w_total;
    let var_offset = var_mean + tau_bar * tau_bar * var_skew;
    let cov = -tau_bar * var_skew;
    let u_sys = pairwise_sum_by(history, |m| m.u_systematic) / n as f64;

    Ok(ClockEstimate {
        node_id: node_id.to_string(),
        reference,
        offset,
        skew,
        u_offset: (var_offset + u_sys * u_sys).sqrt(),
        u_skew: var_skew.sqrt(),
        cov_offset_skew: cov,
        residuals,
        reduced_chi2,
    })
}

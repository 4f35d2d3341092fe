//! Alignment of streams onto a uniform grid by linear interpolation.

use serde::{Deserialize, Serialize};

use super::AlignError;
use crate::time::{Duration, Timestamp};
use crate::uncertainty::Measurement;

/// Grid points `origin + k·period`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Timestamp,
    pub period: Duration,
}

impl Grid {
    pub fn new(origin: Timestamp, period: Duration) -> Self {
        assert!(period.nanos() > 0, "grid period must be positive");
        Grid { origin, period }
    }

    /// Grid points in the closed interval `[lo, hi]`.
    pub fn points_within(&self, lo: Timestamp, hi: Timestamp) -> Vec<Timestamp> {
        let p = self.period.nanos();
        let first = (lo.nanos() - self.origin.nanos()).div_euclid(p)
            + i64::from((lo.nanos() - self.origin.nanos()).rem_euclid(p) != 0);
        let last = (hi.nanos() - self.origin.nanos()).div_euclid(p);
        (first..=last).map(|k| Timestamp(self.origin.nanos() + k * p)).collect()
    }
}

/// Interpolates every stream onto the grid points shared by all of them.
///
/// Grid points are restricted to the intersection of the stream spans (no
/// extrapolation) and, when given, to the half-open window `[from, to)`.
/// Random components combine in quadrature with the interpolation weights,
/// systematic components linearly. Timestamp uncertainty is converted to a
/// value uncertainty `|dv/dt|·u_t` and added to the random part; the output
/// carries `u_timestamp = 0`.
pub fn align_streams(
    streams: &[Vec<Measurement>],
    grid: &Grid,
    window: Option<(Timestamp, Timestamp)>,
) -> Result<Vec<Vec<Measurement>>, AlignError> {
    if streams.is_empty() {
        return Ok(Vec::new());
    }
    let mut lo = Timestamp(i64::MIN);
    let mut hi = Timestamp(i64::MAX);
    for (i, s) in streams.iter().enumerate() {
        let (first, last) = match (s.first(), s.last()) {
            (Some(f), Some(l)) => (f.timestamp, l.timestamp),
            _ => return Err(AlignError::EmptyStream { index: i }),
        };
        if s.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(AlignError::NotTimeOrdered { index: i });
        }
        lo = lo.max(first);
        hi = hi.min(last);
    }
    if let Some((from, to)) = window {
        lo = lo.max(from);
        hi = hi.min(to - Duration(1));
    }
    if hi < lo {
        return Err(AlignError::GridOutsideStream);
    }
    let points = grid.points_within(lo, hi);
    if points.is_empty() {
        return Err(AlignError::GridOutsideStream);
    }
    Ok(streams.iter().map(|s| points.iter().map(|&t| interpolate(s, t)).collect()).collect())
}

/// Slope around sample `i` from its neighbours, per second.
fn local_slope(s: &[Measurement], i: usize) -> f64 {
    let (a, b) = match (i.checked_sub(1), s.get(i + 1)) {
        (Some(p), Some(_)) => (p, i + 1),
        (Some(p), None) => (p, i),
        (None, Some(_)) => (i, i + 1),
        (None, None) => return 0.0,
    };
    (s[b].value - s[a].value) / s[b].timestamp.secs_since(s[a].timestamp)
}

fn interpolate(s: &[Measurement], t: Timestamp) -> Measurement {
    let i = s.partition_point(|m| m.timestamp < t);
    if s[i].timestamp == t {
        let m = &s[i];
        let mut out = m.clone();
        if m.u_timestamp > 0.0 {
            out.u_random = m.u_random.hypot(local_slope(s, i) * m.u_timestamp);
            out.u_timestamp = 0.0;
        }
        return out;
    }
    let (a, b) = (&s[i - 1], &s[i]);
    let span = b.timestamp.secs_since(a.timestamp);
    let w = t.secs_since(a.timestamp) / span;
    let slope = (b.value - a.value) / span;
    let u_t = (1.0 - w) * a.u_timestamp + w * b.u_timestamp;
    let u_rand = ((1.0 - w) * a.u_random).hypot(w * b.u_random);
    Measurement {
        value: (1.0 - w) * a.value + w * b.value,
        u_random: u_rand.hypot(slope * u_t),
        u_systematic: (1.0 - w) * a.u_systematic + w * b.u_systematic,
        unit: a.unit.clone(),
        quantity_kind: a.quantity_kind,
        timestamp: t,
        source_id: a.source_id.clone(),
        u_timestamp: 0.0,
    }
}

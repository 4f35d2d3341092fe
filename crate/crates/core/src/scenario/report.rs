//! Per-stream summary of a run: how honest the enriched uncertainty was
//! against the simulated truth, and what the redundancy workflow did.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::run::{RunOutput, StreamInfo, StreamKind};
use crate::redundancy::{AuditRecord, WorkflowEvent};
use crate::uncertainty::Measurement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub stream_id: String,
    pub kind: StreamKind,
    pub n: usize,
    /// Mean of (value - truth) / u_c over points with a truth value.
    pub z_mean: Option<f64>,
    pub z_std: Option<f64>,
    /// Fraction of points with |value - truth| <= 2 u_c.
    pub coverage_k2: Option<f64>,
    pub windows_scored: usize,
    pub windows_flagged: usize,
    pub swaps: usize,
    pub certificate_id: Option<String>,
}

pub fn build_report(
    streams: &[StreamInfo],
    aligned: &BTreeMap<String, Vec<Measurement>>,
    labels: &BTreeMap<String, usize>,
    truth: &BTreeMap<String, Vec<Measurement>>,
    audit: &[AuditRecord],
) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for s in streams {
        let series = aligned.get(&s.id).map(Vec::as_slice).unwrap_or_default();
        let n = if s.kind == StreamKind::Labels { labels.get(&s.id).copied().unwrap_or(0) } else { series.len() };
        let (z_mean, z_std, coverage_k2) = match truth.get(&s.id) {
            Some(t) => z_stats(series, t),
            None => (None, None, None),
        };
        let (mut scored, mut flagged, mut swaps) = (0, 0, 0);
        for r in audit {
            match &r.event {
                WorkflowEvent::DriftReport(d) if d.sensor_id == s.id => {
                    scored += 1;
                    flagged += usize::from(d.flagged);
                }
                WorkflowEvent::CertificateSwap { sensor_id, .. } if *sensor_id == s.id => swaps += 1,
                _ => {}
            }
        }
        rows.push(ReportRow {
            stream_id: s.id.clone(),
            kind: s.kind,
            n,
            z_mean,
            z_std,
            coverage_k2,
            windows_scored: scored,
            windows_flagged: flagged,
            swaps,
            certificate_id: s.certificate_id.clone(),
        });
    }
    rows
}

fn z_stats(series: &[Measurement], truth: &[Measurement]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let truth: BTreeMap<_, _> = truth.iter().map(|m| (m.timestamp, m.value)).collect();
    let mut z = Vec::new();
    let mut covered = 0usize;
    for m in series {
        let (Some(t), u) = (truth.get(&m.timestamp), m.u_c()) else { continue };
        if u <= 0.0 {
            continue;
        }
        let e = m.value - t;
        z.push(e / u);
        covered += usize::from(e.abs() <= 2.0 * u);
    }
    if z.is_empty() {
        return (None, None, None);
    }
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let std = if z.len() > 1 { (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (Some(mean), Some(std), Some(covered as f64 / n))
}

pub fn report_from_run(run: &RunOutput) -> Vec<ReportRow> {
    let labels = run.labels.iter().map(|(k, v)| (k.clone(), v.len())).collect();
    build_report(&run.streams, &run.aligned, &labels, &run.truth, &run.audit)
}

pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn render_report(rows: &[ReportRow]) -> String {
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:<8} {:>7} {:>8} {:>7} {:>7} {:>6} {:>6} {:>5}  certificate",
        "stream", "kind", "n", "z_mean", "z_std", "cov_k2", "scored", "flags", "swaps"
    );
    for r in rows {
        let kind = match r.kind {
            StreamKind::Physical => "physical",
            StreamKind::Virtual => "virtual",
            StreamKind::Labels => "labels",
        };
        let _ = writeln!(
            s,
            "{:<16} {:<8} {:>7} {:>8} {:>7} {:>7} {:>6} {:>6} {:>5}  {}",
            r.stream_id,
            kind,
            r.n,
            opt(r.z_mean),
            opt(r.z_std),
            opt(r.coverage_k2),
            r.windows_scored,
            r.windows_flagged,
            r.swaps,
            r.certificate_id.as_deref().unwrap_or("-"),
        );
    }
    s
}

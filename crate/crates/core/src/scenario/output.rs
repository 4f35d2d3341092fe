//! Run directory layout.
//!
//! ```text
//! run.json                 scenario name and seed
//! events.jsonl             every simulation event, in execution order
//! audit.jsonl              drift / recalibration audit trail
//! streams.json             index of output streams
//! digests.json             final twin and clock state digests
//! collected/<id>.csv       samples on the common time base
//! aligned/<id>.csv         grid-aligned physical and virtual streams
//! truth/<id>.csv           simulated measurand at the aligned grid points
//! labels/<id>.csv          threshold labels
//! state/<id>.json          final twin state
//! state/clocks.json        final clock estimates
//! submodels/<id>.json      measurement submodel per stream
//! report.csv, report.txt   per-stream summary
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::events::write_events;
use super::report::{build_report, render_report, report_from_run, write_report_csv, ReportRow};
use super::run::{Digests, RunOutput, StreamInfo, StreamKind};
use super::submodel::{export_stream_submodel, MeasurementSubmodel};
use crate::collector::persist::{read_stream_file, write_stream_file, PersistError};
use crate::fusion::LabeledValue;
use crate::redundancy::{write_audit_log, AuditRecord};
use crate::time::Timestamp;
use crate::twin::CalibrationCertificate;
use crate::uncertainty::Measurement;

pub const LABEL_CSV_HEADER: [&str; 8] =
    ["timestamp_tai_ns", "source_id", "value", "u_c", "unit", "threshold", "label", "p_wrong"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Persist { path: PathBuf, source: PersistError },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unknown stream `{0}`")]
    UnknownStream(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

fn fmt_err(path: &Path) -> impl FnOnce(String) -> OutputError + '_ {
    move |message| OutputError::Format { path: path.to_path_buf(), message }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub seed: u64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| fmt_err(path)(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, OutputError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| fmt_err(path)(e.to_string()))
}

fn write_lines(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), OutputError> {
    let mut w = BufWriter::new(File::create(path).map_err(io(path))?);
    f(&mut w).and_then(|_| w.flush()).map_err(io(path))
}

fn write_streams(dir: &Path, streams: &BTreeMap<String, Vec<Measurement>>) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    for (id, s) in streams {
        let path = dir.join(format!("{id}.csv"));
        write_stream_file(&path, s).map_err(|source| OutputError::Persist { path: path.clone(), source })?;
    }
    Ok(())
}

pub fn write_labels(path: &Path, labels: &[LabeledValue]) -> Result<(), OutputError> {
    let f = File::create(path).map_err(io(path))?;
    let mut w = csv::Writer::from_writer(f);
    let err = |e: csv::Error| fmt_err(path)(e.to_string());
    w.write_record(LABEL_CSV_HEADER).map_err(err)?;
    for l in labels {
        let label = match l.label {
            crate::fusion::Label::Above => "above",
            crate::fusion::Label::Below => "below",
        };
        let m = &l.source;
        w.write_record([
            m.timestamp.nanos().to_string(),
            m.source_id.clone(),
            m.value.to_string(),
            m.u_c().to_string(),
            m.unit.symbol().to_string(),
            l.threshold.to_string(),
            label.to_string(),
            l.p_wrong.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(io(path))
}

fn count_rows(path: &Path) -> Result<usize, OutputError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| fmt_err(path)(e.to_string()))?;
    let mut n = 0;
    for rec in r.records() {
        rec.map_err(|e| fmt_err(path)(e.to_string()))?;
        n += 1;
    }
    Ok(n)
}

/// Writes every artifact of `run` under `dir`, creating it if needed.
pub fn write_run(run: &RunOutput, dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    write_json(&dir.join("run.json"), &RunManifest { scenario: run.scenario.clone(), seed: run.seed })?;
    write_lines(&dir.join("events.jsonl"), |w| write_events(w, &run.events))?;
    write_lines(&dir.join("audit.jsonl"), |w| write_audit_log(w, &run.audit))?;
    write_json(&dir.join("streams.json"), &run.streams)?;
    write_json(&dir.join("digests.json"), &run.digests)?;
    write_streams(&dir.join("collected"), &run.collected)?;
    write_streams(&dir.join("aligned"), &run.aligned)?;
    write_streams(&dir.join("truth"), &run.truth)?;
    let labels = dir.join("labels");
    fs::create_dir_all(&labels).map_err(io(&labels))?;
    for (id, l) in &run.labels {
        write_labels(&labels.join(format!("{id}.csv")), l)?;
    }
    let state = dir.join("state");
    fs::create_dir_all(&state).map_err(io(&state))?;
    for (id, t) in &run.twins {
        write_json(&state.join(format!("{id}.json")), t)?;
    }
    write_json(&state.join("clocks.json"), &run.clocks)?;
    let sub = dir.join("submodels");
    fs::create_dir_all(&sub).map_err(io(&sub))?;
    for info in &run.streams {
        write_json(&sub.join(format!("{}.json", info.id)), &submodel_for(run, &info.id, None)?)?;
    }
    write_report(dir, &report_from_run(run))
}

fn write_report(dir: &Path, rows: &[ReportRow]) -> Result<(), OutputError> {
    let path = dir.join("report.csv");
    let f = File::create(&path).map_err(io(&path))?;
    write_report_csv(f, rows).map_err(|e| fmt_err(&path)(e.to_string()))?;
    let txt = dir.join("report.txt");
    fs::write(&txt, render_report(rows)).map_err(io(&txt))
}

/// Submodel of one stream of an in-memory run.
pub fn submodel_for(
    run: &RunOutput,
    stream_id: &str,
    range: Option<(Timestamp, Timestamp)>,
) -> Result<MeasurementSubmodel, OutputError> {
    let info =
        run.streams.iter().find(|s| s.id == stream_id).ok_or_else(|| OutputError::UnknownStream(stream_id.into()))?;
    let cert = run.twins.get(stream_id).map(|t| &t.certificate);
    let series: Vec<Measurement> = match info.kind {
        StreamKind::Labels => run.labels.get(stream_id).map(|l| {
            l.iter().map(|x| Measurement { u_random: x.source.u_c(), u_systematic: 0.0, ..x.source.clone() }).collect()
        }),
        _ => run.aligned.get(stream_id).cloned(),
    }
    .unwrap_or_default();
    Ok(export_stream_submodel(info, cert, &series, range))
}

/// The parts of a written run needed for reporting and export.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDirectory {
    pub manifest: RunManifest,
    pub streams: Vec<StreamInfo>,
    pub digests: Digests,
    pub aligned: BTreeMap<String, Vec<Measurement>>,
    pub truth: BTreeMap<String, Vec<Measurement>>,
    pub label_counts: BTreeMap<String, usize>,
    pub audit: Vec<AuditRecord>,
}

pub fn load_run_dir(dir: &Path) -> Result<RunDirectory, OutputError> {
    let manifest = read_json(&dir.join("run.json"))?;
    let streams: Vec<StreamInfo> = read_json(&dir.join("streams.json"))?;
    let digests = read_json(&dir.join("digests.json"))?;
    let mut aligned = BTreeMap::new();
    let mut truth = BTreeMap::new();
    let mut label_counts = BTreeMap::new();
    let read = |path: PathBuf| read_stream_file(&path).map_err(|source| OutputError::Persist { path, source });
    for s in &streams {
        if s.kind == StreamKind::Labels {
            let p = dir.join("labels").join(format!("{}.csv", s.id));
            if p.exists() {
                label_counts.insert(s.id.clone(), count_rows(&p)?);
            }
            continue;
        }
        let p = dir.join("aligned").join(format!("{}.csv", s.id));
        if p.exists() {
            aligned.insert(s.id.clone(), read(p)?);
        }
        let p = dir.join("truth").join(format!("{}.csv", s.id));
        if p.exists() {
            truth.insert(s.id.clone(), read(p)?);
        }
    }
    let path = dir.join("audit.jsonl");
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let mut audit = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        audit.push(serde_json::from_str(line).map_err(|e| fmt_err(&path)(format!("line {}: {e}", i + 1)))?);
    }
    Ok(RunDirectory { manifest, streams, digests, aligned, truth, label_counts, audit })
}

impl RunDirectory {
    pub fn report(&self) -> Vec<ReportRow> {
        build_report(&self.streams, &self.aligned, &self.label_counts, &self.truth, &self.audit)
    }

    /// Rebuilds the submodel of `stream_id`; the certificate comes from the
    /// saved twin state in `dir`.
    pub fn submodel(
        &self,
        dir: &Path,
        stream_id: &str,
        range: Option<(Timestamp, Timestamp)>,
    ) -> Result<MeasurementSubmodel, OutputError> {
        let info = self
            .streams
            .iter()
            .find(|s| s.id == stream_id)
            .ok_or_else(|| OutputError::UnknownStream(stream_id.into()))?;
        let cert = if info.kind == StreamKind::Physical {
            let path = dir.join("state").join(format!("{stream_id}.json"));
            let state: serde_json::Value = read_json(&path)?;
            let c: CalibrationCertificate =
                serde_json::from_value(state["certificate"].clone()).map_err(|e| fmt_err(&path)(e.to_string()))?;
            Some(c)
        } else {
            None
        };
        let series = match info.kind {
            StreamKind::Labels => read_label_sources(&dir.join("labels").join(format!("{stream_id}.csv")), info)?,
            _ => self.aligned.get(stream_id).cloned().unwrap_or_default(),
        };
        Ok(export_stream_submodel(info, cert.as_ref(), &series, range))
    }
}

/// Source values of a label CSV. Only value, u_c and time survive in that
/// file, so label submodels report the whole u_c as random.
fn read_label_sources(path: &Path, info: &StreamInfo) -> Result<Vec<Measurement>, OutputError> {
    let f = File::open(path).map_err(io(path))?;
    let mut r = csv::Reader::from_reader(BufReader::new(f));
    let mut out = Vec::new();
    let unit = info.unit.as_deref().and_then(|u| u.parse().ok()).unwrap_or_else(crate::units::Unit::dimensionless);
    for rec in r.records() {
        let rec = rec.map_err(|e| fmt_err(path)(e.to_string()))?;
        let num = |i: usize| {
            rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| fmt_err(path)(format!("bad column {i}")))
        };
        let ns: i64 = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| fmt_err(path)("bad timestamp".into()))?;
        out.push(Measurement {
            value: num(2)?,
            u_random: num(3)?,
            u_systematic: 0.0,
            unit: unit.clone(),
            quantity_kind: info.quantity_kind.unwrap_or(crate::units::QuantityKind::Dimensionless),
            timestamp: Timestamp::from_nanos(ns),
            source_id: rec.get(1).unwrap_or_default().to_string(),
            u_timestamp: 0.0,
        });
    }
    Ok(out)
}

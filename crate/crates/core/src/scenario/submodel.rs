//! Self-describing export of one stream as a measurement submodel.
//!
//! The document is JSON in the shape of an asset administration shell
//! submodel: an identified container of typed elements, each with a unique
//! `id_short`. Quantities always carry their unit and both uncertainty
//! components; the series itself is referenced by relative path.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::run::{StreamInfo, StreamKind};
use crate::collector::persist::STREAM_CSV_HEADER;
use crate::time::Timestamp;
use crate::twin::{CalibrationCertificate, Provenance};
use crate::uncertainty::Measurement;

pub const SUBMODEL_SCHEMA: &str = "metro-twin/measurement-submodel/1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSubmodel {
    pub schema: String,
    pub asset_id: String,
    pub submodel_id: String,
    pub id_short: String,
    pub elements: Vec<SubmodelElement>,
}

/// One identified element. `semantic_id` names what the element means,
/// independent of its display `id_short`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmodelElement {
    pub id_short: String,
    pub semantic_id: String,
    #[serde(flatten)]
    pub value: ElementValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type")]
pub enum ElementValue {
    Property { value: String },
    QuantityProperty { value: f64, unit: String, u_random: f64, u_systematic: f64 },
    TimestampProperty { tai_ns: i64, rfc3339: String },
    TimeSeriesReference { path: String, media_type: String, columns: Vec<String> },
}

#[derive(Debug, Error, PartialEq)]
pub enum SubmodelError {
    #[error("malformed submodel JSON: {0}")]
    Parse(String),
    #[error("unsupported schema `{0}`")]
    Schema(String),
    #[error("empty identifier `{0}`")]
    EmptyId(&'static str),
    #[error("duplicate id_short `{0}`")]
    DuplicateIdShort(String),
    #[error("element `{0}`: {1}")]
    Element(String, String),
}

const SEMANTIC_PREFIX: &str = "urn:metro-twin:semantic:";

fn element(id: &str, semantic: &str, value: ElementValue) -> SubmodelElement {
    SubmodelElement { id_short: id.into(), semantic_id: format!("{SEMANTIC_PREFIX}{semantic}"), value }
}

fn prop(id: &str, semantic: &str, value: impl ToString) -> SubmodelElement {
    element(id, semantic, ElementValue::Property { value: value.to_string() })
}

fn stamp(id: &str, semantic: &str, t: Timestamp) -> SubmodelElement {
    element(id, semantic, ElementValue::TimestampProperty { tai_ns: t.nanos(), rfc3339: t.to_rfc3339_utc() })
}

fn quantity(id: &str, semantic: &str, value: f64, unit: &str, u_random: f64, u_systematic: f64) -> SubmodelElement {
    element(id, semantic, ElementValue::QuantityProperty { value, unit: unit.into(), u_random, u_systematic })
}

/// Builds the submodel for one stream. `series` is the aligned stream (or
/// the labelled source values for a label stream), restricted to the closed
/// `range` when given; `series_path` is where its CSV lives relative to the
/// run directory.
pub fn export_submodel(
    info: &StreamInfo,
    certificate: Option<&CalibrationCertificate>,
    series: &[Measurement],
    range: Option<(Timestamp, Timestamp)>,
    series_path: &str,
    columns: &[&str],
) -> MeasurementSubmodel {
    let series: Vec<&Measurement> =
        series.iter().filter(|m| range.is_none_or(|(a, b)| m.timestamp >= a && m.timestamp <= b)).collect();
    let mut el = vec![prop("StreamId", "stream-id", &info.id)];
    let (kind, provenance) = match info.kind {
        StreamKind::Physical => ("physical", "sensor"),
        StreamKind::Virtual => ("virtual", "virtual"),
        StreamKind::Labels => ("labels", "virtual"),
    };
    el.push(prop("StreamKind", "stream-kind", kind));
    el.push(prop("Provenance", "stream-provenance", provenance));
    if let Some(q) = info.quantity_kind {
        el.push(prop("QuantityKind", "quantity-kind", q.as_str()));
    }
    if let Some(u) = &info.unit {
        el.push(prop("Unit", "unit", u));
    }
    if let Some(n) = &info.node_id {
        el.push(prop("NodeId", "node-id", n));
    }
    if let Some(r) = &info.rule {
        el.push(prop("Rule", "virtual-sensor-rule", r));
    }
    if let Some((a, b)) = range {
        el.push(stamp("RangeFrom", "range-from", a));
        el.push(stamp("RangeTo", "range-to", b));
    }
    el.push(prop("SampleCount", "sample-count", series.len()));
    if let (Some(first), Some(last)) = (series.first(), series.last()) {
        el.push(stamp("FirstSample", "first-sample-time", first.timestamp));
        el.push(stamp("LastSample", "last-sample-time", last.timestamp));
        el.push(quantity(
            "LatestValue",
            "latest-value",
            last.value,
            last.unit.symbol(),
            last.u_random,
            last.u_systematic,
        ));
    }
    if let Some(c) = certificate {
        let prov = match c.provenance {
            Provenance::Laboratory => "laboratory",
            Provenance::InField => "in_field",
        };
        el.push(prop("CertificateId", "certificate-id", &c.certificate_id));
        el.push(prop("CertificateProvenance", "certificate-provenance", prov));
        el.push(stamp("CalibratedAt", "calibrated-at", c.calibrated_at));
        el.push(stamp("ValidUntil", "valid-until", c.valid_until));
        el.push(quantity("Gain", "calibration-gain", c.gain, c.gain_unit().symbol(), 0.0, c.u_a));
        el.push(quantity("Offset", "calibration-offset", c.offset, c.unit.symbol(), 0.0, c.u_b));
        el.push(quantity("NoiseUncertainty", "calibration-noise", c.u_noise, c.unit.symbol(), 0.0, 0.0));
    }
    el.push(element(
        "Series",
        "time-series",
        ElementValue::TimeSeriesReference {
            path: series_path.into(),
            media_type: "text/csv".into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        },
    ));
    MeasurementSubmodel {
        schema: SUBMODEL_SCHEMA.into(),
        asset_id: format!("urn:metro-twin:asset:{}", info.node_id.as_deref().unwrap_or("virtual")),
        submodel_id: format!("urn:metro-twin:submodel:{}", info.id),
        id_short: info.id.clone(),
        elements: el,
    }
}

pub fn export_stream_submodel(
    info: &StreamInfo,
    certificate: Option<&CalibrationCertificate>,
    series: &[Measurement],
    range: Option<(Timestamp, Timestamp)>,
) -> MeasurementSubmodel {
    match info.kind {
        StreamKind::Labels => export_submodel(
            info,
            None,
            series,
            range,
            &format!("labels/{}.csv", info.id),
            &super::output::LABEL_CSV_HEADER,
        ),
        _ => export_submodel(info, certificate, series, range, &format!("aligned/{}.csv", info.id), &STREAM_CSV_HEADER),
    }
}

/// Parses and validates a submodel document.
pub fn import_submodel(text: &str) -> Result<MeasurementSubmodel, SubmodelError> {
    let sm: MeasurementSubmodel = serde_json::from_str(text).map_err(|e| SubmodelError::Parse(e.to_string()))?;
    sm.validate()?;
    Ok(sm)
}

impl MeasurementSubmodel {
    pub fn validate(&self) -> Result<(), SubmodelError> {
        if self.schema != SUBMODEL_SCHEMA {
            return Err(SubmodelError::Schema(self.schema.clone()));
        }
        for (name, v) in
            [("asset_id", &self.asset_id), ("submodel_id", &self.submodel_id), ("id_short", &self.id_short)]
        {
            if v.trim().is_empty() {
                return Err(SubmodelError::EmptyId(name));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &self.elements {
            let id = e.id_short.as_str();
            let bad = |msg: &str| SubmodelError::Element(id.to_string(), msg.to_string());
            if id.trim().is_empty() {
                return Err(SubmodelError::EmptyId("element id_short"));
            }
            if e.semantic_id.trim().is_empty() {
                return Err(SubmodelError::EmptyId("element semantic_id"));
            }
            if !seen.insert(id) {
                return Err(SubmodelError::DuplicateIdShort(id.into()));
            }
            match &e.value {
                ElementValue::Property { .. } => {}
                ElementValue::QuantityProperty { value, unit, u_random, u_systematic } => {
                    if !value.is_finite() {
                        return Err(bad("value is not finite"));
                    }
                    if unit.is_empty() {
                        return Err(bad("missing unit"));
                    }
                    if !(*u_random >= 0.0 && *u_systematic >= 0.0) || !u_random.is_finite() || !u_systematic.is_finite()
                    {
                        return Err(bad("uncertainty must be finite and non-negative"));
                    }
                }
                ElementValue::TimestampProperty { tai_ns, rfc3339 } => {
                    let parsed = Timestamp::parse_rfc3339(rfc3339).map_err(|e| bad(&e.to_string()))?;
                    if parsed.nanos() != *tai_ns {
                        return Err(bad("rfc3339 rendering disagrees with tai_ns"));
                    }
                }
                ElementValue::TimeSeriesReference { path, columns, .. } => {
                    if path.is_empty() || columns.is_empty() {
                        return Err(bad("series reference needs a path and columns"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn element(&self, id_short: &str) -> Option<&SubmodelElement> {
        self.elements.iter().find(|e| e.id_short == id_short)
    }
}

//! Scenario files (TOML) and their validation.
//!
//! ```toml
//! certificate_files = ["certs/T1.json"]   # relative to the scenario file
//!
//! [scenario]
//! name = "demo"
//! duration_s = 600
//! seed = 7
//! grid_period_s = 1.0            # alignment grid
//! epoch_s = 60                   # collection / scoring window
//! start = "2025-01-01T00:00:00Z" # optional
//!
//! [sync]
//! period_s = 10
//! asym_bound_s = 1e-4            # assumed bound on |fwd − rev|
//! delay_s = 5e-4                 # simulated mean path delay
//! asymmetry_s = 2e-5             # simulated fwd − rev
//!
//! [[nodes]]
//! id = "plc"
//! reference = true
//!
//! [[nodes]]
//! id = "edge"
//! offset_s = 0.002
//! skew = 2e-6
//! jitter_s = 1e-5
//!
//! [[sensors]]
//! id = "T1"
//! node = "edge"
//! certificate = "T1-lab"
//! sample_period_s = 1.0
//! noise_sigma = 0.05
//! signal = [{ kind = "constant", value = 293.15 }]
//!
//! [[virtual_sensors]]
//! id = "T_mean"
//! rule = "fuse {T1, T2, T3}"
//!
//! [[faults]]
//! sensor = "T3"
//! start_s = 300
//! kind = "step_bias"
//! magnitude = 0.5
//!
//! [recalibration]
//! window_s = 60
//! cooldown_s = 300
//! groups = [["T1", "T2", "T3"]]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collector::{ClockModel, SyncNoiseModel, VirtualRule};
use crate::redundancy::{RecalibrationOptions, RecalibrationPolicy, DEFAULT_THRESHOLD_K, MIN_WINDOW_POINTS};
use crate::time::{Duration, Timestamp};
use crate::twin::{load_certificate, CalibrationCertificate, Fault, FaultKind, SensorModel, SignalPrimitive};

pub const DEFAULT_START: &str = "2025-01-01T00:00:00Z";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub sync: SyncSection,
    #[serde(default)]
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub certificate_files: Vec<PathBuf>,
    #[serde(default)]
    pub certificates: Vec<CalibrationCertificate>,
    #[serde(default)]
    pub sensors: Vec<SensorConfig>,
    #[serde(default)]
    pub virtual_sensors: Vec<VirtualSensorConfig>,
    /// Same shape as `virtual_sensors`; evaluated after them.
    #[serde(default)]
    pub pipelines: Vec<VirtualSensorConfig>,
    #[serde(default)]
    pub faults: Vec<FaultConfig>,
    #[serde(default)]
    pub recalibration: Option<RecalibrationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub duration_s: f64,
    pub seed: Option<u64>,
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default = "one_second")]
    pub grid_period_s: f64,
    #[serde(default)]
    pub epoch_s: Option<f64>,
}

fn one_second() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncSection {
    pub period_s: f64,
    pub asym_bound_s: f64,
    pub delay_s: f64,
    pub asymmetry_s: f64,
    pub turnaround_s: f64,
}

impl Default for SyncSection {
    fn default() -> Self {
        SyncSection { period_s: 10.0, asym_bound_s: 1e-4, delay_s: 5e-4, asymmetry_s: 0.0, turnaround_s: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    #[serde(default)]
    pub reference: bool,
    #[serde(default)]
    pub offset_s: f64,
    #[serde(default)]
    pub skew: f64,
    #[serde(default)]
    pub jitter_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub id: String,
    pub node: String,
    pub certificate: String,
    pub sample_period_s: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub bias_drift_rate: f64,
    #[serde(default = "one")]
    pub true_gain: f64,
    #[serde(default)]
    pub true_offset: f64,
    pub signal: Vec<SignalPrimitive>,
    #[serde(default)]
    pub plausible_range: Option<[f64; 2]>,
    #[serde(default)]
    pub capacity: Option<usize>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualSensorConfig {
    pub id: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    pub sensor: String,
    pub start_s: f64,
    pub kind: FaultKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecalibrationConfig {
    #[serde(default = "default_k")]
    pub k: f64,
    pub window_s: f64,
    pub cooldown_s: f64,
    #[serde(default = "default_confirmations")]
    pub confirmations: u32,
    pub groups: Vec<Vec<String>>,
    #[serde(default = "yes")]
    pub offset_only_fallback: bool,
    #[serde(default = "default_min_pairs")]
    pub min_pairs: usize,
    #[serde(default = "default_spread")]
    pub spread_factor: f64,
    #[serde(default)]
    pub validity_s: Option<f64>,
    #[serde(default)]
    pub reset_drift_rate: Option<f64>,
    #[serde(default)]
    pub reset_u_drift: Option<f64>,
}

fn default_k() -> f64 {
    DEFAULT_THRESHOLD_K
}

fn default_confirmations() -> u32 {
    2
}

fn yes() -> bool {
    true
}

fn default_min_pairs() -> usize {
    RecalibrationOptions::default().min_pairs
}

fn default_spread() -> f64 {
    RecalibrationOptions::default().spread_factor
}

/// One validation finding, located by an element path such as
/// `sensors[2].certificate`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parsing scenario: {0}")]
    Parse(String),
    #[error("scenario is invalid:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<ValidationIssue>),
}

/// Reads, resolves and validates a scenario file. Certificate files are
/// resolved relative to the scenario's directory.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text =
        fs::read_to_string(path).map_err(|e| ScenarioError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    let base = path.parent().unwrap_or(Path::new("."));
    ScenarioConfig::from_toml_str(&text, base)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let mut issues = Vec::new();
        for (i, file) in std::mem::take(&mut cfg.certificate_files).into_iter().enumerate() {
            match load_certificate(&base_dir.join(&file)) {
                Ok(c) => cfg.certificates.push(c),
                Err(e) => issues.push(issue(format!("certificate_files[{i}]"), e.to_string())),
            }
        }
        issues.extend(cfg.validate().err().unwrap_or_default());
        if issues.is_empty() {
            Ok(cfg)
        } else {
            issues.sort();
            Err(ScenarioError::Validation(issues))
        }
    }

    /// Checks every cross-reference and range, returning all findings.
    pub fn validate(&self) -> Result<(), Vec<ValidationIssue>> {
        let mut v = Vec::new();
        let s = &self.scenario;
        let duration_ok = s.duration_s.is_finite() && s.duration_s >= 0.0;
        if !duration_ok {
            v.push(issue("scenario.duration_s", "must be finite and >= 0"));
        }
        if s.seed.is_none() {
            v.push(issue("scenario.seed", "is mandatory"));
        }
        if let Some(start) = &s.start {
            if Timestamp::parse_rfc3339(start).is_err() {
                v.push(issue("scenario.start", format!("`{start}` is not an RFC 3339 timestamp")));
            }
        }
        if !(s.grid_period_s > 0.0) {
            v.push(issue("scenario.grid_period_s", "must be positive"));
        }
        let epoch = self.epoch().as_secs_f64();
        if !(epoch > 0.0) {
            v.push(issue("scenario.epoch_s", "must be positive"));
        } else if s.grid_period_s > 0.0 && epoch < MIN_WINDOW_POINTS as f64 * s.grid_period_s {
            v.push(issue("scenario.epoch_s", format!("must span at least {MIN_WINDOW_POINTS} grid periods")));
        }

        let y = &self.sync;
        if !(y.period_s > 0.0) {
            v.push(issue("sync.period_s", "must be positive"));
        } else if epoch > 0.0 && y.period_s > epoch / 2.0 {
            v.push(issue("sync.period_s", "must allow at least two exchanges per epoch"));
        }
        if !(y.asym_bound_s >= 0.0) {
            v.push(issue("sync.asym_bound_s", "must be >= 0"));
        }
        if !(y.asymmetry_s.abs() <= y.asym_bound_s) {
            v.push(issue("sync.asymmetry_s", "must not exceed asym_bound_s in magnitude"));
        }
        if !(y.delay_s >= y.asymmetry_s.abs() / 2.0) || !(y.turnaround_s >= 0.0) {
            v.push(issue("sync.delay_s", "path delays and turnaround must be non-negative"));
        }

        let mut node_ids = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !node_ids.insert(n.id.as_str()) {
                v.push(issue(format!("nodes[{i}].id"), format!("duplicate node `{}`", n.id)));
            }
            if let Err(e) = n.clock_model().validate() {
                v.push(issue(format!("nodes[{i}]"), e.to_string()));
            }
            if n.reference && (n.offset_s != 0.0 || n.skew != 0.0) {
                v.push(issue(
                    format!("nodes[{i}]"),
                    "the reference node defines common time; offset and skew must be 0",
                ));
            }
        }
        let refs = self.nodes.iter().filter(|n| n.reference).count();
        if !self.nodes.is_empty() && refs != 1 {
            v.push(issue("nodes", format!("exactly one node must be the reference, found {refs}")));
        }

        let mut cert_ids = BTreeSet::new();
        for (i, c) in self.certificates.iter().enumerate() {
            if !cert_ids.insert(c.certificate_id.as_str()) {
                v.push(issue(format!("certificates[{i}].certificate_id"), format!("duplicate `{}`", c.certificate_id)));
            }
            if let Err(e) = c.validate() {
                v.push(issue(format!("certificates[{i}]"), e.to_string()));
            }
        }

        let mut stream_ids = BTreeSet::new();
        for (i, sc) in self.sensors.iter().enumerate() {
            let p = |f: &str| format!("sensors[{i}].{f}");
            if !stream_ids.insert(sc.id.as_str()) {
                v.push(issue(p("id"), format!("duplicate stream id `{}`", sc.id)));
            }
            if sc.id.is_empty() || sc.id.contains(['/', '\\', ',', ' ']) {
                v.push(issue(p("id"), "must be non-empty without spaces, commas or path separators"));
            }
            if !node_ids.contains(sc.node.as_str()) {
                v.push(issue(p("node"), format!("unknown node `{}`", sc.node)));
            }
            if !cert_ids.contains(sc.certificate.as_str()) {
                v.push(issue(p("certificate"), format!("unknown certificate `{}`", sc.certificate)));
            }
            if !(sc.sample_period_s > 0.0) {
                v.push(issue(p("sample_period_s"), "must be positive"));
            }
            if !(sc.noise_sigma >= 0.0) {
                v.push(issue(p("noise_sigma"), "must be >= 0"));
            }
            if !(sc.true_gain.is_finite() && sc.true_gain != 0.0) {
                v.push(issue(p("true_gain"), "must be finite and non-zero"));
            }
            if sc.signal.is_empty() {
                v.push(issue(p("signal"), "needs at least one primitive"));
            }
            if let Some([lo, hi]) = sc.plausible_range {
                if !(lo <= hi) {
                    v.push(issue(p("plausible_range"), "lower bound exceeds upper bound"));
                }
            }
            if sc.capacity == Some(0) {
                v.push(issue(p("capacity"), "must be positive"));
            }
        }

        for (list, name) in [(&self.virtual_sensors, "virtual_sensors"), (&self.pipelines, "pipelines")] {
            for (i, vs) in list.iter().enumerate() {
                let p = |f: &str| format!("{name}[{i}].{f}");
                match vs.rule.parse::<VirtualRule>() {
                    Ok(rule) => {
                        for r in rule.references() {
                            if !stream_ids.contains(r) {
                                v.push(issue(p("rule"), format!("unknown stream `{r}`")));
                            }
                        }
                    }
                    Err(e) => v.push(issue(p("rule"), e.to_string())),
                }
                if !stream_ids.insert(vs.id.as_str()) {
                    v.push(issue(p("id"), format!("duplicate stream id `{}`", vs.id)));
                }
            }
        }

        let sensor_ids: BTreeSet<&str> = self.sensors.iter().map(|s| s.id.as_str()).collect();
        for (i, f) in self.faults.iter().enumerate() {
            if !sensor_ids.contains(f.sensor.as_str()) {
                v.push(issue(format!("faults[{i}].sensor"), format!("unknown sensor `{}`", f.sensor)));
            }
            if !(f.start_s >= 0.0) || (duration_ok && f.start_s > s.duration_s) {
                v.push(issue(format!("faults[{i}].start_s"), "injection lies outside the scenario duration"));
            }
            if !f.magnitude.is_finite() {
                v.push(issue(format!("faults[{i}].magnitude"), "must be finite"));
            }
        }

        if let Some(r) = &self.recalibration {
            if !(r.k > 0.0) {
                v.push(issue("recalibration.k", "must be positive"));
            }
            if !(r.window_s > 0.0) {
                v.push(issue("recalibration.window_s", "must be positive"));
            } else if s.epoch_s.is_some_and(|e| e != r.window_s) {
                v.push(issue("recalibration.window_s", "must equal scenario.epoch_s when both are given"));
            }
            if !(r.cooldown_s >= 0.0) {
                v.push(issue("recalibration.cooldown_s", "must be >= 0"));
            }
            if r.confirmations == 0 {
                v.push(issue("recalibration.confirmations", "must be at least 1"));
            }
            let mut grouped = BTreeSet::new();
            for (g, members) in r.groups.iter().enumerate() {
                if members.len() < 3 {
                    v.push(issue(format!("recalibration.groups[{g}]"), "needs at least 3 sensors"));
                }
                let mut units = BTreeSet::new();
                for (j, m) in members.iter().enumerate() {
                    let path = format!("recalibration.groups[{g}][{j}]");
                    match self.sensors.iter().find(|s| &s.id == m) {
                        None => v.push(issue(path, format!("unknown sensor `{m}`"))),
                        Some(sc) => {
                            if !grouped.insert(m.as_str()) {
                                v.push(issue(path, format!("`{m}` belongs to more than one group")));
                            }
                            if let Some(c) = self.certificate(&sc.certificate) {
                                units.insert(c.unit.symbol().to_string());
                            }
                        }
                    }
                }
                if units.len() > 1 {
                    v.push(issue(format!("recalibration.groups[{g}]"), "members must share one unit"));
                }
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            v.sort();
            Err(v)
        }
    }

    pub fn seed(&self) -> u64 {
        self.scenario.seed.unwrap_or_default()
    }

    pub fn start(&self) -> Timestamp {
        let s = self.scenario.start.as_deref().unwrap_or(DEFAULT_START);
        Timestamp::parse_rfc3339(s).unwrap_or_default()
    }

    pub fn end(&self) -> Timestamp {
        self.start().offset_secs(self.scenario.duration_s)
    }

    pub fn epoch(&self) -> Duration {
        let s = self.scenario.epoch_s.or(self.recalibration.as_ref().map(|r| r.window_s)).unwrap_or(60.0);
        Duration::from_secs_f64(s)
    }

    pub fn grid_period(&self) -> Duration {
        Duration::from_secs_f64(self.scenario.grid_period_s)
    }

    pub fn certificate(&self, id: &str) -> Option<&CalibrationCertificate> {
        self.certificates.iter().find(|c| c.certificate_id == id)
    }

    pub fn reference_node(&self) -> Option<&NodeConfig> {
        self.nodes.iter().find(|n| n.reference)
    }

    pub fn sync_noise(&self, node: &NodeConfig) -> SyncNoiseModel {
        SyncNoiseModel {
            reference_jitter: self.reference_node().map_or(0.0, |r| r.jitter_s),
            node_jitter: node.jitter_s,
            asym_bound: self.sync.asym_bound_s,
        }
    }

    /// Ground-truth model of a sensor, with its faults attached.
    pub fn sensor_model(&self, sc: &SensorConfig) -> SensorModel {
        let start = self.start();
        SensorModel {
            sensor_id: sc.id.clone(),
            signal: sc.signal.clone(),
            noise_sigma: sc.noise_sigma,
            bias_drift_rate: sc.bias_drift_rate,
            epoch: start,
            sample_period: Duration::from_secs_f64(sc.sample_period_s),
            attached_clock: sc.node.clone(),
            true_gain: sc.true_gain,
            true_offset: sc.true_offset,
            faults: self
                .faults
                .iter()
                .filter(|f| f.sensor == sc.id)
                .map(|f| Fault { kind: f.kind, start: start.offset_secs(f.start_s), magnitude: f.magnitude })
                .collect(),
        }
    }

    /// Virtual sensors in evaluation order, with parsed rules.
    pub fn virtual_rules(&self) -> Vec<(String, VirtualRule)> {
        self.virtual_sensors
            .iter()
            .chain(&self.pipelines)
            .filter_map(|v| v.rule.parse().ok().map(|r| (v.id.clone(), r)))
            .collect()
    }

    pub fn policy(&self) -> Option<RecalibrationPolicy> {
        self.recalibration.as_ref().map(|r| RecalibrationPolicy {
            threshold_k: r.k,
            window: Duration::from_secs_f64(r.window_s),
            cooldown: Duration::from_secs_f64(r.cooldown_s),
            confirmations: r.confirmations,
            options: RecalibrationOptions {
                offset_only_fallback: r.offset_only_fallback,
                min_pairs: r.min_pairs,
                spread_factor: r.spread_factor,
                validity: r.validity_s.map(Duration::from_secs_f64),
                drift_rate: r.reset_drift_rate,
                u_drift: r.reset_u_drift,
            },
        })
    }

    /// Sensor ids by node, for sample generation.
    pub fn sensors_by_node(&self) -> BTreeMap<&str, Vec<&SensorConfig>> {
        let mut out: BTreeMap<&str, Vec<&SensorConfig>> = BTreeMap::new();
        for s in &self.sensors {
            out.entry(s.node.as_str()).or_default().push(s);
        }
        out
    }
}

impl NodeConfig {
    pub fn clock_model(&self) -> ClockModel {
        ClockModel {
            node_id: self.id.clone(),
            offset: self.offset_s,
            skew: self.skew,
            jitter_sigma: self.jitter_s,
            reference: Timestamp::ZERO,
        }
    }
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> ValidationIssue {
    ValidationIssue { path: path.into(), message: message.into() }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[scenario]
name = "t"
duration_s = 120
seed = 1

[[nodes]]
id = "ref"
reference = true

[[certificates]]
certificate_id = "C1"
gain = 1.0
u_a = 0.0
offset = 0.0
u_b = 0.01
cov_ab = 0.0
u_noise = 0.1
drift_rate = 0.0
u_drift = 0.0
calibrated_at = "2024-06-01T00:00:00Z"
valid_until = "2026-06-01T00:00:00Z"
provenance = "laboratory"
unit = "K"
quantity_kind = "temperature"

[[sensors]]
id = "T1"
node = "ref"
certificate = "C1"
sample_period_s = 1.0
noise_sigma = 0.1
signal = [{ kind = "constant", value = 300.0 }]
"#;

    fn parse(extra: &str) -> Result<ScenarioConfig, ScenarioError> {
        ScenarioConfig::from_toml_str(&format!("{BASE}{extra}"), Path::new("."))
    }

    fn issues(extra: &str) -> Vec<ValidationIssue> {
        match parse(extra) {
            Err(ScenarioError::Validation(v)) => v,
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn base_is_valid() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.sensors.len(), 1);
        assert_eq!(cfg.start(), Timestamp::parse_rfc3339(DEFAULT_START).unwrap());
        assert_eq!(cfg.epoch(), Duration::from_secs_f64(60.0));
        let m = cfg.sensor_model(&cfg.sensors[0]);
        assert_eq!(m.measurand(cfg.start()), 300.0);
    }

    #[test]
    fn dangling_certificate_named() {
        let v = issues(
            r#"
[[sensors]]
id = "T2"
node = "ref"
certificate = "nope"
sample_period_s = 1.0
signal = [{ kind = "constant", value = 1.0 }]
"#,
        );
        assert!(v.iter().any(|i| i.path == "sensors[1].certificate" && i.message.contains("nope")), "{v:?}");
    }

    #[test]
    fn injection_after_end() {
        let v = issues("[[faults]]\nsensor = \"T1\"\nstart_s = 500\nkind = \"step_bias\"\nmagnitude = 1.0\n");
        assert_eq!(v[0].path, "faults[0].start_s");
    }

    #[test]
    fn all_errors_reported() {
        let v = issues(
            r#"
[[faults]]
sensor = "ghost"
start_s = -1
kind = "ramp_drift"
magnitude = 1.0

[[virtual_sensors]]
id = "V"
rule = "fuse {T1, X}"
"#,
        );
        let paths: Vec<&str> = v.iter().map(|i| i.path.as_str()).collect();
        assert_eq!(paths, vec!["faults[0].sensor", "faults[0].start_s", "virtual_sensors[0].rule"]);
    }

    #[test]
    fn seed_mandatory_and_unknown_keys_rejected() {
        let text = BASE.replace("seed = 1\n", "");
        match ScenarioConfig::from_toml_str(&text, Path::new(".")) {
            Err(ScenarioError::Validation(v)) => assert_eq!(v[0].path, "scenario.seed"),
            other => panic!("{other:?}"),
        }
        let text = BASE.replace("seed = 1\n", "seed = 1\ncolour = 3\n");
        assert!(matches!(ScenarioConfig::from_toml_str(&text, Path::new(".")), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn group_checks() {
        let v = issues("[recalibration]\nwindow_s = 60\ncooldown_s = 0\ngroups = [[\"T1\", \"T9\"]]\n");
        let paths: Vec<&str> = v.iter().map(|i| i.path.as_str()).collect();
        assert_eq!(paths, vec!["recalibration.groups[0]", "recalibration.groups[0][1]"]);
    }
}

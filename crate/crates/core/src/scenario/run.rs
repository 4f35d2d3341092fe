//! Deterministic discrete-event execution of a scenario.
//!
//! A single virtual clock advances through scheduled events. At one instant,
//! sync exchanges run first, then sensor samples, then the epoch boundary.
//! At every epoch boundary the collector disciplines node clocks, re-stamps
//! the epoch's samples onto common time and aligns them onto the grid, and
//! each redundancy group runs the drift / recalibration workflow. Virtual
//! sensors are evaluated once over the complete aligned streams.
//!
//! All randomness derives from the scenario seed through per-entity seeds.
//! With more than one thread, readings of one instant are computed in
//! parallel and merged in sensor-id order, so output does not depend on the
//! thread count.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::ScenarioConfig;
use super::events::{Event, EventPayload};
use crate::collector::{
    align_streams, collect, discipline_clock, estimate_offset, run_virtual_sensor_rule, simulate_exchange,
    ClockEstimate, ClockRegistry, Grid, RawSample, VirtualOutput,
};
use crate::fusion::LabeledValue;
use crate::redundancy::{recalibration_workflow, AuditRecord, WorkflowEvent, WorkflowState};
use crate::rng::derive_seed;
use crate::time::{Duration, Timestamp};
use crate::twin::{sample_sensor, SensorModel, TwinState, DEFAULT_CAPACITY};
use crate::uncertainty::Measurement;
use crate::units::QuantityKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for same-instant work; 1 runs everything on the caller.
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { threads: 1 }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario is invalid: {0} issue(s), first: {1}")]
    InvalidConfig(usize, String),
    #[error("building worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Physical,
    Virtual,
    Labels,
}

/// Index entry for one output stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub id: String,
    pub kind: StreamKind,
    pub unit: Option<String>,
    pub quantity_kind: Option<QuantityKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_id: Option<String>,
}

/// Final state digests: one per twin and one over all clock estimates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digests {
    pub twins: BTreeMap<String, String>,
    pub clocks: String,
}

impl Digests {
    pub fn compute(twins: &BTreeMap<String, TwinState>, clocks: &ClockRegistry) -> Self {
        let json = serde_json::to_vec(clocks).expect("clock registry serializes");
        Digests {
            twins: twins.iter().map(|(id, t)| (id.clone(), t.digest())).collect(),
            clocks: hex::encode(Sha256::digest(&json)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub scenario: String,
    pub seed: u64,
    pub events: Vec<Event>,
    pub audit: Vec<AuditRecord>,
    /// Samples on the common time base, before alignment.
    pub collected: BTreeMap<String, Vec<Measurement>>,
    /// Grid-aligned physical streams and virtual sensor outputs.
    pub aligned: BTreeMap<String, Vec<Measurement>>,
    /// Measurand of each physical sensor at its aligned grid points.
    pub truth: BTreeMap<String, Vec<Measurement>>,
    pub labels: BTreeMap<String, Vec<LabeledValue>>,
    pub twins: BTreeMap<String, TwinState>,
    pub clocks: ClockRegistry,
    pub streams: Vec<StreamInfo>,
    pub digests: Digests,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Sync,
    Sample,
    EpochEnd,
}

/// Runs `config` to completion. Module errors are logged as events with
/// their sim time; only configuration problems abort the run.
pub fn run_scenario(config: &ScenarioConfig, options: &RunOptions) -> Result<RunOutput, RunError> {
    if let Err(issues) = config.validate() {
        return Err(RunError::InvalidConfig(issues.len(), issues[0].to_string()));
    }
    let pool = if options.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(options.threads)
                .build()
                .map_err(|e| RunError::ThreadPool(e.to_string()))?,
        )
    } else {
        None
    };
    let mut sim = Simulation::new(config);
    sim.run(pool.as_ref());
    Ok(sim.finish())
}

struct SensorRuntime {
    model: SensorModel,
    seed: u64,
    node: String,
}

struct Simulation<'a> {
    config: &'a ScenarioConfig,
    start: Timestamp,
    end: Timestamp,
    epoch: Duration,
    grid: Grid,
    sensors: BTreeMap<String, SensorRuntime>,
    twins: BTreeMap<String, TwinState>,
    histories: BTreeMap<String, Vec<Measurement>>,
    registry: ClockRegistry,
    pending: Vec<RawSample>,
    collected: BTreeMap<String, Vec<Measurement>>,
    aligned: BTreeMap<String, Vec<Measurement>>,
    truth: BTreeMap<String, Vec<Measurement>>,
    labels: BTreeMap<String, Vec<LabeledValue>>,
    progress: WorkflowState,
    events: Vec<Event>,
    audit: Vec<AuditRecord>,
    queue: BTreeSet<(Timestamp, Kind, String)>,
}

impl<'a> Simulation<'a> {
    fn new(config: &'a ScenarioConfig) -> Self {
        let seed = config.seed();
        let start = config.start();
        let mut sensors = BTreeMap::new();
        let mut twins = BTreeMap::new();
        for sc in &config.sensors {
            let cert = config.certificate(&sc.certificate).expect("validated").clone();
            let mut twin = TwinState::new(&sc.id, cert, sc.capacity.unwrap_or(DEFAULT_CAPACITY));
            if let Some([lo, hi]) = sc.plausible_range {
                twin = twin.with_plausible_range(lo, hi);
            }
            twins.insert(sc.id.clone(), twin);
            sensors.insert(
                sc.id.clone(),
                SensorRuntime {
                    model: config.sensor_model(sc),
                    seed: derive_seed(seed, &format!("sensor:{}", sc.id)),
                    node: sc.node.clone(),
                },
            );
        }
        Simulation {
            config,
            start,
            end: config.end(),
            epoch: config.epoch(),
            grid: Grid::new(start, config.grid_period()),
            sensors,
            twins,
            histories: BTreeMap::new(),
            registry: ClockRegistry::new(),
            pending: Vec::new(),
            collected: BTreeMap::new(),
            aligned: BTreeMap::new(),
            truth: BTreeMap::new(),
            labels: BTreeMap::new(),
            progress: WorkflowState::default(),
            events: Vec::new(),
            audit: Vec::new(),
            queue: BTreeSet::new(),
        }
    }

    fn log(&mut self, t: Timestamp, payload: EventPayload) {
        self.events.push(Event { sim_time: t, payload });
    }

    fn schedule(&mut self, t: Timestamp, kind: Kind, entity: &str) {
        if t <= self.end {
            self.queue.insert((t, kind, entity.to_string()));
        }
    }

    fn run(&mut self, pool: Option<&rayon::ThreadPool>) {
        if self.sensors.is_empty() && self.config.nodes.is_empty() {
            return;
        }
        let reference = self.config.reference_node().map(|n| n.id.clone());
        for n in &self.config.nodes {
            if Some(&n.id) != reference.as_ref() {
                self.queue.insert((self.start, Kind::Sync, n.id.clone()));
            }
        }
        for id in self.sensors.keys() {
            self.queue.insert((self.start, Kind::Sample, id.clone()));
        }
        if self.end > self.start {
            let first = (self.start + self.epoch).min(self.end);
            self.queue.insert((first, Kind::EpochEnd, String::new()));
        }

        while let Some((t, kind, entity)) = self.queue.pop_first() {
            match kind {
                Kind::Sync => self.sync(t, &entity),
                Kind::Sample => {
                    let mut batch = vec![entity];
                    while let Some((t2, Kind::Sample, _)) = self.queue.first() {
                        if *t2 != t {
                            break;
                        }
                        batch.push(self.queue.pop_first().expect("peeked").2);
                    }
                    self.sample(t, &batch, pool);
                }
                Kind::EpochEnd => {
                    let from = (t - self.epoch).max(self.start);
                    self.end_epoch(from, t);
                    if t < self.end {
                        self.schedule((t + self.epoch).min(self.end), Kind::EpochEnd, "");
                    }
                }
            }
        }
        self.evaluate_virtual_sensors();
    }

    fn sync(&mut self, t: Timestamp, node_id: &str) {
        let cfg = self.config;
        let node = cfg.nodes.iter().find(|n| n.id == node_id).expect("validated node");
        let reference = cfg.reference_node().expect("validated reference");
        let y = &cfg.sync;
        let seed = derive_seed(cfg.seed(), &format!("sync:{node_id}"));
        let x = simulate_exchange(
            &reference.clock_model(),
            &node.clock_model(),
            t,
            y.delay_s + y.asymmetry_s / 2.0,
            y.delay_s - y.asymmetry_s / 2.0,
            Duration::from_secs_f64(y.turnaround_s),
            seed,
        );
        self.log(t, EventPayload::SyncExchange { node_id: node_id.into(), exchange: x.clone() });
        match estimate_offset(&x, &cfg.sync_noise(node)) {
            Ok(est) => self.histories.entry(node_id.into()).or_default().push(est.offset),
            Err(e) => self.log(t, EventPayload::SyncDiscarded { node_id: node_id.into(), reason: e.to_string() }),
        }
        self.schedule(t + Duration::from_secs_f64(y.period_s), Kind::Sync, node_id);
    }

    fn sample(&mut self, t: Timestamp, batch: &[String], pool: Option<&rayon::ThreadPool>) {
        let nodes: BTreeMap<&str, _> = self.config.nodes.iter().map(|n| (n.id.as_str(), n.clock_model())).collect();
        let read = |id: &String| {
            let s = &self.sensors[id];
            sample_sensor(&s.model, &nodes[s.node.as_str()], t, s.seed)
        };
        let readings: Vec<_> = match pool {
            Some(p) => p.install(|| batch.par_iter().map(read).collect()),
            None => batch.iter().map(read).collect(),
        };
        for (id, r) in batch.iter().zip(readings) {
            let node = self.sensors[id].node.clone();
            self.log(
                t,
                EventPayload::Sample {
                    sensor_id: id.clone(),
                    node_id: node.clone(),
                    raw: r.raw,
                    local_timestamp: r.local_timestamp,
                },
            );
            match self.twins.get_mut(id).expect("twin").ingest(r.raw, r.local_timestamp) {
                Ok(m) => {
                    self.pending.push(RawSample { node_id: node, local_timestamp: r.local_timestamp, measurement: m })
                }
                Err(e) => self.log(t, EventPayload::Error { context: format!("twin {id}"), message: e.to_string() }),
            }
            let period = self.sensors[id].model.sample_period;
            self.schedule(t + period, Kind::Sample, id);
        }
    }

    fn end_epoch(&mut self, from: Timestamp, to: Timestamp) {
        let (registry, estimates) = build_registry(self.config, &self.histories);
        self.registry = registry;
        for p in estimates {
            self.log(to, p);
        }

        match collect(std::mem::take(&mut self.pending), &self.registry) {
            Ok(streams) => {
                for (id, s) in streams {
                    self.collected.entry(id).or_default().extend(s);
                }
            }
            Err(e) => self.log(to, EventPayload::Error { context: "collect".into(), message: e.to_string() }),
        }

        // Each stream contributes from its last sample before the window on,
        // so grid points at the window start can be interpolated.
        let ids: Vec<String> = self
            .collected
            .iter()
            .filter(|(_, s)| s.last().is_some_and(|m| m.timestamp >= from))
            .map(|(id, _)| id.clone())
            .collect();
        let inputs: Vec<Vec<Measurement>> = ids
            .iter()
            .map(|id| {
                let s = &self.collected[id];
                let first = s.partition_point(|m| m.timestamp < from).saturating_sub(1);
                s[first..].to_vec()
            })
            .collect();
        let mut epoch_aligned: BTreeMap<String, Vec<Measurement>> = BTreeMap::new();
        if !inputs.is_empty() {
            match align_streams(&inputs, &self.grid, Some((from, to))) {
                Ok(out) => epoch_aligned = ids.iter().cloned().zip(out).collect(),
                Err(e) => self.log(to, EventPayload::Error { context: "align".into(), message: e.to_string() }),
            }
        }
        let points = epoch_aligned.values().next().map_or(0, Vec::len);
        for (id, s) in &epoch_aligned {
            let model = &self.sensors[id].model;
            let truth = self.truth.entry(id.clone()).or_default();
            for m in s {
                truth.push(Measurement {
                    value: model.measurand(m.timestamp),
                    u_random: 0.0,
                    u_systematic: 0.0,
                    ..m.clone()
                });
            }
            self.aligned.entry(id.clone()).or_default().extend(s.iter().cloned());
        }

        if let (Some(policy), Some(rc)) = (self.config.policy(), &self.config.recalibration) {
            for group in &rc.groups {
                let data: BTreeMap<String, Vec<Measurement>> =
                    group.iter().filter_map(|id| epoch_aligned.get(id).map(|s| (id.clone(), s.clone()))).collect();
                if data.len() < group.len() {
                    self.log(
                        to,
                        EventPayload::Error {
                            context: format!("group [{}]", group.join(",")),
                            message: "not every member has aligned data in this epoch".into(),
                        },
                    );
                    continue;
                }
                match recalibration_workflow(&mut self.twins, &data, (from, to), &policy, &mut self.progress) {
                    Ok(evs) => {
                        for ev in evs {
                            self.audit.push(AuditRecord { sim_time: to, event: ev.clone() });
                            self.log(to, EventPayload::Workflow(ev));
                        }
                    }
                    Err(e) => self.log(
                        to,
                        EventPayload::Error { context: format!("group [{}]", group.join(",")), message: e.to_string() },
                    ),
                }
            }
        }
        self.log(to, EventPayload::EpochEnd { from, to, aligned_points: points });
    }

    fn evaluate_virtual_sensors(&mut self) {
        let t = self.end;
        for (id, rule) in self.config.virtual_rules() {
            match run_virtual_sensor_rule(&rule, &self.aligned, &id) {
                Ok(VirtualOutput::Measurements(s)) => {
                    self.log(
                        t,
                        EventPayload::Fusion { stream_id: id.clone(), rule: rule.to_string(), outputs: s.len() },
                    );
                    self.aligned.insert(id, s);
                }
                Ok(VirtualOutput::Labels(l)) => {
                    self.log(
                        t,
                        EventPayload::Fusion { stream_id: id.clone(), rule: rule.to_string(), outputs: l.len() },
                    );
                    self.labels.insert(id, l);
                }
                Err(e) => {
                    self.log(t, EventPayload::Error { context: format!("virtual sensor {id}"), message: e.to_string() })
                }
            }
        }
    }

    fn finish(self) -> RunOutput {
        let cfg = self.config;
        let mut streams = Vec::new();
        for sc in &cfg.sensors {
            let cert = &self.twins[&sc.id].certificate;
            streams.push(StreamInfo {
                id: sc.id.clone(),
                kind: StreamKind::Physical,
                unit: Some(cert.unit.symbol().to_string()),
                quantity_kind: Some(cert.quantity_kind),
                node_id: Some(sc.node.clone()),
                rule: None,
                certificate_id: Some(cert.certificate_id.clone()),
            });
        }
        for (id, rule) in cfg.virtual_rules() {
            let (kind, sample) = match (self.aligned.get(&id), self.labels.get(&id)) {
                (Some(s), _) => (StreamKind::Virtual, s.first()),
                (None, Some(l)) => (StreamKind::Labels, l.first().map(|x| &x.source)),
                (None, None) => (StreamKind::Virtual, None),
            };
            streams.push(StreamInfo {
                id,
                kind,
                unit: sample.map(|m| m.unit.symbol().to_string()),
                quantity_kind: sample.map(|m| m.quantity_kind),
                node_id: None,
                rule: Some(rule.to_string()),
                certificate_id: None,
            });
        }
        streams.sort_by(|a, b| a.id.cmp(&b.id));
        let digests = Digests::compute(&self.twins, &self.registry);
        RunOutput {
            scenario: cfg.scenario.name.clone(),
            seed: cfg.seed(),
            events: self.events,
            audit: self.audit,
            collected: self.collected,
            aligned: self.aligned,
            truth: self.truth,
            labels: self.labels,
            twins: self.twins,
            clocks: self.registry,
            streams,
            digests,
        }
    }
}

/// Clock estimates for every node from its offset history. The reference
/// node is exact; a single exchange gives an offset-only estimate.
pub(crate) fn build_registry(
    config: &ScenarioConfig,
    histories: &BTreeMap<String, Vec<Measurement>>,
) -> (ClockRegistry, Vec<EventPayload>) {
    let start = config.start();
    let mut reg = ClockRegistry::new();
    let mut events = Vec::new();
    for n in &config.nodes {
        let history = histories.get(&n.id).map(Vec::as_slice).unwrap_or_default();
        let est = if n.reference {
            Ok(ClockEstimate::exact(&n.id, start))
        } else if history.len() == 1 {
            let m = &history[0];
            Ok(ClockEstimate { offset: m.value, u_offset: m.u_c(), ..ClockEstimate::exact(&n.id, m.timestamp) })
        } else {
            discipline_clock(&n.id, history, start)
        };
        match est {
            Ok(e) => {
                if !n.reference {
                    events.push(EventPayload::ClockEstimate {
                        node_id: n.id.clone(),
                        offset: e.offset,
                        skew: e.skew,
                        u_offset: e.u_offset,
                        u_skew: e.u_skew,
                        n_points: history.len(),
                    });
                }
                reg.register(e, n.jitter_s);
            }
            Err(e) => events.push(EventPayload::Error { context: format!("clock {}", n.id), message: e.to_string() }),
        }
    }
    (reg, events)
}

/// Twin flag and certificate changes carried by a workflow event.
pub(crate) fn apply_workflow_event(
    twins: &mut BTreeMap<String, TwinState>,
    pending_certs: &mut BTreeMap<String, crate::twin::CalibrationCertificate>,
    ev: &WorkflowEvent,
) {
    use crate::twin::ControllerFlag;
    match ev {
        WorkflowEvent::DriftReport(r) => {
            if let Some(t) = twins.get_mut(&r.sensor_id) {
                if r.flagged {
                    t.set_flag(ControllerFlag::DriftSuspected);
                } else {
                    t.flags.remove(&ControllerFlag::DriftSuspected);
                }
            }
        }
        WorkflowEvent::Recalibration { sensor_id, result, .. } => {
            pending_certs.insert(sensor_id.clone(), result.new_certificate.clone());
        }
        WorkflowEvent::CertificateSwap { sensor_id, .. } => {
            if let (Some(t), Some(c)) = (twins.get_mut(sensor_id), pending_certs.remove(sensor_id)) {
                t.install_certificate(c);
            }
        }
        WorkflowEvent::Skipped { .. } | WorkflowEvent::Failed { .. } => {}
    }
}

//! Rebuilds twin and clock state from an event log.
//!
//! Raw readings and sync timestamps are re-enriched through the same code
//! paths as the live run; workflow decisions are taken from the log rather
//! than recomputed. Matching digests show the log is complete.

use std::collections::BTreeMap;

use super::config::ScenarioConfig;
use super::events::{Event, EventPayload};
use super::run::{apply_workflow_event, build_registry, Digests};
use crate::collector::{estimate_offset, ClockRegistry};
use crate::twin::{TwinState, DEFAULT_CAPACITY};

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub twins: BTreeMap<String, TwinState>,
    pub clocks: ClockRegistry,
    pub digests: Digests,
    pub events_applied: usize,
}

pub fn replay_events(config: &ScenarioConfig, events: &[Event]) -> Replay {
    let mut twins: BTreeMap<String, TwinState> = BTreeMap::new();
    for sc in &config.sensors {
        let Some(cert) = config.certificate(&sc.certificate) else { continue };
        let mut twin = TwinState::new(&sc.id, cert.clone(), sc.capacity.unwrap_or(DEFAULT_CAPACITY));
        if let Some([lo, hi]) = sc.plausible_range {
            twin = twin.with_plausible_range(lo, hi);
        }
        twins.insert(sc.id.clone(), twin);
    }
    let mut histories = BTreeMap::new();
    let mut clocks = ClockRegistry::new();
    let mut pending_certs = BTreeMap::new();
    let mut applied = 0;
    for ev in events {
        match &ev.payload {
            EventPayload::Sample { sensor_id, raw, local_timestamp, .. } => {
                if let Some(t) = twins.get_mut(sensor_id) {
                    let _ = t.ingest(*raw, *local_timestamp);
                }
            }
            EventPayload::SyncExchange { node_id, exchange } => {
                let Some(node) = config.nodes.iter().find(|n| &n.id == node_id) else { continue };
                if let Ok(est) = estimate_offset(exchange, &config.sync_noise(node)) {
                    histories.entry(node_id.clone()).or_insert_with(Vec::new).push(est.offset);
                }
            }
            EventPayload::EpochEnd { .. } => clocks = build_registry(config, &histories).0,
            EventPayload::Workflow(w) => apply_workflow_event(&mut twins, &mut pending_certs, w),
            _ => continue,
        }
        applied += 1;
    }
    let digests = Digests::compute(&twins, &clocks);
    Replay { twins, clocks, digests, events_applied: applied }
}

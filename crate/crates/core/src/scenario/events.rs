//! The run's event log: one JSON object per line, ordered by `sim_time`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::collector::SyncExchange;
use crate::redundancy::WorkflowEvent;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub sim_time: Timestamp,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    /// A raw reading as stamped by the node clock.
    Sample {
        sensor_id: String,
        node_id: String,
        raw: f64,
        local_timestamp: Timestamp,
    },
    SyncExchange {
        node_id: String,
        exchange: SyncExchange,
    },
    SyncDiscarded {
        node_id: String,
        reason: String,
    },
    ClockEstimate {
        node_id: String,
        offset: f64,
        skew: f64,
        u_offset: f64,
        u_skew: f64,
        n_points: usize,
    },
    EpochEnd {
        from: Timestamp,
        to: Timestamp,
        aligned_points: usize,
    },
    Workflow(WorkflowEvent),
    Fusion {
        stream_id: String,
        rule: String,
        outputs: usize,
    },
    Error {
        context: String,
        message: String,
    },
}

pub fn write_events<W: Write>(mut out: W, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_events<R: BufRead>(input: R) -> Result<Vec<Event>, String> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

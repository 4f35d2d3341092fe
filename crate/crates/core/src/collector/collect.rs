use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::discipline::ClockEstimate;
use super::CollectError;
use crate::time::Timestamp;
use crate::uncertainty::Measurement;

/// A sample as it arrives from the field: stamped by its node's local clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub node_id: String,
    pub local_timestamp: Timestamp,
    pub measurement: Measurement,
}

/// Current clock knowledge per node.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClockRegistry {
    nodes: BTreeMap<String, NodeClock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeClock {
    estimate: ClockEstimate,
    /// Nominal timestamping jitter of the node, seconds.
    jitter_sigma: f64,
}

impl ClockRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, estimate: ClockEstimate, jitter_sigma: f64) {
        self.nodes.insert(estimate.node_id.clone(), NodeClock { estimate, jitter_sigma });
    }

    pub fn estimate(&self, node_id: &str) -> Option<&ClockEstimate> {
        self.nodes.get(node_id).map(|n| &n.estimate)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn contains(&self, node_id: &str) -> bool {
        self.nodes.contains_key(node_id)
    }

    /// Maps a local reading of `node_id` onto the common time base.
    pub fn to_common_time(&self, node_id: &str, local: Timestamp) -> Result<(Timestamp, f64), CollectError> {
        let node = self.nodes.get(node_id).ok_or_else(|| CollectError::UnknownNode(node_id.to_string()))?;
        let (t, u) = node.estimate.to_common_time(local);
        Ok((t, u.hypot(node.jitter_sigma)))
    }
}

/// Re-stamps raw samples onto the common time base and groups them into
/// time-ordered streams keyed by source id. The residual synchronization
/// uncertainty of each stamp goes into `u_timestamp`.
pub fn collect(
    samples: impl IntoIterator<Item = RawSample>,
    clocks: &ClockRegistry,
) -> Result<BTreeMap<String, Vec<Measurement>>, CollectError> {
    let mut streams: BTreeMap<String, Vec<Measurement>> = BTreeMap::new();
    for s in samples {
        let (t, u) = clocks.to_common_time(&s.node_id, s.local_timestamp)?;
        let mut m = s.measurement;
        m.timestamp = t;
        m.u_timestamp = m.u_timestamp.hypot(u);
        streams.entry(m.source_id.clone()).or_default().push(m);
    }
    for stream in streams.values_mut() {
        stream.sort_by_key(|m| m.timestamp);
    }
    Ok(streams)
}

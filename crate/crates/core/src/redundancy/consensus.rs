use std::collections::BTreeMap;

use super::RedundancyError;
use crate::fusion::virtual_sensor_fuse;
use crate::uncertainty::Measurement;

/// Identifier of a consensus built from `members`, e.g. `consensus[T1,T3]`.
pub fn consensus_id<'a>(members: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = members.into_iter().collect();
    ids.sort_unstable();
    format!("consensus[{}]", ids.join(","))
}

/// Inverse-variance consensus of `aligned` readings taken at one instant,
/// leaving out `exclude`.
pub fn consensus_estimate(aligned: &[Measurement], exclude: Option<&str>) -> Result<Measurement, RedundancyError> {
    consensus_excluding(aligned, exclude.as_slice())
}

/// Consensus leaving out every sensor in `exclude`. Needs at least three
/// inputs and two remaining references.
pub fn consensus_excluding(aligned: &[Measurement], exclude: &[&str]) -> Result<Measurement, RedundancyError> {
    if aligned.len() < 3 {
        return Err(RedundancyError::InsufficientRedundancy { available: aligned.len(), required: 3 });
    }
    let kept: Vec<Measurement> = aligned.iter().filter(|m| !exclude.contains(&m.source_id.as_str())).cloned().collect();
    if kept.len() < 2 {
        return Err(RedundancyError::InsufficientRedundancy { available: kept.len(), required: 2 });
    }
    let id = consensus_id(kept.iter().map(|m| m.source_id.as_str()));
    Ok(virtual_sensor_fuse(&kept, Some(&id))?.measurement)
}

/// Consensus stream over aligned streams (equal length, shared grid).
pub fn consensus_stream(
    aligned: &BTreeMap<String, Vec<Measurement>>,
    exclude: &[&str],
) -> Result<Vec<Measurement>, RedundancyError> {
    let len = aligned.values().next().map_or(0, Vec::len);
    if aligned.values().any(|s| s.len() != len) {
        return Err(RedundancyError::Misaligned);
    }
    (0..len)
        .map(|i| {
            let at: Vec<Measurement> = aligned.values().map(|s| s[i].clone()).collect();
            consensus_excluding(&at, exclude)
        })
        .collect()
}

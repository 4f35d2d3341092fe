//! Detect → recalibrate → swap orchestration, and the audit log.
//!
//! The audit log is JSON lines, one object per event, each with a `sim_time`
//! (TAI ns) and an `event` tag:
//!
//! | `event`            | payload fields                                                   |
//! |--------------------|------------------------------------------------------------------|
//! | `drift_report`     | the [`DriftReport`] fields                                       |
//! | `recalibration`    | `sensor_id`, `consensus_trace`, the [`RecalibrationResult`] fields |
//! | `certificate_swap` | `sensor_id`, `old_certificate_id`, `new_certificate_id`          |
//! | `skipped`          | `sensor_id`, `reason`                                            |
//! | `failed`           | `sensor_id`, `error`                                             |

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::consensus::{consensus_id, consensus_stream};
use super::drift::{detect_drift, DriftReport, DEFAULT_THRESHOLD_K};
use super::recalibrate::{infield_recalibrate, RecalibrationOptions, RecalibrationResult};
use super::RedundancyError;
use crate::time::{Duration, Timestamp};
use crate::twin::{twin_control, Action, ControllerFlag, TwinState};
use crate::uncertainty::Measurement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationPolicy {
    #[serde(default = "default_k")]
    pub threshold_k: f64,
    pub window: Duration,
    pub cooldown: Duration,
    /// Consecutive flagged windows required before recalibrating.
    #[serde(default = "default_confirmations")]
    pub confirmations: u32,
    #[serde(default)]
    pub options: RecalibrationOptions,
}

fn default_k() -> f64 {
    DEFAULT_THRESHOLD_K
}

fn default_confirmations() -> u32 {
    2
}

impl RecalibrationPolicy {
    pub fn new(window: Duration, cooldown: Duration) -> Self {
        RecalibrationPolicy {
            threshold_k: DEFAULT_THRESHOLD_K,
            window,
            cooldown,
            confirmations: default_confirmations(),
            options: RecalibrationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WorkflowEvent {
    DriftReport(DriftReport),
    Recalibration {
        sensor_id: String,
        consensus_trace: String,
        #[serde(flatten)]
        result: RecalibrationResult,
    },
    CertificateSwap {
        sensor_id: String,
        old_certificate_id: String,
        new_certificate_id: String,
    },
    Skipped {
        sensor_id: String,
        reason: String,
    },
    Failed {
        sensor_id: String,
        error: String,
    },
}

impl WorkflowEvent {
    pub fn sensor_id(&self) -> &str {
        match self {
            WorkflowEvent::DriftReport(r) => &r.sensor_id,
            WorkflowEvent::Recalibration { sensor_id, .. }
            | WorkflowEvent::CertificateSwap { sensor_id, .. }
            | WorkflowEvent::Skipped { sensor_id, .. }
            | WorkflowEvent::Failed { sensor_id, .. } => sensor_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub sim_time: Timestamp,
    #[serde(flatten)]
    pub event: WorkflowEvent,
}

pub fn write_audit_log<W: Write>(mut out: W, records: &[AuditRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct SensorProgress {
    consecutive_flags: u32,
    last_swap: Option<Timestamp>,
}

/// Per-sensor memory of the workflow between windows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkflowState {
    sensors: BTreeMap<String, SensorProgress>,
}

impl WorkflowState {
    pub fn consecutive_flags(&self, sensor_id: &str) -> u32 {
        self.sensors.get(sensor_id).map_or(0, |p| p.consecutive_flags)
    }

    pub fn last_swap(&self, sensor_id: &str) -> Option<Timestamp> {
        self.sensors.get(sensor_id).and_then(|p| p.last_swap)
    }
}

/// Runs one window of the workflow over a redundancy group.
///
/// `aligned` holds the group's calibrated streams on a common grid; each
/// stream must have been enriched with its twin's current certificate over
/// the window, so raw readings are recovered by inverting it. A sensor is
/// recalibrated once it was flagged in `confirmations` consecutive windows,
/// its twin's controller requests it, the cooldown since its last swap has
/// passed and at least two unflagged references remain. The fit uses this
/// window and a consensus that excludes every flagged sensor; the new
/// certificate is dated at the window end. Per-sensor failures are reported
/// as events and do not stop the others.
pub fn recalibration_workflow(
    twins: &mut BTreeMap<String, TwinState>,
    aligned: &BTreeMap<String, Vec<Measurement>>,
    window: (Timestamp, Timestamp),
    policy: &RecalibrationPolicy,
    progress: &mut WorkflowState,
) -> Result<Vec<WorkflowEvent>, RedundancyError> {
    let reports = detect_drift(aligned, window, policy.threshold_k)?;
    let at = window.1;
    let mut events = Vec::new();
    let flagged: BTreeSet<&str> = reports.iter().filter(|r| r.flagged).map(|r| r.sensor_id.as_str()).collect();
    for r in &reports {
        let p = progress.sensors.entry(r.sensor_id.clone()).or_default();
        if let Some(twin) = twins.get_mut(&r.sensor_id) {
            if r.flagged {
                twin.set_flag(ControllerFlag::DriftSuspected);
            } else {
                twin.flags.remove(&ControllerFlag::DriftSuspected);
            }
        }
        p.consecutive_flags = if r.flagged { p.consecutive_flags + 1 } else { 0 };
        events.push(WorkflowEvent::DriftReport(r.clone()));
    }

    let references: Vec<&str> = aligned.keys().map(String::as_str).filter(|id| !flagged.contains(id)).collect();
    let exclude: Vec<&str> = flagged.iter().copied().collect();
    let mut consensus: Option<Vec<Measurement>> = None;
    for &id in &flagged {
        let p = &progress.sensors[id];
        let Some(twin) = twins.get(id) else {
            events.push(WorkflowEvent::Failed { sensor_id: id.into(), error: "no twin for sensor".into() });
            continue;
        };
        if p.consecutive_flags < policy.confirmations
            || !twin_control(twin, &BTreeSet::new()).contains(&Action::RequestRecalibration)
        {
            continue;
        }
        if let Some(last) = p.last_swap {
            if at - last < policy.cooldown {
                events.push(WorkflowEvent::Skipped { sensor_id: id.into(), reason: "cooldown".into() });
                continue;
            }
        }
        if references.len() < 2 {
            events.push(WorkflowEvent::Skipped {
                sensor_id: id.into(),
                reason: format!("{} unflagged references, need 2", references.len()),
            });
            continue;
        }
        if consensus.is_none() {
            let windowed: BTreeMap<String, Vec<Measurement>> = aligned
                .iter()
                .map(|(k, s)| {
                    (
                        k.clone(),
                        s.iter().filter(|m| m.timestamp >= window.0 && m.timestamp < window.1).cloned().collect(),
                    )
                })
                .collect();
            consensus = Some(consensus_stream(&windowed, &exclude)?);
        }
        let cons = consensus.as_deref().unwrap_or_default();
        let cert = &twin.certificate;
        let raw: Vec<Measurement> = aligned[id]
            .iter()
            .filter(|m| m.timestamp >= window.0 && m.timestamp < window.1)
            .map(|m| Measurement {
                value: (m.value - cert.offset) / cert.gain,
                unit: cert.raw_unit.clone(),
                ..m.clone()
            })
            .collect();
        match infield_recalibrate(&raw, cons, window, cert, &policy.options, at) {
            Ok(result) => {
                let old_id = cert.certificate_id.clone();
                let new_id = result.new_certificate.certificate_id.clone();
                let twin = twins.get_mut(id).expect("twin present");
                twin.install_certificate(result.new_certificate.clone());
                let p = progress.sensors.get_mut(id).expect("progress present");
                p.consecutive_flags = 0;
                p.last_swap = Some(at);
                events.push(WorkflowEvent::Recalibration {
                    sensor_id: id.into(),
                    consensus_trace: consensus_id(references.iter().copied()),
                    result,
                });
                events.push(WorkflowEvent::CertificateSwap {
                    sensor_id: id.into(),
                    old_certificate_id: old_id,
                    new_certificate_id: new_id,
                });
            }
            Err(e) => events.push(WorkflowEvent::Failed { sensor_id: id.into(), error: e.to_string() }),
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::keyed_standard_normal;
    use crate::twin::{apply_calibration, CalibrationCertificate};
    use crate::units::Unit;

    const N: usize = 60;

    fn cert(id: &str) -> CalibrationCertificate {
        CalibrationCertificate {
            u_noise: 0.1,
            ..CalibrationCertificate::identity(
                id,
                Unit::dimensionless(),
                Timestamp::ZERO,
                Timestamp::from_secs_f64(1e6),
            )
        }
    }

    /// Window `w` of a five-sensor group where `C` reads `bias` too high from
    /// window `from_w` on.
    fn window_data(
        twins: &BTreeMap<String, TwinState>,
        w: usize,
        bias: f64,
        from_w: usize,
    ) -> (BTreeMap<String, Vec<Measurement>>, (Timestamp, Timestamp)) {
        let mut out = BTreeMap::new();
        for (k, (id, twin)) in twins.iter().enumerate() {
            let s: Vec<Measurement> = (0..N)
                .map(|i| {
                    let n = w * N + i;
                    let t = Timestamp::from_secs_f64(n as f64);
                    let b = if id == "C" && w >= from_w { bias } else { 0.0 };
                    let raw = 20.0 + b + 0.1 * keyed_standard_normal(k as u64, n as u64);
                    let mut m = apply_calibration(raw, &twin.certificate, t).unwrap().measurement;
                    m.source_id = id.clone();
                    m
                })
                .collect();
            out.insert(id.clone(), s);
        }
        let win = (Timestamp::from_secs_f64((w * N) as f64), Timestamp::from_secs_f64(((w + 1) * N) as f64));
        (out, win)
    }

    fn twins() -> BTreeMap<String, TwinState> {
        ["A", "B", "C", "D", "E"].iter().map(|id| (id.to_string(), TwinState::new(*id, cert(id), 64))).collect()
    }

    #[test]
    fn healthy_network_no_swaps() {
        let mut tw = twins();
        let mut st = WorkflowState::default();
        let policy = RecalibrationPolicy::new(Duration::from_secs_f64(N as f64), Duration::from_secs_f64(0.0));
        let mut swaps = 0;
        for w in 0..10 {
            let (data, win) = window_data(&tw, w, 0.0, usize::MAX);
            let ev = recalibration_workflow(&mut tw, &data, win, &policy, &mut st).unwrap();
            swaps += ev.iter().filter(|e| matches!(e, WorkflowEvent::CertificateSwap { .. })).count();
        }
        assert_eq!(swaps, 0);
    }

    #[test]
    fn offset_fault_is_confirmed_then_swapped_once() {
        let mut tw = twins();
        let mut st = WorkflowState::default();
        let policy = RecalibrationPolicy::new(Duration::from_secs_f64(N as f64), Duration::from_secs_f64(600.0));
        let mut swaps = Vec::new();
        for w in 0..6 {
            let (data, win) = window_data(&tw, w, 1.0, 2);
            let ev = recalibration_workflow(&mut tw, &data, win, &policy, &mut st).unwrap();
            for e in ev {
                if let WorkflowEvent::CertificateSwap { sensor_id, .. } = e {
                    swaps.push((w, sensor_id));
                }
            }
        }
        assert_eq!(swaps, vec![(3, "C".to_string())]);
        let c = &tw["C"].certificate;
        assert!((c.offset + 1.0).abs() < 3.0 * c.u_b, "{c:?}");
        assert_eq!(c.fit_mode, crate::twin::FitMode::OffsetOnly);
        assert!(!tw["C"].flags.contains(&ControllerFlag::DriftSuspected));
    }

    #[test]
    fn audit_log_is_json_lines() {
        let rec = AuditRecord {
            sim_time: Timestamp(5),
            event: WorkflowEvent::Skipped { sensor_id: "C".into(), reason: "cooldown".into() },
        };
        let mut buf = Vec::new();
        write_audit_log(&mut buf, &[rec.clone(), rec.clone()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], r#"{"sim_time":5,"event":"skipped","sensor_id":"C","reason":"cooldown"}"#);
        assert_eq!(serde_json::from_str::<AuditRecord>(lines[1]).unwrap(), rec);
    }
}

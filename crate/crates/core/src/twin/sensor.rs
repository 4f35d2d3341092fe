//! Simulated physical sensors (ground truth for the simulation).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::collector::{local_time, ClockModel};
use crate::rng::{derive_subseed, keyed_standard_normal};
use crate::time::{Duration, Timestamp};

/// Building block of a deterministic signal. Times are seconds since the
/// sensor model's epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalPrimitive {
    Constant {
        value: f64,
    },
    Ramp {
        slope: f64,
        #[serde(default)]
        start_s: f64,
    },
    Sine {
        amplitude: f64,
        period_s: f64,
        #[serde(default)]
        phase: f64,
    },
    Step {
        at_s: f64,
        height: f64,
    },
}

impl SignalPrimitive {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            SignalPrimitive::Constant { value } => value,
            SignalPrimitive::Ramp { slope, start_s } => slope * (t - start_s).max(0.0),
            SignalPrimitive::Sine { amplitude, period_s, phase } => amplitude * (TAU * t / period_s + phase).sin(),
            SignalPrimitive::Step { at_s, height } => {
                if t >= at_s {
                    height
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Constant additive bias from `start` on.
    StepBias,
    /// Bias growing at `magnitude` per second from `start` on.
    RampDrift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub kind: FaultKind,
    pub start: Timestamp,
    /// Raw units, or raw units per second for ramps.
    pub magnitude: f64,
}

impl Fault {
    pub fn bias_at(&self, t: Timestamp) -> f64 {
        if t < self.start {
            return 0.0;
        }
        match self.kind {
            FaultKind::StepBias => self.magnitude,
            FaultKind::RampDrift => self.magnitude * t.secs_since(self.start),
        }
    }
}

/// Ground-truth model of one sensor.
///
/// The clean raw signal is the sum of `signal` primitives. The physical
/// measurand is `true_gain·clean + true_offset`, i.e. the transfer an ideal
/// calibration would recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub sensor_id: String,
    pub signal: Vec<SignalPrimitive>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub bias_drift_rate: f64,
    /// Origin `t₀` of signal times and of `bias_drift_rate`.
    #[serde(default)]
    pub epoch: Timestamp,
    pub sample_period: Duration,
    pub attached_clock: String,
    #[serde(default = "one")]
    pub true_gain: f64,
    #[serde(default)]
    pub true_offset: f64,
    #[serde(default)]
    pub faults: Vec<Fault>,
}

fn one() -> f64 {
    1.0
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.noise_sigma >= 0.0) {
            return Err(format!("{}: noise_sigma must be >= 0", self.sensor_id));
        }
        if self.sample_period.nanos() <= 0 {
            return Err(format!("{}: sample_period must be positive", self.sensor_id));
        }
        if !(self.true_gain.is_finite() && self.true_gain != 0.0) {
            return Err(format!("{}: true_gain must be finite and non-zero", self.sensor_id));
        }
        Ok(())
    }

    /// Noise-free, fault-free raw signal.
    pub fn clean_signal(&self, t: Timestamp) -> f64 {
        let s = t.secs_since(self.epoch);
        self.signal.iter().map(|p| p.eval(s)).sum()
    }

    /// The physical quantity the sensor observes, in calibrated units.
    pub fn measurand(&self, t: Timestamp) -> f64 {
        self.true_gain * self.clean_signal(t) + self.true_offset
    }

    /// Total injected bias on the raw reading at `t`.
    pub fn bias(&self, t: Timestamp) -> f64 {
        self.bias_drift_rate * t.secs_since(self.epoch) + self.faults.iter().map(|f| f.bias_at(t)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawReading {
    pub raw: f64,
    pub local_timestamp: Timestamp,
}

/// Samples the sensor at true time `sim_time`.
///
/// Noise is keyed by `(seed, sim_time)` and clock jitter by a separate
/// sub-seed, so a reading is reproducible in isolation.
pub fn sample_sensor(model: &SensorModel, clock: &ClockModel, sim_time: Timestamp, seed: u64) -> RawReading {
    let mut raw = model.clean_signal(sim_time) + model.bias(sim_time);
    if model.noise_sigma > 0.0 {
        raw += model.noise_sigma * keyed_standard_normal(derive_subseed(seed, "noise"), sim_time.nanos() as u64);
    }
    RawReading { raw, local_timestamp: local_time(clock, sim_time, derive_subseed(seed, "clock")) }
}

//! Measurement-uncertainty evaluation for simulated sensor networks.
//!
//! Calibrated sensor twins enrich raw readings with split (random and
//! systematic) uncertainty, a collector synchronizes node clocks and aligns
//! streams onto a common time base, fusion operators propagate uncertainty,
//! and cross-sensor redundancy drives drift detection and in-field
//! recalibration. [`scenario`] ties everything into a deterministic
//! discrete-event simulation.

pub mod collector;
pub mod fusion;
pub mod redundancy;
pub mod rng;
pub mod scenario;
pub mod time;
pub mod twin;
pub mod uncertainty;
pub mod units;

pub use time::{Duration, Timestamp};
pub use uncertainty::Measurement;
pub use units::{QuantityKind, Unit};

//! TAI timestamps in integer nanoseconds.

use std::fmt;
use std::ops::{Add, Sub};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

/// TAI − UTC in seconds. Constant since 2017-01-01; no leap second table is kept.
pub const TAI_MINUS_UTC_S: i64 = 37;

const NS_PER_S: i64 = 1_000_000_000;

/// Nanoseconds since the TAI epoch 1970-01-01T00:00:00 TAI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn from_nanos(ns: i64) -> Self {
        Timestamp(ns)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        Timestamp((s * 1e9).round() as i64)
    }

    pub fn nanos(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    /// Signed difference `self - earlier` in seconds.
    pub fn secs_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 * 1e-9
    }

    pub fn offset_secs(self, s: f64) -> Self {
        Timestamp(self.0 + (s * 1e9).round() as i64)
    }

    /// Render as RFC 3339 in UTC.
    pub fn to_rfc3339_utc(self) -> String {
        let utc_ns = self.0 - TAI_MINUS_UTC_S * NS_PER_S;
        let dt = DateTime::<Utc>::from_timestamp(utc_ns.div_euclid(NS_PER_S), utc_ns.rem_euclid(NS_PER_S) as u32)
            .unwrap_or_default();
        dt.to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }

    pub fn parse_rfc3339(s: &str) -> Result<Self, chrono::ParseError> {
        let dt = DateTime::parse_from_rfc3339(s)?;
        let utc_ns = dt.timestamp() * NS_PER_S + i64::from(dt.timestamp_subsec_nanos());
        Ok(Timestamp(utc_ns + TAI_MINUS_UTC_S * NS_PER_S))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

impl Add<Duration> for Timestamp {
    type Output = Timestamp;
    fn add(self, d: Duration) -> Timestamp {
        Timestamp(self.0 + d.0)
    }
}

impl Sub<Duration> for Timestamp {
    type Output = Timestamp;
    fn sub(self, d: Duration) -> Timestamp {
        Timestamp(self.0 - d.0)
    }
}

impl Sub for Timestamp {
    type Output = Duration;
    fn sub(self, other: Timestamp) -> Duration {
        Duration(self.0 - other.0)
    }
}

/// Signed span in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Duration(pub i64);

impl Duration {
    pub fn from_secs_f64(s: f64) -> Self {
        Duration((s * 1e9).round() as i64)
    }

    pub fn from_nanos(ns: i64) -> Self {
        Duration(ns)
    }

    pub fn nanos(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }
}

/// Serde adapter for certificate documents: RFC 3339 UTC strings on the wire.
pub mod rfc3339 {
    use super::Timestamp;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_utc())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let s = String::deserialize(d)?;
        Timestamp::parse_rfc3339(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rfc3339_applies_leap_offset() {
        let t = Timestamp(37 * NS_PER_S);
        assert_eq!(t.to_rfc3339_utc(), "1970-01-01T00:00:00Z");
        assert_eq!(Timestamp::parse_rfc3339("1970-01-01T00:00:00Z").unwrap(), t);
    }

    #[test]
    fn rfc3339_roundtrip_subsecond() {
        let t = Timestamp(1_790_000_000_123_456_789);
        let s = t.to_rfc3339_utc();
        assert_eq!(Timestamp::parse_rfc3339(&s).unwrap(), t);
    }

    #[test]
    fn arithmetic() {
        let t = Timestamp::from_secs_f64(10.0);
        assert_eq!((t + Duration::from_secs_f64(1.5)).as_secs_f64(), 11.5);
        assert_eq!((t - Timestamp::ZERO).nanos(), 10 * NS_PER_S);
        assert_eq!(t.secs_since(Timestamp::from_secs_f64(4.0)), 6.0);
    }
}

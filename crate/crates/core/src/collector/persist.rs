//! CSV persistence of measurement streams, one file per stream.
//!
//! Columns, in order:
//!
//! | column              | content                                         |
//! |---------------------|-------------------------------------------------|
//! | `timestamp_tai_ns`  | TAI nanoseconds, integer                        |
//! | `source_id`         | originating twin or virtual sensor              |
//! | `value`             | value in `unit`                                 |
//! | `u_random`          | standard uncertainty, uncorrelated part         |
//! | `u_systematic`      | standard uncertainty, fully correlated part     |
//! | `unit`              | unit symbol                                     |
//! | `quantity_kind`     | snake_case quantity kind                        |
//! | `u_timestamp_s`     | residual timestamp uncertainty, seconds         |
//! | `timestamp_rfc3339` | UTC rendering of the timestamp, for convenience |
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! yields bit-identical measurements.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::time::Timestamp;
use crate::uncertainty::Measurement;
use crate::units::{QuantityKind, Unit};

pub const STREAM_CSV_HEADER: [&str; 9] = [
    "timestamp_tai_ns",
    "source_id",
    "value",
    "u_random",
    "u_systematic",
    "unit",
    "quantity_kind",
    "u_timestamp_s",
    "timestamp_rfc3339",
];

#[derive(Debug, Error)]
pub enum PersistError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

pub fn write_stream<W: Write>(out: W, stream: &[Measurement]) -> Result<(), PersistError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STREAM_CSV_HEADER)?;
    for m in stream {
        w.write_record([
            m.timestamp.nanos().to_string(),
            m.source_id.clone(),
            m.value.to_string(),
            m.u_random.to_string(),
            m.u_systematic.to_string(),
            m.unit.symbol().to_string(),
            m.quantity_kind.to_string(),
            m.u_timestamp.to_string(),
            m.timestamp.to_rfc3339_utc(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stream_file(path: &Path, stream: &[Measurement]) -> Result<(), PersistError> {
    write_stream(File::create(path)?, stream)
}

/// Reads a stream back, checking the header and every row.
pub fn read_stream<R: Read>(input: R) -> Result<Vec<Measurement>, PersistError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    let expected = STREAM_CSV_HEADER.join(",");
    let found = header.iter().collect::<Vec<_>>().join(",");
    if found != expected {
        return Err(PersistError::Header { expected, found });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let err = |message: String| PersistError::Row { row, message };
        let num = |idx: usize| -> Result<f64, PersistError> {
            rec[idx].parse::<f64>().map_err(|e| err(format!("{}: {e}", STREAM_CSV_HEADER[idx])))
        };
        let ns: i64 = rec[0].parse().map_err(|e| err(format!("timestamp_tai_ns: {e}")))?;
        if rec[5].is_empty() || rec[6].is_empty() {
            return Err(err("unit and quantity_kind must be non-empty".into()));
        }
        let unit: Unit = rec[5].parse().map_err(|e| err(format!("unit: {e}")))?;
        let kind: QuantityKind = rec[6].parse().map_err(|e| err(format!("quantity_kind: {e}")))?;
        let rfc = Timestamp::parse_rfc3339(&rec[8]).map_err(|e| err(format!("timestamp_rfc3339: {e}")))?;
        if (rfc - Timestamp(ns)).nanos() != 0 {
            return Err(err("timestamp_rfc3339 disagrees with timestamp_tai_ns".into()));
        }
        let mut m = Measurement::new(num(2)?, num(3)?, num(4)?, unit, kind)
            .map_err(|e| err(e.to_string()))?
            .at(Timestamp(ns))
            .from_source(&rec[1]);
        m.u_timestamp = num(7)?;
        out.push(m);
    }
    Ok(out)
}

pub fn read_stream_file(path: &Path) -> Result<Vec<Measurement>, PersistError> {
    read_stream(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Measurement> {
        (0..5)
            .map(|i| {
                let mut m = Measurement::with_unit(0.1 * i as f64 + 1e-17, 0.3, 1.0 / 3.0, "kPa".parse().unwrap())
                    .unwrap()
                    .at(Timestamp(1_700_000_000_123_456_789 + i * 1_000_000_000))
                    .from_source("P,1");
                m.u_timestamp = 1e-6 * i as f64;
                m
            })
            .collect()
    }

    #[test]
    fn roundtrip_is_exact() {
        let s = sample();
        let mut buf = Vec::new();
        write_stream(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&STREAM_CSV_HEADER.join(",")));
        assert_eq!(read_stream(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn header_checked() {
        let bad = "timestamp,source_id\n1,A\n";
        assert!(matches!(read_stream(bad.as_bytes()), Err(PersistError::Header { .. })));
    }

    #[test]
    fn bad_rows_rejected() {
        let mut buf = Vec::new();
        write_stream(&mut buf, &sample()[..1]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let broken = text.replace(",kPa,", ",,");
        assert!(matches!(read_stream(broken.as_bytes()), Err(PersistError::Row { row: 2, .. })));
        let broken = text.replace(",pressure,", ",temperature,");
        assert!(matches!(read_stream(broken.as_bytes()), Err(PersistError::Row { row: 2, .. })));
    }
}

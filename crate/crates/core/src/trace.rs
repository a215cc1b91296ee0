//! Line-delimited telemetry traces.
//!
//! A trace is JSON Lines. The first record is the header, tagged
//! `"record":"header"`; every following record is a frame tagged
//! `"record":"frame"`:
//!
//! ```text
//! {"record":"header","schema_version":1,"nominal_rate":90.0,"session_id":"s1","exhibit_catalog_ref":"builtin"}
//! {"record":"frame","timestamp":0.0,"head_angular_velocity":1.5,"locomotion_velocity":0.02,"gaze_target":"ex-01","gaze_is_text":true}
//! ```
//!
//! Floats are written in shortest round-trip form, so write-then-parse is
//! the identity.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::TelemetryFrame;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {got} does not advance past {previous}")]
    Ordering { line: usize, previous: f64, got: f64 },
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("trace has no header record")]
    MissingHeader,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub nominal_rate: f64,
    pub session_id: String,
    pub exhibit_catalog_ref: String,
}

impl TraceHeader {
    pub fn new(session_id: impl Into<String>, catalog_ref: impl Into<String>) -> Self {
        TraceHeader {
            schema_version: SCHEMA_VERSION,
            nominal_rate: 90.0,
            session_id: session_id.into(),
            exhibit_catalog_ref: catalog_ref.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Header(TraceHeader),
    Frame(TelemetryFrame),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub frames: Vec<TelemetryFrame>,
}

impl Trace {
    pub fn new(header: TraceHeader, frames: Vec<TelemetryFrame>) -> Self {
        Trace { header, frames }
    }

    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }
}

/// Reads and validates a trace. Blank lines are ignored.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<Trace, TraceError> {
    let mut header: Option<TraceHeader> = None;
    let mut frames: Vec<TelemetryFrame> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        match (record, &header) {
            (Record::Header(h), None) => {
                if h.schema_version != SCHEMA_VERSION {
                    return Err(TraceError::Version(h.schema_version));
                }
                if !(h.nominal_rate.is_finite() && h.nominal_rate > 0.0) {
                    return Err(TraceError::Parse {
                        line: line_no,
                        message: format!("nominal_rate must be positive, got {}", h.nominal_rate),
                    });
                }
                header = Some(h);
            }
            (Record::Header(_), Some(_)) => {
                return Err(TraceError::Parse {
                    line: line_no,
                    message: "duplicate header record".into(),
                })
            }
            (Record::Frame(_), None) => return Err(TraceError::MissingHeader),
            (Record::Frame(f), Some(_)) => {
                f.validate().map_err(|e| TraceError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
                if let Some(prev) = frames.last() {
                    if f.timestamp <= prev.timestamp {
                        return Err(TraceError::Ordering {
                            line: line_no,
                            previous: prev.timestamp,
                            got: f.timestamp,
                        });
                    }
                }
                frames.push(f);
            }
        }
    }
    let header = header.ok_or(TraceError::MissingHeader)?;
    Ok(Trace { header, frames })
}

pub fn write_trace<W: Write>(mut w: W, trace: &Trace) -> Result<(), TraceError> {
    write_record(&mut w, &Record::Header(trace.header.clone()))?;
    for f in &trace.frames {
        write_record(&mut w, &Record::Frame(f.clone()))?;
    }
    Ok(())
}

fn write_record<W: Write>(w: &mut W, r: &Record) -> Result<(), TraceError> {
    serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

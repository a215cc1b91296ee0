//! Offline re-execution of a trace through the whole session.
//!
//! The timeline is JSON Lines, one record per state tick:
//! `{"timestamp":..,"e_raw":..,"e_windowed":..,"e_smoothed":..,"gate":"none","state":"engaged"}`.

use std::io::{BufRead, Write};

use crate::config::EngineConfig;
use crate::content::{Catalog, ContentCache, DisplayEvent};
use crate::engine::TickRecord;
use crate::metrics::{MetricsReport, SessionMetrics};
use crate::session::{Session, SessionError};
use crate::state::EngagementState;
use crate::trace::Trace;

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub timeline: Vec<TickRecord>,
    pub displays: Vec<DisplayEvent>,
    pub metrics: SessionMetrics,
    pub report: MetricsReport,
    /// Timestamp of the last frame, if any.
    pub end_timestamp: Option<f64>,
    pub provider_calls: u64,
}

/// Adds placeholders for every gaze target the trace mentions but the catalog lacks.
pub fn catalog_for_trace(mut catalog: Catalog, trace: &Trace) -> Catalog {
    for f in &trace.frames {
        if let Some(id) = &f.gaze_target {
            catalog.ensure(id);
        }
    }
    catalog
}

/// Runs `trace` through a fresh session. `cfg` must be validated.
pub fn replay(trace: &Trace, cfg: &EngineConfig, catalog: Catalog, cache: ContentCache) -> Result<ReplayOutput, SessionError> {
    let catalog = catalog_for_trace(catalog, trace);
    let mut session = Session::from_config(cfg, catalog, cache)?;
    let mut timeline = Vec::with_capacity(trace.frames.len() / 8 + 1);
    let mut displays = Vec::new();
    for frame in &trace.frames {
        let step = session.step(frame)?;
        timeline.extend(step.output.tick);
        displays.extend(step.displays);
    }
    let (_, content, metrics) = session.into_parts();
    let report = metrics.report(&cfg.fingerprint());
    Ok(ReplayOutput {
        timeline,
        displays,
        report,
        metrics,
        end_timestamp: trace.frames.last().map(|f| f.timestamp),
        provider_calls: content.provider_calls(),
    })
}

pub fn write_timeline<W: Write>(mut w: W, timeline: &[TickRecord]) -> std::io::Result<()> {
    for t in timeline {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_timeline<R: BufRead>(r: R) -> std::io::Result<Vec<TickRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Seconds per state implied by a timeline: each tick's state holds until
/// the next tick, the last one until `end`.
pub fn timeline_state_time(timeline: &[TickRecord], end: f64) -> [f64; 5] {
    let mut acc = [0.0; 5];
    for (i, t) in timeline.iter().enumerate() {
        let until = timeline.get(i + 1).map_or(end, |n| n.timestamp);
        acc[t.state.index()] += until - t.timestamp;
    }
    acc
}

pub fn state_time_of(report: &MetricsReport) -> [f64; 5] {
    EngagementState::ALL.map(|s| report.state_time.get(s))
}

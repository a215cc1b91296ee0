//! Wall-clock latency of the per-frame inference path.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::engine::Engine;
use crate::scenario::{generate_frames, Scenario, Segment};
use crate::session::{Session, SessionError};
use crate::signal::TelemetryFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub ticks: usize,
    pub min_us: f64,
    pub median_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
    pub config_fingerprint: String,
}

impl BenchReport {
    /// Nearest-rank order statistics over per-tick samples in nanoseconds.
    pub fn from_samples(mut samples_ns: Vec<u64>, config_fingerprint: String) -> Self {
        samples_ns.sort_unstable();
        let n = samples_ns.len();
        let rank = |q: f64| -> f64 {
            if n == 0 {
                return 0.0;
            }
            let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
            samples_ns[idx] as f64 / 1000.0
        };
        BenchReport {
            ticks: n,
            min_us: samples_ns.first().map_or(0.0, |&v| v as f64 / 1000.0),
            median_us: rank(0.5),
            p99_us: rank(0.99),
            max_us: samples_ns.last().map_or(0.0, |&v| v as f64 / 1000.0),
            config_fingerprint,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report fields are plain numbers and strings")
    }

    pub fn to_table(&self) -> String {
        format!(
            "ticks       {}\nmin (us)    {:.3}\nmedian (us) {:.3}\np99 (us)    {:.3}\nmax (us)    {:.3}\nconfig      {}\n",
            self.ticks, self.min_us, self.median_us, self.p99_us, self.max_us, self.config_fingerprint
        )
    }
}

/// Mixed reading, scanning, walking, and running over the built-in exhibits.
pub fn workload_scenario() -> Scenario {
    let seg = |scenario: Scenario, duration: f64| Segment { scenario, duration };
    Scenario::Mixed(vec![
        seg(Scenario::FocusedReader { exhibit: "ex-01".into() }, 12.0),
        seg(
            Scenario::Scanner {
                targets: vec!["ex-02".into(), "ex-03".into(), "ex-04".into()],
                glance: 0.4,
            },
            8.0,
        ),
        seg(Scenario::FocusedReader { exhibit: "ex-02".into() }, 12.0),
        seg(Scenario::Walker { velocity: 1.6 }, 6.0),
        seg(Scenario::FocusedReader { exhibit: "ex-03".into() }, 10.0),
        seg(Scenario::Runner { velocity: 2.6 }, 6.0),
        seg(Scenario::FocusedReader { exhibit: "ex-04".into() }, 6.0),
    ])
}

/// At least `rate * duration` frames of the standard workload.
pub fn workload(duration: f64, rate: f64, seed: u64) -> Vec<TelemetryFrame> {
    generate_frames(&workload_scenario(), duration, rate, seed).expect("built-in workload is valid")
}

/// Times `Engine::step` alone: normalization through classification.
pub fn bench_inference(cfg: &EngineConfig, frames: &[TelemetryFrame]) -> BenchReport {
    let mut engine = Engine::new(cfg.clone());
    let mut samples = Vec::with_capacity(frames.len());
    for f in frames {
        let start = Instant::now();
        let out = engine.step(f);
        let elapsed = start.elapsed();
        black_box(out).expect("workload frames are valid");
        samples.push(elapsed.as_nanos() as u64);
    }
    BenchReport::from_samples(samples, cfg.fingerprint())
}

/// Times `Session::step`: inference plus content dispatch and polling.
pub fn bench_session(session: &mut Session, frames: &[TelemetryFrame], fingerprint: String) -> Result<BenchReport, SessionError> {
    let mut samples = Vec::with_capacity(frames.len());
    for f in frames {
        let start = Instant::now();
        let out = session.step(f);
        let elapsed = start.elapsed();
        black_box(out)?;
        samples.push(elapsed.as_nanos() as u64);
    }
    Ok(BenchReport::from_samples(samples, fingerprint))
}

//! Per-frame inference: normalize, fuse, window, smooth, gate, classify.
//!
//! Frames arrive at the sensor rate. Fusion, the rolling window, dwell,
//! and gate timers advance every frame; interpolation and classification
//! run on a slower fixed tick so the smoothing time constant does not
//! depend on the sensor rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EngineConfig, StageOrder};
use crate::fusion::{compute_physical_score, fuse, smooth, FusionError, RollingWindow};
use crate::gating::{classify, Gate, GateState};
use crate::signal::{normalize, DwellTracker, NormalizedSignals, SignalError, TelemetryFrame};
use crate::state::EngagementState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("timestamp {got} does not advance past {previous}")]
    Ordering { previous: f64, got: f64 },
}

impl From<FusionError> for EngineError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::Ordering { newest, got } => EngineError::Ordering { previous: newest, got },
            FusionError::Weights(msg) => unreachable!("weights are validated with the config: {msg}"),
        }
    }
}

/// Scores at one point in time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EngagementEstimate {
    pub timestamp: f64,
    pub e_raw: f64,
    pub e_windowed: f64,
    pub e_smoothed: f64,
}

/// One state-tick line of the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub timestamp: f64,
    pub e_raw: f64,
    pub e_windowed: f64,
    pub e_smoothed: f64,
    pub gate: Gate,
    pub state: EngagementState,
}

/// Result of feeding one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub signals: NormalizedSignals,
    pub estimate: EngagementEstimate,
    pub gate: Gate,
    /// Emitted state after this frame.
    pub state: EngagementState,
    /// Present when a state tick fell on this frame.
    pub tick: Option<TickRecord>,
    /// Interval since the previous frame (0 on the first frame).
    pub dt: f64,
}

const TICK_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Engine {
    cfg: EngineConfig,
    tracker: DwellTracker,
    window: RollingWindow,
    gates: GateState,
    last_timestamp: Option<f64>,
    first_timestamp: f64,
    ticks_done: u64,
    estimate: EngagementEstimate,
    /// Classifier memory: score-derived state before gating.
    score_state: EngagementState,
    state: EngagementState,
    transitions: u64,
}

impl Engine {
    /// The config must already be validated.
    pub fn new(cfg: EngineConfig) -> Self {
        let window = RollingWindow::new(cfg.fusion.window);
        Engine {
            cfg,
            tracker: DwellTracker::new(),
            window,
            gates: GateState::new(),
            last_timestamp: None,
            first_timestamp: 0.0,
            ticks_done: 0,
            estimate: EngagementEstimate::default(),
            score_state: EngagementState::HighlyDisengaged,
            state: EngagementState::HighlyDisengaged,
            transitions: 0,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn state(&self) -> EngagementState {
        self.state
    }

    pub fn estimate(&self) -> EngagementEstimate {
        self.estimate
    }

    pub fn gate(&self) -> Gate {
        self.gates.active_gate()
    }

    pub fn tracker(&self) -> &DwellTracker {
        &self.tracker
    }

    /// Number of emitted-state transitions so far.
    pub fn transitions(&self) -> u64 {
        self.transitions
    }

    fn tick_time(&self, k: u64) -> f64 {
        self.first_timestamp + k as f64 / self.cfg.fusion.tick_rate
    }

    pub fn step(&mut self, frame: &TelemetryFrame) -> Result<StepOutput, EngineError> {
        frame.validate()?;
        let t = frame.timestamp;
        let dt = match self.last_timestamp {
            Some(prev) if t <= prev => return Err(EngineError::Ordering { previous: prev, got: t }),
            Some(prev) => t - prev,
            None => {
                self.first_timestamp = t;
                0.0
            }
        };

        self.tracker.update(frame, dt, &self.cfg.signal);
        let signals = normalize(frame, &self.tracker, &self.cfg.signal)?;
        let w = &self.cfg.fusion.weights;
        let e_raw = fuse(compute_physical_score(&signals, w), signals.s_read, w);
        let gate = self.gates.update(frame.locomotion_velocity, dt, &self.cfg.gates);
        self.last_timestamp = Some(t);
        self.estimate.timestamp = t;
        self.estimate.e_raw = e_raw;

        let order = self.cfg.fusion.order;
        if order == StageOrder::WindowThenSmooth {
            self.estimate.e_windowed = self.window.update(t, e_raw)?;
        }

        let mut due = 0u32;
        while t + TICK_EPSILON >= self.tick_time(self.ticks_done) {
            self.ticks_done += 1;
            due += 1;
        }

        let tick = (due > 0).then(|| {
            let alpha = self.cfg.fusion.alpha;
            let final_score = match order {
                StageOrder::WindowThenSmooth => {
                    for _ in 0..due {
                        self.estimate.e_smoothed = smooth(self.estimate.e_smoothed, self.estimate.e_windowed, alpha);
                    }
                    self.estimate.e_smoothed
                }
                StageOrder::SmoothThenWindow => {
                    for _ in 0..due {
                        self.estimate.e_smoothed = smooth(self.estimate.e_smoothed, e_raw, alpha);
                    }
                    self.estimate.e_windowed = self
                        .window
                        .update(t, self.estimate.e_smoothed)
                        .expect("timestamps checked above");
                    self.estimate.e_windowed
                }
            };
            self.score_state = classify(final_score, &self.cfg.classifier, self.score_state);
            let next = gate.apply(self.score_state);
            if next != self.state {
                self.transitions += 1;
                self.state = next;
            }
            TickRecord {
                timestamp: t,
                e_raw,
                e_windowed: self.estimate.e_windowed,
                e_smoothed: self.estimate.e_smoothed,
                gate,
                state: self.state,
            }
        });

        Ok(StepOutput {
            signals,
            estimate: self.estimate,
            gate,
            state: self.state,
            tick,
            dt,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: usize, f: impl Fn(usize, f64) -> TelemetryFrame) -> Vec<TelemetryFrame> {
        (0..n).map(|i| f(i, i as f64 / 90.0)).collect()
    }

    fn run(cfg: EngineConfig, fs: &[TelemetryFrame]) -> Vec<TickRecord> {
        let mut e = Engine::new(cfg);
        fs.iter().filter_map(|f| e.step(f).unwrap().tick).collect()
    }

    #[test]
    fn ticks_at_configured_rate() {
        let fs = frames(900, |_, t| TelemetryFrame::new(t, 0.0, 0.0));
        let ticks = run(EngineConfig::default(), &fs);
        assert_eq!(ticks.len(), 100);
        assert_eq!(ticks[0].timestamp, 0.0);
    }

    #[test]
    fn rejects_repeated_timestamp() {
        let mut e = Engine::new(EngineConfig::default());
        e.step(&TelemetryFrame::new(1.0, 0.0, 0.0)).unwrap();
        assert!(matches!(
            e.step(&TelemetryFrame::new(1.0, 0.0, 0.0)),
            Err(EngineError::Ordering { .. })
        ));
        assert!(matches!(
            e.step(&TelemetryFrame::new(2.0, -1.0, 0.0)),
            Err(EngineError::Signal(_))
        ));
    }

    #[test]
    fn focused_reading_converges_to_highly_engaged() {
        let fs = frames(20 * 90, |_, t| TelemetryFrame::new(t, 0.0, 0.0).gazing("ex-01", true));
        let ticks = run(EngineConfig::default(), &fs);
        let last = ticks.last().unwrap();
        assert_eq!(last.state, EngagementState::HighlyEngaged);
        assert!((last.e_smoothed - 1.0).abs() < 1e-3);
    }

    #[test]
    fn hand_stepped_first_ticks() {
        // Still, no gaze: s_head = 1, s_gaze = 0, s_loco = 1 => s_phys = 0.70,
        // e_raw = 0.75 * 0.70 = 0.525 on every frame; window mean = 0.525.
        // Tick k: smoothed_k = 0.525 * (1 - 0.65^(k+1)).
        let fs = frames(91, |_, t| TelemetryFrame::new(t, 0.0, 0.0));
        let ticks = run(EngineConfig::default(), &fs);
        for (k, tick) in ticks.iter().enumerate() {
            let expected = 0.525 * (1.0 - 0.65f64.powi(k as i32 + 1));
            assert!((tick.e_raw - 0.525).abs() < 1e-15);
            assert!((tick.e_smoothed - expected).abs() < 1e-12, "tick {k}");
        }
        // Score settles in Neutral [0.4, 0.6); hysteresis needs > 0.45 to leave
        // Disengaged upward, reached at k = 4 (0.4641).
        assert_eq!(ticks.last().unwrap().state, EngagementState::Neutral);
    }

    #[test]
    fn run_gate_holds_disengaged() {
        let fs = frames(30 * 90, |_, t| TelemetryFrame::new(t, 0.0, 2.5).gazing("ex-01", true));
        let ticks = run(EngineConfig::default(), &fs);
        for tick in ticks.iter().filter(|t| t.timestamp >= 0.6) {
            assert_eq!(tick.gate, Gate::RunForce);
            assert_eq!(tick.state, EngagementState::Disengaged);
        }
    }

    #[test]
    fn alpha_one_tracks_window_exactly() {
        let mut cfg = EngineConfig::default();
        cfg.fusion.alpha = 1.0;
        let fs = frames(600, |i, t| TelemetryFrame::new(t, (i % 40) as f64, 0.3 * (i % 7) as f64 / 7.0));
        for tick in run(cfg, &fs) {
            assert_eq!(tick.e_smoothed, tick.e_windowed);
        }
    }

    #[test]
    fn alternate_stage_order_runs() {
        let mut cfg = EngineConfig::default();
        cfg.fusion.order = StageOrder::SmoothThenWindow;
        let fs = frames(20 * 90, |_, t| TelemetryFrame::new(t, 0.0, 0.0).gazing("ex-01", true));
        let ticks = run(cfg, &fs);
        assert_eq!(ticks.last().unwrap().state, EngagementState::HighlyEngaged);
    }

    #[test]
    fn dropped_frames_fire_each_missed_tick() {
        let mut e = Engine::new(EngineConfig::default());
        e.step(&TelemetryFrame::new(0.0, 0.0, 0.0)).unwrap();
        let out = e.step(&TelemetryFrame::new(0.35, 0.0, 0.0)).unwrap();
        // Ticks at 0.1, 0.2, 0.3 collapse onto this frame: three smoothing steps.
        let expected = 0.525 * (1.0 - 0.65f64.powi(4));
        assert!((out.tick.unwrap().e_smoothed - expected).abs() < 1e-12);
    }
}

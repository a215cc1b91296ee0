//! Raw telemetry to unit-scaled engagement signals.
//!
//! Head stability and locomotion are linear ramps that reach zero at their
//! thresholds; gaze is a ramp on dwell time that saturates at the
//! intentional-focus threshold. Dwell accounting lives in [`DwellTracker`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("invalid {field}: {value} (must be finite and non-negative)")]
    Invalid { field: &'static str, value: f64 },
    #[error("gaze_is_text set without a gaze target")]
    TextWithoutTarget,
}

/// One telemetry sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    /// Seconds, strictly increasing across a trace.
    pub timestamp: f64,
    /// Degrees per second.
    pub head_angular_velocity: f64,
    /// Meters per second.
    pub locomotion_velocity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_target: Option<String>,
    #[serde(default)]
    pub gaze_is_text: bool,
    /// Collectible card picked up on this frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub card: Option<String>,
}

impl TelemetryFrame {
    pub fn new(timestamp: f64, head: f64, loco: f64) -> Self {
        TelemetryFrame {
            timestamp,
            head_angular_velocity: head,
            locomotion_velocity: loco,
            gaze_target: None,
            gaze_is_text: false,
            card: None,
        }
    }

    pub fn gazing(mut self, target: impl Into<String>, is_text: bool) -> Self {
        self.gaze_target = Some(target.into());
        self.gaze_is_text = is_text;
        self
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        check("timestamp", self.timestamp)?;
        check("head_angular_velocity", self.head_angular_velocity)?;
        check("locomotion_velocity", self.locomotion_velocity)?;
        if self.gaze_is_text && self.gaze_target.is_none() {
            return Err(SignalError::TextWithoutTarget);
        }
        Ok(())
    }
}

fn check(field: &'static str, value: f64) -> Result<f64, SignalError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(SignalError::Invalid { field, value })
    }
}

/// Thresholds used by normalization and dwell accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    /// Head angular velocity (°/s) at which stability reaches 0.
    pub head_threshold: f64,
    /// Dwell (s) at which gaze saturates at 1.
    pub gaze_dwell_threshold: f64,
    /// Locomotion velocity (m/s) at which the locomotion score reaches 0.
    pub locomotion_baseline: f64,
    /// Text dwell (s) that must be strictly exceeded to set the reading context.
    pub reading_dwell: f64,
    /// Raycast-miss time (s) tolerated before a dwell is dropped.
    pub gaze_grace: f64,
    /// Nominal sample rate (Hz).
    pub nominal_rate: f64,
    /// Per-frame dt cap as a multiple of the nominal frame period.
    pub max_dt_factor: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            head_threshold: 30.0,
            gaze_dwell_threshold: 1.0,
            locomotion_baseline: 1.2,
            reading_dwell: 2.0,
            gaze_grace: 0.25,
            nominal_rate: 90.0,
            max_dt_factor: 3.0,
        }
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("head_threshold", self.head_threshold),
            ("gaze_dwell_threshold", self.gaze_dwell_threshold),
            ("locomotion_baseline", self.locomotion_baseline),
            ("nominal_rate", self.nominal_rate),
            ("max_dt_factor", self.max_dt_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("signal.{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("reading_dwell", self.reading_dwell), ("gaze_grace", self.gaze_grace)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("signal.{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// Longest interval a single frame may contribute to dwell.
    pub fn max_dt(&self) -> f64 {
        self.max_dt_factor / self.nominal_rate
    }
}

/// Unit-scaled signal set fed to fusion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizedSignals {
    pub s_head: f64,
    pub s_gaze: f64,
    pub s_loco: f64,
    pub s_read: bool,
}

fn inverse_ramp(value: f64, threshold: f64) -> f64 {
    (1.0 - value / threshold).clamp(0.0, 1.0)
}

/// Head stability for an angular velocity in °/s, using the default 30 °/s threshold.
pub fn normalize_head(omega: f64) -> Result<f64, SignalError> {
    normalize_head_with(omega, SignalConfig::default().head_threshold)
}

pub fn normalize_head_with(omega: f64, threshold: f64) -> Result<f64, SignalError> {
    Ok(inverse_ramp(check("head_angular_velocity", omega)?, threshold))
}

/// Locomotion score for a velocity in m/s, using the default 1.2 m/s baseline.
pub fn normalize_locomotion(v: f64) -> Result<f64, SignalError> {
    normalize_locomotion_with(v, SignalConfig::default().locomotion_baseline)
}

pub fn normalize_locomotion_with(v: f64, baseline: f64) -> Result<f64, SignalError> {
    Ok(inverse_ramp(check("locomotion_velocity", v)?, baseline))
}

/// Gaze dwell accounting for the current raycast target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DwellTracker {
    current_target: Option<String>,
    dwell_elapsed: f64,
    text_dwell_elapsed: f64,
    miss_elapsed: f64,
}

impl DwellTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current_target(&self) -> Option<&str> {
        self.current_target.as_deref()
    }

    pub fn dwell_elapsed(&self) -> f64 {
        self.dwell_elapsed
    }

    pub fn text_dwell_elapsed(&self) -> f64 {
        self.text_dwell_elapsed
    }

    pub fn miss_elapsed(&self) -> f64 {
        self.miss_elapsed
    }

    fn reset(&mut self, target: Option<String>) {
        self.current_target = target;
        self.dwell_elapsed = 0.0;
        self.text_dwell_elapsed = 0.0;
        self.miss_elapsed = 0.0;
    }

    /// Advances the tracker by one frame covering `dt` seconds.
    ///
    /// Acquiring a new target starts its dwell at zero; each later frame on
    /// the same target adds `dt` (capped at `cfg.max_dt()`). Text dwell only
    /// grows on frames that hit the target's text panel and restarts when
    /// gaze leaves the panel. Raycast misses freeze the dwell; the target is
    /// dropped once misses outlast the grace period.
    pub fn update(&mut self, frame: &TelemetryFrame, dt: f64, cfg: &SignalConfig) {
        let dt = dt.clamp(0.0, cfg.max_dt());
        match &frame.gaze_target {
            Some(target) if self.current_target.as_deref() == Some(target.as_str()) => {
                self.miss_elapsed = 0.0;
                self.dwell_elapsed += dt;
                if frame.gaze_is_text {
                    self.text_dwell_elapsed += dt;
                } else {
                    self.text_dwell_elapsed = 0.0;
                }
            }
            Some(target) => self.reset(Some(target.clone())),
            None => {
                if self.current_target.is_some() {
                    self.miss_elapsed += dt;
                    if self.miss_elapsed > cfg.gaze_grace {
                        self.reset(None);
                    }
                }
            }
        }
    }

    /// Gaze score: dwell over the focus threshold, clamped to [0, 1].
    pub fn gaze_score(&self, cfg: &SignalConfig) -> f64 {
        if self.current_target.is_none() {
            return 0.0;
        }
        (self.dwell_elapsed / cfg.gaze_dwell_threshold).clamp(0.0, 1.0)
    }

    /// Reading context: text dwell strictly above the reading threshold.
    pub fn reading_context(&self, cfg: &SignalConfig) -> bool {
        self.text_dwell_elapsed > cfg.reading_dwell
    }
}

pub fn normalize_gaze(tracker: &DwellTracker) -> f64 {
    tracker.gaze_score(&SignalConfig::default())
}

pub fn compute_reading_context(tracker: &DwellTracker) -> bool {
    tracker.reading_context(&SignalConfig::default())
}

/// Normalizes a validated frame against the tracker state after its update.
pub fn normalize(
    frame: &TelemetryFrame,
    tracker: &DwellTracker,
    cfg: &SignalConfig,
) -> Result<NormalizedSignals, SignalError> {
    Ok(NormalizedSignals {
        s_head: normalize_head_with(frame.head_angular_velocity, cfg.head_threshold)?,
        s_gaze: tracker.gaze_score(cfg),
        s_loco: normalize_locomotion_with(frame.locomotion_velocity, cfg.locomotion_baseline)?,
        s_read: tracker.reading_context(cfg),
    })
}

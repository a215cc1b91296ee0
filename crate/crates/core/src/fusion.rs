//! Weighted fusion, rolling mean, and interpolation smoothing.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::NormalizedSignals;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("sample at t={got} precedes newest retained sample at t={newest}")]
    Ordering { newest: f64, got: f64 },
    #[error("invalid weights: {0}")]
    Weights(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionWeights {
    pub w_phys: f64,
    pub w_read: f64,
    pub w_head: f64,
    pub w_gaze: f64,
    pub w_loco: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights {
            w_phys: 0.75,
            w_read: 0.25,
            w_head: 0.35,
            w_gaze: 0.30,
            w_loco: 0.35,
        }
    }
}

impl FusionWeights {
    pub fn validate(&self) -> Result<(), FusionError> {
        let all = [
            ("w_phys", self.w_phys),
            ("w_read", self.w_read),
            ("w_head", self.w_head),
            ("w_gaze", self.w_gaze),
            ("w_loco", self.w_loco),
        ];
        for (name, w) in all {
            if !(0.0..=1.0).contains(&w) {
                return Err(FusionError::Weights(format!("{name}={w} outside [0, 1]")));
            }
        }
        let top = self.w_phys + self.w_read;
        if (top - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(FusionError::Weights(format!("w_phys + w_read = {top}, expected 1")));
        }
        let sub = self.w_head + self.w_gaze + self.w_loco;
        if (sub - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(FusionError::Weights(format!(
                "w_head + w_gaze + w_loco = {sub}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Weighted average of head stability, gaze, and locomotion.
pub fn compute_physical_score(s: &NormalizedSignals, w: &FusionWeights) -> f64 {
    let p = w.w_head * s.s_head + w.w_gaze * s.s_gaze + w.w_loco * s.s_loco;
    p.clamp(0.0, 1.0)
}

/// Composite score `E_raw = w_phys * s_phys + w_read * s_read`.
pub fn fuse(s_phys: f64, s_read: bool, w: &FusionWeights) -> f64 {
    w.w_phys * s_phys + w.w_read * if s_read { 1.0 } else { 0.0 }
}

/// Time-bounded rolling mean.
///
/// Keeps a running sum; the sum is rebuilt from the retained samples once
/// per `len` evictions so rounding drift stays bounded at amortized O(1).
#[derive(Debug, Clone)]
pub struct RollingWindow {
    duration: f64,
    samples: VecDeque<(f64, f64)>,
    sum: f64,
    evictions_since_resync: usize,
}

impl RollingWindow {
    pub fn new(duration: f64) -> Self {
        RollingWindow {
            duration,
            samples: VecDeque::new(),
            sum: 0.0,
            evictions_since_resync: 0,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.samples.iter()
    }

    pub fn newest(&self) -> Option<f64> {
        self.samples.back().map(|&(t, _)| t)
    }

    /// Mean of the retained samples, or `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some((self.sum / self.samples.len() as f64).clamp(0.0, 1.0))
        }
    }

    /// Inserts `(t, value)`, evicts samples older than `t - duration`, and
    /// returns the mean of what remains.
    pub fn update(&mut self, t: f64, value: f64) -> Result<f64, FusionError> {
        if let Some(newest) = self.newest() {
            if t < newest {
                return Err(FusionError::Ordering { newest, got: t });
            }
        }
        self.samples.push_back((t, value));
        self.sum += value;
        let horizon = t - self.duration;
        while let Some(&(ts, v)) = self.samples.front() {
            if ts >= horizon {
                break;
            }
            self.samples.pop_front();
            self.sum -= v;
            self.evictions_since_resync += 1;
        }
        if self.evictions_since_resync >= self.samples.len().max(64) {
            self.sum = self.samples.iter().map(|&(_, v)| v).sum();
            self.evictions_since_resync = 0;
        }
        Ok(self.mean().unwrap_or(value))
    }
}

/// One interpolation step from `previous` toward `target`.
///
/// Equal to `previous + alpha * (target - previous)`; written so the distance
/// to the target shrinks by exactly `1 - alpha`, and clamped so rounding can
/// never carry the result past either endpoint.
pub fn smooth(previous: f64, target: f64, alpha: f64) -> f64 {
    let next = target - (1.0 - alpha) * (target - previous);
    let (lo, hi) = if previous <= target { (previous, target) } else { (target, previous) };
    next.clamp(lo, hi)
}

//! Velocity safety gates and the banded, hysteretic state classifier.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::state::EngagementState;

/// Which velocity gate, if any, constrains the emitted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    #[default]
    None,
    WalkCap,
    RunForce,
}

impl Gate {
    /// Applies the gate to a score-derived state.
    ///
    /// The walk gate caps at `Neutral`; the run gate overrides to
    /// `Disengaged` whatever the score says.
    pub fn apply(self, state: EngagementState) -> EngagementState {
        match self {
            Gate::None => state,
            Gate::WalkCap => state.min(EngagementState::Neutral),
            Gate::RunForce => EngagementState::Disengaged,
        }
    }

    pub fn ceiling(self) -> EngagementState {
        match self {
            Gate::None => EngagementState::HighlyEngaged,
            Gate::WalkCap => EngagementState::Neutral,
            Gate::RunForce => EngagementState::Disengaged,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gate::None => "none",
            Gate::WalkCap => "walk_cap",
            Gate::RunForce => "run_force",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    /// m/s; sustained motion above this caps at Neutral.
    pub walk_threshold: f64,
    /// m/s; sustained motion above this forces Disengaged.
    pub run_threshold: f64,
    /// Seconds above threshold before a gate engages.
    pub sustain: f64,
    /// Seconds below `threshold - release_margin` before a gate releases.
    pub release: f64,
    pub release_margin: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            walk_threshold: 1.2,
            run_threshold: 2.0,
            sustain: 0.5,
            release: 0.5,
            release_margin: 0.1,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.walk_threshold > 0.0 && self.run_threshold > self.walk_threshold) {
            return Err(format!(
                "gates need 0 < walk_threshold < run_threshold, got {} and {}",
                self.walk_threshold, self.run_threshold
            ));
        }
        for (name, v) in [
            ("sustain", self.sustain),
            ("release", self.release),
            ("release_margin", self.release_margin),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("gates.{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// One latching velocity threshold with sustain and release timers.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Latch {
    active: bool,
    sustain_elapsed: f64,
    release_elapsed: f64,
}

impl Latch {
    fn update(&mut self, v: f64, threshold: f64, cfg: &GateConfig, dt: f64) {
        if self.active {
            if v < threshold - cfg.release_margin {
                self.release_elapsed += dt;
                if self.release_elapsed >= cfg.release {
                    *self = Latch::default();
                }
            } else {
                self.release_elapsed = 0.0;
            }
        } else if v > threshold {
            self.sustain_elapsed += dt;
            if self.sustain_elapsed >= cfg.sustain {
                self.active = true;
                self.release_elapsed = 0.0;
            }
        } else {
            self.sustain_elapsed = 0.0;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GateState {
    walk: Latch,
    run: Latch,
}

impl GateState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn walk_sustain_elapsed(&self) -> f64 {
        self.walk.sustain_elapsed
    }

    pub fn run_sustain_elapsed(&self) -> f64 {
        self.run.sustain_elapsed
    }

    /// The run gate dominates the walk gate.
    pub fn active_gate(&self) -> Gate {
        if self.run.active {
            Gate::RunForce
        } else if self.walk.active {
            Gate::WalkCap
        } else {
            Gate::None
        }
    }

    /// Advances both latches by `dt` at velocity `v` and returns the active gate.
    pub fn update(&mut self, v: f64, dt: f64, cfg: &GateConfig) -> Gate {
        self.walk.update(v, cfg.walk_threshold, cfg, dt);
        self.run.update(v, cfg.run_threshold, cfg, dt);
        self.active_gate()
    }
}

/// Updates the gate timers and returns the state ceiling in force.
///
/// The score does not affect gating; it is accepted so callers can pass
/// the whole per-tick context.
pub fn apply_gates(
    _e_smoothed: f64,
    v: f64,
    mut g: GateState,
    dt: f64,
    cfg: &GateConfig,
) -> (GateState, EngagementState) {
    let gate = g.update(v, dt, cfg);
    (g, gate.ceiling())
}

/// Score-to-state bands plus the anti-flap margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierBands {
    /// Lower bounds of Disengaged, Neutral, Engaged, HighlyEngaged.
    pub boundaries: [f64; 4],
    pub hysteresis_margin: f64,
}

impl Default for ClassifierBands {
    fn default() -> Self {
        ClassifierBands {
            boundaries: [0.2, 0.4, 0.6, 0.8],
            hysteresis_margin: 0.05,
        }
    }
}

impl ClassifierBands {
    pub fn validate(&self) -> Result<(), String> {
        let b = &self.boundaries;
        let mut prev = 0.0;
        for &x in b {
            if !(x > prev && x < 1.0) {
                return Err(format!("band boundaries must increase strictly inside (0, 1): {b:?}"));
            }
            prev = x;
        }
        if !(self.hysteresis_margin.is_finite() && self.hysteresis_margin >= 0.0) {
            return Err(format!("hysteresis_margin must be non-negative, got {}", self.hysteresis_margin));
        }
        Ok(())
    }

    /// Band containing `score`, without hysteresis. Upper band is closed at 1.
    pub fn band(&self, score: f64) -> EngagementState {
        let idx = self.boundaries.iter().take_while(|&&b| score >= b).count();
        EngagementState::from_index(idx).expect("at most four boundaries")
    }

    /// `[lower, upper)` of a state's band.
    pub fn range(&self, state: EngagementState) -> (f64, f64) {
        let i = state.index();
        let lo = if i == 0 { 0.0 } else { self.boundaries[i - 1] };
        let hi = if i == 4 { 1.0 } else { self.boundaries[i] };
        (lo, hi)
    }
}

/// Maps a score to a state, leaving `previous` only once the score is
/// more than `hysteresis_margin` outside its band.
pub fn classify(score: f64, bands: &ClassifierBands, previous: EngagementState) -> EngagementState {
    let raw = bands.band(score);
    if raw == previous {
        return previous;
    }
    let (lo, hi) = bands.range(previous);
    let m = bands.hysteresis_margin;
    if (raw > previous && score > hi + m) || (raw < previous && score < lo - m) {
        raw
    } else {
        previous
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use EngagementState::*;

    const DT: f64 = 1.0 / 90.0;

    fn run_gates(v: f64, seconds: f64) -> GateState {
        let cfg = GateConfig::default();
        let mut g = GateState::new();
        let n = (seconds * 90.0).round() as usize;
        for _ in 0..n {
            g.update(v, DT, &cfg);
        }
        g
    }

    #[test]
    fn slow_motion_is_ungated() {
        let (g, ceiling) = apply_gates(0.95, 0.3, run_gates(0.3, 5.0), DT, &GateConfig::default());
        assert_eq!(g.active_gate(), Gate::None);
        assert_eq!(ceiling, HighlyEngaged);
        assert_eq!(Gate::None.apply(band_of(0.95)), HighlyEngaged);
    }

    fn band_of(score: f64) -> EngagementState {
        ClassifierBands::default().band(score)
    }

    #[test]
    fn sustained_walk_caps_at_neutral() {
        let g = run_gates(1.5, 2.0);
        assert_eq!(g.active_gate(), Gate::WalkCap);
        assert!(g.active_gate().apply(band_of(0.95)) <= Neutral);
    }

    #[test]
    fn sustained_run_forces_disengaged() {
        let g = run_gates(2.5, 2.0);
        assert_eq!(g.active_gate(), Gate::RunForce);
        assert_eq!(g.active_gate().apply(band_of(0.95)), Disengaged);
        assert_eq!(g.active_gate().apply(HighlyDisengaged), Disengaged);
    }

    #[test]
    fn spikes_do_not_gate() {
        let cfg = GateConfig::default();
        let mut g = GateState::new();
        for i in 0..900 {
            let v = if i % 30 == 0 { 3.0 } else { 0.5 };
            assert_eq!(g.update(v, DT, &cfg), Gate::None);
        }
    }

    #[test]
    fn gate_engages_after_sustain_and_releases_with_margin() {
        let cfg = GateConfig::default();
        let mut g = GateState::new();
        let mut engaged_at = None;
        for i in 1..=90 {
            if g.update(1.5, DT, &cfg) == Gate::WalkCap && engaged_at.is_none() {
                engaged_at = Some(i);
            }
        }
        // 0.5 s of sustain at 90 Hz, give or take a frame of rounding.
        let at = engaged_at.unwrap();
        assert!((45..=46).contains(&at), "engaged at frame {at}");
        // Inside the release margin the gate holds.
        for _ in 0..180 {
            assert_eq!(g.update(1.15, DT, &cfg), Gate::WalkCap);
        }
        let mut released = false;
        for _ in 0..50 {
            if g.update(0.5, DT, &cfg) == Gate::None {
                released = true;
            }
        }
        assert!(released);
    }

    #[test]
    fn classify_examples() {
        let b = ClassifierBands::default();
        assert_eq!(classify(0.0, &b, Neutral), HighlyDisengaged);
        assert_eq!(classify(1.0, &b, Neutral), HighlyEngaged);
        assert_eq!(classify(0.585, &b, Engaged), Engaged);
        assert_eq!(classify(0.549, &b, Engaged), Neutral);
        assert_eq!(classify(0.82, &b, Engaged), Engaged);
        assert_eq!(classify(0.86, &b, Engaged), HighlyEngaged);
    }

    #[test]
    fn bands_partition_unit_interval() {
        let b = ClassifierBands::default();
        assert_eq!(b.band(0.0), HighlyDisengaged);
        assert_eq!(b.band(0.2), Disengaged);
        assert_eq!(b.band(0.5999), Neutral);
        assert_eq!(b.band(0.8), HighlyEngaged);
        assert_eq!(b.band(1.0), HighlyEngaged);
        assert!(ClassifierBands { boundaries: [0.2, 0.2, 0.6, 0.8], ..b.clone() }.validate().is_err());
        assert!(ClassifierBands { boundaries: [0.2, 0.4, 0.6, 1.0], ..b }.validate().is_err());
    }

    fn bands_strategy() -> impl Strategy<Value = ClassifierBands> {
        prop::collection::vec(0.01f64..0.99, 4).prop_filter_map("distinct", |mut v| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            (v.len() == 4).then(|| ClassifierBands {
                boundaries: [v[0], v[1], v[2], v[3]],
                hysteresis_margin: 0.05,
            })
        })
    }

    proptest! {
        #[test]
        fn every_score_maps_to_its_band(b in bands_strategy(), s in 0.0f64..=1.0) {
            let st = b.band(s);
            let (lo, hi) = b.range(st);
            prop_assert!(s >= lo && (s < hi || (st == HighlyEngaged && s <= 1.0)));
        }

        #[test]
        fn oscillation_within_margin_flaps_at_most_once(
            boundary in 0usize..4,
            above in any::<bool>(),
            offsets in prop::collection::vec(-0.05f64..=0.05, 1..300),
        ) {
            let b = ClassifierBands::default();
            let center = b.boundaries[boundary];
            let mut state = EngagementState::from_index(boundary + above as usize).unwrap();
            let mut changes = 0;
            for off in offsets {
                let next = classify(center + off, &b, state);
                if next != state {
                    changes += 1;
                }
                state = next;
            }
            prop_assert!(changes <= 1);
        }
    }
}

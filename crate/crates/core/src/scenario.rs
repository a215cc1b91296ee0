//! Seeded synthetic behavior traces.
//!
//! Every generator emits frames at exactly the nominal rate with bounded
//! uniform jitter, so generated values never cross the thresholds a
//! scenario is designed to sit on one side of.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::signal::TelemetryFrame;
use crate::trace::{Trace, TraceHeader};

const WALK_MIN: f64 = 1.2;
const RUN_MIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid scenario: {0}")]
pub struct ScenarioError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Still, reading one exhibit's text panel.
    FocusedReader { exhibit: String },
    /// Sweeping the head across exhibits, glancing at each briefly.
    Scanner { targets: Vec<String>, glance: f64 },
    /// Walking faster than comfortable pace, below running speed.
    Walker { velocity: f64 },
    /// Running; no stable gaze.
    Runner { velocity: f64 },
    /// Segments played in order and repeated until the duration is filled.
    Mixed(Vec<Segment>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub scenario: Scenario,
    pub duration: f64,
}

fn err(msg: impl Into<String>) -> ScenarioError {
    ScenarioError(msg.into())
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self {
            Scenario::FocusedReader { exhibit } => {
                if exhibit.is_empty() {
                    return Err(err("focused-reader needs an exhibit id"));
                }
            }
            Scenario::Scanner { targets, glance } => {
                if targets.is_empty() || targets.iter().any(String::is_empty) {
                    return Err(err("scanner needs at least one non-empty target"));
                }
                if !(glance.is_finite() && *glance > 0.0) {
                    return Err(err(format!("scanner glance must be positive, got {glance}")));
                }
            }
            Scenario::Walker { velocity } => {
                if !(*velocity > WALK_MIN && *velocity <= RUN_MIN) {
                    return Err(err(format!("walker velocity must lie in (1.2, 2.0] m/s, got {velocity}")));
                }
            }
            Scenario::Runner { velocity } => {
                if !(velocity.is_finite() && *velocity > RUN_MIN) {
                    return Err(err(format!("runner velocity must exceed 2.0 m/s, got {velocity}")));
                }
            }
            Scenario::Mixed(segments) => {
                if segments.is_empty() {
                    return Err(err("mixed scenario needs at least one segment"));
                }
                for s in segments {
                    if matches!(s.scenario, Scenario::Mixed(_)) {
                        return Err(err("mixed scenarios cannot nest"));
                    }
                    if !(s.duration.is_finite() && s.duration > 0.0) {
                        return Err(err(format!("segment duration must be positive, got {}", s.duration)));
                    }
                    s.scenario.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::FocusedReader { .. } => "focused-reader",
            Scenario::Scanner { .. } => "scanner",
            Scenario::Walker { .. } => "walker",
            Scenario::Runner { .. } => "runner",
            Scenario::Mixed(_) => "mixed",
        }
    }
}

/// Compact text form: `focused-reader(ex-01)`, `scanner(ex-01|ex-02;0.4)`,
/// `walker(1.5)`, `runner(2.5)`, and for mixed, comma-separated
/// `<scenario>@<seconds>` segments.
impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.contains('@') {
            let segments = s
                .split(',')
                .map(|part| {
                    let (scn, dur) = part
                        .rsplit_once('@')
                        .ok_or_else(|| err(format!("segment `{part}` lacks @duration")))?;
                    Ok(Segment {
                        scenario: scn.parse()?,
                        duration: parse_num(dur)?,
                    })
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            let m = Scenario::Mixed(segments);
            m.validate()?;
            return Ok(m);
        }
        let (kind, args) = match s.split_once('(') {
            Some((k, rest)) => (
                k.trim(),
                rest.strip_suffix(')')
                    .ok_or_else(|| err(format!("missing `)` in `{s}`")))?,
            ),
            None => (s, ""),
        };
        let scn = match kind {
            "focused-reader" => Scenario::FocusedReader {
                exhibit: args.trim().to_owned(),
            },
            "scanner" => {
                let (targets, glance) = args
                    .split_once(';')
                    .ok_or_else(|| err("scanner expects `targets;glance`"))?;
                Scenario::Scanner {
                    targets: targets.split('|').map(|t| t.trim().to_owned()).collect(),
                    glance: parse_num(glance)?,
                }
            }
            "walker" => Scenario::Walker { velocity: parse_num(args)? },
            "runner" => Scenario::Runner { velocity: parse_num(args)? },
            other => return Err(err(format!("unknown scenario kind `{other}`"))),
        };
        scn.validate()?;
        Ok(scn)
    }
}

fn parse_num(s: &str) -> Result<f64, ScenarioError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| err(format!("`{}` is not a number", s.trim())))
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::FocusedReader { exhibit } => write!(f, "focused-reader({exhibit})"),
            Scenario::Scanner { targets, glance } => write!(f, "scanner({};{glance})", targets.join("|")),
            Scenario::Walker { velocity } => write!(f, "walker({velocity})"),
            Scenario::Runner { velocity } => write!(f, "runner({velocity})"),
            Scenario::Mixed(segs) => {
                for (i, s) in segs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{}@{}", s.scenario, s.duration)?;
                }
                Ok(())
            }
        }
    }
}

/// Per-segment generator state.
struct Emitter<'a> {
    rng: &'a mut ChaCha8Rng,
    /// Session time at which the current segment started.
    segment_start: f64,
    card_given: bool,
}

impl Emitter<'_> {
    fn frame(&mut self, scenario: &Scenario, t: f64) -> TelemetryFrame {
        let local = t - self.segment_start;
        let rng = &mut *self.rng;
        match scenario {
            Scenario::FocusedReader { exhibit } => {
                let mut f = TelemetryFrame::new(t, rng.random_range(0.0..4.5), rng.random_range(0.0..0.05))
                    .gazing(exhibit.clone(), true);
                if !self.card_given && local >= 1.0 {
                    f.card = Some(format!("card-{exhibit}"));
                    self.card_given = true;
                }
                f
            }
            Scenario::Scanner { targets, glance } => {
                let idx = (local / glance).floor() as usize % targets.len();
                TelemetryFrame::new(t, rng.random_range(35.0..80.0), rng.random_range(0.2..0.9))
                    .gazing(targets[idx].clone(), false)
            }
            Scenario::Walker { velocity } => {
                let j = 0.05f64.min((velocity - WALK_MIN) / 2.0);
                let v = velocity + rng.random_range(-j..=j);
                TelemetryFrame::new(t, rng.random_range(5.0..25.0), v.min(RUN_MIN))
            }
            Scenario::Runner { velocity } => {
                let j = 0.1f64.min((velocity - RUN_MIN) / 2.0);
                TelemetryFrame::new(t, rng.random_range(10.0..60.0), velocity + rng.random_range(-j..=j))
            }
            Scenario::Mixed(_) => unreachable!("mixed is expanded by the caller"),
        }
    }
}

/// Generates `duration` seconds of frames at `rate` Hz, deterministic in `seed`.
pub fn generate_frames(
    scenario: &Scenario,
    duration: f64,
    rate: f64,
    seed: u64,
) -> Result<Vec<TelemetryFrame>, ScenarioError> {
    scenario.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(err(format!("duration must be positive, got {duration}")));
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(err(format!("rate must be positive, got {rate}")));
    }
    let single;
    let segments: &[Segment] = match scenario {
        Scenario::Mixed(s) => s,
        other => {
            single = [Segment {
                scenario: other.clone(),
                duration,
            }];
            &single
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration * rate).round() as usize;
    let mut frames = Vec::with_capacity(n);
    let mut seg_idx = 0;
    let mut seg_end = segments[0].duration;
    let mut em = Emitter {
        rng: &mut rng,
        segment_start: 0.0,
        card_given: false,
    };
    for i in 0..n {
        let t = i as f64 / rate;
        while t >= seg_end {
            seg_idx = (seg_idx + 1) % segments.len();
            em.segment_start = seg_end;
            em.card_given = false;
            seg_end += segments[seg_idx].duration;
        }
        frames.push(em.frame(&segments[seg_idx].scenario, t));
    }
    Ok(frames)
}

/// Wraps [`generate_frames`] into a trace at the default 90 Hz.
pub fn generate_scenario(scenario: &Scenario, duration: f64, seed: u64) -> Result<Trace, ScenarioError> {
    let header = TraceHeader::new(format!("{}-seed{seed}", scenario.kind()), "builtin");
    let frames = generate_frames(scenario, duration, header.nominal_rate, seed)?;
    Ok(Trace::new(header, frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::trace_to_string;

    #[test]
    fn focused_reader_postconditions() {
        let s: Scenario = "focused-reader(ex-01)".parse().unwrap();
        let t = generate_scenario(&s, 60.0, 1).unwrap();
        assert_eq!(t.frames.len(), 5400);
        for f in &t.frames {
            assert!(f.gaze_is_text);
            assert_eq!(f.gaze_target.as_deref(), Some("ex-01"));
            assert!(f.locomotion_velocity < 0.1);
            assert!(f.head_angular_velocity < 5.0);
        }
        assert_eq!(t.frames.iter().filter(|f| f.card.is_some()).count(), 1);
    }

    #[test]
    fn runner_stays_above_run_threshold() {
        let t = generate_scenario(&Scenario::Runner { velocity: 2.5 }, 30.0, 3).unwrap();
        for f in &t.frames {
            assert!(f.locomotion_velocity > 2.0);
            assert!((f.locomotion_velocity - 2.5).abs() <= 0.1 + 1e-12);
            assert!(f.gaze_target.is_none());
        }
    }

    #[test]
    fn walker_stays_in_walk_band() {
        for v in [1.21, 1.5, 2.0] {
            let t = generate_scenario(&Scenario::Walker { velocity: v }, 10.0, 9).unwrap();
            assert!(t.frames.iter().all(|f| f.locomotion_velocity > 1.2 && f.locomotion_velocity <= 2.0));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let s: Scenario = "focused-reader(ex-01)@5,scanner(ex-01|ex-02|ex-03;0.4)@5,runner(2.6)@3".parse().unwrap();
        let a = trace_to_string(&generate_scenario(&s, 40.0, 7).unwrap());
        let b = trace_to_string(&generate_scenario(&s, 40.0, 7).unwrap());
        let c = trace_to_string(&generate_scenario(&s, 40.0, 8).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rate_integrity() {
        let t = generate_scenario(&Scenario::Walker { velocity: 1.5 }, 20.0, 0).unwrap();
        let nominal = 1.0 / 90.0;
        for w in t.frames.windows(2) {
            let dt = w[1].timestamp - w[0].timestamp;
            assert!((dt - nominal).abs() < 0.01 * nominal);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!("runner(1.0)".parse::<Scenario>().is_err());
        assert!("walker(1.2)".parse::<Scenario>().is_err());
        assert!("walker(2.1)".parse::<Scenario>().is_err());
        assert!("scanner(a|b;0)".parse::<Scenario>().is_err());
        assert!("focused-reader()".parse::<Scenario>().is_err());
        assert!("dancer(1)".parse::<Scenario>().is_err());
        assert!("runner(2.5)@0".parse::<Scenario>().is_err());
        assert!(generate_scenario(&Scenario::Runner { velocity: 2.5 }, 0.0, 1).is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "focused-reader(ex-01)",
            "scanner(ex-01|ex-02;0.4)",
            "walker(1.5)",
            "runner(2.5)",
            "focused-reader(ex-01)@10,runner(2.5)@5",
        ] {
            let scn: Scenario = s.parse().unwrap();
            assert_eq!(scn.to_string(), s);
        }
    }
}

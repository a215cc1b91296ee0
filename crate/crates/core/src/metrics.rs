//! Per-session behavioral measures and the state-distribution report.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::state::EngagementState;

pub const MAX_CARDS: usize = 18;

/// What happened over one frame interval.
#[derive(Debug, Clone, Default)]
pub struct MetricsEvent<'a> {
    /// State in force during the interval.
    pub state: Option<EngagementState>,
    /// Interval length in seconds.
    pub dt: f64,
    /// Reading context held during the interval.
    pub reading: bool,
    /// A text dwell crossed the reading-event threshold at the end of the interval.
    pub reading_event: bool,
    /// Word counts of records displayed at the end of the interval.
    pub displayed_words: &'a [usize],
    pub card: Option<&'a str>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionMetrics {
    pub session_duration: f64,
    pub reading_events: u64,
    pub reading_view_time: f64,
    pub words_exposed: u64,
    pub displays: u64,
    cards: BTreeSet<String>,
    state_time: [f64; 5],
    pub frames: u64,
    pub ticks: u64,
}

impl SessionMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cards_collected(&self) -> usize {
        self.cards.len().min(MAX_CARDS)
    }

    pub fn state_time(&self, s: EngagementState) -> f64 {
        self.state_time[s.index()]
    }

    pub fn total_state_time(&self) -> f64 {
        self.state_time.iter().sum()
    }

    /// Fraction of session time per state; `None` for an empty session.
    pub fn state_distribution(&self) -> Option<[f64; 5]> {
        let total = self.total_state_time();
        (total > 0.0).then(|| self.state_time.map(|t| t / total))
    }

    pub fn accumulate(&mut self, ev: &MetricsEvent<'_>) {
        self.frames += 1;
        if ev.dt > 0.0 {
            self.session_duration += ev.dt;
            if let Some(s) = ev.state {
                self.state_time[s.index()] += ev.dt;
            }
            if ev.reading {
                self.reading_view_time += ev.dt;
            }
        }
        if ev.reading_event {
            self.reading_events += 1;
        }
        for &w in ev.displayed_words {
            self.words_exposed += w as u64;
            self.displays += 1;
        }
        if let Some(card) = ev.card {
            if self.cards.len() < MAX_CARDS || self.cards.contains(card) {
                self.cards.insert(card.to_owned());
            }
        }
    }

    pub fn report(&self, config_fingerprint: &str) -> MetricsReport {
        let dist = self.state_distribution();
        MetricsReport {
            session_duration: self.session_duration,
            frames: self.frames,
            ticks: self.ticks,
            reading_events: self.reading_events,
            reading_view_time: self.reading_view_time,
            words_exposed: self.words_exposed,
            displays: self.displays,
            cards_collected: self.cards_collected(),
            state_time: StateTable::from_array(self.state_time),
            distribution_defined: dist.is_some(),
            state_distribution: dist.map(StateTable::from_array),
            config_fingerprint: config_fingerprint.to_owned(),
        }
    }
}

/// Per-state values, serialized most-engaged first.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateTable {
    pub highly_engaged: f64,
    pub engaged: f64,
    pub neutral: f64,
    pub disengaged: f64,
    pub highly_disengaged: f64,
}

impl StateTable {
    pub fn from_array(a: [f64; 5]) -> Self {
        StateTable {
            highly_disengaged: a[0],
            disengaged: a[1],
            neutral: a[2],
            engaged: a[3],
            highly_engaged: a[4],
        }
    }

    pub fn get(&self, s: EngagementState) -> f64 {
        match s {
            EngagementState::HighlyDisengaged => self.highly_disengaged,
            EngagementState::Disengaged => self.disengaged,
            EngagementState::Neutral => self.neutral,
            EngagementState::Engaged => self.engaged,
            EngagementState::HighlyEngaged => self.highly_engaged,
        }
    }

    pub fn sum(&self) -> f64 {
        EngagementState::ALL.iter().map(|&s| self.get(s)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub session_duration: f64,
    pub frames: u64,
    pub ticks: u64,
    pub reading_events: u64,
    pub reading_view_time: f64,
    pub words_exposed: u64,
    pub displays: u64,
    pub cards_collected: usize,
    pub state_time: StateTable,
    pub distribution_defined: bool,
    pub state_distribution: Option<StateTable>,
    pub config_fingerprint: String,
}

impl MetricsReport {
    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable summary with the state percentages as one row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Session duration (s)   {:.1}", self.session_duration);
        let _ = writeln!(out, "Reading events         {}", self.reading_events);
        let _ = writeln!(out, "Reading view time (s)  {:.1}", self.reading_view_time);
        let _ = writeln!(out, "Words exposed          {}", self.words_exposed);
        let _ = writeln!(out, "Cards collected        {}/{}", self.cards_collected, MAX_CARDS);
        let _ = writeln!(out);
        let header: Vec<String> = EngagementState::REPORT_ORDER
            .iter()
            .map(|s| format!("{:>12}", s.label()))
            .collect();
        let _ = writeln!(out, "{:<12}{}", "", header.join(""));
        match &self.state_distribution {
            Some(d) => {
                let row: Vec<String> = EngagementState::REPORT_ORDER
                    .iter()
                    .map(|&s| format!("{:>12}", format_percent(d.get(s))))
                    .collect();
                let _ = writeln!(out, "{:<12}{}", "Session", row.join(""));
            }
            None => {
                let _ = writeln!(out, "{:<12}distribution undefined (empty session)", "Session");
            }
        }
        out
    }
}

/// Fraction as a percentage with one decimal, e.g. `0.243` -> `24.3%`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

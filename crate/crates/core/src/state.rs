//! The five ordered engagement levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Discrete engagement level.
///
/// Variants are declared in ascending order so the derived `Ord` gives
/// `HighlyDisengaged < Disengaged < Neutral < Engaged < HighlyEngaged`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngagementState {
    HighlyDisengaged,
    Disengaged,
    Neutral,
    Engaged,
    HighlyEngaged,
}

impl EngagementState {
    /// Ascending order.
    pub const ALL: [EngagementState; 5] = [
        EngagementState::HighlyDisengaged,
        EngagementState::Disengaged,
        EngagementState::Neutral,
        EngagementState::Engaged,
        EngagementState::HighlyEngaged,
    ];

    /// Report column order: most engaged first.
    pub const REPORT_ORDER: [EngagementState; 5] = [
        EngagementState::HighlyEngaged,
        EngagementState::Engaged,
        EngagementState::Neutral,
        EngagementState::Disengaged,
        EngagementState::HighlyDisengaged,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EngagementState::HighlyDisengaged => "highly_disengaged",
            EngagementState::Disengaged => "disengaged",
            EngagementState::Neutral => "neutral",
            EngagementState::Engaged => "engaged",
            EngagementState::HighlyEngaged => "highly_engaged",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EngagementState::HighlyDisengaged => "Highly Dis.",
            EngagementState::Disengaged => "Disengaged",
            EngagementState::Neutral => "Neutral",
            EngagementState::Engaged => "Engaged",
            EngagementState::HighlyEngaged => "Highly Eng.",
        }
    }
}

impl fmt::Display for EngagementState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngagementState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown engagement state `{s}`"))
    }
}

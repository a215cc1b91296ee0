//! Level-adaptive exhibit content.
//!
//! State transitions turn into prompts ([`prompt`]), prompts go to a
//! [`provider::ContentProvider`] through a [`dispatch::Dispatcher`] that never
//! blocks the caller, and results land in a [`cache::ContentCache`] keyed by
//! `(exhibit_id, level)`. [`pipeline::ContentPipeline`] ties these together
//! and decides what is displayed.

pub mod cache;
pub mod dispatch;
pub mod pipeline;
pub mod prompt;
pub mod provider;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::EngagementState;

pub use cache::ContentCache;
pub use dispatch::{Completion, Dispatcher, Outcome, SimulatedDispatcher, ThreadedDispatcher};
pub use pipeline::{ContentPipeline, DisplayEvent, RequestOutcome, ResponseDisposition};
pub use prompt::{build_prompt, LevelTemplate, PromptSpec, PromptTemplates, TextFormat, WordBudget};
pub use provider::{ContentProvider, HttpProvider, MockProvider, ProviderError};

#[derive(Debug, Error)]
pub enum ContentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown exhibit `{0}`")]
    UnknownExhibit(String),
    #[error("catalog line {line}: {message}")]
    Catalog { line: usize, message: String },
    #[error("cache file line {line}: {message}")]
    CacheFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exhibit {
    pub exhibit_id: String,
    pub title: String,
    /// Curated description; grounds prompts and doubles as static fallback text.
    pub base_facts: String,
}

impl Exhibit {
    pub fn new(id: impl Into<String>, title: impl Into<String>, facts: impl Into<String>) -> Self {
        Exhibit {
            exhibit_id: id.into(),
            title: title.into(),
            base_facts: facts.into(),
        }
    }

    /// Stand-in for targets that appear in a trace but not in the catalog.
    pub fn placeholder(id: &str) -> Self {
        Exhibit::new(
            id,
            id,
            format!("Exhibit {id}. A curated description for this object is not available yet."),
        )
    }
}

/// Exhibits indexed by id.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    exhibits: BTreeMap<String, Exhibit>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, exhibit: Exhibit) -> Result<(), ContentError> {
        if exhibit.exhibit_id.is_empty() {
            return Err(ContentError::Config("exhibit_id must not be empty".into()));
        }
        if word_count(&exhibit.base_facts) == 0 {
            return Err(ContentError::Config(format!(
                "exhibit `{}` has empty base_facts",
                exhibit.exhibit_id
            )));
        }
        if self.exhibits.contains_key(&exhibit.exhibit_id) {
            return Err(ContentError::Config(format!(
                "duplicate exhibit_id `{}`",
                exhibit.exhibit_id
            )));
        }
        self.exhibits.insert(exhibit.exhibit_id.clone(), exhibit);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Exhibit> {
        self.exhibits.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.exhibits.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.exhibits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exhibits.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Exhibit> {
        self.exhibits.values()
    }

    /// Adds a placeholder for `id` unless it is already present.
    pub fn ensure(&mut self, id: &str) {
        if !self.exhibits.contains_key(id) {
            self.exhibits.insert(id.to_owned(), Exhibit::placeholder(id));
        }
    }

    /// Reads one JSON exhibit per line; blank lines are skipped.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, ContentError> {
        let mut catalog = Catalog::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let exhibit: Exhibit = serde_json::from_str(&line).map_err(|e| ContentError::Catalog {
                line: i + 1,
                message: e.to_string(),
            })?;
            catalog.insert(exhibit).map_err(|e| ContentError::Catalog {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(catalog)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), ContentError> {
        for ex in self.exhibits.values() {
            serde_json::to_writer(&mut w, ex).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Small catalog used by the simulator and the demos.
    pub fn builtin() -> Self {
        let mut c = Catalog::new();
        let entries = [
            (
                "ex-01",
                "Copper Brazier",
                "A lidded copper brazier hammered from a single sheet. Hot coals in its bowl warmed \
                 reception rooms through the winter. Pierced flower patterns on the lid let heat \
                 escape and told guests the household could afford fine metalwork.",
            ),
            (
                "ex-02",
                "Embroidered Vest",
                "A short wool vest worn over a linen shirt on feast days. Gold thread couched in \
                 spirals marks the wearer as married, and the colour of the cord shows which \
                 quarter of town the family came from.",
            ),
            (
                "ex-03",
                "Spindle Whorl",
                "A carved walnut weight slipped onto a hand spindle. Its mass keeps the spindle \
                 turning so wool twists evenly into yarn. Small notches on the rim were cut by \
                 the spinner to mark ownership.",
            ),
            (
                "ex-04",
                "Coffee Grinder",
                "A tall brass grinder with a folding crank. Beans went in the top and fine powder \
                 collected in the drawer below. Guests were served coffee ground in front of them \
                 as a sign of respect.",
            ),
        ];
        for (id, title, facts) in entries {
            c.insert(Exhibit::new(id, title, facts)).expect("builtin catalog is valid");
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Mock,
    Remote,
    StaticFallback,
}

/// Generated text for one `(exhibit_id, level)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentRecord {
    pub exhibit_id: String,
    pub level: EngagementState,
    pub text: String,
    pub word_count: usize,
    pub provenance: Provenance,
    #[serde(default)]
    pub generated_at: f64,
}

impl ContentRecord {
    /// Builds a record, deriving `word_count` from `text`. Returns `None` for blank text.
    pub fn new(
        exhibit_id: impl Into<String>,
        level: EngagementState,
        text: impl Into<String>,
        provenance: Provenance,
        generated_at: f64,
    ) -> Option<Self> {
        let text = text.into();
        let word_count = word_count(&text);
        (word_count > 0).then(|| ContentRecord {
            exhibit_id: exhibit_id.into(),
            level,
            text,
            word_count,
            provenance,
            generated_at,
        })
    }

    pub fn fallback(exhibit: &Exhibit, level: EngagementState, at: f64) -> Self {
        ContentRecord::new(
            exhibit.exhibit_id.clone(),
            level,
            exhibit.base_facts.clone(),
            Provenance::StaticFallback,
            at,
        )
        .expect("catalog guarantees non-empty base_facts")
    }

    pub fn key(&self) -> (String, EngagementState) {
        (self.exhibit_id.clone(), self.level)
    }
}

/// Whitespace-separated tokens holding at least one letter or digit, so
/// bullet markers and stray dashes are not words.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentRequest {
    pub request_id: u64,
    pub exhibit_id: String,
    pub level: EngagementState,
    /// State-transition counter when the request was issued.
    pub issued_at_state_seq: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_rejects_duplicates_and_empty_facts() {
        let mut c = Catalog::new();
        c.insert(Exhibit::new("a", "A", "facts here")).unwrap();
        assert!(c.insert(Exhibit::new("a", "A2", "other")).is_err());
        assert!(c.insert(Exhibit::new("b", "B", "   ")).is_err());
    }

    #[test]
    fn catalog_jsonl_reports_line() {
        let input = "{\"exhibit_id\":\"a\",\"title\":\"A\",\"base_facts\":\"x y\"}\n\nnot json\n";
        match Catalog::read_jsonl(input.as_bytes()) {
            Err(ContentError::Catalog { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let mut buf = Vec::new();
        Catalog::builtin().write_jsonl(&mut buf).unwrap();
        let back = Catalog::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 4);
    }

    #[test]
    fn record_word_count_matches_text() {
        let r = ContentRecord::new("a", EngagementState::Neutral, "one two\nthree  four", Provenance::Mock, 0.0)
            .unwrap();
        assert_eq!(r.word_count, 4);
        assert!(ContentRecord::new("a", EngagementState::Neutral, " \n", Provenance::Mock, 0.0).is_none());
    }
}

//! Text generation backends.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::{PromptSpec, TextFormat};
use super::{ContentRecord, Exhibit, Provenance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("provider transport failed: {0}")]
    Transport(String),
    #[error("provider returned a malformed response: {0}")]
    Malformed(String),
    #[error("provider timed out")]
    Timeout,
}

/// A blocking text generator. Dispatchers call it off the inference path.
pub trait ContentProvider: Send + Sync {
    fn generate(&self, spec: &PromptSpec, exhibit: &Exhibit) -> Result<String, ProviderError>;

    fn provenance(&self) -> Provenance;
}

/// Deterministic stand-in for a remote model.
///
/// Reuses the exhibit's own words: bullet levels get two or three short
/// lines, prose levels get the middle of the word budget.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    delay: Option<Duration>,
}

const BULLET_MAX_WORDS: usize = 9;

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sleeps for `delay` before answering; used to test non-blocking dispatch.
    pub fn with_delay(delay: Duration) -> Self {
        MockProvider { delay: Some(delay) }
    }

    pub fn compose(spec: &PromptSpec, exhibit: &Exhibit) -> String {
        let source: Vec<&str> = exhibit
            .base_facts
            .split_whitespace()
            .filter(|t| t.chars().any(char::is_alphanumeric))
            .collect();
        let mut words = source.iter().copied().cycle();
        let budget = spec.word_budget;
        match spec.format {
            TextFormat::Bullets => {
                let lines = if budget.max >= 3 * BULLET_MAX_WORDS { 3 } else { 2 };
                let per_line = budget
                    .min
                    .div_ceil(lines)
                    .clamp(5, BULLET_MAX_WORDS)
                    .min((budget.max / lines).max(1));
                (0..lines)
                    .map(|_| format!("- {}", finish_sentence(words.by_ref().take(per_line).collect())))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            TextFormat::Prose => {
                let target = budget.min + (budget.max - budget.min) / 2;
                finish_sentence(words.take(target).collect())
            }
        }
    }

    pub fn generate_record(spec: &PromptSpec, exhibit: &Exhibit, at: f64) -> ContentRecord {
        ContentRecord::new(
            exhibit.exhibit_id.clone(),
            spec.level,
            Self::compose(spec, exhibit),
            Provenance::Mock,
            at,
        )
        .expect("mock text is never blank")
    }
}

fn finish_sentence(mut words: Vec<&str>) -> String {
    let mut out = String::new();
    let last = words.pop();
    for w in words {
        out.push_str(w);
        out.push(' ');
    }
    if let Some(w) = last {
        out.push_str(w.trim_end_matches([',', ';', ':', '.']));
        out.push('.');
    }
    out
}

impl ContentProvider for MockProvider {
    fn generate(&self, spec: &PromptSpec, exhibit: &Exhibit) -> Result<String, ProviderError> {
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        Ok(Self::compose(spec, exhibit))
    }

    fn provenance(&self) -> Provenance {
        Provenance::Mock
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    system_instruction: &'a str,
    user_prompt: &'a str,
    min_words: usize,
    max_words: usize,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// Single request/response JSON exchange with a text-generation endpoint.
///
/// POSTs `{system_instruction, user_prompt, min_words, max_words}` and
/// expects `{"text": "..."}` back.
pub struct HttpProvider {
    endpoint: String,
    credential: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>, credential: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        HttpProvider {
            endpoint: endpoint.into(),
            credential,
            agent,
        }
    }
}

impl ContentProvider for HttpProvider {
    fn generate(&self, spec: &PromptSpec, _exhibit: &Exhibit) -> Result<String, ProviderError> {
        let body = WireRequest {
            system_instruction: &spec.system_instruction,
            user_prompt: &spec.user_prompt,
            min_words: spec.word_budget.min,
            max_words: spec.word_budget.max,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(token) = &self.credential {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout,
            other => ProviderError::Transport(other.to_string()),
        })?;
        let parsed: WireResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Malformed(e.to_string()))?;
        if super::word_count(&parsed.text) == 0 {
            return Err(ProviderError::Malformed("empty text".into()));
        }
        Ok(parsed.text)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Remote
    }
}

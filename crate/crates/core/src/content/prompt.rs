//! Two-part prompts: a fixed system instruction about length, plus a
//! per-level user prompt that sets style and depth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ContentError, Exhibit};
use crate::state::EngagementState;

pub const SYSTEM_INSTRUCTION: &str = "You write exhibit descriptions for a virtual museum. \
You must stay within the requested word count. Use only the facts provided; do not invent names, dates, or places.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordBudget {
    pub min: usize,
    pub max: usize,
}

impl WordBudget {
    pub fn new(min: usize, max: usize) -> Self {
        WordBudget { min, max }
    }

    pub fn contains(&self, n: usize) -> bool {
        (self.min..=self.max).contains(&n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextFormat {
    #[default]
    Prose,
    /// Two or three lines, each under ten words.
    Bullets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelTemplate {
    pub instruction: String,
    pub min_words: usize,
    pub max_words: usize,
    #[serde(default)]
    pub format: TextFormat,
}

impl LevelTemplate {
    fn new(instruction: &str, min: usize, max: usize, format: TextFormat) -> Self {
        LevelTemplate {
            instruction: instruction.to_owned(),
            min_words: min,
            max_words: max,
            format,
        }
    }

    pub fn budget(&self) -> WordBudget {
        WordBudget::new(self.min_words, self.max_words)
    }
}

/// Per-level templates, keyed by state name (`highly_engaged`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromptTemplates(pub BTreeMap<String, LevelTemplate>);

impl Default for PromptTemplates {
    fn default() -> Self {
        use EngagementState::*;
        let mut m = BTreeMap::new();
        let mut put = |s: EngagementState, t: LevelTemplate| {
            m.insert(s.as_str().to_owned(), t);
        };
        put(
            HighlyDisengaged,
            LevelTemplate::new(
                "Format as 2 short bullet points, each under 10 words. Keep only the single most striking fact.",
                6,
                20,
                TextFormat::Bullets,
            ),
        );
        put(
            Disengaged,
            LevelTemplate::new(
                "Format as 2-3 short bullet points, each under 10 words.",
                6,
                30,
                TextFormat::Bullets,
            ),
        );
        put(
            Neutral,
            LevelTemplate::new(
                "Provide essential historical facts in a clear and concise manner.",
                25,
                40,
                TextFormat::Prose,
            ),
        );
        put(
            Engaged,
            LevelTemplate::new(
                "Explain the object with some historical context and one detail about how it was used.",
                35,
                55,
                TextFormat::Prose,
            ),
        );
        put(
            HighlyEngaged,
            LevelTemplate::new(
                "Scholarly style with rich detail; include contextual anecdotes.",
                40,
                70,
                TextFormat::Prose,
            ),
        );
        PromptTemplates(m)
    }
}

impl PromptTemplates {
    pub fn get(&self, level: EngagementState) -> Option<&LevelTemplate> {
        self.0.get(level.as_str())
    }

    pub fn validate(&self) -> Result<(), String> {
        for key in self.0.keys() {
            key.parse::<EngagementState>()?;
        }
        for level in EngagementState::ALL {
            let t = self
                .get(level)
                .ok_or_else(|| format!("no content template for level `{level}`"))?;
            if t.min_words == 0 || t.min_words > t.max_words {
                return Err(format!(
                    "template `{level}`: need 0 < min_words <= max_words, got {}..{}",
                    t.min_words, t.max_words
                ));
            }
            if t.format == TextFormat::Bullets && (t.max_words < 2 || t.min_words > 27) {
                return Err(format!(
                    "template `{level}`: a 2-3 line bullet budget must allow 2..=27 words"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub level: EngagementState,
    pub system_instruction: String,
    pub user_prompt: String,
    pub word_budget: WordBudget,
    pub format: TextFormat,
}

/// Instantiates the level's template for `exhibit`.
pub fn build_prompt(
    exhibit: &Exhibit,
    level: EngagementState,
    templates: &PromptTemplates,
) -> Result<PromptSpec, ContentError> {
    let t = templates
        .get(level)
        .ok_or_else(|| ContentError::Config(format!("no content template for level `{level}`")))?;
    let user_prompt = format!(
        "Exhibit: {title}\nFacts: {facts}\n\n{instruction}\nWrite between {min} and {max} words.",
        title = exhibit.title,
        facts = exhibit.base_facts,
        instruction = t.instruction,
        min = t.min_words,
        max = t.max_words,
    );
    Ok(PromptSpec {
        level,
        system_instruction: SYSTEM_INSTRUCTION.to_owned(),
        user_prompt,
        word_budget: t.budget(),
        format: t.format,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::Catalog;
    use EngagementState::*;

    fn brazier() -> Exhibit {
        Catalog::builtin().get("ex-01").unwrap().clone()
    }

    #[test]
    fn disengaged_prompt_asks_for_bullets() {
        let p = build_prompt(&brazier(), Disengaged, &PromptTemplates::default()).unwrap();
        assert!(p.user_prompt.contains("bullet points, each under 10 words"));
        assert_eq!(p.word_budget, WordBudget::new(6, 30));
        assert_eq!(p.format, TextFormat::Bullets);
        assert!(p.system_instruction.contains("You must stay within the requested word count"));
    }

    #[test]
    fn neutral_and_highly_engaged_budgets_bracket_reference_lengths() {
        let t = PromptTemplates::default();
        let n = build_prompt(&brazier(), Neutral, &t).unwrap();
        assert!(n.user_prompt.contains("essential historical facts"));
        assert!(n.word_budget.contains(32));
        let h = build_prompt(&brazier(), HighlyEngaged, &t).unwrap();
        assert!(h.user_prompt.to_lowercase().contains("scholarly style with rich detail"));
        assert!(h.word_budget.contains(46));
        assert!(h.user_prompt.contains("Copper Brazier"));
    }

    #[test]
    fn missing_template_is_a_config_error() {
        let mut t = PromptTemplates::default();
        t.0.remove("engaged");
        assert!(t.validate().is_err());
        assert!(matches!(build_prompt(&brazier(), Engaged, &t), Err(ContentError::Config(_))));
    }

    #[test]
    fn unknown_level_key_rejected() {
        let mut t = PromptTemplates::default();
        t.0.insert("ecstatic".into(), t.get(Neutral).unwrap().clone());
        assert!(t.validate().is_err());
    }
}

//! Text synthesis from music tags.
//!
//! Three generators turn a filtered [`TagSet`] into a free-form description:
//! `tags` (shuffled comma list), `data2text` (per-category templates plus a
//! rephraser) and `prompt2text` (few-shot analogy prompting of an LLM).

mod data2text;
mod filter;
mod llm;
mod prompt;
mod records;
mod synthesize;
mod tags;
mod vocab;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use data2text::{
    data2text, fill_templates, join_conjunction, rephrase, Rephraser, RuleRephraser, Sentence,
    TemplateBank, TAG_PLACEHOLDER,
};
pub use filter::{filter_tags, filter_tags_with, ThresholdRule, DEFAULT_TAG_THRESHOLD};
pub use llm::{HttpLlmClient, LlmClient, LlmConfig, MockLlm};
pub use prompt::{
    build_analogy_prompt, prompt2text, render_tags, truncate_completion, AnalogyExample,
    DEFAULT_FEW_SHOT_K,
};
pub use records::{read_jsonl, write_jsonl, ExampleRecord, TextRecord};
pub use synthesize::{record_seed, synthesize_texts, Method, SynthesisContext};
pub use tags::tags_to_text;
pub use vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Genre,
    Mood,
    Instrument,
}

impl Category {
    /// Order in which categories are presented in a rephrased description.
    pub const PRIORITY: [Category; 3] = [Category::Genre, Category::Mood, Category::Instrument];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Genre => "genre",
            Category::Mood => "mood",
            Category::Instrument => "instrument",
        }
    }

    pub fn priority(self) -> usize {
        match self {
            Category::Genre => 0,
            Category::Mood => 1,
            Category::Instrument => 2,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genre" => Ok(Category::Genre),
            "mood" => Ok(Category::Mood),
            "instrument" => Ok(Category::Instrument),
            other => Err(Error::Unknown {
                kind: "category",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagPrediction {
    pub tag: String,
    pub category: Category,
    pub confidence: f64,
}

impl TagPrediction {
    pub fn new(tag: impl Into<String>, category: Category, confidence: f64) -> Self {
        Self {
            tag: tag.into(),
            category,
            confidence,
        }
    }
}

/// Filtered tagger output for one track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSet {
    pub track_id: String,
    pub predictions: Vec<TagPrediction>,
}

impl TagSet {
    /// Builds a tag set, rejecting duplicate tags, empty or comma-bearing tag
    /// strings, and non-finite confidences.
    pub fn new(track_id: impl Into<String>, predictions: Vec<TagPrediction>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &predictions {
            check_tag(&p.tag)?;
            if !p.confidence.is_finite() {
                return Err(Error::invalid(format!(
                    "confidence for `{}` is not finite",
                    p.tag
                )));
            }
            if !seen.insert(p.tag.as_str()) {
                return Err(Error::invalid(format!("duplicate tag `{}`", p.tag)));
            }
        }
        Ok(Self {
            track_id: track_id.into(),
            predictions,
        })
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.predictions.iter().map(|p| p.tag.as_str())
    }

    /// Tags of one category, in tag-set order.
    pub fn tags_in(&self, category: Category) -> Vec<&str> {
        self.predictions
            .iter()
            .filter(|p| p.category == category)
            .map(|p| p.tag.as_str())
            .collect()
    }
}

/// Tags are joined with ", " by the generators, so they may not contain a
/// comma themselves.
fn check_tag(tag: &str) -> Result<()> {
    if tag.trim().is_empty() || tag.contains(',') || tag.trim() != tag {
        return Err(Error::invalid(format!(
            "tag `{tag}` must be non-empty, trimmed and comma-free"
        )));
    }
    Ok(())
}

//! Template-based data-to-text: one templated sentence per tag category,
//! then a rephraser that orders, aggregates and compresses them into a single
//! description.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Category, TagSet};
use crate::error::{Error, Result};

pub const TAG_PLACEHOLDER: &str = "{tags}";

/// Category-specific sentence templates, each with exactly one
/// [`TAG_PLACEHOLDER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBank {
    pub genre: Vec<String>,
    pub mood: Vec<String>,
    pub instrument: Vec<String>,
}

impl Default for TemplateBank {
    fn default() -> Self {
        let own = |xs: [&str; 3]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            genre: own([
                "This is a {tags} track.",
                "The song belongs to the {tags} genre.",
                "It is a {tags} piece of music.",
            ]),
            mood: own([
                "The mood is {tags}.",
                "It sounds {tags}.",
                "The track feels {tags}.",
            ]),
            instrument: own([
                "It features {tags}.",
                "The arrangement includes {tags}.",
                "You can hear {tags}.",
            ]),
        }
    }
}

impl TemplateBank {
    pub fn templates(&self, category: Category) -> &[String] {
        match category {
            Category::Genre => &self.genre,
            Category::Mood => &self.mood,
            Category::Instrument => &self.instrument,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in Category::PRIORITY {
            let templates = self.templates(c);
            if templates.is_empty() {
                return Err(Error::invalid(format!("no {c} templates")));
            }
            for t in templates {
                if t.matches(TAG_PLACEHOLDER).count() != 1 {
                    return Err(Error::invalid(format!(
                        "template `{t}` must contain exactly one {TAG_PLACEHOLDER}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub category: Category,
    pub text: String,
    /// Tags substituted into this sentence.
    pub tags: Vec<String>,
}

/// `a`, `a and b`, `a, b and c`.
pub fn join_conjunction(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [only] => only.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// One sentence per category holding at least one tag, in order of each
/// category's first appearance in `tags`.
pub fn fill_templates(tags: &TagSet, bank: &TemplateBank, rng_seed: u64) -> Result<Vec<Sentence>> {
    bank.validate()?;
    let mut order: Vec<Category> = Vec::new();
    for p in &tags.predictions {
        if !order.contains(&p.category) {
            order.push(p.category);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sentences = order
        .into_iter()
        .map(|category| {
            let in_cat = tags.tags_in(category);
            let templates = bank.templates(category);
            let template = &templates[rng.random_range(0..templates.len())];
            Sentence {
                category,
                text: template.replacen(TAG_PLACEHOLDER, &join_conjunction(&in_cat), 1),
                tags: in_cat.into_iter().map(String::from).collect(),
            }
        })
        .collect();
    Ok(sentences)
}

/// Turns templated sentences into one description. Implementations may be
/// neural; [`rephrase`] checks the result post hoc.
pub trait Rephraser {
    fn rephrase(&self, sentences: &[Sentence]) -> Result<String>;
}

/// Deterministic rephraser: orders sentences genre, mood, instrument, merges
/// adjacent pairs into one compound sentence, and joins with spaces.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleRephraser;

impl RuleRephraser {
    fn merge(first: &Sentence, second: &Sentence) -> String {
        let head = first.text.trim_end().trim_end_matches('.');
        let tail = second.text.trim();
        let starts_with_tag = second.tags.iter().any(|t| tail.starts_with(t.as_str()));
        let tail = if starts_with_tag {
            tail.to_string()
        } else {
            let mut chars = tail.chars();
            match chars.next() {
                Some(c) => c.to_lowercase().chain(chars).collect(),
                None => String::new(),
            }
        };
        format!("{head}, and {tail}")
    }
}

impl Rephraser for RuleRephraser {
    fn rephrase(&self, sentences: &[Sentence]) -> Result<String> {
        let mut ordered: Vec<&Sentence> = sentences.iter().collect();
        ordered.sort_by_key(|s| s.category.priority());
        let parts: Vec<String> = ordered
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => Self::merge(a, b),
                [a] => a.text.trim().to_string(),
                _ => unreachable!(),
            })
            .collect();
        Ok(parts.join(" "))
    }
}

/// Runs `rephraser` and rejects output that dropped any input tag.
pub fn rephrase(sentences: &[Sentence], rephraser: &dyn Rephraser) -> Result<String> {
    if sentences.is_empty() {
        return Err(Error::invalid("rephrase needs at least one sentence"));
    }
    let out = rephraser.rephrase(sentences)?;
    for tag in sentences.iter().flat_map(|s| s.tags.iter()) {
        if !out.contains(tag.as_str()) {
            return Err(Error::SemanticsViolated(tag.clone()));
        }
    }
    Ok(out)
}

/// The `data2text` generator.
pub fn data2text(
    tags: &TagSet,
    bank: &TemplateBank,
    rephraser: &dyn Rephraser,
    rng_seed: u64,
) -> Result<String> {
    if tags.is_empty() {
        return Err(Error::NoTags);
    }
    let sentences = fill_templates(tags, bank, rng_seed)?;
    rephrase(&sentences, rephraser)
}

//! Analogy prompting: `tags_1 : description_1 :: ... :: tags_q : ?`.

use std::fmt::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LlmClient, TagSet};
use crate::error::{Error, Result};

/// Number of human-written examples placed in the prompt by default.
pub const DEFAULT_FEW_SHOT_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogyExample {
    pub tags: TagSet,
    pub description: String,
}

impl AnalogyExample {
    pub fn new(tags: TagSet, description: impl Into<String>) -> Result<Self> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(Error::invalid("analogy example needs a description"));
        }
        Ok(Self { tags, description })
    }
}

/// `pop (0.90), happy (0.75)`
pub fn render_tags(tags: &TagSet) -> String {
    tags.predictions
        .iter()
        .map(|p| format!("{} ({:.2})", p.tag, p.confidence))
        .collect::<Vec<_>>()
        .join(", ")
}

/// `k` seeded-sampled example blocks followed by the query block. The prompt
/// ends with `Description:` so the model continues with the description.
pub fn build_analogy_prompt(
    examples: &[AnalogyExample],
    query: &TagSet,
    k: usize,
    rng_seed: u64,
) -> Result<String> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > examples.len() {
        return Err(Error::invalid(format!(
            "k={k} exceeds the {} available examples",
            examples.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let chosen = rand::seq::index::sample(&mut rng, examples.len(), k);

    let mut prompt = String::new();
    for i in chosen.iter() {
        let ex = &examples[i];
        write!(
            prompt,
            "Tags: {}\nDescription: {}\n\n",
            render_tags(&ex.tags),
            ex.description.trim()
        )
        .unwrap();
    }
    write!(prompt, "Tags: {}\nDescription:", render_tags(query)).unwrap();
    Ok(prompt)
}

/// Keeps the first paragraph of a completion, cut before any `Tags:` marker,
/// with a leading `Description:` label removed. `None` when nothing is left.
pub fn truncate_completion(completion: &str) -> Option<String> {
    let mut text = completion.trim_start();
    if let Some(rest) = text.strip_prefix("Description:") {
        text = rest.trim_start();
    }
    if let Some(pos) = text.find("Tags:") {
        text = &text[..pos];
    }
    let mut paragraph = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            break;
        }
        paragraph.push(line);
    }
    let out = paragraph.join("\n").trim().to_string();
    (!out.is_empty()).then_some(out)
}

/// The `prompt2text` generator. Tag preservation is not checked: the model is
/// free to paraphrase (or hallucinate).
pub fn prompt2text(
    query: &TagSet,
    examples: &[AnalogyExample],
    k: usize,
    llm: &dyn LlmClient,
    max_tokens: usize,
    rng_seed: u64,
) -> Result<String> {
    let prompt = build_analogy_prompt(examples, query, k, rng_seed)?;
    let completion = llm.complete(&prompt, max_tokens, rng_seed)?;
    truncate_completion(&completion).ok_or(Error::GenerationFailed)
}

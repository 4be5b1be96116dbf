use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    data2text, filter_tags, prompt2text, tags_to_text, AnalogyExample, LlmClient, Rephraser,
    TemplateBank, TextRecord,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tags,
    Data2text,
    Prompt2text,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tags, Method::Data2text, Method::Prompt2text];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tags => "tags",
            Method::Data2text => "data2text",
            Method::Prompt2text => "prompt2text",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "text synthesis method",
                name: s.to_string(),
            })
    }
}

/// Everything a generator may need; unused parts are ignored.
pub struct SynthesisContext<'a> {
    pub threshold: f64,
    pub seed: u64,
    pub bank: &'a TemplateBank,
    pub rephraser: &'a dyn Rephraser,
    pub examples: &'a [AnalogyExample],
    pub k: usize,
    pub llm: Option<&'a dyn LlmClient>,
    pub max_tokens: usize,
}

/// Per-record seed so that each text is reproducible on its own.
pub fn record_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Replaces each record's text with a synthesised one. Records whose tags
/// all fall at or below the threshold get an empty text.
pub fn synthesize_texts(
    records: &[TextRecord],
    method: Method,
    ctx: &SynthesisContext<'_>,
) -> Result<Vec<TextRecord>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let tags = filter_tags(&r.track_id, &r.tags, ctx.threshold);
            let seed = record_seed(ctx.seed, i);
            let text = if tags.is_empty() {
                String::new()
            } else {
                match method {
                    Method::Tags => tags_to_text(&tags, seed)?,
                    Method::Data2text => data2text(&tags, ctx.bank, ctx.rephraser, seed)?,
                    Method::Prompt2text => {
                        let llm = ctx.llm.ok_or_else(|| {
                            Error::invalid("prompt2text needs a language model client")
                        })?;
                        prompt2text(&tags, ctx.examples, ctx.k, llm, ctx.max_tokens, seed)?
                    }
                }
            };
            Ok(TextRecord { text, ..r.clone() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagtext::{Category, MockLlm, RuleRephraser, TagPrediction, TagSet};

    fn records() -> Vec<TextRecord> {
        vec![
            TextRecord {
                track_id: "a".into(),
                tags: vec![
                    TagPrediction::new("jazz", Category::Genre, 0.9),
                    TagPrediction::new("piano", Category::Instrument, 0.6),
                    TagPrediction::new("sad", Category::Mood, 0.1),
                ],
                text: String::new(),
            },
            TextRecord {
                track_id: "b".into(),
                tags: vec![TagPrediction::new("rock", Category::Genre, 0.2)],
                text: "old".into(),
            },
        ]
    }

    fn run(method: Method, llm: Option<&dyn LlmClient>) -> Vec<TextRecord> {
        let bank = TemplateBank::default();
        let examples = vec![AnalogyExample::new(
            TagSet::new("ex", vec![TagPrediction::new("pop", Category::Genre, 0.8)]).unwrap(),
            "Bright pop.",
        )
        .unwrap()];
        let ctx = SynthesisContext {
            threshold: 0.3,
            seed: 4,
            bank: &bank,
            rephraser: &RuleRephraser,
            examples: &examples,
            k: 1,
            llm,
            max_tokens: 64,
        };
        synthesize_texts(&records(), method, &ctx).unwrap()
    }

    #[test]
    fn each_method_keeps_filtered_tags() {
        let llm = MockLlm::describe();
        for method in Method::ALL {
            let out = run(method, Some(&llm));
            assert!(
                out[0].text.contains("jazz") && out[0].text.contains("piano"),
                "{method}"
            );
            assert!(!out[0].text.contains("sad"));
            assert_eq!(out[1].text, "");
            assert_eq!(out[0].tags, records()[0].tags);
        }
    }

    #[test]
    fn prompt2text_without_client_fails() {
        let bank = TemplateBank::default();
        let ctx = SynthesisContext {
            threshold: 0.3,
            seed: 0,
            bank: &bank,
            rephraser: &RuleRephraser,
            examples: &[],
            k: 1,
            llm: None,
            max_tokens: 64,
        };
        assert!(synthesize_texts(&records(), Method::Prompt2text, &ctx).is_err());
    }

    #[test]
    fn methods_parse() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("human".parse::<Method>().is_err());
    }
}

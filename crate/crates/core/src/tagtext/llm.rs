use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A text-completion backend.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str, max_tokens: usize, seed: u64) -> Result<String>;
}

#[derive(Debug, Clone)]
enum MockMode {
    Fixed(String),
    Describe,
}

/// Deterministic stand-in for a large language model.
///
/// `fixed` always returns the same completion. `describe` reads the last
/// `Tags:` line of the prompt and writes a one-sentence description of those
/// tags, followed by a blank line and a runaway `Tags:` block the way a real
/// model continues the pattern.
#[derive(Debug, Clone)]
pub struct MockLlm {
    mode: MockMode,
}

impl MockLlm {
    pub fn fixed(completion: impl Into<String>) -> Self {
        Self {
            mode: MockMode::Fixed(completion.into()),
        }
    }

    pub fn describe() -> Self {
        Self {
            mode: MockMode::Describe,
        }
    }
}

const OPENERS: [&str; 4] = [
    "A track with",
    "This music blends",
    "Expect a song built on",
    "A piece featuring",
];

impl LlmClient for MockLlm {
    fn complete(&self, prompt: &str, _max_tokens: usize, seed: u64) -> Result<String> {
        match &self.mode {
            MockMode::Fixed(s) => Ok(s.clone()),
            MockMode::Describe => {
                let Some(line) = prompt.lines().rev().find(|l| l.starts_with("Tags:")) else {
                    return Ok(String::new());
                };
                let tags: Vec<&str> = line["Tags:".len()..]
                    .split(", ")
                    .map(|t| t.trim())
                    .map(|t| t.rsplit_once(" (").map_or(t, |(name, _)| name))
                    .filter(|t| !t.is_empty())
                    .collect();
                if tags.is_empty() {
                    return Ok(String::new());
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let opener = OPENERS.choose(&mut rng).unwrap();
                Ok(format!(
                    " {opener} {}.\n\nTags: {}",
                    super::join_conjunction(&tags),
                    tags[0]
                ))
            }
        }
    }
}

/// Connection settings for an HTTP completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub url: String,
    #[serde(default)]
    pub token: Option<String>,
    pub model: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

impl LlmConfig {
    /// Reads `VIML_LLM_URL`, `VIML_LLM_MODEL`, and optionally
    /// `VIML_LLM_TOKEN` and `VIML_LLM_TEMPERATURE`.
    pub fn from_env() -> Result<Self> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let url =
            var("VIML_LLM_URL").ok_or_else(|| Error::Llm("VIML_LLM_URL is not set".into()))?;
        let model = var("VIML_LLM_MODEL").unwrap_or_else(|| "bloom".to_string());
        let temperature = match var("VIML_LLM_TEMPERATURE") {
            Some(t) => Some(
                t.parse()
                    .map_err(|_| Error::Llm(format!("bad VIML_LLM_TEMPERATURE `{t}`")))?,
            ),
            None => None,
        };
        Ok(Self {
            url,
            token: var("VIML_LLM_TOKEN"),
            model,
            temperature,
            timeout_secs: default_timeout_secs(),
        })
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

/// Client for completion servers speaking the common
/// `{model, prompt, max_tokens}` → `{choices: [{text}]}` JSON shape. Responses
/// of the `[{generated_text}]` form are also accepted.
#[derive(Debug, Clone)]
pub struct HttpLlmClient {
    config: LlmConfig,
    http: reqwest::blocking::Client,
}

impl HttpLlmClient {
    pub fn new(config: LlmConfig) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Llm(e.to_string()))?;
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }
}

pub(crate) fn completion_text(body: &serde_json::Value) -> Option<String> {
    if let Some(text) = body.pointer("/choices/0/text").and_then(|v| v.as_str()) {
        return Some(text.to_string());
    }
    if let Some(text) = body.pointer("/0/generated_text").and_then(|v| v.as_str()) {
        return Some(text.to_string());
    }
    body.get("generated_text")
        .and_then(|v| v.as_str())
        .map(String::from)
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str, max_tokens: usize, seed: u64) -> Result<String> {
        let request = CompletionRequest {
            model: &self.config.model,
            prompt,
            max_tokens,
            seed,
            temperature: self.config.temperature,
        };
        let mut builder = self.http.post(&self.config.url).json(&request);
        if let Some(token) = &self.config.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| Error::Llm(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Llm(format!("endpoint returned {status}")));
        }
        let body: serde_json::Value = response.json().map_err(|e| Error::Llm(e.to_string()))?;
        completion_text(&body).ok_or_else(|| Error::Llm("response has no completion text".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn describe_mock_is_deterministic() {
        let llm = MockLlm::describe();
        let prompt =
            "Tags: a (0.50)\nDescription: x\n\nTags: pop (0.90), piano (0.40)\nDescription:";
        let a = llm.complete(prompt, 32, 5).unwrap();
        assert_eq!(a, llm.complete(prompt, 32, 5).unwrap());
        assert!(a.contains("pop and piano"), "{a}");
    }

    #[test]
    fn parses_completion_shapes() {
        assert_eq!(
            completion_text(&json!({"choices": [{"text": "hi"}]})).as_deref(),
            Some("hi")
        );
        assert_eq!(
            completion_text(&json!([{"generated_text": "yo"}])).as_deref(),
            Some("yo")
        );
        assert_eq!(completion_text(&json!({"nope": 1})), None);
    }
}

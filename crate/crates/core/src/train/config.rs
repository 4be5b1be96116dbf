use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FusionVariant, ModelConfig};

/// How the training texts were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextSource {
    #[default]
    Tags,
    Data2text,
    Prompt2text,
    Human,
    /// Train without text; every example receives the null text feature.
    None,
}

impl TextSource {
    pub const ALL: [TextSource; 5] = [
        TextSource::Tags,
        TextSource::Data2text,
        TextSource::Prompt2text,
        TextSource::Human,
        TextSource::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TextSource::Tags => "tags",
            TextSource::Data2text => "data2text",
            TextSource::Prompt2text => "prompt2text",
            TextSource::Human => "human",
            TextSource::None => "none",
        }
    }
}

impl fmt::Display for TextSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TextSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TextSource::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "text source",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub text_source: TextSource,
    /// Save a checkpoint every this many epochs; 0 disables intermediate
    /// checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            batch_size: 64,
            epochs: 10,
            learning_rate: 1e-4,
            weight_decay: 0.0,
            seed: 0,
            text_source: TextSource::Tags,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay must be non-negative"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::invalid(format!("train config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("train config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedConfig {
    pub name: String,
    pub config: TrainConfig,
}

pub const PRESETS: [&str; 5] = [
    "table1_viml",
    "table2_grid",
    "dropout_ablation",
    "fusion_study",
    "musictext",
];

/// Training configurations for an experiment grid, all derived from
/// `TrainConfig::default()`.
pub fn preset(name: &str) -> Result<Vec<NamedConfig>> {
    let base = TrainConfig::default();
    let named = |name: String, config: TrainConfig| NamedConfig { name, config };
    let configs = match name {
        "table1_viml" => vec![named("viml_tags".into(), base)],
        "table2_grid" => [
            TextSource::Tags,
            TextSource::Data2text,
            TextSource::Prompt2text,
        ]
        .into_iter()
        .map(|t| {
            named(
                format!("viml_{t}"),
                TrainConfig {
                    text_source: t,
                    ..base.clone()
                },
            )
        })
        .collect(),
        "dropout_ablation" => [0.0, 0.8]
            .into_iter()
            .map(|p| {
                let mut c = TrainConfig {
                    text_source: TextSource::Prompt2text,
                    ..base.clone()
                };
                c.model.text_dropout_p = p;
                named(format!("dropout_{p}"), c)
            })
            .collect(),
        "fusion_study" => FusionVariant::ALL
            .into_iter()
            .map(|v| {
                let mut c = TrainConfig {
                    text_source: TextSource::Prompt2text,
                    ..base.clone()
                };
                c.model.fusion_variant = v;
                named(format!("fusion_{v}"), c)
            })
            .collect(),
        "musictext" => {
            let mut c = base;
            c.model.use_video = false;
            c.model.text_dropout_p = 0.0;
            vec![named("musictext_tags".into(), c)]
        }
        other => {
            return Err(Error::Unknown {
                kind: "preset",
                name: other.to_string(),
            })
        }
    };
    Ok(configs)
}

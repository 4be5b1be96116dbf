use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Modality;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionVariant {
    /// `y_v + y_t`, no parameters.
    Addition,
    /// Affine map of the concatenation `[y_v; y_t]`.
    Linear,
    /// Two affine maps with a GELU in between.
    Mlp,
    /// One Transformer block over the two-token sequence.
    Transformer1,
    /// Two Transformer blocks over the two-token sequence.
    Transformer2,
}

impl FusionVariant {
    pub const ALL: [FusionVariant; 5] = [
        FusionVariant::Addition,
        FusionVariant::Linear,
        FusionVariant::Mlp,
        FusionVariant::Transformer1,
        FusionVariant::Transformer2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionVariant::Addition => "addition",
            FusionVariant::Linear => "linear",
            FusionVariant::Mlp => "mlp",
            FusionVariant::Transformer1 => "transformer1",
            FusionVariant::Transformer2 => "transformer2",
        }
    }
}

impl fmt::Display for FusionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "fusion variant",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Mean,
    FirstToken,
}

/// What the null text feature is initialised to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullTextSource {
    /// The all-zeros vector.
    #[default]
    Zeros,
    /// The frozen text encoder's embedding of the empty string, supplied at
    /// construction time.
    EmptyStringEmbedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseDims {
    pub video: usize,
    pub music: usize,
    pub text: usize,
}

impl BaseDims {
    pub fn get(&self, modality: Modality) -> usize {
        match modality {
            Modality::Video => self.video,
            Modality::Music => self.music,
            Modality::Text => self.text,
        }
    }
}

impl Default for BaseDims {
    fn default() -> Self {
        Self {
            video: 512,
            music: 256,
            text: 512,
        }
    }
}

/// Missing keys take their [`Default`] values when deserialising.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub video_layers: usize,
    pub music_layers: usize,
    pub text_layers: usize,
    pub fusion_variant: FusionVariant,
    pub heads: usize,
    pub ff_dim: usize,
    pub tau: f64,
    pub text_dropout_p: f64,
    pub base_dims: BaseDims,
    /// `false` builds the music+text model: no video branch, no fusion, and
    /// the query embedding is the text embedding.
    pub use_video: bool,
    pub pooling: Pooling,
    pub max_positions: usize,
    pub positional_embeddings: bool,
    /// Hidden width of the `mlp` fusion; `2 * embed_dim` when unset.
    pub mlp_hidden: Option<usize>,
    pub null_text: NullTextSource,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 256,
            video_layers: 2,
            music_layers: 2,
            text_layers: 2,
            fusion_variant: FusionVariant::Transformer2,
            heads: 4,
            ff_dim: 1024,
            tau: 0.03,
            text_dropout_p: 0.8,
            base_dims: BaseDims::default(),
            use_video: true,
            pooling: Pooling::Mean,
            max_positions: 64,
            positional_embeddings: true,
            mlp_hidden: None,
            null_text: NullTextSource::Zeros,
        }
    }
}

impl ModelConfig {
    /// The smallest configuration exercising every component; used for
    /// gradient checks.
    pub fn tiny() -> Self {
        Self {
            embed_dim: 8,
            video_layers: 1,
            music_layers: 1,
            text_layers: 1,
            fusion_variant: FusionVariant::Transformer1,
            heads: 1,
            ff_dim: 16,
            tau: 0.03,
            text_dropout_p: 0.8,
            base_dims: BaseDims {
                video: 6,
                music: 5,
                text: 4,
            },
            use_video: true,
            pooling: Pooling::Mean,
            max_positions: 4,
            positional_embeddings: true,
            mlp_hidden: None,
            null_text: NullTextSource::Zeros,
        }
    }

    pub fn mlp_hidden(&self) -> usize {
        self.mlp_hidden.unwrap_or(2 * self.embed_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::invalid("embed_dim must be positive"));
        }
        if self.heads == 0 || !self.embed_dim.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!(
                "embed_dim {} is not divisible by heads {}",
                self.embed_dim, self.heads
            )));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid("tau must be positive"));
        }
        if !(0.0..=1.0).contains(&self.text_dropout_p) {
            return Err(Error::invalid("text_dropout_p must lie in [0, 1]"));
        }
        if self.ff_dim == 0 || self.max_positions == 0 || self.mlp_hidden() == 0 {
            return Err(Error::invalid(
                "ff_dim, max_positions and mlp_hidden must be positive",
            ));
        }
        let d = &self.base_dims;
        if d.music == 0 || d.text == 0 || (self.use_video && d.video == 0) {
            return Err(Error::invalid("base dimensions must be positive"));
        }
        Ok(())
    }
}

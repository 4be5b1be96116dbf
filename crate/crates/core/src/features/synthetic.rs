//! Latent-factor synthetic corpus.
//!
//! Each track draws a latent `z ~ N(0, I)`. Every modality observes it through
//! a fixed seeded linear map plus isotropic Gaussian noise, and the track's
//! tags are read off thresholded latent coordinates, so all three modalities
//! and the tag text describe the same underlying "song".

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{write_store, BaseFeatureSequence, FeatureStore, Modality, DEFAULT_SEGMENT_SECONDS};
use crate::error::{Error, Result};
use crate::tagtext::{
    filter_tags, tags_to_text, Category, TagPrediction, TagSet, TextRecord, Vocabulary,
    DEFAULT_TAG_THRESHOLD,
};

fn default_video_dim() -> usize {
    512
}
fn default_music_dim() -> usize {
    256
}
fn default_text_dim() -> usize {
    512
}
fn default_segments() -> usize {
    3
}
fn default_threshold() -> f64 {
    DEFAULT_TAG_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_tracks: usize,
    pub latent_dim: usize,
    pub noise_sigma: f64,
    #[serde(default = "default_segments")]
    pub segments_per_track: usize,
    pub seed: u64,
    #[serde(default = "default_video_dim")]
    pub video_dim: usize,
    #[serde(default = "default_music_dim")]
    pub music_dim: usize,
    #[serde(default = "default_text_dim")]
    pub text_dim: usize,
    #[serde(default = "default_threshold")]
    pub tag_threshold: f64,
}

impl SyntheticSpec {
    pub fn new(num_tracks: usize, latent_dim: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            num_tracks,
            latent_dim,
            noise_sigma,
            segments_per_track: default_segments(),
            seed,
            video_dim: default_video_dim(),
            music_dim: default_music_dim(),
            text_dim: default_text_dim(),
            tag_threshold: default_threshold(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tracks < 2 {
            return Err(Error::invalid("num_tracks must be at least 2"));
        }
        if self.latent_dim < 1 {
            return Err(Error::invalid("latent_dim must be at least 1"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be finite and nonnegative"));
        }
        if self.segments_per_track < 1 {
            return Err(Error::invalid("segments_per_track must be at least 1"));
        }
        if self.video_dim == 0 || self.music_dim == 0 || self.text_dim == 0 {
            return Err(Error::invalid("feature dimensions must be positive"));
        }
        Ok(())
    }

    pub fn track_id(index: usize) -> String {
        format!("track{index:05}")
    }
}

/// The fixed per-modality observation maps, each `feature_dim x latent_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMaps {
    pub video: Array2<f64>,
    pub music: Array2<f64>,
    pub text: Array2<f64>,
}

impl MixingMaps {
    fn draw(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Self {
        let scale = 1.0 / (spec.latent_dim as f64).sqrt();
        let mut draw = |rows: usize| {
            Array2::from_shape_simple_fn((rows, spec.latent_dim), || {
                scale * rng.sample::<f64, _>(StandardNormal)
            })
        };
        let video = draw(spec.video_dim);
        let music = draw(spec.music_dim);
        let text = draw(spec.text_dim);
        Self { video, music, text }
    }

    /// Regenerates the maps of `spec` without drawing any tracks.
    pub fn for_spec(spec: &SyntheticSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Self::draw(spec, &mut rng)
    }

    pub fn map(&self, modality: Modality) -> &Array2<f64> {
        match modality {
            Modality::Video => &self.video,
            Modality::Music => &self.music,
            Modality::Text => &self.text,
        }
    }

    /// Noise-free observation `A · z`.
    pub fn apply(&self, modality: Modality, z: &Array1<f64>) -> Array1<f64> {
        self.map(modality).dot(z)
    }
}

/// Synthetic tag `j` fires when latent coordinate `j / 2` is large and
/// positive (even `j`) or large and negative (odd `j`).
pub(crate) fn synthetic_tags(latent_dim: usize) -> Vec<(String, Category, usize, f64)> {
    let vocab = Vocabulary::default().interleaved();
    (0..2 * latent_dim)
        .map(|j| {
            let (base, category) = &vocab[j % vocab.len()];
            let round = j / vocab.len();
            let name = if round == 0 {
                base.clone()
            } else {
                format!("{base} {}", round + 1)
            };
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            (name, *category, j / 2, sign)
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Tagger confidence of a synthetic tag given the signed latent coordinate.
pub(crate) fn tag_confidence(signed_latent: f64) -> f64 {
    sigmoid(2.5 * signed_latent - 1.5)
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub spec: SyntheticSpec,
    pub maps: MixingMaps,
    /// `num_tracks x latent_dim`.
    pub latents: Array2<f64>,
    /// Video, music and text sequence for each track, in track order.
    pub sequences: Vec<BaseFeatureSequence>,
    pub tag_sets: Vec<TagSet>,
    /// `tags`-generator text per track; empty when no tag passed the threshold.
    pub texts: Vec<String>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let maps = MixingMaps::draw(spec, &mut rng);
    let tag_defs = synthetic_tags(spec.latent_dim);

    let mut latents = Array2::<f64>::zeros((spec.num_tracks, spec.latent_dim));
    let mut sequences = Vec::with_capacity(3 * spec.num_tracks);
    let mut tag_sets = Vec::with_capacity(spec.num_tracks);
    let mut texts = Vec::with_capacity(spec.num_tracks);

    for i in 0..spec.num_tracks {
        let id = SyntheticSpec::track_id(i);
        let z =
            Array1::from_shape_simple_fn(spec.latent_dim, || rng.sample::<f64, _>(StandardNormal));
        latents.row_mut(i).assign(&z);

        for (modality, segments) in [
            (Modality::Video, spec.segments_per_track),
            (Modality::Music, spec.segments_per_track),
            (Modality::Text, 1),
        ] {
            let clean = maps.apply(modality, &z);
            let mut m = Array2::<f32>::zeros((segments, clean.len()));
            for mut row in m.rows_mut() {
                for (o, c) in row.iter_mut().zip(clean.iter()) {
                    let eps: f64 = rng.sample(StandardNormal);
                    *o = (c + spec.noise_sigma * eps) as f32;
                }
            }
            sequences.push(BaseFeatureSequence::new(
                id.clone(),
                modality,
                m,
                DEFAULT_SEGMENT_SECONDS,
            )?);
        }

        let predictions: Vec<TagPrediction> = tag_defs
            .iter()
            .map(|(name, category, coord, sign)| {
                TagPrediction::new(name.clone(), *category, tag_confidence(sign * z[*coord]))
            })
            .collect();
        let tags = filter_tags(&id, &predictions, spec.tag_threshold);
        let text = if tags.is_empty() {
            String::new()
        } else {
            tags_to_text(
                &tags,
                spec.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            )?
        };
        tag_sets.push(tags);
        texts.push(text);
    }

    Ok(SyntheticDataset {
        spec: spec.clone(),
        maps,
        latents,
        sequences,
        tag_sets,
        texts,
    })
}

impl SyntheticDataset {
    pub fn track_ids(&self) -> Vec<String> {
        (0..self.spec.num_tracks)
            .map(SyntheticSpec::track_id)
            .collect()
    }

    pub fn sequence(&self, track: usize, modality: Modality) -> &BaseFeatureSequence {
        let offset = match modality {
            Modality::Video => 0,
            Modality::Music => 1,
            Modality::Text => 2,
        };
        &self.sequences[3 * track + offset]
    }

    pub fn records(&self) -> Vec<TextRecord> {
        self.tag_sets
            .iter()
            .zip(&self.texts)
            .map(|(tags, text)| TextRecord {
                track_id: tags.track_id.clone(),
                tags: tags.predictions.clone(),
                text: text.clone(),
            })
            .collect()
    }

    /// Writes the feature store; the generator settings are kept under the
    /// `synthetic` manifest metadata key.
    pub fn write(&self, root: &Path) -> Result<FeatureStore> {
        let mut metadata = serde_json::Map::new();
        metadata.insert("synthetic".into(), serde_json::to_value(&self.spec)?);
        write_store(&self.sequences, root, metadata)
    }
}

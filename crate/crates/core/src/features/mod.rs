//! Base features: the frozen-encoder outputs consumed by the trainable model.
//!
//! A [`BaseFeatureSequence`] is an `n x d` matrix for one modality of one
//! track. Video and music sequences hold one row per fixed-length segment;
//! text is a single track-level row.

mod aggregate;
mod encoder;
mod store;
mod synthetic;
pub mod tensor_file;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aggregate::aggregate_frames;
pub use encoder::{PrecomputedTextFeatures, SyntheticTextEncoder, TextEncoder};
pub use store::{read_store, write_store, FeatureStore, Manifest, ManifestEntry, STORE_VERSION};
pub use synthetic::{generate_synthetic, MixingMaps, SyntheticDataset, SyntheticSpec};

/// Segment length used for video and music base features.
pub const DEFAULT_SEGMENT_SECONDS: f64 = 10.0;
/// Frame rate at which per-frame image features are sampled before averaging.
pub const DEFAULT_FPS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Music,
    Text,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Video, Modality::Music, Modality::Text];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Video => "video",
            Modality::Music => "music",
            Modality::Text => "text",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(Modality::Video),
            "music" => Ok(Modality::Music),
            "text" => Ok(Modality::Text),
            other => Err(Error::Unknown {
                kind: "modality",
                name: other.to_string(),
            }),
        }
    }
}

/// Per-segment base features for one modality of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFeatureSequence {
    track_id: String,
    modality: Modality,
    features: Array2<f32>,
    segment_seconds: f64,
}

impl BaseFeatureSequence {
    pub fn new(
        track_id: impl Into<String>,
        modality: Modality,
        features: Array2<f32>,
        segment_seconds: f64,
    ) -> Result<Self> {
        let track_id = track_id.into();
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::EmptyInput);
        }
        if modality == Modality::Text && n != 1 {
            return Err(Error::shape(format!(
                "text features for `{track_id}` must have exactly one row, got {n}"
            )));
        }
        if !(segment_seconds.is_finite() && segment_seconds > 0.0) {
            return Err(Error::invalid(format!(
                "segment_seconds must be positive, got {segment_seconds}"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite {modality} feature for `{track_id}`"
            )));
        }
        Ok(Self {
            track_id,
            modality,
            features,
            segment_seconds,
        })
    }

    pub fn track_id(&self) -> &str {
        &self.track_id
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn features(&self) -> &Array2<f32> {
        &self.features
    }

    pub fn into_features(self) -> Array2<f32> {
        self.features
    }

    pub fn segment_seconds(&self) -> f64 {
        self.segment_seconds
    }

    /// Number of segments.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn text_must_be_single_row() {
        let two_rows = Array2::<f32>::zeros((2, 4));
        assert!(BaseFeatureSequence::new("t", Modality::Text, two_rows, 10.0).is_err());
        let one_row = Array2::<f32>::zeros((1, 4));
        assert!(BaseFeatureSequence::new("t", Modality::Text, one_row, 10.0).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        let bad = array![[1.0f32, f32::NAN]];
        assert!(BaseFeatureSequence::new("t", Modality::Video, bad, 10.0).is_err());
    }

    #[test]
    fn modality_round_trips_through_str() {
        for m in Modality::ALL {
            assert_eq!(m.as_str().parse::<Modality>().unwrap(), m);
        }
        assert!("audio".parse::<Modality>().is_err());
    }
}

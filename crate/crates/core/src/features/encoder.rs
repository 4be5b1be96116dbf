use std::collections::HashMap;

use ndarray::Array1;

use super::synthetic::{synthetic_tags, MixingMaps};
use super::SyntheticSpec;

/// A frozen text encoder producing base text features.
///
/// `None` means "no text": the caller substitutes the model's null text
/// feature.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Option<Array1<f32>>;
}

/// Looks texts up in a table of precomputed features, deferring to an
/// optional fallback encoder for texts it has not seen.
pub struct PrecomputedTextFeatures {
    dim: usize,
    table: HashMap<String, Array1<f32>>,
    fallback: Option<Box<dyn TextEncoder>>,
}

impl PrecomputedTextFeatures {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            table: HashMap::new(),
            fallback: None,
        }
    }

    pub fn insert(&mut self, text: impl Into<String>, feature: Array1<f32>) {
        assert_eq!(feature.len(), self.dim, "text feature dimension");
        self.table.insert(text.into(), feature);
    }

    pub fn with_fallback(mut self, fallback: Box<dyn TextEncoder>) -> Self {
        assert_eq!(fallback.dim(), self.dim, "fallback encoder dimension");
        self.fallback = Some(fallback);
        self
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl TextEncoder for PrecomputedTextFeatures {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Option<Array1<f32>> {
        if text.trim().is_empty() {
            return None;
        }
        match self.table.get(text) {
            Some(f) => Some(f.clone()),
            None => self.fallback.as_ref().and_then(|f| f.encode(text)),
        }
    }
}

/// Text encoder for synthetic corpora: recognises the generator's tag names
/// in free-form text, sets the matching latent coordinates, and maps the
/// resulting latent estimate through the text mixing map.
pub struct SyntheticTextEncoder {
    text_map: ndarray::Array2<f64>,
    /// `(lowercased tag, latent coordinate, sign)`, longest tags first so that
    /// "electric piano" is consumed before "piano".
    tags: Vec<(String, usize, f64)>,
    latent_dim: usize,
}

/// Mean of a standard normal conditioned on exceeding the tag threshold
/// (about 0.26 for the default confidence curve), rounded.
const TAG_LATENT_MAGNITUDE: f64 = 1.0;

impl SyntheticTextEncoder {
    pub fn new(spec: &SyntheticSpec) -> Self {
        let maps = MixingMaps::for_spec(spec);
        let mut tags: Vec<(String, usize, f64)> = synthetic_tags(spec.latent_dim)
            .into_iter()
            .map(|(name, _, coord, sign)| (name.to_lowercase(), coord, sign))
            .collect();
        tags.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Self {
            text_map: maps.text,
            tags,
            latent_dim: spec.latent_dim,
        }
    }

    pub fn latent_estimate(&self, text: &str) -> Array1<f64> {
        let mut remaining = text.to_lowercase();
        let mut z = Array1::<f64>::zeros(self.latent_dim);
        for (tag, coord, sign) in &self.tags {
            if remaining.contains(tag.as_str()) {
                z[*coord] += sign * TAG_LATENT_MAGNITUDE;
                remaining = remaining.replace(tag.as_str(), " ");
            }
        }
        z
    }
}

impl TextEncoder for SyntheticTextEncoder {
    fn dim(&self) -> usize {
        self.text_map.nrows()
    }

    fn encode(&self, text: &str) -> Option<Array1<f32>> {
        if text.trim().is_empty() {
            return None;
        }
        let z = self.latent_estimate(text);
        Some(self.text_map.dot(&z).mapv(|v| v as f32))
    }
}

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use viml::features::{read_store, FeatureStore, Modality, TextEncoder};
use viml::model::{load_checkpoint, ViML};
use viml::tagtext::{read_jsonl, TextRecord};
use viml::train::text_encoder_for_store;

use crate::error::ServiceError;
use crate::index::{build_index, MusicIndex, ScoredTrack};

/// Everything needed to answer queries: the model, its music index, the
/// store's video features and a text encoder. Immutable once built.
pub struct Engine {
    model: ViML<f32>,
    index: MusicIndex,
    videos: BTreeMap<String, Array2<f32>>,
    encoder: Box<dyn TextEncoder>,
}

impl Engine {
    pub fn new(
        model: ViML<f32>,
        store: &FeatureStore,
        encoder: Box<dyn TextEncoder>,
    ) -> Result<Self, ServiceError> {
        let index = build_index(&model, store)?;
        let mut videos = BTreeMap::new();
        for id in store.track_ids(Modality::Video) {
            let features = store.load(id, Modality::Video)?.into_features();
            if model.config().use_video && features.ncols() != model.config().base_dims.video {
                return Err(ServiceError::DimensionMismatch(format!(
                    "video `{id}` is {}-d but the checkpoint expects {}",
                    features.ncols(),
                    model.config().base_dims.video
                )));
            }
            videos.insert(id.to_string(), features);
        }
        if model.config().base_dims.text != encoder.dim() {
            return Err(ServiceError::DimensionMismatch(format!(
                "text encoder is {}-d but the checkpoint expects {}",
                encoder.dim(),
                model.config().base_dims.text
            )));
        }
        Ok(Self {
            model,
            index,
            videos,
            encoder,
        })
    }

    /// Loads a checkpoint directory and a feature store. `texts` is an
    /// optional JSON-lines file of track texts used by stores without a
    /// built-in text encoder.
    pub fn load(
        checkpoint: &Path,
        store: &Path,
        texts: Option<&Path>,
    ) -> Result<Self, ServiceError> {
        let model = load_checkpoint(checkpoint)?;
        let store = read_store(store)?;
        let records: Vec<TextRecord> = match texts {
            Some(path) => read_jsonl(path)?,
            None => Vec::new(),
        };
        let encoder = text_encoder_for_store(&store, &records)?;
        Self::new(model, &store, encoder)
    }

    pub fn index(&self) -> &MusicIndex {
        &self.index
    }

    pub fn model(&self) -> &ViML<f32> {
        &self.model
    }

    pub fn video_ids(&self) -> impl Iterator<Item = &str> {
        self.videos.keys().map(String::as_str)
    }

    /// Ranks the index for a video and a free-form text. Blank or
    /// unrecognised text takes the null-text path.
    pub fn query(
        &self,
        video_id: &str,
        text: &str,
        top_k: usize,
    ) -> Result<Vec<ScoredTrack>, ServiceError> {
        let video = self
            .videos
            .get(video_id)
            .ok_or_else(|| ServiceError::UnknownVideo(video_id.to_string()))?;
        let text = self.encoder.encode(text);
        let query = self
            .model
            .query_embedding(Some(video.view()), text.as_ref().map(|t| t.view()))?;
        self.index.top_k(query.view(), top_k)
    }
}

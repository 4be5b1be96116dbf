use ndarray::{Array1, Array2, ArrayView1};
use sha2::{Digest, Sha256};
use viml::features::{FeatureStore, Modality};
use viml::model::{Parameterized, ViML};

use crate::error::ServiceError;

/// Unit-norm music embeddings for every track in a store, ordered by track id.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicIndex {
    track_ids: Vec<String>,
    embeddings: Array2<f32>,
    fingerprint: String,
}

/// Scored retrieval result.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoredTrack {
    pub track_id: String,
    pub score: f64,
}

/// SHA-256 over the model configuration and every parameter tensor.
pub fn model_fingerprint(model: &ViML<f32>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{:?}", model.config()).as_bytes());
    model.visit("", &mut |name, p| {
        hasher.update(name.as_bytes());
        for v in p.value.iter() {
            hasher.update(v.to_le_bytes());
        }
    });
    for v in model.null_text() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

pub(crate) fn normalized(v: ArrayView1<'_, f32>) -> Array1<f32> {
    let norm = v
        .iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt();
    v.mapv(|x| (f64::from(x) / norm.max(1e-12)) as f32)
}

/// Embeds every music track of `store` with `model`.
pub fn build_index(model: &ViML<f32>, store: &FeatureStore) -> Result<MusicIndex, ServiceError> {
    let expected = model.config().base_dims.music;
    match store.dim(Modality::Music) {
        Some(d) if d == expected => {}
        Some(d) => {
            return Err(ServiceError::DimensionMismatch(format!(
                "store music features are {d}-d but the checkpoint expects {expected}"
            )))
        }
        None => {
            return Err(ServiceError::DimensionMismatch(
                "store holds no music features".into(),
            ))
        }
    }
    let mut track_ids: Vec<String> = store
        .track_ids(Modality::Music)
        .into_iter()
        .map(String::from)
        .collect();
    track_ids.sort();
    track_ids.dedup();
    let mut embeddings = Array2::zeros((track_ids.len(), model.config().embed_dim));
    for (row, id) in track_ids.iter().enumerate() {
        let music = store.load(id, Modality::Music)?;
        let y = model.music_embedding(music.features().view())?;
        embeddings.row_mut(row).assign(&normalized(y.view()));
    }
    Ok(MusicIndex {
        track_ids,
        embeddings,
        fingerprint: model_fingerprint(model),
    })
}

impl MusicIndex {
    pub fn track_ids(&self) -> &[String] {
        &self.track_ids
    }

    pub fn embeddings(&self) -> &Array2<f32> {
        &self.embeddings
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.track_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.track_ids.is_empty()
    }

    /// Cosine score of a query against every row, in index order.
    pub fn scores(&self, query: ArrayView1<'_, f32>) -> Vec<f64> {
        let q = normalized(query);
        self.embeddings
            .rows()
            .into_iter()
            .map(|row| {
                let dot: f64 = row
                    .iter()
                    .zip(q.iter())
                    .map(|(&a, &b)| f64::from(a) * f64::from(b))
                    .sum();
                dot.clamp(-1.0, 1.0)
            })
            .collect()
    }

    /// The `top_k` best tracks, descending by score with ties in track id
    /// order.
    pub fn top_k(
        &self,
        query: ArrayView1<'_, f32>,
        top_k: usize,
    ) -> Result<Vec<ScoredTrack>, ServiceError> {
        if top_k == 0 || top_k > self.len() {
            return Err(ServiceError::InvalidTopK {
                top_k,
                index_size: self.len(),
            });
        }
        let scores = self.scores(query);
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // rows are sorted by id, so the index breaks ties
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(top_k)
            .map(|i| ScoredTrack {
                track_id: self.track_ids[i].clone(),
                score: scores[i],
            })
            .collect())
    }
}

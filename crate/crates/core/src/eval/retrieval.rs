use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::{build_pool, rank_of_positive, PoolSpec, QueryMode, RetrievalReport};
use crate::error::{Error, Result};
use crate::model::loss::normalize_rows;
use crate::model::{TriModalExample, ViML};

/// Ranks query `i`'s positive (corpus item `i`) within its pool, scoring each
/// candidate with `score(query, candidate)`.
pub fn evaluate_with<F>(
    corpus_size: usize,
    spec: &PoolSpec,
    mode: Option<QueryMode>,
    score: F,
) -> Result<RetrievalReport>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if corpus_size == 0 {
        return Err(Error::EmptyRanks);
    }
    let ranks = (0..corpus_size)
        .into_par_iter()
        .map(|q| {
            let pool = build_pool(q, corpus_size, spec)?;
            let scores: Vec<f64> = pool.iter().map(|&c| score(q, c)).collect();
            let positive = pool.binary_search(&q).expect("pool holds the positive");
            Ok(rank_of_positive(&scores, positive))
        })
        .collect::<Result<Vec<_>>>()?;
    RetrievalReport::from_ranks(ranks, *spec, mode)
}

/// Cosine-similarity retrieval of `music[i]` by `queries[i]`.
pub fn evaluate_embeddings(
    queries: ArrayView2<'_, f32>,
    music: ArrayView2<'_, f32>,
    spec: &PoolSpec,
    mode: Option<QueryMode>,
) -> Result<RetrievalReport> {
    check_pair(&queries, &music)?;
    let (q, _) = normalize_rows(queries);
    let (m, _) = normalize_rows(music);
    evaluate_with(q.nrows(), spec, mode, |i, j| q.row(i).dot(&m.row(j)) as f64)
}

/// Weighted sum of two models' similarity scores.
pub fn ensemble_score(s1: f64, s2: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * s1 + alpha * s2
}

/// Retrieval with `(1 - alpha) cos(q1, m1) + alpha cos(q2, m2)`.
pub fn evaluate_ensemble(
    first: (ArrayView2<'_, f32>, ArrayView2<'_, f32>),
    second: (ArrayView2<'_, f32>, ArrayView2<'_, f32>),
    alpha: f64,
    spec: &PoolSpec,
) -> Result<RetrievalReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    check_pair(&first.0, &first.1)?;
    check_pair(&second.0, &second.1)?;
    if first.0.nrows() != second.0.nrows() {
        return Err(Error::shape("ensembled models must score the same corpus"));
    }
    let (q1, _) = normalize_rows(first.0);
    let (m1, _) = normalize_rows(first.1);
    let (q2, _) = normalize_rows(second.0);
    let (m2, _) = normalize_rows(second.1);
    evaluate_with(q1.nrows(), spec, None, |i, j| {
        ensemble_score(
            q1.row(i).dot(&m1.row(j)) as f64,
            q2.row(i).dot(&m2.row(j)) as f64,
            alpha,
        )
    })
}

fn check_pair(queries: &ArrayView2<'_, f32>, music: &ArrayView2<'_, f32>) -> Result<()> {
    if queries.dim() != music.dim() {
        return Err(Error::shape(format!(
            "query embeddings {:?} and music embeddings {:?} differ",
            queries.dim(),
            music.dim()
        )));
    }
    Ok(())
}

/// Query and music embeddings of a corpus under a query mode.
pub fn embed_corpus(
    model: &ViML<f32>,
    corpus: &[TriModalExample<f32>],
    mode: QueryMode,
) -> Result<(Array2<f32>, Array2<f32>)> {
    let use_video = model.config().use_video;
    match (mode, use_video) {
        (QueryMode::TextOnly, true) => {
            return Err(Error::MissingModality(
                "text_only queries need a model trained without video".into(),
            ))
        }
        (QueryMode::VideoOnly | QueryMode::VideoPlusText, false) => {
            return Err(Error::MissingModality(format!(
                "{mode} queries need a model with a video branch"
            )))
        }
        _ => {}
    }
    let rows = corpus
        .par_iter()
        .map(|ex| {
            let text = match mode {
                QueryMode::VideoOnly => None,
                QueryMode::VideoPlusText | QueryMode::TextOnly => {
                    ex.text.as_ref().map(|t| t.view())
                }
            };
            let video = if use_video {
                Some(
                    ex.video
                        .as_ref()
                        .ok_or_else(|| {
                            Error::MissingModality(format!("video for {}", ex.track_id))
                        })?
                        .view(),
                )
            } else {
                None
            };
            let q = model.query_embedding(video, text)?;
            let m = model.music_embedding(ex.music.view())?;
            Ok((q, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let d = model.config().embed_dim;
    let mut queries = Array2::zeros((corpus.len(), d));
    let mut music = Array2::zeros((corpus.len(), d));
    for (i, (q, m)) in rows.into_iter().enumerate() {
        queries.row_mut(i).assign(&q);
        music.row_mut(i).assign(&m);
    }
    Ok((queries, music))
}

/// Embeds the corpus and ranks each example's music within its pool.
pub fn evaluate(
    model: &ViML<f32>,
    corpus: &[TriModalExample<f32>],
    spec: &PoolSpec,
    mode: QueryMode,
) -> Result<RetrievalReport> {
    let (queries, music) = embed_corpus(model, corpus, mode)?;
    evaluate_embeddings(queries.view(), music.view(), spec, Some(mode))
}

/// Uniformly random unit vectors, one per row.
pub fn random_unit_embeddings<R: rand::Rng>(rng: &mut R, rows: usize, dim: usize) -> Array2<f32> {
    use rand_distr::{Distribution, StandardNormal};
    let x: Array2<f32> = Array2::from_shape_simple_fn((rows, dim), || StandardNormal.sample(rng));
    let norms = x.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    x / &norms.insert_axis(Axis(1))
}

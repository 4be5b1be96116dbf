use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Track-level evaluation pool size.
pub const TRACK_POOL_SIZE: usize = 2000;
/// Clip-level evaluation pool size.
pub const CLIP_POOL_SIZE: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub pool_size: usize,
    pub seed: u64,
}

impl PoolSpec {
    pub fn new(pool_size: usize, seed: u64) -> Self {
        Self { pool_size, seed }
    }
}

/// Candidate pool for one query: the positive `query_index` plus
/// `pool_size - 1` distinct negatives drawn uniformly from the rest of the
/// corpus, returned in ascending corpus order.
///
/// Each query draws from its own ChaCha stream, so a pool depends only on
/// `(seed, query_index)`.
pub fn build_pool(query_index: usize, corpus_size: usize, spec: &PoolSpec) -> Result<Vec<usize>> {
    if spec.pool_size == 0 {
        return Err(Error::invalid("pool_size must be positive"));
    }
    if query_index >= corpus_size {
        return Err(Error::invalid(format!(
            "query {query_index} outside corpus of {corpus_size}"
        )));
    }
    if spec.pool_size > corpus_size {
        return Err(Error::CorpusTooSmall {
            pool_size: spec.pool_size,
            corpus_size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(query_index as u64);
    let mut pool: Vec<usize> = sample(&mut rng, corpus_size - 1, spec.pool_size - 1)
        .into_iter()
        .map(|j| if j >= query_index { j + 1 } else { j })
        .collect();
    pool.push(query_index);
    pool.sort_unstable();
    Ok(pool)
}

/// 1-based rank of `scores[positive]` under a descending sort that keeps
/// tied entries in index order.
pub fn rank_of_positive(scores: &[f64], positive: usize) -> usize {
    let s = scores[positive];
    let above = scores.iter().filter(|&&x| x > s).count();
    let tied_before = scores[..positive].iter().filter(|&&x| x == s).count();
    1 + above + tied_before
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_pool_is_whole_corpus() {
        let pool = build_pool(3, 10, &PoolSpec::new(10, 1)).unwrap();
        assert_eq!(pool, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn pool_has_positive_once_and_distinct_members() {
        for q in 0..50 {
            let pool = build_pool(q, 200, &PoolSpec::new(20, 9)).unwrap();
            assert_eq!(pool.len(), 20);
            assert_eq!(pool.iter().filter(|&&i| i == q).count(), 1);
            assert!(pool.windows(2).all(|w| w[0] < w[1]));
            assert!(pool.iter().all(|&i| i < 200));
        }
    }

    #[test]
    fn pools_are_seeded_per_query() {
        let spec = PoolSpec::new(10, 4);
        assert_eq!(
            build_pool(5, 100, &spec).unwrap(),
            build_pool(5, 100, &spec).unwrap()
        );
        assert_ne!(
            build_pool(5, 100, &spec).unwrap(),
            build_pool(5, 100, &PoolSpec::new(10, 5)).unwrap()
        );
        let a: Vec<_> = build_pool(5, 100, &spec)
            .unwrap()
            .into_iter()
            .filter(|&i| i != 5)
            .collect();
        let b: Vec<_> = build_pool(6, 100, &spec)
            .unwrap()
            .into_iter()
            .filter(|&i| i != 6)
            .collect();
        assert_ne!(a, b);
    }

    #[test]
    fn pool_errors() {
        assert!(matches!(
            build_pool(0, 5, &PoolSpec::new(6, 0)),
            Err(Error::CorpusTooSmall { .. })
        ));
        assert!(build_pool(0, 5, &PoolSpec::new(0, 0)).is_err());
        assert!(build_pool(5, 5, &PoolSpec::new(2, 0)).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_of_positive(&[0.1, 0.9, 0.3], 1), 1);
        assert_eq!(rank_of_positive(&[0.5; 4], 0), 1);
        assert_eq!(rank_of_positive(&[0.5; 4], 3), 4);
        assert_eq!(rank_of_positive(&[0.9, 0.5, 0.7, 0.5], 3), 4);
        assert_eq!(rank_of_positive(&[0.9, 0.5, 0.7, 0.5], 1), 3);
    }

    #[test]
    fn rank_matches_stable_sort() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            // coarse values force ties
            let scores: Vec<f64> = (0..500)
                .map(|_| (rng.random_range(0..40) as f64) / 8.0)
                .collect();
            let pos = rng.random_range(0..500);
            let mut order: Vec<usize> = (0..500).collect();
            order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
            let expected = order.iter().position(|&i| i == pos).unwrap() + 1;
            assert_eq!(rank_of_positive(&scores, pos), expected);
        }
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PoolSpec;
use crate::error::{Error, Result};

/// The recall cut-offs reported for every evaluation.
pub const RECALL_KS: [usize; 3] = [1, 5, 10];

/// Percentage of ranks within the top `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyRanks);
    }
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(100.0 * hits as f64 / ranks.len() as f64)
}

/// Middle order statistic; the lower middle for an even count.
pub fn median_rank(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyRanks);
    }
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    Ok(sorted[(sorted.len() - 1) / 2] as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// Video with the null text feature.
    VideoOnly,
    VideoPlusText,
    /// Text alone, for models trained without video.
    TextOnly,
}

impl QueryMode {
    pub const ALL: [QueryMode; 3] = [
        QueryMode::VideoOnly,
        QueryMode::VideoPlusText,
        QueryMode::TextOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryMode::VideoOnly => "video_only",
            QueryMode::VideoPlusText => "video_plus_text",
            QueryMode::TextOnly => "text_only",
        }
    }
}

impl std::fmt::Display for QueryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QueryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QueryMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "query mode",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub pool: PoolSpec,
    /// Absent for evaluations on raw score functions.
    pub mode: Option<QueryMode>,
    pub num_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub ranks: Vec<usize>,
    /// Percent, keyed by K.
    pub recall_at: BTreeMap<usize, f64>,
    pub median_rank: f64,
    pub protocol: Protocol,
}

impl RetrievalReport {
    pub fn from_ranks(ranks: Vec<usize>, pool: PoolSpec, mode: Option<QueryMode>) -> Result<Self> {
        let mut recall_at = BTreeMap::new();
        for k in RECALL_KS {
            recall_at.insert(k, recall_at_k(&ranks, k)?);
        }
        Ok(Self {
            median_rank: median_rank(&ranks)?,
            recall_at,
            protocol: Protocol {
                pool,
                mode,
                num_queries: ranks.len(),
            },
            ranks,
        })
    }

    pub fn recall(&self, k: usize) -> f64 {
        self.recall_at
            .get(&k)
            .copied()
            .unwrap_or_else(|| recall_at_k(&self.ranks, k).expect("report has ranks"))
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

impl std::fmt::Display for RetrievalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "MR {} R@1 {:.2} R@5 {:.2} R@10 {:.2} (N={}, {} queries",
            self.median_rank,
            self.recall(1),
            self.recall(5),
            self.recall(10),
            self.protocol.pool.pool_size,
            self.protocol.num_queries
        )?;
        if let Some(mode) = self.protocol.mode {
            write!(f, ", {mode}")?;
        }
        f.write_str(")")
    }
}

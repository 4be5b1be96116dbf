use std::collections::HashSet;

use super::{TagPrediction, TagSet};

/// Confidence threshold applied to tagger output.
pub const DEFAULT_TAG_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// Keep predictions with `confidence > threshold`.
    #[default]
    Strict,
    /// Keep predictions with `confidence >= threshold`.
    Inclusive,
}

/// Keeps the predictions whose confidence is strictly above `threshold`,
/// preserving their relative order.
pub fn filter_tags(track_id: &str, predictions: &[TagPrediction], threshold: f64) -> TagSet {
    filter_tags_with(track_id, predictions, threshold, ThresholdRule::Strict)
}

/// Like [`filter_tags`] with an explicit comparison rule. Predictions with a
/// non-finite confidence never pass; a tag repeated in the input keeps only its
/// first surviving occurrence.
pub fn filter_tags_with(
    track_id: &str,
    predictions: &[TagPrediction],
    threshold: f64,
    rule: ThresholdRule,
) -> TagSet {
    let mut seen = HashSet::new();
    let kept = predictions
        .iter()
        .filter(|p| match rule {
            ThresholdRule::Strict => p.confidence > threshold,
            ThresholdRule::Inclusive => p.confidence >= threshold,
        })
        .filter(|p| p.confidence.is_finite())
        .filter(|p| seen.insert(p.tag.clone()))
        .cloned()
        .collect();
    TagSet {
        track_id: track_id.to_string(),
        predictions: kept,
    }
}

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::features::{
    FeatureStore, Modality, PrecomputedTextFeatures, SyntheticSpec, SyntheticTextEncoder,
    TextEncoder,
};
use crate::model::TriModalExample;
use crate::tagtext::TextRecord;

use super::TextSource;

/// The text encoder matching a store: the synthetic encoder when the store
/// was generated synthetically, otherwise a lookup of each record's text to
/// its track's stored text feature.
pub fn text_encoder_for_store(
    store: &FeatureStore,
    records: &[TextRecord],
) -> Result<Box<dyn TextEncoder>> {
    if let Some(spec) = store.metadata().get("synthetic") {
        let spec: SyntheticSpec = serde_json::from_value(spec.clone())
            .map_err(|e| Error::CorruptStore(format!("synthetic metadata: {e}")))?;
        return Ok(Box::new(SyntheticTextEncoder::new(&spec)));
    }
    let dim = store.dim(Modality::Text).ok_or_else(|| {
        Error::MissingModality("store has no text features and no text encoder".into())
    })?;
    let mut table = PrecomputedTextFeatures::new(dim);
    for r in records {
        if !r.text.trim().is_empty() && store.contains(&r.track_id, Modality::Text) {
            let f = store.load(&r.track_id, Modality::Text)?.into_features();
            table.insert(r.text.clone(), f.row(0).to_owned());
        }
    }
    Ok(Box::new(table))
}

/// Builds one example per record, in record order.
///
/// `human` uses the store's text features, the synthesised sources encode the
/// record text, and `none` leaves every text empty. Video is loaded only when
/// `use_video` is set.
pub fn load_corpus(
    store: &FeatureStore,
    records: &[TextRecord],
    source: TextSource,
    use_video: bool,
) -> Result<Vec<TriModalExample<f32>>> {
    let encoder = match source {
        TextSource::Tags | TextSource::Data2text | TextSource::Prompt2text => {
            Some(text_encoder_for_store(store, records)?)
        }
        TextSource::Human | TextSource::None => None,
    };
    load_corpus_with(store, records, source, use_video, encoder.as_deref())
}

pub fn load_corpus_with(
    store: &FeatureStore,
    records: &[TextRecord],
    source: TextSource,
    use_video: bool,
    encoder: Option<&dyn TextEncoder>,
) -> Result<Vec<TriModalExample<f32>>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut seen = HashSet::new();
    let mut corpus = Vec::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.track_id.as_str()) {
            return Err(Error::invalid(format!(
                "duplicate record for track {}",
                r.track_id
            )));
        }
        let load = |m: Modality| -> Result<_> {
            if !store.contains(&r.track_id, m) {
                return Err(Error::MissingModality(format!(
                    "{m} features for {}",
                    r.track_id
                )));
            }
            Ok(store.load(&r.track_id, m)?.into_features())
        };
        let text = match source {
            TextSource::None => None,
            TextSource::Human => {
                if store.contains(&r.track_id, Modality::Text) {
                    Some(load(Modality::Text)?.row(0).to_owned())
                } else {
                    None
                }
            }
            _ => {
                let encoder = encoder.ok_or_else(|| {
                    Error::invalid(format!("text source {source} needs a text encoder"))
                })?;
                encoder.encode(&r.text)
            }
        };
        corpus.push(TriModalExample {
            track_id: r.track_id.clone(),
            video: if use_video {
                Some(load(Modality::Video)?)
            } else {
                None
            },
            music: load(Modality::Music)?,
            text,
        });
    }
    Ok(corpus)
}

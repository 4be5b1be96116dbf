use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AnalogyExample, TagPrediction, TagSet};
use crate::error::{Error, Result};

/// One line of a tags/text JSON-lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRecord {
    pub track_id: String,
    pub tags: Vec<TagPrediction>,
    #[serde(default)]
    pub text: String,
}

impl TextRecord {
    pub fn tag_set(&self) -> Result<TagSet> {
        TagSet::new(self.track_id.clone(), self.tags.clone())
    }
}

/// One human-written analogy example: `{tags, description}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub tags: Vec<TagPrediction>,
    pub description: String,
}

impl TryFrom<ExampleRecord> for AnalogyExample {
    type Error = Error;

    fn try_from(r: ExampleRecord) -> Result<Self> {
        AnalogyExample::new(TagSet::new("example", r.tags)?, r.description)
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), lineno + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

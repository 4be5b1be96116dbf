use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tensor_file::{self, TensorFileError};
use super::{BaseFeatureSequence, Modality};
use crate::error::{Error, Result};

pub const STORE_VERSION: &str = "1";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub track_id: String,
    pub modality: Modality,
    /// Path relative to the store root.
    pub file: String,
    pub n: usize,
    pub d: usize,
    pub segment_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub entries: Vec<ManifestEntry>,
    /// Free-form metadata, e.g. the synthetic generator settings or the
    /// music segment hop of a precomputed extractor.
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

/// An on-disk collection of base features laid out as
/// `<root>/manifest.json` plus `<root>/<modality>/<track_id>.feat`.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    root: PathBuf,
    manifest: Manifest,
    index: BTreeMap<(Modality, String), usize>,
}

fn check_track_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "track id `{id}` must be non-empty and use only [A-Za-z0-9._-]"
        )))
    }
}

pub fn write_store(
    sequences: &[BaseFeatureSequence],
    root: &Path,
    metadata: serde_json::Map<String, serde_json::Value>,
) -> Result<FeatureStore> {
    let mut seen = HashSet::new();
    let mut dims: BTreeMap<Modality, usize> = BTreeMap::new();
    for seq in sequences {
        check_track_id(seq.track_id())?;
        if !seen.insert((seq.modality(), seq.track_id().to_string())) {
            return Err(Error::invalid(format!(
                "duplicate {} sequence for track `{}`",
                seq.modality(),
                seq.track_id()
            )));
        }
        let d = *dims.entry(seq.modality()).or_insert(seq.dim());
        if d != seq.dim() {
            return Err(Error::shape(format!(
                "{} features for `{}` have d={} but the store uses d={d}",
                seq.modality(),
                seq.track_id(),
                seq.dim()
            )));
        }
    }

    fs::create_dir_all(root)?;
    let mut entries = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let dir = root.join(seq.modality().as_str());
        fs::create_dir_all(&dir)?;
        let rel = format!("{}/{}.feat", seq.modality(), seq.track_id());
        tensor_file::write(&root.join(&rel), seq.features()).map_err(|e| match e {
            TensorFileError::Io(io) => Error::Io(io),
            TensorFileError::Malformed(m) => Error::CorruptStore(m),
        })?;
        entries.push(ManifestEntry {
            track_id: seq.track_id().to_string(),
            modality: seq.modality(),
            file: rel,
            n: seq.len(),
            d: seq.dim(),
            segment_seconds: seq.segment_seconds(),
        });
    }
    let manifest = Manifest {
        version: STORE_VERSION.to_string(),
        entries,
        metadata,
    };
    fs::write(
        root.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    FeatureStore::from_manifest(root.to_path_buf(), manifest)
}

/// Opens a store and checks that every manifest entry resolves to a file
/// whose header matches the recorded shape.
pub fn read_store(root: &Path) -> Result<FeatureStore> {
    let manifest_path = root.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(Error::IncompleteStore(manifest_path));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
        .map_err(|e| Error::CorruptStore(format!("manifest: {e}")))?;
    if manifest.version != STORE_VERSION {
        return Err(Error::CorruptStore(format!(
            "unsupported store version `{}`",
            manifest.version
        )));
    }
    let store = FeatureStore::from_manifest(root.to_path_buf(), manifest)?;
    for entry in &store.manifest.entries {
        store.read_entry(entry)?;
    }
    Ok(store)
}

impl FeatureStore {
    fn from_manifest(root: PathBuf, manifest: Manifest) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut dims: BTreeMap<Modality, usize> = BTreeMap::new();
        for (i, e) in manifest.entries.iter().enumerate() {
            check_track_id(&e.track_id).map_err(|err| Error::CorruptStore(err.to_string()))?;
            if index.insert((e.modality, e.track_id.clone()), i).is_some() {
                return Err(Error::CorruptStore(format!(
                    "duplicate {} entry for `{}`",
                    e.modality, e.track_id
                )));
            }
            if *dims.entry(e.modality).or_insert(e.d) != e.d {
                return Err(Error::CorruptStore(format!(
                    "inconsistent {} dimension at `{}`",
                    e.modality, e.track_id
                )));
            }
        }
        Ok(Self {
            root,
            manifest,
            index,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn version(&self) -> &str {
        &self.manifest.version
    }

    pub fn metadata(&self) -> &serde_json::Map<String, serde_json::Value> {
        &self.manifest.metadata
    }

    pub fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.entries.is_empty()
    }

    pub fn contains(&self, track_id: &str, modality: Modality) -> bool {
        self.index.contains_key(&(modality, track_id.to_string()))
    }

    /// Track ids holding the given modality, in manifest order.
    pub fn track_ids(&self, modality: Modality) -> Vec<&str> {
        self.manifest
            .entries
            .iter()
            .filter(|e| e.modality == modality)
            .map(|e| e.track_id.as_str())
            .collect()
    }

    /// Feature dimension of a modality, if any sequence of it is stored.
    pub fn dim(&self, modality: Modality) -> Option<usize> {
        self.manifest
            .entries
            .iter()
            .find(|e| e.modality == modality)
            .map(|e| e.d)
    }

    pub fn load(&self, track_id: &str, modality: Modality) -> Result<BaseFeatureSequence> {
        let i = self
            .index
            .get(&(modality, track_id.to_string()))
            .ok_or_else(|| Error::MissingModality(format!("{modality} for track `{track_id}`")))?;
        self.read_entry(&self.manifest.entries[*i])
    }

    fn read_entry(&self, entry: &ManifestEntry) -> Result<BaseFeatureSequence> {
        let path = self.root.join(&entry.file);
        if !path.exists() {
            return Err(Error::IncompleteStore(path));
        }
        let matrix = tensor_file::read(&path).map_err(|e| match e {
            TensorFileError::Io(io) => Error::Io(io),
            TensorFileError::Malformed(m) => Error::CorruptStore(format!("{}: {m}", entry.file)),
        })?;
        if matrix.dim() != (entry.n, entry.d) {
            return Err(Error::CorruptStore(format!(
                "{}: manifest says {}x{} but file holds {}x{}",
                entry.file,
                entry.n,
                entry.d,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        BaseFeatureSequence::new(
            entry.track_id.clone(),
            entry.modality,
            matrix,
            entry.segment_seconds,
        )
        .map_err(|e| Error::CorruptStore(format!("{}: {e}", entry.file)))
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{load_embeddings, load_labels, save_array, EmbeddingMatrix, LabelVector};
use crate::error::{Error, Result};

/// On-disk manifest. Paths are resolved relative to the manifest's folder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub embeddings: PathBuf,
    /// Stream name to label file, in file order.
    pub labels: Map<String, Value>,
    #[serde(default)]
    pub metadata: Map<String, Value>,
}

/// One (dataset, encoder) evaluation unit.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub name: String,
    pub embeddings: EmbeddingMatrix,
    pub label_streams: Vec<LabelVector>,
    pub metadata: Map<String, Value>,
}

impl DatasetBundle {
    pub fn new(
        name: impl Into<String>,
        embeddings: EmbeddingMatrix,
        label_streams: Vec<LabelVector>,
    ) -> Result<Self> {
        let bundle = Self {
            name: name.into(),
            embeddings,
            label_streams,
            metadata: Map::new(),
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_streams.is_empty() {
            return Err(Error::Validation(format!(
                "bundle '{}' has no label streams",
                self.name
            )));
        }
        let n = self.embeddings.n_samples();
        for s in &self.label_streams {
            if s.len() != n {
                return Err(Error::Validation(format!(
                    "label stream '{}' has {} entries but bundle '{}' has {} samples",
                    s.stream_name(),
                    s.len(),
                    self.name,
                    n
                )));
            }
        }
        Ok(())
    }

    /// The named stream, or the first one when `name` is `None`.
    pub fn stream(&self, name: Option<&str>) -> Result<&LabelVector> {
        match name {
            None => Ok(&self.label_streams[0]),
            Some(n) => self
                .label_streams
                .iter()
                .find(|s| s.stream_name() == n)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "bundle '{}' has no label stream '{}'",
                        self.name, n
                    ))
                }),
        }
    }
}

pub fn load_bundle(manifest_path: impl AsRef<Path>) -> Result<DatasetBundle> {
    let manifest_path = manifest_path.as_ref();
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {}", manifest_path.display(), e)))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let embeddings = load_embeddings(base.join(&manifest.embeddings))?;
    let mut streams = Vec::with_capacity(manifest.labels.len());
    for (stream, path) in &manifest.labels {
        let rel = path.as_str().ok_or_else(|| {
            Error::Format(format!("label stream '{}' path must be a string", stream))
        })?;
        let labels = load_labels(base.join(rel))?.with_stream_name(stream.clone());
        streams.push(labels);
    }
    let bundle = DatasetBundle {
        name: manifest.name,
        embeddings,
        label_streams: streams,
        metadata: manifest.metadata,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Writes `embeddings.npy`, one `labels_<stream>.npy` per stream and
/// `manifest.json` into `dir`; returns the manifest path.
pub fn save_bundle(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_array(&bundle.embeddings, dir.join("embeddings.npy"))?;
    let mut labels = Map::new();
    for s in &bundle.label_streams {
        let file = format!("labels_{}.npy", s.stream_name());
        save_array(s, dir.join(&file))?;
        labels.insert(s.stream_name().to_string(), Value::String(file));
    }
    let manifest = Manifest {
        name: bundle.name.clone(),
        embeddings: PathBuf::from("embeddings.npy"),
        labels,
        metadata: bundle.metadata.clone(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

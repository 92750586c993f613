//! Data model and file I/O: embeddings, label streams, cluster
//! assignments, dataset bundles, pipeline configs and run results.

mod bundle;
mod config;
pub mod npy;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bundle::{load_bundle, save_bundle, DatasetBundle, Manifest};
pub use config::{NoisePolicy, PipelineConfig, RunResult};

/// Label id reserved for samples a clusterer leaves unassigned.
pub const NOISE: i64 = -1;

/// Row-major `n_samples x n_dims` matrix of finite `f32` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_samples: usize,
    n_dims: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(n_samples: usize, n_dims: usize, data: Vec<f32>) -> Result<Self> {
        if n_samples == 0 || n_dims == 0 {
            return Err(Error::Validation(format!(
                "embedding matrix must be non-empty, got {}x{}",
                n_samples, n_dims
            )));
        }
        if data.len() != n_samples * n_dims {
            return Err(Error::Validation(format!(
                "{}x{} matrix needs {} values, got {}",
                n_samples,
                n_dims,
                n_samples * n_dims,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at row {}, column {}",
                i / n_dims,
                i % n_dims
            )));
        }
        Ok(Self {
            n_samples,
            n_dims,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let n_dims = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_dims);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_dims {
                return Err(Error::Validation(format!(
                    "row {} has {} columns, expected {}",
                    i,
                    r.len(),
                    n_dims
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), n_dims, data)
    }

    /// Builds a matrix from `f64` values, rounding to `f32`.
    pub fn from_f64(n_samples: usize, n_dims: usize, data: &[f64]) -> Result<Self> {
        Self::new(n_samples, n_dims, data.iter().map(|&v| v as f32).collect())
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.n_dims)
    }

    /// Copy of the data widened to `f64`, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Matrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.n_dims);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.n_dims, data)
    }
}

/// One ground-truth annotation stream: non-negative class ids per sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<i64>,
    stream_name: String,
}

impl LabelVector {
    pub fn new(labels: Vec<i64>, stream_name: impl Into<String>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&l| l < 0) {
            return Err(Error::Validation(format!(
                "negative label {} at index {}",
                labels[i], i
            )));
        }
        Ok(Self {
            labels,
            stream_name: stream_name.into(),
        })
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn stream_name(&self) -> &str {
        &self.stream_name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of distinct classes.
    pub fn n_classes(&self) -> usize {
        let mut seen: Vec<i64> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn with_stream_name(mut self, name: impl Into<String>) -> Self {
        self.stream_name = name.into();
        self
    }
}

/// Predicted partition. Non-noise ids are dense in `0..n_clusters`;
/// [`NOISE`] marks unassigned samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<i64>,
    n_clusters: usize,
}

impl ClusterAssignment {
    /// Builds an assignment from arbitrary ids, renumbering non-noise ids
    /// densely in order of first appearance. Any negative id counts as noise.
    pub fn from_labels(raw: &[i64]) -> Self {
        let labels = canonicalize_ids(raw);
        let n_clusters = labels
            .iter()
            .filter(|&&l| l >= 0)
            .max()
            .map_or(0, |&m| m as usize + 1);
        Self { labels, n_clusters }
    }

    pub fn from_usize(raw: &[usize]) -> Self {
        let ids: Vec<i64> = raw.iter().map(|&l| l as i64).collect();
        Self::from_labels(&ids)
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Share of samples placed into a cluster.
    pub fn clustered_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        1.0 - self.n_noise() as f64 / self.labels.len() as f64
    }

    /// Cluster sizes indexed by cluster id (noise excluded).
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_clusters];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }
}

impl From<&LabelVector> for ClusterAssignment {
    fn from(v: &LabelVector) -> Self {
        ClusterAssignment::from_labels(v.labels())
    }
}

fn canonicalize_ids(raw: &[i64]) -> Vec<i64> {
    let mut map: HashMap<i64, i64> = HashMap::new();
    raw.iter()
        .map(|&l| {
            if l < 0 {
                NOISE
            } else {
                let next = map.len() as i64;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

/// Remaps labels to `0..K` in order of first appearance; noise stays `-1`.
pub fn canonicalize_labels(v: &LabelVector) -> LabelVector {
    LabelVector {
        labels: canonicalize_ids(&v.labels),
        stream_name: v.stream_name.clone(),
    }
}

/// Any array the toolkit reads from NPY.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedArray {
    Embeddings(EmbeddingMatrix),
    Labels(LabelVector),
}

/// Reads an NPY file: 2-D `<f4` becomes an [`EmbeddingMatrix`], 1-D `<i8`
/// a [`LabelVector`] named after the file stem.
pub fn load_array(path: impl AsRef<Path>) -> Result<LoadedArray> {
    let path = path.as_ref();
    let raw = npy::read_file(path)?;
    match (raw.dtype, raw.shape.as_slice()) {
        (npy::Dtype::F32, &[n, d]) => Ok(LoadedArray::Embeddings(EmbeddingMatrix::new(
            n,
            d,
            raw.as_f32(),
        )?)),
        (npy::Dtype::I64, &[_]) => {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(LoadedArray::Labels(LabelVector::new(raw.as_i64(), name)?))
        }
        (dtype, shape) => Err(Error::Format(format!(
            "expected 2-D <f4 or 1-D <i8, found {:?} with shape {:?}",
            dtype, shape
        ))),
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    match load_array(path.as_ref())? {
        LoadedArray::Embeddings(m) => Ok(m),
        LoadedArray::Labels(_) => Err(Error::Format(format!(
            "{} holds labels, expected a 2-D float32 matrix",
            path.as_ref().display()
        ))),
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    match load_array(path.as_ref())? {
        LoadedArray::Labels(l) => Ok(l),
        LoadedArray::Embeddings(_) => Err(Error::Format(format!(
            "{} holds a matrix, expected a 1-D int64 vector",
            path.as_ref().display()
        ))),
    }
}

/// Reads a cluster assignment written by [`save_array`]; `-1` is noise.
pub fn load_assignment(path: impl AsRef<Path>) -> Result<ClusterAssignment> {
    let raw = npy::read_file(path.as_ref())?;
    match (raw.dtype, raw.shape.as_slice()) {
        (npy::Dtype::I64, &[_]) => {
            let ids = raw.as_i64();
            if let Some(bad) = ids.iter().find(|&&l| l < NOISE) {
                return Err(Error::Validation(format!(
                    "cluster id {} below the noise sentinel",
                    bad
                )));
            }
            Ok(ClusterAssignment::from_labels(&ids))
        }
        (dtype, shape) => Err(Error::Format(format!(
            "expected 1-D <i8 assignment, found {:?} with shape {:?}",
            dtype, shape
        ))),
    }
}

/// Values that serialize to an NPY file.
pub trait NpyArray {
    fn npy_parts(&self) -> Result<(npy::Dtype, Vec<usize>, Vec<u8>)>;
}

impl NpyArray for EmbeddingMatrix {
    fn npy_parts(&self) -> Result<(npy::Dtype, Vec<usize>, Vec<u8>)> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at flat index {}",
                i
            )));
        }
        let bytes = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        Ok((npy::Dtype::F32, vec![self.n_samples, self.n_dims], bytes))
    }
}

impl NpyArray for LabelVector {
    fn npy_parts(&self) -> Result<(npy::Dtype, Vec<usize>, Vec<u8>)> {
        let bytes = self.labels.iter().flat_map(|v| v.to_le_bytes()).collect();
        Ok((npy::Dtype::I64, vec![self.labels.len()], bytes))
    }
}

impl NpyArray for ClusterAssignment {
    fn npy_parts(&self) -> Result<(npy::Dtype, Vec<usize>, Vec<u8>)> {
        let bytes = self.labels.iter().flat_map(|v| v.to_le_bytes()).collect();
        Ok((npy::Dtype::I64, vec![self.labels.len()], bytes))
    }
}

pub fn save_array<T: NpyArray + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let (dtype, shape, bytes) = value.npy_parts()?;
    npy::write_file(path.as_ref(), dtype, &shape, &bytes)
}

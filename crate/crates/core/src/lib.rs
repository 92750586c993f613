//! Clustering pretrained embeddings: data types, metrics, dimensionality
//! reduction and the clustering algorithms.

pub mod cluster;
pub mod distance;
pub mod embedspace;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod reduce;

pub use error::{Error, Result};

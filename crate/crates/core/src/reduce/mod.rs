//! Dimensionality reduction and standardization applied before clustering.

mod pca;
mod standardize;
pub mod umap;

use serde::{Deserialize, Serialize};

pub use pca::{pca_fit, pca_transform, PcaModel, PcaTarget};
pub use standardize::{standardize_for_threshold, zscore};
pub use umap::{umap_embed, UmapParams};

use crate::embedspace::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Reduction step of a pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReductionSpec {
    None,
    #[serde(alias = "z_score", alias = "zscore_only", alias = "z_score_only")]
    Zscore,
    /// z-score followed by PCA, `{"kind":"pca","dims":200}` or
    /// `{"kind":"pca","variance_fraction":0.9}`.
    Pca {
        #[serde(flatten)]
        target: PcaTarget,
    },
    Umap(UmapParams),
}

impl ReductionSpec {
    pub fn pca_dims(k: usize) -> Self {
        ReductionSpec::Pca {
            target: PcaTarget::Dims(k),
        }
    }

    pub fn pca_variance(v: f64) -> Self {
        ReductionSpec::Pca {
            target: PcaTarget::VarianceFraction(v),
        }
    }

    pub fn umap(out_dims: usize) -> Self {
        ReductionSpec::Umap(UmapParams {
            out_dims,
            ..Default::default()
        })
    }

    /// Checks parameters that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        match self {
            ReductionSpec::None | ReductionSpec::Zscore => Ok(()),
            ReductionSpec::Pca { target } => match *target {
                PcaTarget::Dims(0) => Err(Error::Config("PCA dims must be >= 1".into())),
                PcaTarget::VarianceFraction(v) if !(v > 0.0 && v <= 1.0) => Err(Error::Config(
                    format!("PCA variance_fraction {v} outside (0, 1]"),
                )),
                _ => Ok(()),
            },
            ReductionSpec::Umap(p) => p.validate(),
        }
    }

    /// Fits the reduction on `x` and returns the transformed samples.
    pub fn apply(&self, x: &EmbeddingMatrix, seed: u64) -> Result<EmbeddingMatrix> {
        self.validate()?;
        match self {
            ReductionSpec::None => Ok(x.clone()),
            ReductionSpec::Zscore => Ok(zscore(x)),
            ReductionSpec::Pca { target } => {
                let model = pca_fit(x, *target)?;
                pca_transform(&model, x)
            }
            ReductionSpec::Umap(p) => umap_embed(x, p, seed),
        }
    }
}

impl std::fmt::Display for ReductionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReductionSpec::None => write!(f, "none"),
            ReductionSpec::Zscore => write!(f, "zscore"),
            ReductionSpec::Pca {
                target: PcaTarget::Dims(k),
            } => write!(f, "pca({k})"),
            ReductionSpec::Pca {
                target: PcaTarget::VarianceFraction(v),
            } => write!(f, "pca({:.0}%)", v * 100.0),
            ReductionSpec::Umap(p) => write!(f, "umap({})", p.out_dims),
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::cluster::ClustererSpec;
use crate::error::Result;
use crate::reduce::ReductionSpec;

/// How HDBSCAN's noise samples enter the label-agreement metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePolicy {
    /// All noise samples form one extra predicted cluster.
    #[default]
    NoiseAsCluster,
    /// Noise samples are dropped before counting.
    ExcludeNoise,
}

/// One (reduction, clusterer, seed) cell of a parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub reduction: ReductionSpec,
    pub clusterer: ClustererSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub noise_policy: NoisePolicy,
}

fn default_seed() -> u64 {
    1
}

impl PipelineConfig {
    pub fn new(reduction: ReductionSpec, clusterer: ClustererSpec) -> Self {
        Self {
            reduction,
            clusterer,
            seed: default_seed(),
            noise_policy: NoisePolicy::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.reduction.validate()?;
        self.clusterer.validate()
    }
}

/// Scores and bookkeeping for one pipeline execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// AMI under the configured noise policy.
    pub ami: f64,
    pub nmi: f64,
    pub ari: f64,
    /// AMI with noise samples excluded; present when the assignment has noise.
    pub ami_excluding_noise: Option<f64>,
    pub silhouette_original: Option<f64>,
    pub silhouette_reduced: Option<f64>,
    pub n_clusters_pred: usize,
    pub clustered_fraction: f64,
    pub wall_time: f64,
    /// False when an iterative clusterer stopped at its iteration cap.
    pub converged: bool,
}

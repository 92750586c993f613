use std::time::Instant;

use embclust_core::cluster::run_clusterer;
use embclust_core::distance::Metric;
use embclust_core::embedspace::{
    ClusterAssignment, DatasetBundle, EmbeddingMatrix, NoisePolicy, PipelineConfig, RunResult,
};
use embclust_core::metrics::{ami, ari, nmi, silhouette_with, SilhouetteOptions};
use embclust_core::reduce::standardize_for_threshold;

use crate::error::Result;

/// Per-run knobs that are not part of the pipeline config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Label stream to score against; the bundle's first stream when `None`.
    pub stream: Option<String>,
    /// Cap on the samples used for each silhouette; all samples when `None`.
    pub silhouette_subsample: Option<usize>,
    /// Skip both silhouettes.
    pub skip_silhouette: bool,
}

/// Scores plus the predicted labels of one run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub result: RunResult,
    pub assignment: ClusterAssignment,
}

/// Reduces, clusters and scores one bundle under one config.
pub fn run_pipeline(
    bundle: &DatasetBundle,
    config: &PipelineConfig,
    opts: &RunOptions,
) -> Result<PipelineOutput> {
    run_pipeline_with(bundle, config, opts, None)
}

/// As [`run_pipeline`], reusing `reduced` when the caller already applied
/// `config.reduction` with `config.seed`.
pub fn run_pipeline_with(
    bundle: &DatasetBundle,
    config: &PipelineConfig,
    opts: &RunOptions,
    reduced: Option<&EmbeddingMatrix>,
) -> Result<PipelineOutput> {
    config.validate()?;
    let start = Instant::now();
    let truth = bundle.stream(opts.stream.as_deref())?;
    let clusterer = config.clusterer.resolve_auto(truth.n_classes());

    let owned;
    let reduced = match reduced {
        Some(r) => r,
        None => {
            owned = config.reduction.apply(&bundle.embeddings, config.seed)?;
            &owned
        }
    };
    let standardized;
    let cluster_input = match clusterer.threshold_metric() {
        Some(metric) => {
            standardized = standardize_for_threshold(reduced, metric)?;
            &standardized
        }
        None => reduced,
    };
    let outcome = run_clusterer(&clusterer, cluster_input, config.seed)?;
    let assignment = outcome.assignment;
    let pred = assignment.labels();
    let labels = truth.labels();

    let policy = config.noise_policy;
    let result_ami = ami(labels, pred, policy)?;
    let result_nmi = nmi(labels, pred, policy)?;
    let result_ari = ari(labels, pred, policy)?;
    let ami_excluding_noise = if assignment.n_noise() > 0 {
        ami(labels, pred, NoisePolicy::ExcludeNoise).ok()
    } else {
        None
    };
    let (silhouette_original, silhouette_reduced) = if opts.skip_silhouette {
        (None, None)
    } else {
        let sil = |x: &EmbeddingMatrix| {
            let o = SilhouetteOptions {
                metric: Metric::L2,
                max_samples: opts.silhouette_subsample,
                seed: config.seed,
            };
            silhouette_with(x, pred, &o).ok()
        };
        (sil(&bundle.embeddings), sil(reduced))
    };

    let result = RunResult {
        ami: result_ami,
        nmi: result_nmi,
        ari: result_ari,
        ami_excluding_noise,
        silhouette_original,
        silhouette_reduced,
        n_clusters_pred: assignment.n_clusters(),
        clustered_fraction: assignment.clustered_fraction(),
        wall_time: start.elapsed().as_secs_f64(),
        converged: outcome.converged,
    };
    Ok(PipelineOutput { result, assignment })
}

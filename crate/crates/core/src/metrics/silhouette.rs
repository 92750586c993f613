use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distance::{check_metric_input, Metric};
use crate::embedspace::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Silhouette evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilhouetteOptions {
    pub metric: Metric,
    /// When set and the number of clustered samples exceeds it, score a
    /// seeded uniform subsample of this size instead.
    pub max_samples: Option<usize>,
    pub seed: u64,
}

impl Default for SilhouetteOptions {
    fn default() -> Self {
        Self {
            metric: Metric::L2,
            max_samples: None,
            seed: 0,
        }
    }
}

/// Mean silhouette over non-noise samples. Singleton-cluster samples score 0.
pub fn silhouette(x: &EmbeddingMatrix, labels: &[i64], metric: Metric) -> Result<f64> {
    silhouette_with(
        x,
        labels,
        &SilhouetteOptions {
            metric,
            ..Default::default()
        },
    )
}

pub fn silhouette_with(
    x: &EmbeddingMatrix,
    labels: &[i64],
    opts: &SilhouetteOptions,
) -> Result<f64> {
    if labels.len() != x.n_samples() {
        return Err(Error::Validation(format!(
            "{} labels for {} samples",
            labels.len(),
            x.n_samples()
        )));
    }
    let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] >= 0).collect();
    if let Some(m) = opts.max_samples {
        if members.len() > m {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut picked: Vec<usize> = sample(&mut rng, members.len(), m)
                .into_iter()
                .map(|k| members[k])
                .collect();
            picked.sort_unstable();
            members = picked;
        }
    }
    // dense cluster ids over the scored samples
    let mut ids = std::collections::HashMap::new();
    let cl: Vec<usize> = members
        .iter()
        .map(|&i| {
            let next = ids.len();
            *ids.entry(labels[i]).or_insert(next)
        })
        .collect();
    let k = ids.len();
    if k < 2 {
        return Err(Error::Degenerate(format!(
            "silhouette needs at least 2 clusters, found {}",
            k
        )));
    }
    check_metric_input(x, opts.metric)?;
    let mut sizes = vec![0usize; k];
    for &c in &cl {
        sizes[c] += 1;
    }
    let scores: Vec<f64> = (0..members.len())
        .into_par_iter()
        .map(|a| {
            let own = cl[a];
            if sizes[own] == 1 {
                return 0.0;
            }
            let xa = x.row(members[a]);
            let mut sums = vec![0.0f64; k];
            for (b, &mb) in members.iter().enumerate() {
                if b != a {
                    sums[cl[b]] += opts.metric.distance(xa, x.row(mb));
                }
            }
            let intra = sums[own] / (sizes[own] - 1) as f64;
            let inter = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = intra.max(inter);
            if denom > 0.0 {
                (inter - intra) / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

//! Distance metrics shared by the clusterers, silhouette and reducers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedspace::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Metric {
    #[serde(alias = "l1", alias = "manhattan", alias = "cityblock")]
    L1,
    #[default]
    #[serde(alias = "l2", alias = "euclidean")]
    L2,
    #[serde(alias = "L∞", alias = "linf", alias = "LInf", alias = "chebyshev")]
    Linf,
    #[serde(rename = "cosine", alias = "Cosine")]
    Cosine,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f32], b: &[f32]) -> f64 {
        match self {
            Metric::L1 => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x as f64 - y as f64).abs())
                .sum(),
            Metric::L2 => sq_euclidean(a, b).sqrt(),
            Metric::Linf => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x as f64 - y as f64).abs())
                .fold(0.0, f64::max),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
                for (&x, &y) in a.iter().zip(b) {
                    let (x, y) = (x as f64, y as f64);
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                (1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0)
            }
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::L1 => "L1",
            Metric::L2 => "L2",
            Metric::Linf => "Linf",
            Metric::Cosine => "cosine",
        })
    }
}

#[inline]
pub fn sq_euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Errors when `metric` is cosine and some row has zero norm.
pub fn check_metric_input(x: &EmbeddingMatrix, metric: Metric) -> Result<()> {
    if metric == Metric::Cosine {
        if let Some(i) = x.rows().position(|r| r.iter().all(|&v| v == 0.0)) {
            return Err(Error::Degenerate(format!(
                "row {} has zero norm, cosine distance undefined",
                i
            )));
        }
    }
    Ok(())
}

/// Dense symmetric `n x n` distance matrix, row-major.
pub fn pairwise(x: &EmbeddingMatrix, metric: Metric) -> Vec<f64> {
    let n = x.n_samples();
    let mut out = vec![0.0f64; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = x.row(i);
        for (j, slot) in row.iter_mut().enumerate() {
            if j != i {
                *slot = metric.distance(xi, x.row(j));
            }
        }
    });
    out
}

/// For every row, the indices and distances of its `k` nearest other rows,
/// ascending by distance (ties by index).
pub fn knn(x: &EmbeddingMatrix, k: usize, metric: Metric) -> Vec<Vec<(usize, f64)>> {
    let n = x.n_samples();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut d: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, metric.distance(xi, x.row(j))))
                .collect();
            let k = k.min(d.len());
            if k < d.len() {
                d.select_nth_unstable_by(k, cmp_dist);
                d.truncate(k);
            }
            d.sort_by(cmp_dist);
            d
        })
        .collect()
}

#[inline]
fn cmp_dist(a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

//! Fuzzy simplicial set construction: exact kNN, smooth-kNN calibration and
//! probabilistic union.

use rayon::prelude::*;

use crate::distance::{knn, Metric};
use crate::embedspace::EmbeddingMatrix;
use crate::linalg::Csr;

const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const MIN_K_DIST_SCALE: f64 = 1e-3;
const BINARY_SEARCH_STEPS: usize = 64;

/// Per-point `(rho, sigma)` such that
/// `sum_j exp(-max(d_j - rho, 0) / sigma) = log2(k)` over the `k - 1`
/// non-self neighbours.
pub fn smooth_knn_dist(neighbor_dists: &[Vec<f64>], k: usize) -> Vec<(f64, f64)> {
    let target = (k as f64).log2();
    let mean_all: f64 = {
        let (s, c) = neighbor_dists
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
        if c > 0 {
            s / c as f64
        } else {
            0.0
        }
    };
    neighbor_dists
        .par_iter()
        .map(|dists| {
            let rho = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
            let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
            for _ in 0..BINARY_SEARCH_STEPS {
                let psum: f64 = dists
                    .iter()
                    .map(|&d| {
                        let g = d - rho;
                        if g > 0.0 {
                            (-g / mid).exp()
                        } else {
                            1.0
                        }
                    })
                    .sum();
                if (psum - target).abs() < SMOOTH_K_TOLERANCE {
                    break;
                }
                if psum > target {
                    hi = mid;
                    mid = (lo + hi) / 2.0;
                } else {
                    lo = mid;
                    if hi.is_infinite() {
                        mid *= 2.0;
                    } else {
                        mid = (lo + hi) / 2.0;
                    }
                }
            }
            let mean_i = if dists.is_empty() {
                0.0
            } else {
                dists.iter().sum::<f64>() / dists.len() as f64
            };
            let floor = if rho > 0.0 { mean_i } else { mean_all } * MIN_K_DIST_SCALE;
            (rho, mid.max(floor))
        })
        .collect()
}

/// Symmetric fuzzy graph `A + A^T - A∘A^T` over `n_neighbors`-NN
/// (self counted as the first neighbour).
pub fn fuzzy_graph(x: &EmbeddingMatrix, n_neighbors: usize) -> Csr {
    let n = x.n_samples();
    let nn = knn(x, n_neighbors - 1, Metric::L2);
    let dists: Vec<Vec<f64>> = nn
        .iter()
        .map(|r| r.iter().map(|&(_, d)| d).collect())
        .collect();
    let calib = smooth_knn_dist(&dists, n_neighbors);

    let mut directed = Vec::with_capacity(n * (n_neighbors - 1));
    for (i, row) in nn.iter().enumerate() {
        let (rho, sigma) = calib[i];
        for &(j, d) in row {
            let w = if d - rho <= 0.0 || sigma == 0.0 {
                1.0
            } else {
                (-(d - rho) / sigma).exp()
            };
            directed.push((i, j, w));
        }
    }
    let a = Csr::from_triplets(n, directed);
    let mut sym = Vec::with_capacity(2 * a.nnz());
    for i in 0..n {
        for (j, w) in a.row(i) {
            let wt = a.get(j, i);
            sym.push((i, j, w + wt - w * wt));
            if wt == 0.0 {
                sym.push((j, i, w));
            }
        }
    }
    Csr::from_triplets(n, sym)
}

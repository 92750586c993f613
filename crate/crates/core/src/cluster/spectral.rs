use nalgebra::DMatrix;

use super::SpectralParams;
use crate::distance::{knn, Metric};
use crate::embedspace::{ClusterAssignment, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{largest_eigenpairs, Csr, EigenOptions, Shifted};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub assignment: ClusterAssignment,
    /// The `k` smallest eigenvalues of the normalized Laplacian, ascending.
    pub laplacian_eigenvalues: Vec<f64>,
}

/// Binary kNN affinity (self included) symmetrized as `(A + A^T) / 2`.
pub fn knn_affinity(x: &EmbeddingMatrix, n_neighbors: usize) -> Csr {
    let n = x.n_samples();
    let neighbours = knn(x, n_neighbors.saturating_sub(1), Metric::L2);
    let mut trip = Vec::with_capacity(2 * n * n_neighbors);
    for (i, row) in neighbours.iter().enumerate() {
        trip.push((i, i, 1.0));
        for &(j, _) in row {
            trip.push((i, j, 0.5));
            trip.push((j, i, 0.5));
        }
    }
    Csr::from_triplets(n, trip)
}

/// Spectral clustering on a kNN graph with QR-based label assignment.
pub fn spectral(x: &EmbeddingMatrix, params: &SpectralParams, seed: u64) -> Result<SpectralResult> {
    let k = params.k.fixed()?;
    let n = x.n_samples();
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "spectral clustering needs 1 <= k <= N, got k={k}, N={n}"
        )));
    }
    if params.n_neighbors >= n {
        return Err(Error::Config(format!(
            "spectral n_neighbors {} must be below N={n}",
            params.n_neighbors
        )));
    }
    let affinity = knn_affinity(x, params.n_neighbors);
    let inv_sqrt: Vec<f64> = affinity.row_sums().iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut trip = Vec::with_capacity(affinity.nnz());
    for i in 0..n {
        for (j, w) in affinity.row(i) {
            trip.push((i, j, w * inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    let normalized = Csr::from_triplets(n, trip);
    // I + D^-1/2 W D^-1/2 is PSD and shares eigenvectors with L = I - D^-1/2 W D^-1/2
    let op = Shifted {
        inner: &normalized,
        scale: 1.0,
        shift: 1.0,
    };
    let opts = EigenOptions {
        seed,
        ..Default::default()
    };
    let (theta, vectors) = largest_eigenpairs(&op, k, &opts)?;
    let laplacian_eigenvalues = theta.iter().map(|t| 2.0 - t).collect();
    let labels = if k == 1 {
        vec![0; n]
    } else {
        cluster_qr(&vectors, n)?
    };
    Ok(SpectralResult {
        assignment: ClusterAssignment::from_usize(&labels),
        laplacian_eigenvalues,
    })
}

/// Row-normalizes the `n x k` eigenvector matrix `V`, picks `k`
/// representative rows by column-pivoted QR of `V^T`, and labels each row by
/// the largest magnitude of its coordinates in the basis of those rows.
fn cluster_qr(vectors: &[Vec<f64>], n: usize) -> Result<Vec<usize>> {
    let k = vectors.len();
    let mut v = DMatrix::from_fn(n, k, |i, j| vectors[j][i]);
    for mut row in v.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let pivots = pivoted_rows(&v, k);
    let s = DMatrix::from_fn(k, k, |a, j| v[(pivots[a], j)]);
    let s_inv = s.try_inverse().ok_or_else(|| Error::Numeric {
        message: "representative rows of the spectral embedding are singular".into(),
        iterations: 0,
    })?;
    let coords = &v * s_inv;
    Ok(coords
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for j in 1..k {
                if row[j].abs() > row[best].abs() {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Pivot order of Businger-Golub column-pivoted QR applied to `v^T`: at each
/// step the row of `v` with the largest residual norm, ties to the lowest
/// index.
fn pivoted_rows(v: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let n = v.nrows();
    let mut residual: Vec<Vec<f64>> = v.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut pivots = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = 0;
        let mut best_norm = -1.0;
        for (i, r) in residual.iter().enumerate() {
            let s: f64 = r.iter().map(|x| x * x).sum();
            if s > best_norm {
                best = i;
                best_norm = s;
            }
        }
        pivots.push(best);
        let q: Vec<f64> = residual[best]
            .iter()
            .map(|x| x / best_norm.sqrt())
            .collect();
        for r in residual.iter_mut().take(n) {
            let c: f64 = r.iter().zip(&q).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(&q).for_each(|(a, b)| *a -= c * b);
        }
    }
    pivots
}

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::standardize::column_stats;
use crate::embedspace::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::sym_eig_desc;

/// Largest dimensionality for which the covariance matrix is decomposed
/// directly; above it (or when samples are fewer than dimensions) the
/// sample Gram matrix is used instead.
const COVARIANCE_MAX_DIMS: usize = 4096;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    Dims(usize),
    /// Smallest number of components whose cumulative explained variance
    /// ratio reaches this fraction.
    VarianceFraction(f64),
}

/// PCA fitted on z-scored data, without whitening.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub per_dim_std: Vec<f64>,
    /// `n_components` rows of length `D`, orthonormal.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }
}

pub fn pca_fit(x: &EmbeddingMatrix, target: PcaTarget) -> Result<PcaModel> {
    let (n, d) = (x.n_samples(), x.n_dims());
    let max_k = d.min(n.saturating_sub(1));
    match target {
        PcaTarget::Dims(k) if k == 0 || k > max_k => {
            return Err(Error::Config(format!(
                "PCA dims {} outside 1..={} for a {}x{} input",
                k, max_k, n, d
            )))
        }
        PcaTarget::VarianceFraction(v) if !(v > 0.0 && v <= 1.0) => {
            return Err(Error::Config(format!(
                "variance fraction {} outside (0, 1]",
                v
            )))
        }
        _ => {}
    }
    let (mean, std) = column_stats(x, 1);
    let z = standardized(x, &mean, &std);

    let (eigenvalues, mut components) = if d <= COVARIANCE_MAX_DIMS && d <= n {
        covariance_route(&z, n, d)
    } else {
        gram_route(&z, n, d)
    };
    let total: f64 = eigenvalues.iter().sum();
    let ratio: Vec<f64> = if total > 0.0 {
        eigenvalues.iter().map(|v| v / total).collect()
    } else {
        vec![0.0; eigenvalues.len()]
    };

    let available = components.len().min(max_k).max(1);
    let k = match target {
        PcaTarget::Dims(k) => k.min(components.len()),
        PcaTarget::VarianceFraction(v) => {
            let mut cum = 0.0;
            let mut k = available;
            for (i, r) in ratio.iter().enumerate().take(available) {
                cum += r;
                if cum >= v - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };
    components.truncate(k);
    for c in components.iter_mut() {
        flip_sign(c);
    }
    Ok(PcaModel {
        mean,
        per_dim_std: std,
        components,
        explained_variance: eigenvalues[..k].to_vec(),
        explained_variance_ratio: ratio[..k].to_vec(),
    })
}

pub fn pca_transform(model: &PcaModel, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if x.n_dims() != model.mean.len() {
        return Err(Error::Config(format!(
            "PCA model expects {} dims, input has {}",
            model.mean.len(),
            x.n_dims()
        )));
    }
    let k = model.n_components();
    let out: Vec<f64> = x
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .flat_map_iter(|r| {
            let z: Vec<f64> = r
                .iter()
                .zip(model.mean.iter().zip(&model.per_dim_std))
                .map(|(&v, (m, s))| if *s > 0.0 { (v as f64 - m) / s } else { 0.0 })
                .collect();
            model
                .components
                .iter()
                .map(move |c| c.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>())
                .collect::<Vec<_>>()
        })
        .collect();
    EmbeddingMatrix::from_f64(x.n_samples(), k, &out)
}

fn standardized(x: &EmbeddingMatrix, mean: &[f64], std: &[f64]) -> Vec<f64> {
    let d = x.n_dims();
    x.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = i % d;
            if std[c] > 0.0 {
                (v as f64 - mean[c]) / std[c]
            } else {
                0.0
            }
        })
        .collect()
}

fn covariance_route(z: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let cov_rows: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|a| {
            let mut row = vec![0.0; d];
            for i in 0..n {
                let za = z[i * d + a];
                if za == 0.0 {
                    continue;
                }
                let zr = &z[i * d..(i + 1) * d];
                for (b, slot) in row.iter_mut().enumerate() {
                    *slot += za * zr[b];
                }
            }
            row.iter_mut().for_each(|v| *v /= (n - 1).max(1) as f64);
            row
        })
        .collect();
    let cov = DMatrix::from_fn(d, d, |i, j| cov_rows[i][j]);
    let (values, vectors) = sym_eig_desc(cov);
    let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let comps = (0..d)
        .map(|j| vectors.column(j).iter().copied().collect())
        .collect();
    (values, comps)
}

fn gram_route(z: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let gram_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = &z[i * d..(i + 1) * d];
            (0..n)
                .map(|j| {
                    zi.iter()
                        .zip(&z[j * d..(j + 1) * d])
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect()
        })
        .collect();
    let gram = DMatrix::from_fn(n, n, |i, j| gram_rows[i][j]);
    let (values, vectors) = sym_eig_desc(gram);
    let scale = (n - 1).max(1) as f64;
    let mut eig = Vec::new();
    let mut comps = Vec::new();
    for (j, &lambda) in values.iter().enumerate() {
        if lambda <= 1e-10 * values[0].max(1e-300) {
            break;
        }
        let u = vectors.column(j);
        let inv = 1.0 / lambda.sqrt();
        let mut v = vec![0.0; d];
        for i in 0..n {
            let ui = u[i] * inv;
            for (vb, zb) in v.iter_mut().zip(&z[i * d..(i + 1) * d]) {
                *vb += ui * zb;
            }
        }
        eig.push(lambda / scale);
        comps.push(v);
    }
    (eig, comps)
}

/// Makes the largest-magnitude entry positive.
fn flip_sign(c: &mut [f64]) {
    let mut best = 0;
    for (i, v) in c.iter().enumerate() {
        if v.abs() > c[best].abs() {
            best = i;
        }
    }
    if c[best] < 0.0 {
        c.iter_mut().for_each(|v| *v = -*v);
    }
}

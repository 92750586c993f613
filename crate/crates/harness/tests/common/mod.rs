//! Synthetic bundles for the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use embclust_core::embedspace::{save_bundle, DatasetBundle, EmbeddingMatrix, LabelVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `k` isotropic Gaussian blobs of `per` points in `dim` dimensions with
/// noise `sigma`. Centres sit at `separation / sqrt(2)` along distinct axes,
/// so every pair of centres is exactly `separation` apart.
pub fn blobs(
    k: usize,
    per: usize,
    dim: usize,
    separation: f64,
    sigma: f64,
    seed: u64,
) -> (EmbeddingMatrix, Vec<i64>) {
    assert!(k <= dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let offset = separation / 2f64.sqrt();
    let mut data = Vec::with_capacity(k * per * dim);
    let mut labels = Vec::with_capacity(k * per);
    for i in 0..per * k {
        let c = i % k;
        for j in 0..dim {
            let centre = if j == c { offset } else { 0.0 };
            data.push(centre + noise.sample(&mut rng));
        }
        labels.push(c as i64);
    }
    (
        EmbeddingMatrix::from_f64(k * per, dim, &data).unwrap(),
        labels,
    )
}

pub fn blob_bundle(
    name: &str,
    k: usize,
    per: usize,
    dim: usize,
    separation: f64,
    sigma: f64,
    seed: u64,
) -> DatasetBundle {
    let (x, y) = blobs(k, per, dim, separation, sigma, seed);
    DatasetBundle::new(name, x, vec![LabelVector::new(y, "class").unwrap()]).unwrap()
}

/// Saves `bundle` under `root/<name>` and returns the manifest path.
pub fn write_bundle(root: &Path, bundle: &DatasetBundle) -> PathBuf {
    save_bundle(bundle, root.join(&bundle.name)).unwrap()
}

/// Weighted mean of `scores` under `weights`.
pub fn weighted_mean(scores: &[f64], weights: &[f64]) -> f64 {
    scores.iter().zip(weights).map(|(s, w)| s * w).sum::<f64>() / weights.iter().sum::<f64>()
}

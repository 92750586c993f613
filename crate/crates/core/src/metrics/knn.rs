use rayon::prelude::*;

use crate::embedspace::{EmbeddingMatrix, LabelVector};
use crate::error::{Error, Result};

/// Default similarity temperature for the weighted kNN probe.
pub const DEFAULT_KNN_TEMPERATURE: f64 = 0.07;

fn unit_rows(x: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    x.rows()
        .map(|r| {
            let norm = r
                .iter()
                .map(|&v| (v as f64) * (v as f64))
                .sum::<f64>()
                .sqrt();
            let norm = if norm > 0.0 { norm } else { 1.0 };
            r.iter().map(|&v| v as f64 / norm).collect()
        })
        .collect()
}

/// Weighted k-nearest-neighbour classification accuracy.
///
/// Neighbours are ranked by cosine similarity; each votes for its class with
/// weight `exp(sim / temperature)`. Exact vote ties go to the lowest class id.
pub fn weighted_knn_accuracy(
    train: (&EmbeddingMatrix, &LabelVector),
    test: (&EmbeddingMatrix, &LabelVector),
    k: usize,
    temperature: f64,
) -> Result<f64> {
    let (train_x, train_y) = train;
    let (test_x, test_y) = test;
    if train_y.is_empty() || test_y.is_empty() {
        return Err(Error::Degenerate(
            "kNN probe needs non-empty train and test sets".into(),
        ));
    }
    if train_x.n_samples() != train_y.len() || test_x.n_samples() != test_y.len() {
        return Err(Error::Validation(
            "kNN probe labels do not match sample counts".into(),
        ));
    }
    if train_x.n_dims() != test_x.n_dims() {
        return Err(Error::Validation(format!(
            "train has {} dims, test has {}",
            train_x.n_dims(),
            test_x.n_dims()
        )));
    }
    if k == 0 || k > train_y.len() {
        return Err(Error::Config(format!(
            "k = {} must lie in 1..={}",
            k,
            train_y.len()
        )));
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::Config(format!(
            "temperature must be positive, got {}",
            temperature
        )));
    }
    let tr = unit_rows(train_x);
    let te = unit_rows(test_x);
    let n_classes = train_y.labels().iter().copied().max().unwrap_or(0) as usize + 1;
    let correct: usize = te
        .par_iter()
        .zip(test_y.labels().par_iter())
        .map(|(q, &truth)| {
            let mut sims: Vec<(usize, f64)> = tr
                .iter()
                .enumerate()
                .map(|(j, t)| (j, q.iter().zip(t).map(|(a, b)| a * b).sum()))
                .collect();
            sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut votes = vec![0.0f64; n_classes];
            for &(j, s) in &sims[..k] {
                votes[train_y.labels()[j] as usize] += (s / temperature).exp();
            }
            let mut best = 0usize;
            for c in 1..n_classes {
                if votes[c] > votes[best] {
                    best = c;
                }
            }
            usize::from(best as i64 == truth)
        })
        .sum();
    Ok(correct as f64 / test_y.len() as f64)
}

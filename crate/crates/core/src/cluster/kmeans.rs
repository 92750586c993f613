use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::KMeansParams;
use crate::embedspace::{ClusterAssignment, EmbeddingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    /// Row-major `k x D`.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    /// Inertia after each assignment step of the best initialization.
    pub inertia_history: Vec<f64>,
    pub n_iter: usize,
}

/// Lloyd's algorithm from a greedy k-means++ seeding.
pub fn kmeans(x: &EmbeddingMatrix, params: &KMeansParams, seed: u64) -> Result<KMeansResult> {
    let k = params.k.fixed()?;
    let (n, d) = (x.n_samples(), x.n_dims());
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "K-Means needs 1 <= k <= N, got k={k}, N={n}"
        )));
    }
    let data = x.to_f64();
    let tol = scaled_tol(&data, n, d, params.tol);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..params.n_init.max(1) {
        let centers = plus_plus(&data, n, d, k, &mut rng);
        let run = lloyd(&data, n, d, k, centers, tol, params.max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one initialization"))
}

/// Absolute tolerance: `tol` times the mean per-column variance.
fn scaled_tol(data: &[f64], n: usize, d: usize, tol: f64) -> f64 {
    let mut total = 0.0;
    for c in 0..d {
        let mean = (0..n).map(|i| data[i * d + c]).sum::<f64>() / n as f64;
        total += (0..n)
            .map(|i| (data[i * d + c] - mean).powi(2))
            .sum::<f64>()
            / n as f64;
    }
    tol * total / d as f64
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy k-means++: each new centre is the best of `2 + ln k` candidates
/// drawn proportionally to the squared distance to the chosen centres.
fn plus_plus(data: &[f64], n: usize, d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq(row(i), row(first))).collect();
    let mut pot: f64 = closest.iter().sum();
    for _ in 1..k {
        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &c in &closest {
            acc += c;
            cum.push(acc);
        }
        let candidates: Vec<usize> = (0..trials)
            .map(|_| {
                let r = rng.random::<f64>() * pot;
                cum.partition_point(|&c| c < r).min(n - 1)
            })
            .collect();
        let scored: Vec<(f64, Vec<f64>)> = candidates
            .par_iter()
            .map(|&c| {
                let dists: Vec<f64> = (0..n).map(|i| closest[i].min(sq(row(i), row(c)))).collect();
                (dists.iter().sum(), dists)
            })
            .collect();
        let mut best = 0;
        for (t, s) in scored.iter().enumerate() {
            if s.0 < scored[best].0 {
                best = t;
            }
        }
        centers.extend_from_slice(row(candidates[best]));
        pot = scored[best].0;
        closest = scored.into_iter().nth(best).expect("candidate").1;
    }
    centers
}

/// Nearest centre (lowest index on ties) and its squared distance.
fn assign(data: &[f64], n: usize, d: usize, centers: &[f64]) -> Vec<(usize, f64)> {
    let k = centers.len() / d;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let r = &data[i * d..(i + 1) * d];
            let mut best = (0, f64::INFINITY);
            for c in 0..k {
                let dist = sq(r, &centers[c * d..(c + 1) * d]);
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            best
        })
        .collect()
}

fn lloyd(
    data: &[f64],
    n: usize,
    d: usize,
    k: usize,
    mut centers: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> KMeansResult {
    let mut history = Vec::new();
    let mut prev: Option<Vec<usize>> = None;
    let mut n_iter = 0;
    let mut current = assign(data, n, d, &centers);
    loop {
        history.push(current.iter().map(|a| a.1).sum());
        let labels: Vec<usize> = current.iter().map(|a| a.0).collect();
        if prev.as_ref() == Some(&labels) || n_iter >= max_iter {
            break;
        }
        n_iter += 1;
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for c in 0..d {
                sums[l * d + c] += data[i * d + c];
            }
        }
        let mut next = vec![0.0; k * d];
        for l in 0..k {
            if counts[l] > 0 {
                for c in 0..d {
                    next[l * d + c] = sums[l * d + c] / counts[l] as f64;
                }
            }
        }
        reseed_empty(data, d, &labels, &current, &counts, &mut next);
        let shift: f64 = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        centers = next;
        prev = Some(labels);
        current = assign(data, n, d, &centers);
        if shift <= tol {
            history.push(current.iter().map(|a| a.1).sum());
            break;
        }
    }
    let labels: Vec<usize> = current.iter().map(|a| a.0).collect();
    KMeansResult {
        assignment: ClusterAssignment::from_usize(&labels),
        centroids: centers,
        inertia: *history.last().expect("non-empty history"),
        inertia_history: history,
        n_iter,
    }
}

/// Moves each empty centre onto the sample farthest from its own centre,
/// taking a different sample for every empty cluster.
fn reseed_empty(
    data: &[f64],
    d: usize,
    labels: &[usize],
    current: &[(usize, f64)],
    counts: &[usize],
    next: &mut [f64],
) {
    let empty: Vec<usize> = (0..counts.len()).filter(|&l| counts[l] == 0).collect();
    if empty.is_empty() {
        return;
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| current[b].1.total_cmp(&current[a].1).then(a.cmp(&b)));
    for (slot, &i) in empty.iter().zip(&order) {
        next[slot * d..(slot + 1) * d].copy_from_slice(&data[i * d..(i + 1) * d]);
    }
}

//! Negative-sampling SGD on the fuzzy graph edges.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::Csr;

const GRAD_CLIP: f64 = 4.0;

pub struct LayoutParams {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub initial_alpha: f64,
    pub negative_sample_rate: f64,
    pub n_epochs: usize,
}

struct Edges {
    head: Vec<usize>,
    tail: Vec<usize>,
    epochs_per_sample: Vec<f64>,
}

/// Drops edges too weak to be sampled within `n_epochs` and derives each
/// edge's sampling period from its weight.
fn edges(graph: &Csr, n_epochs: usize) -> Edges {
    let max_w = graph.values.iter().copied().fold(0.0, f64::max);
    let cutoff = max_w / n_epochs as f64;
    let (mut head, mut tail, mut eps) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..graph.n {
        for (j, w) in graph.row(i) {
            if w < cutoff || w <= 0.0 {
                continue;
            }
            let n_samples = n_epochs as f64 * (w / max_w);
            head.push(i);
            tail.push(j);
            eps.push(n_epochs as f64 / n_samples);
        }
    }
    Edges {
        head,
        tail,
        epochs_per_sample: eps,
    }
}

#[inline]
fn clip(v: f64) -> f64 {
    v.clamp(-GRAD_CLIP, GRAD_CLIP)
}

#[inline]
fn attract_coeff(p: &LayoutParams, dist_sq: f64) -> f64 {
    if dist_sq > 0.0 {
        -2.0 * p.a * p.b * dist_sq.powf(p.b - 1.0) / (p.a * dist_sq.powf(p.b) + 1.0)
    } else {
        0.0
    }
}

#[inline]
fn repel_coeff(p: &LayoutParams, dist_sq: f64) -> f64 {
    if dist_sq > 0.0 {
        2.0 * p.gamma * p.b / ((0.001 + dist_sq) * (p.a * dist_sq.powf(p.b) + 1.0))
    } else {
        0.0
    }
}

/// Single-threaded, deterministic layout optimisation of `emb`
/// (`n x dim`, row-major) in place.
pub fn optimize(emb: &mut [f64], dim: usize, graph: &Csr, p: &LayoutParams, seed: u64) {
    let n = graph.n;
    let e = edges(graph, p.n_epochs);
    let m = e.head.len();
    let eps_neg: Vec<f64> = e
        .epochs_per_sample
        .iter()
        .map(|v| v / p.negative_sample_rate)
        .collect();
    let mut next_sample = e.epochs_per_sample.clone();
    let mut next_negative = eps_neg.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alpha = p.initial_alpha;
    let mut grad = vec![0.0f64; dim];

    for epoch in 0..p.n_epochs {
        let ep = epoch as f64;
        for i in 0..m {
            if next_sample[i] > ep {
                continue;
            }
            let (j, k) = (e.head[i], e.tail[i]);
            let dist_sq = sq_dist(emb, dim, j, k);
            let coeff = attract_coeff(p, dist_sq);
            for d in 0..dim {
                grad[d] = clip(coeff * (emb[j * dim + d] - emb[k * dim + d]));
            }
            for d in 0..dim {
                emb[j * dim + d] += grad[d] * alpha;
                emb[k * dim + d] -= grad[d] * alpha;
            }
            next_sample[i] += e.epochs_per_sample[i];

            let n_neg = ((ep - next_negative[i]) / eps_neg[i]).max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.random_range(0..n);
                if k == j {
                    continue;
                }
                let dist_sq = sq_dist(emb, dim, j, k);
                let coeff = repel_coeff(p, dist_sq);
                if coeff > 0.0 {
                    for d in 0..dim {
                        let g = clip(coeff * (emb[j * dim + d] - emb[k * dim + d]));
                        emb[j * dim + d] += g * alpha;
                    }
                }
            }
            next_negative[i] += n_neg as f64 * eps_neg[i];
        }
        alpha = p.initial_alpha * (1.0 - epoch as f64 / p.n_epochs as f64);
    }
}

#[inline]
fn sq_dist(emb: &[f64], dim: usize, j: usize, k: usize) -> f64 {
    let (a, b) = (&emb[j * dim..(j + 1) * dim], &emb[k * dim..(k + 1) * dim]);
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Multi-threaded lock-free variant. Concurrent updates to shared rows race
/// (benignly, through atomics), so results depend on thread scheduling.
pub fn optimize_parallel(emb: &mut [f64], dim: usize, graph: &Csr, p: &LayoutParams, seed: u64) {
    let n = graph.n;
    let e = edges(graph, p.n_epochs);
    let shared: Vec<AtomicU64> = emb.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let load = |i: usize| f64::from_bits(shared[i].load(Ordering::Relaxed));
    let add = |i: usize, v: f64| {
        let cur = f64::from_bits(shared[i].load(Ordering::Relaxed));
        shared[i].store((cur + v).to_bits(), Ordering::Relaxed);
    };
    let mut state: Vec<(f64, f64)> = e
        .epochs_per_sample
        .iter()
        .map(|&v| (v, v / p.negative_sample_rate))
        .collect();
    let mut alpha = p.initial_alpha;
    for epoch in 0..p.n_epochs {
        let ep = epoch as f64;
        state
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, (next_s, next_n))| {
                if *next_s > ep {
                    return;
                }
                let eps = e.epochs_per_sample[i];
                let eps_neg = eps / p.negative_sample_rate;
                let (j, k) = (e.head[i], e.tail[i]);
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                        ^ (i as u64).rotate_left(32),
                );
                let dist_sq: f64 = (0..dim)
                    .map(|d| (load(j * dim + d) - load(k * dim + d)).powi(2))
                    .sum();
                let coeff = attract_coeff(p, dist_sq);
                for d in 0..dim {
                    let g = clip(coeff * (load(j * dim + d) - load(k * dim + d)));
                    add(j * dim + d, g * alpha);
                    add(k * dim + d, -g * alpha);
                }
                *next_s += eps;
                let n_neg = ((ep - *next_n) / eps_neg).max(0.0) as usize;
                for _ in 0..n_neg {
                    let k = rng.random_range(0..n);
                    if k == j {
                        continue;
                    }
                    let dist_sq: f64 = (0..dim)
                        .map(|d| (load(j * dim + d) - load(k * dim + d)).powi(2))
                        .sum();
                    let coeff = repel_coeff(p, dist_sq);
                    if coeff > 0.0 {
                        for d in 0..dim {
                            let g = clip(coeff * (load(j * dim + d) - load(k * dim + d)));
                            add(j * dim + d, g * alpha);
                        }
                    }
                }
                *next_n += n_neg as f64 * eps_neg;
            });
        alpha = p.initial_alpha * (1.0 - epoch as f64 / p.n_epochs as f64);
    }
    for (dst, a) in emb.iter_mut().zip(&shared) {
        *dst = f64::from_bits(a.load(Ordering::Relaxed));
    }
}

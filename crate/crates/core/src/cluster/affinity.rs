use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{ApParams, Preference};
use crate::distance::sq_euclidean;
use crate::embedspace::{ClusterAssignment, EmbeddingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    pub assignment: ClusterAssignment,
    /// Sample index of each cluster's exemplar, in label order.
    pub exemplars: Vec<usize>,
    pub converged: bool,
    pub n_iter: usize,
}

/// Affinity propagation on negative squared Euclidean similarities.
pub fn affinity_propagation(x: &EmbeddingMatrix, params: &ApParams, seed: u64) -> Result<ApResult> {
    if !(0.5..1.0).contains(&params.damping) {
        return Err(Error::Config(format!(
            "damping must lie in [0.5, 1), got {}",
            params.damping
        )));
    }
    let n = x.n_samples();
    let mut s: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|ij| -sq_euclidean(x.row(ij / n), x.row(ij % n)))
        .collect();
    if s.iter().all(|&v| v == 0.0) {
        return Ok(ApResult {
            assignment: ClusterAssignment::from_usize(&vec![0; n]),
            exemplars: vec![0],
            converged: true,
            n_iter: 0,
        });
    }
    let preference = match params.preference {
        Preference::Value(v) => v,
        Preference::Median => median_off_diagonal(&s, n),
    };
    for i in 0..n {
        s[i * n + i] = preference;
    }
    // tiny seeded noise breaks ties between equivalent exemplars
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in s.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += (f64::EPSILON * *v + f64::MIN_POSITIVE * 100.0) * z;
    }

    let lam = params.damping;
    let mut r = vec![0.0; n * n];
    let mut a = vec![0.0; n * n];
    let window = params.convergence_iter;
    let mut history = vec![vec![false; n]; window];
    let mut converged = false;
    let mut n_iter = 0;
    let mut exemplar = vec![false; n];
    for it in 0..params.max_iter {
        n_iter = it + 1;
        r.par_chunks_mut(n).enumerate().for_each(|(i, ri)| {
            let si = &s[i * n..(i + 1) * n];
            let ai = &a[i * n..(i + 1) * n];
            let (mut first, mut arg, mut second) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
            for k in 0..n {
                let v = ai[k] + si[k];
                if v > first {
                    second = first;
                    first = v;
                    arg = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let top = if k == arg { second } else { first };
                ri[k] = lam * ri[k] + (1.0 - lam) * (si[k] - top);
            }
        });
        let col_sums: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut acc = r[k * n + k];
                for i in 0..n {
                    if i != k {
                        acc += r[i * n + k].max(0.0);
                    }
                }
                acc
            })
            .collect();
        a.par_chunks_mut(n).enumerate().for_each(|(i, ai)| {
            let ri = &r[i * n..(i + 1) * n];
            for k in 0..n {
                let fresh = if i == k {
                    col_sums[k] - ri[k]
                } else {
                    (col_sums[k] - ri[k].max(0.0)).min(0.0)
                };
                ai[k] = lam * ai[k] + (1.0 - lam) * fresh;
            }
        });
        for k in 0..n {
            exemplar[k] = a[k * n + k] + r[k * n + k] > 0.0;
        }
        history[it % window].clone_from(&exemplar);
        if it >= window {
            let stable = (0..n).all(|k| {
                let hits = history.iter().filter(|h| h[k]).count();
                hits == 0 || hits == window
            });
            if stable && exemplar.iter().any(|&e| e) {
                converged = true;
                break;
            }
        }
    }

    let mut centers: Vec<usize> = (0..n).filter(|&k| exemplar[k]).collect();
    if centers.is_empty() {
        let best = (0..n)
            .max_by(|&p, &q| {
                (a[p * n + p] + r[p * n + p])
                    .total_cmp(&(a[q * n + q] + r[q * n + q]))
                    .then(q.cmp(&p))
            })
            .expect("n >= 1");
        centers.push(best);
    }
    let nearest = |centers: &[usize]| -> Vec<usize> {
        let mut c: Vec<usize> = (0..n)
            .map(|i| argmax(centers.iter().map(|&k| s[i * n + k])))
            .collect();
        for (j, &k) in centers.iter().enumerate() {
            c[k] = j;
        }
        c
    };
    // refine each exemplar to the member with the highest summed similarity
    let c = nearest(&centers);
    for (j, centre) in centers.iter_mut().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| c[i] == j).collect();
        let best = argmax(
            members
                .iter()
                .map(|&m| members.iter().map(|&i| s[i * n + m]).sum::<f64>()),
        );
        *centre = members[best];
    }
    let c = nearest(&centers);
    let assignment = ClusterAssignment::from_usize(&c);
    let mut exemplars = vec![0; assignment.n_clusters()];
    for (i, &l) in assignment.labels().iter().enumerate() {
        exemplars[l as usize] = centers[c[i]];
    }
    Ok(ApResult {
        assignment,
        exemplars,
        converged,
        n_iter,
    })
}

/// Index of the first maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn median_off_diagonal(s: &[f64], n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut off: Vec<f64> = (0..n * n)
        .filter(|ij| ij / n != ij % n)
        .map(|ij| s[ij])
        .collect();
    off.sort_by(f64::total_cmp);
    let m = off.len();
    if m % 2 == 1 {
        off[m / 2]
    } else {
        0.5 * (off[m / 2 - 1] + off[m / 2])
    }
}

//! Permutation estimate of the expected mutual information.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labels realizing the given margins, in block order.
pub fn labels_for(margins: &[u64]) -> Vec<usize> {
    margins
        .iter()
        .enumerate()
        .flat_map(|(k, &m)| std::iter::repeat_n(k, m as usize))
        .collect()
}

fn mi_counts(u: &[usize], v: &[usize], ku: usize, kv: usize, rows: &[u64], cols: &[u64]) -> f64 {
    let n = u.len() as f64;
    let mut cells = vec![0u64; ku * kv];
    for (a, b) in u.iter().zip(v) {
        cells[a * kv + b] += 1;
    }
    let mut s = 0.0;
    for i in 0..ku {
        for j in 0..kv {
            let c = cells[i * kv + j];
            if c > 0 {
                let c = c as f64;
                s += c / n * (n * c / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    s
}

/// Mean and standard error of MI over `reps` random permutations of the
/// column labels.
pub fn emi_estimate(rows: &[u64], cols: &[u64], reps: usize, seed: u64) -> (f64, f64) {
    let u = labels_for(rows);
    let mut v = labels_for(cols);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..reps {
        v.shuffle(&mut rng);
        let m = mi_counts(&u, &v, rows.len(), cols.len(), rows, cols);
        sum += m;
        sq += m * m;
    }
    let mean = sum / reps as f64;
    let var = (sq / reps as f64 - mean * mean).max(0.0) * reps as f64 / (reps - 1) as f64;
    (mean, (var / reps as f64).sqrt())
}

/// Random margin configuration with `N <= max_n`.
pub fn random_margins(rng: &mut ChaCha8Rng, max_n: u64) -> (Vec<u64>, Vec<u64>) {
    use rand::Rng;
    let n = rng.random_range(10..=max_n);
    let split = |rng: &mut ChaCha8Rng, k: usize| -> Vec<u64> {
        let mut cuts: Vec<u64> = (0..k - 1).map(|_| rng.random_range(1..n)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut out = Vec::new();
        let mut prev = 0;
        for c in cuts.into_iter().chain([n]) {
            out.push(c - prev);
            prev = c;
        }
        out
    };
    let ku = rng.random_range(2..=6);
    let kv = rng.random_range(2..=6);
    (split(rng, ku), split(rng, kv))
}

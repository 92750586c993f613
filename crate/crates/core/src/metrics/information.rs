//! Entropy, mutual information and its chance-corrected variants.
//! Natural logarithms throughout.

use rayon::prelude::*;

use super::contingency::{contingency, ContingencyTable};
use crate::embedspace::NoisePolicy;
use crate::error::Result;

/// Scores whose magnitude is below this are treated as exactly zero when
/// deciding the degenerate AMI/NMI cases.
const DEGENERATE_EPS: f64 = 1e-12;

/// Shannon entropy of a partition given its block sizes.
pub fn entropy(margins: &[u64]) -> f64 {
    let n: u64 = margins.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let ln_n = (n as f64).ln();
    margins
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| (m as f64 / n as f64) * (ln_n - (m as f64).ln()))
        .sum()
}

pub fn mutual_information(ct: &ContingencyTable) -> f64 {
    let n = ct.total() as f64;
    let ln_n = n.ln();
    let mut mi = 0.0;
    for i in 0..ct.rows() {
        let ln_a = (ct.row_margins()[i] as f64).ln();
        for j in 0..ct.cols() {
            let nij = ct.get(i, j);
            if nij == 0 {
                continue;
            }
            let ln_b = (ct.col_margins()[j] as f64).ln();
            let ln_nij = (nij as f64).ln();
            // grouped so that n_ij = a_i = b_j reproduces the entropy term bitwise
            mi += (nij as f64 / n) * ((ln_nij - ln_a) + (ln_n - ln_b));
        }
    }
    mi.max(0.0)
}

/// `ln(k!)` for `k = 0..=n`.
fn log_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Expected mutual information between two random partitions with the
/// given block sizes under the permutation (hypergeometric) model.
pub fn expected_mutual_information(row_margins: &[u64], col_margins: &[u64], n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let lf = log_factorials(n);
    let nf = n as f64;
    let ln_n = nf.ln();
    let per_row: Vec<f64> = row_margins
        .par_iter()
        .map(|&a| {
            let mut row_sum = 0.0;
            if a == 0 {
                return 0.0;
            }
            for &b in col_margins {
                if b == 0 {
                    continue;
                }
                row_sum += emi_cell(a, b, n, nf, ln_n, &lf);
            }
            row_sum
        })
        .collect();
    per_row.iter().sum()
}

/// Sum over feasible `n_ij >= 1` of `P_hyp(n_ij) * (n_ij/N) ln(N n_ij / (a b))`.
fn emi_cell(a: u64, b: u64, n: u64, nf: f64, ln_n: f64, lf: &[f64]) -> f64 {
    let start = (a + b).saturating_sub(n).max(1);
    let end = a.min(b);
    if start > end {
        return 0.0;
    }
    let ln_ab = (a as f64).ln() + (b as f64).ln();
    let u = |k: u64| k as usize;
    // log of the hypergeometric probability at the first feasible count
    let mut log_p = lf[u(a)] + lf[u(b)] + lf[u(n - a)] + lf[u(n - b)]
        - lf[u(n)]
        - lf[u(start)]
        - lf[u(a - start)]
        - lf[u(b - start)]
        - lf[u(n + start - a - b)];
    let mut p = log_p.exp();
    let mut sum = 0.0;
    let mut k = start;
    loop {
        let kf = k as f64;
        sum += p * (kf / nf) * (ln_n + kf.ln() - ln_ab);
        if k == end {
            break;
        }
        // P(k+1)/P(k) = (a-k)(b-k) / ((k+1)(N-a-b+k+1))
        let ratio =
            ((a - k) as f64 * (b - k) as f64) / ((k + 1) as f64 * (n + k + 1 - a - b) as f64);
        if p > 0.0 {
            p *= ratio;
            log_p += ratio.ln();
        } else {
            // underflowed start: keep walking in log space until representable
            log_p += ratio.ln();
            p = log_p.exp();
        }
        k += 1;
    }
    sum
}

/// Adjusted mutual information with arithmetic-mean normalization.
pub fn ami(truth: &[i64], pred: &[i64], policy: NoisePolicy) -> Result<f64> {
    let ct = contingency(truth, pred, policy)?;
    Ok(ami_from_table(&ct))
}

pub fn ami_from_table(ct: &ContingencyTable) -> f64 {
    let mi = mutual_information(ct);
    let emi = expected_mutual_information(ct.row_margins(), ct.col_margins(), ct.total());
    let h_mean = 0.5 * (entropy(ct.row_margins()) + entropy(ct.col_margins()));
    let denom = h_mean - emi;
    if denom.abs() <= DEGENERATE_EPS {
        return if (mi - emi).abs() <= DEGENERATE_EPS {
            1.0
        } else {
            0.0
        };
    }
    ((mi - emi) / denom).min(1.0)
}

/// Normalized mutual information with arithmetic-mean normalization.
pub fn nmi(truth: &[i64], pred: &[i64], policy: NoisePolicy) -> Result<f64> {
    let ct = contingency(truth, pred, policy)?;
    Ok(nmi_from_table(&ct))
}

pub fn nmi_from_table(ct: &ContingencyTable) -> f64 {
    let mi = mutual_information(ct);
    let h_mean = 0.5 * (entropy(ct.row_margins()) + entropy(ct.col_margins()));
    if h_mean <= DEGENERATE_EPS {
        return 0.0;
    }
    (mi / h_mean).clamp(0.0, 1.0)
}

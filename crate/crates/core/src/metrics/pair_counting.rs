use super::contingency::{contingency, ContingencyTable};
use crate::embedspace::NoisePolicy;
use crate::error::Result;

#[inline]
fn pairs(n: u64) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index.
pub fn ari(truth: &[i64], pred: &[i64], policy: NoisePolicy) -> Result<f64> {
    let ct = contingency(truth, pred, policy)?;
    Ok(ari_from_table(&ct))
}

pub fn ari_from_table(ct: &ContingencyTable) -> f64 {
    let index: f64 = ct.counts().iter().map(|&c| pairs(c)).sum();
    let sum_a: f64 = ct.row_margins().iter().map(|&a| pairs(a)).sum();
    let sum_b: f64 = ct.col_margins().iter().map(|&b| pairs(b)).sum();
    let total = pairs(ct.total());
    let expected = if total > 0.0 {
        sum_a * sum_b / total
    } else {
        0.0
    };
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return 1.0;
    }
    (index - expected) / denom
}

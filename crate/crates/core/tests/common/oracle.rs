//! Brute-force reference metrics: plain formula evaluation over the
//! contingency table, exact hypergeometric probabilities in big rationals.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

pub struct Table {
    pub cells: Vec<Vec<u64>>,
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
    pub n: u64,
}

pub fn table(u: &[i64], v: &[i64]) -> Table {
    let mut ru = BTreeMap::new();
    let mut rv = BTreeMap::new();
    for &a in u {
        let next = ru.len();
        ru.entry(a).or_insert(next);
    }
    for &b in v {
        let next = rv.len();
        rv.entry(b).or_insert(next);
    }
    let mut cells = vec![vec![0u64; rv.len()]; ru.len()];
    for (a, b) in u.iter().zip(v) {
        cells[ru[a]][rv[b]] += 1;
    }
    let rows = cells.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..rv.len())
        .map(|j| cells.iter().map(|r| r[j]).sum())
        .collect();
    Table {
        cells,
        rows,
        cols,
        n: u.len() as u64,
    }
}

fn binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub fn entropy(margins: &[u64], n: u64) -> f64 {
    margins
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| {
            let p = m as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

pub fn mi(t: &Table) -> f64 {
    let n = t.n as f64;
    let mut s = 0.0;
    for (i, row) in t.cells.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                s += c / n * (n * c / (t.rows[i] as f64 * t.cols[j] as f64)).ln();
            }
        }
    }
    s
}

/// Exact hypergeometric probability of a cell count, as f64.
pub fn hypergeom(nij: u64, a: u64, b: u64, n: u64) -> f64 {
    let num = binom(a, nij) * binom(n - a, b - nij);
    let p = BigRational::new(num, binom(n, b));
    p.to_f64().expect("probability fits f64")
}

pub fn emi(rows: &[u64], cols: &[u64], n: u64) -> f64 {
    let nf = n as f64;
    let mut s = 0.0;
    for &a in rows {
        for &b in cols {
            let lo = (a + b).saturating_sub(n).max(1);
            for nij in lo..=a.min(b) {
                let x = nij as f64;
                let term = x / nf * (nf * x / (a as f64 * b as f64)).ln();
                s += term * hypergeom(nij, a, b, n);
            }
        }
    }
    s
}

pub fn ami(u: &[i64], v: &[i64]) -> f64 {
    let t = table(u, v);
    let (hu, hv) = (entropy(&t.rows, t.n), entropy(&t.cols, t.n));
    let m = mi(&t);
    let e = emi(&t.rows, &t.cols, t.n);
    let denom = 0.5 * (hu + hv) - e;
    if denom.abs() <= 1e-12 {
        return if (m - e).abs() <= 1e-12 { 1.0 } else { 0.0 };
    }
    (m - e) / denom
}

pub fn nmi(u: &[i64], v: &[i64]) -> f64 {
    let t = table(u, v);
    let mean = 0.5 * (entropy(&t.rows, t.n) + entropy(&t.cols, t.n));
    if mean <= 1e-15 {
        return 0.0;
    }
    (mi(&t) / mean).clamp(0.0, 1.0)
}

fn pairs(m: u64) -> f64 {
    (m * m.saturating_sub(1) / 2) as f64
}

pub fn ari(u: &[i64], v: &[i64]) -> f64 {
    let t = table(u, v);
    let index: f64 = t.cells.iter().flatten().map(|&c| pairs(c)).sum();
    let sa: f64 = t.rows.iter().map(|&a| pairs(a)).sum();
    let sb: f64 = t.cols.iter().map(|&b| pairs(b)).sum();
    let expected = sa * sb / pairs(t.n);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

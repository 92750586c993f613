//! Small linear-algebra helpers: a CSR symmetric operator, dense symmetric
//! eigendecomposition, and a block Krylov solver with thick restarts for
//! the largest eigenpairs of a symmetric operator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Symmetric linear operator on `R^n`.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }
}

impl SymOperator for Csr {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        });
    }
}

/// `shift * I + scale * A` for an inner operator `A`.
pub struct Shifted<'a, O: SymOperator> {
    pub inner: &'a O,
    pub scale: f64,
    pub shift: f64,
}

impl<O: SymOperator> SymOperator for Shifted<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.scale * *yi + self.shift * xi;
        }
    }
}

/// Eigenpairs of a dense symmetric matrix, eigenvalues descending.
/// Eigenvectors are the columns of the returned matrix.
pub fn sym_eig_desc(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Residual bound `||A y - theta y||` every returned pair must meet.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
    /// Operators at most this size are solved densely.
    pub dense_threshold: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_restarts: 500,
            seed: 0,
            dense_threshold: 400,
        }
    }
}

/// Largest-`k` eigenpairs of a symmetric operator. Returns eigenvalues in
/// descending order and the matching unit eigenvectors.
pub fn largest_eigenpairs<O: SymOperator>(
    op: &O,
    k: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "cannot take {} eigenpairs of a {}-dim operator",
            k, n
        )));
    }
    if n <= opts.dense_threshold {
        return dense_largest(op, k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let bs = k;
    let m = n.min((3 * bs).max(k + 2 * bs).max(k + 20));
    let keep = (k + bs / 2 + 2).min(m - bs).max(k);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(m);
    let start: Vec<Vec<f64>> = (0..bs).map(|_| random_vec(n, &mut rng)).collect();
    let mut frontier = extend_basis(op, &mut basis, &mut images, start, &mut rng);

    for restart in 0..opts.max_restarts {
        while basis.len() < m && !frontier.is_empty() {
            let block: Vec<Vec<f64>> = frontier.iter().map(|&i| images[i].clone()).collect();
            let room = m - basis.len();
            let block = block.into_iter().take(room).collect();
            frontier = extend_basis(op, &mut basis, &mut images, block, &mut rng);
        }
        let dim = basis.len();
        let h = DMatrix::from_fn(dim, dim, |i, j| dot(&basis[i], &images[j]));
        let (theta, s) = sym_eig_desc(h);
        let p = keep.min(dim);
        let ritz = combine(&basis, &s, p);
        let ritz_images = combine(&images, &s, p);
        let residuals: Vec<Vec<f64>> = (0..p)
            .map(|i| {
                ritz_images[i]
                    .iter()
                    .zip(&ritz[i])
                    .map(|(ay, y)| ay - theta[i] * y)
                    .collect()
            })
            .collect();
        let worst = residuals[..k].iter().map(|r| norm(r)).fold(0.0, f64::max);
        if worst <= opts.tol || dim == n {
            let vectors = ritz.into_iter().take(k).map(|v| normalized(&v)).collect();
            return Ok((theta[..k].to_vec(), vectors));
        }
        basis = ritz;
        images = ritz_images;
        let next: Vec<Vec<f64>> = residuals.into_iter().take(bs).collect();
        frontier = extend_basis(op, &mut basis, &mut images, next, &mut rng);
        if frontier.is_empty() && restart + 1 == opts.max_restarts {
            break;
        }
    }
    Err(Error::Numeric {
        message: format!("eigensolver did not reach residual {:e}", opts.tol),
        iterations: opts.max_restarts,
    })
}

fn dense_largest<O: SymOperator>(op: &O, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.dim();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let mut y = vec![0.0; n];
            op.apply(&e, &mut y);
            y
        })
        .collect();
    let m = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
    let (values, vectors) = sym_eig_desc(m);
    let vecs = (0..k)
        .map(|j| vectors.column(j).iter().copied().collect())
        .collect();
    Ok((values[..k].to_vec(), vecs))
}

/// Orthogonalizes `block` against the basis and itself, appends the
/// surviving directions with their operator images, and returns the
/// indices of the appended vectors.
fn extend_basis<O: SymOperator>(
    op: &O,
    basis: &mut Vec<Vec<f64>>,
    images: &mut Vec<Vec<f64>>,
    block: Vec<Vec<f64>>,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = op.dim();
    let mut added = Vec::new();
    for mut v in block {
        if basis.len() >= n {
            break;
        }
        let mut accepted = false;
        for attempt in 0..3 {
            let before = norm(&v);
            for _ in 0..2 {
                for b in basis.iter() {
                    let c = dot(b, &v);
                    axpy(-c, b, &mut v);
                }
            }
            let after = norm(&v);
            if after > 1e-10 * before.max(1e-300) && after > 0.0 {
                v.iter_mut().for_each(|x| *x /= after);
                accepted = true;
                break;
            }
            if attempt < 2 {
                v = random_vec(n, rng);
            }
        }
        if !accepted {
            continue;
        }
        let mut av = vec![0.0; n];
        op.apply(&v, &mut av);
        basis.push(v);
        images.push(av);
        added.push(basis.len() - 1);
    }
    added
}

fn combine(vs: &[Vec<f64>], s: &DMatrix<f64>, p: usize) -> Vec<Vec<f64>> {
    let n = vs[0].len();
    (0..p)
        .into_par_iter()
        .map(|j| {
            let mut out = vec![0.0; n];
            for (i, v) in vs.iter().enumerate() {
                let c = s[(i, j)];
                if c != 0.0 {
                    axpy(c, v, &mut out);
                }
            }
            out
        })
        .collect()
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

//! UMAP: fuzzy kNN graph, spectral initialisation and negative-sampling
//! layout optimisation, with exact Euclidean neighbours.

mod curve;
mod graph;
mod layout;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

pub use curve::fit_ab;
pub use graph::{fuzzy_graph, smooth_knn_dist};

use crate::embedspace::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{largest_eigenpairs, Csr, EigenOptions, Shifted, SymOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapParams {
    pub out_dims: usize,
    pub n_neighbors: usize,
    pub min_dist: f64,
    /// `None` picks 500 epochs up to 10k samples, 200 above.
    pub n_epochs: Option<usize>,
    pub spread: f64,
    pub learning_rate: f64,
    pub negative_sample_rate: f64,
    pub repulsion_strength: f64,
    /// Multi-threaded layout. Not reproducible across runs.
    pub parallel: bool,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self {
            out_dims: 50,
            n_neighbors: 30,
            min_dist: 0.0,
            n_epochs: None,
            spread: 1.0,
            learning_rate: 1.0,
            negative_sample_rate: 5.0,
            repulsion_strength: 1.0,
            parallel: false,
        }
    }
}

impl UmapParams {
    pub fn validate(&self) -> Result<()> {
        if self.out_dims < 2 {
            return Err(Error::Config(format!(
                "UMAP out_dims {} < 2",
                self.out_dims
            )));
        }
        if self.n_neighbors < 2 {
            return Err(Error::Config(format!(
                "UMAP n_neighbors {} < 2",
                self.n_neighbors
            )));
        }
        if self.min_dist.is_nan()
            || self.min_dist < 0.0
            || self.spread.is_nan()
            || self.spread <= 0.0
            || self.min_dist > self.spread
        {
            return Err(Error::Config(format!(
                "UMAP needs 0 <= min_dist <= spread, got {} / {}",
                self.min_dist, self.spread
            )));
        }
        Ok(())
    }

    fn epochs_for(&self, n: usize) -> usize {
        self.n_epochs.unwrap_or(if n <= 10_000 { 500 } else { 200 })
    }
}

/// Embeds `x` into `params.out_dims` dimensions.
pub fn umap_embed(x: &EmbeddingMatrix, params: &UmapParams, seed: u64) -> Result<EmbeddingMatrix> {
    params.validate()?;
    let (n, d) = (x.n_samples(), x.n_dims());
    if n <= params.n_neighbors {
        return Err(Error::Config(format!(
            "UMAP needs more samples ({}) than n_neighbors ({})",
            n, params.n_neighbors
        )));
    }
    if params.out_dims >= d {
        return Err(Error::Config(format!(
            "UMAP out_dims {} must be below the input dimensionality {}",
            params.out_dims, d
        )));
    }
    let dim = params.out_dims;
    let n_epochs = params.epochs_for(n);
    let graph = fuzzy_graph(x, params.n_neighbors);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut emb = match spectral_init(&graph, dim, seed) {
        Some(init) => {
            let max_abs = init.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let expansion = if max_abs > 0.0 { 10.0 / max_abs } else { 1.0 };
            let jitter = Normal::new(0.0, 1e-4).expect("valid normal");
            init.iter()
                .map(|v| v * expansion + jitter.sample(&mut rng))
                .collect::<Vec<f64>>()
        }
        None => {
            let u = Uniform::new(-10.0f64, 10.0).expect("valid range");
            (0..n * dim).map(|_| u.sample(&mut rng)).collect()
        }
    };
    rescale_columns(&mut emb, n, dim);

    let (a, b) = fit_ab(params.spread, params.min_dist);
    let lp = layout::LayoutParams {
        a,
        b,
        gamma: params.repulsion_strength,
        initial_alpha: params.learning_rate,
        negative_sample_rate: params.negative_sample_rate,
        n_epochs,
    };
    let layout_seed = rand::Rng::random::<u64>(&mut rng);
    if params.parallel {
        layout::optimize_parallel(&mut emb, dim, &graph, &lp, layout_seed);
    } else {
        layout::optimize(&mut emb, dim, &graph, &lp, layout_seed);
    }
    EmbeddingMatrix::from_f64(n, dim, &emb)
}

/// Column-wise affine map onto `[0, 10]`.
fn rescale_columns(emb: &mut [f64], n: usize, dim: usize) {
    for c in 0..dim {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            lo = lo.min(emb[i * dim + c]);
            hi = hi.max(emb[i * dim + c]);
        }
        let span = hi - lo;
        for i in 0..n {
            let v = &mut emb[i * dim + c];
            *v = if span > 0.0 {
                10.0 * (*v - lo) / span
            } else {
                0.0
            };
        }
    }
}

/// Eigenvectors 2..=dim+1 of the symmetric normalized Laplacian, row-major
/// `n x dim`; `None` when the solve is not possible.
fn spectral_init(graph: &Csr, dim: usize, seed: u64) -> Option<Vec<f64>> {
    let n = graph.n;
    if dim + 1 >= n {
        return None;
    }
    let deg = graph.row_sums();
    if deg.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut trip = Vec::with_capacity(graph.nnz());
    for i in 0..n {
        for (j, w) in graph.row(i) {
            trip.push((i, j, w * inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    let normalized = Csr::from_triplets(n, trip);
    // largest of I + D^-1/2 A D^-1/2 are the smallest of the Laplacian
    let op = Shifted {
        inner: &normalized,
        scale: 1.0,
        shift: 1.0,
    };
    let opts = EigenOptions {
        tol: 1e-6,
        max_restarts: 300,
        seed,
        ..Default::default()
    };
    let (_, vecs) = largest_eigenpairs(&op, dim + 1, &opts).ok()?;
    let mut out = vec![0.0; n * dim];
    for (c, v) in vecs.iter().skip(1).enumerate() {
        for i in 0..n {
            out[i * dim + c] = v[i];
        }
    }
    debug_assert_eq!(op.dim(), n);
    Some(out)
}

use super::{AgglomerativeParams, Linkage, Stop};
use crate::distance::{check_metric_input, pairwise};
use crate::embedspace::{ClusterAssignment, EmbeddingMatrix};
use crate::error::{Error, Result};

/// One dendrogram merge. Ids below N are samples; id `N + i` is the cluster
/// formed by merge `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgglomerativeResult {
    pub assignment: ClusterAssignment,
    /// The full dendrogram, heights non-decreasing.
    pub merges: Vec<Merge>,
    /// How many of the merges were applied.
    pub n_merges_applied: usize,
}

/// Bottom-up agglomerative clustering.
pub fn agglomerative(
    x: &EmbeddingMatrix,
    params: &AgglomerativeParams,
) -> Result<AgglomerativeResult> {
    if params.linkage == Linkage::Ward && params.metric != crate::distance::Metric::L2 {
        return Err(Error::Config("ward linkage requires the L2 metric".into()));
    }
    check_metric_input(x, params.metric)?;
    let n = x.n_samples();
    let merges = dendrogram(x, params);
    let applied = match params.stop {
        Stop::NClusters(k) => {
            let k = k.fixed()?;
            if k == 0 || k > n {
                return Err(Error::Config(format!(
                    "agglomerative clustering needs 1 <= n_clusters <= N, got {k} with N={n}"
                )));
            }
            n - k
        }
        Stop::DistanceThreshold(t) => merges.iter().take_while(|m| m.height < t).count(),
    };
    let labels = cut(n, &merges, applied);
    Ok(AgglomerativeResult {
        assignment: ClusterAssignment::from_usize(&labels),
        merges,
        n_merges_applied: applied,
    })
}

/// The complete dendrogram via the nearest-neighbour chain, with merges
/// sorted by height (stable) and relabelled into linkage-matrix form.
pub fn dendrogram(x: &EmbeddingMatrix, params: &AgglomerativeParams) -> Vec<Merge> {
    let n = x.n_samples();
    let mut d = pairwise(x, params.metric);
    let raw = nn_chain(&mut d, n, params.linkage);
    relabel(n, raw)
}

/// Returns `(slot_a, slot_b, height)` in chain order; the merged cluster
/// lives on in `slot_b`.
fn nn_chain(d: &mut [f64], n: usize, linkage: Linkage) -> Vec<(usize, usize, f64)> {
    let mut size = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        if chain.is_empty() {
            chain.push(active[0]);
        }
        let (a, b, h) = loop {
            let x = *chain.last().expect("non-empty chain");
            let (mut y, mut best) = if chain.len() > 1 {
                let p = chain[chain.len() - 2];
                (p, d[x * n + p])
            } else {
                (usize::MAX, f64::INFINITY)
            };
            for &i in &active {
                if i != x && d[x * n + i] < best {
                    best = d[x * n + i];
                    y = i;
                }
            }
            if chain.len() > 1 && y == chain[chain.len() - 2] {
                break (x, y, best);
            }
            chain.push(y);
        };
        chain.pop();
        chain.pop();
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for &k in &active {
            if k == a || k == b {
                continue;
            }
            let (dak, dbk) = (d[a * n + k], d[b * n + k]);
            let nk = size[k] as f64;
            let v = match linkage {
                Linkage::Single => dak.min(dbk),
                Linkage::Complete => dak.max(dbk),
                Linkage::Average => (na * dak + nb * dbk) / (na + nb),
                Linkage::Ward => (((na + nk) * dak * dak + (nb + nk) * dbk * dbk - nk * h * h)
                    / (na + nb + nk))
                    .max(0.0)
                    .sqrt(),
            };
            d[b * n + k] = v;
            d[k * n + b] = v;
        }
        size[b] += size[a];
        size[a] = 0;
        active.retain(|&i| i != a);
        out.push((a, b, h));
    }
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn relabel(n: usize, mut raw: Vec<(usize, usize, f64)>) -> Vec<Merge> {
    raw.sort_by(|p, q| p.2.total_cmp(&q.2));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    raw.into_iter()
        .enumerate()
        .map(|(step, (a, b, h))| {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            let (l, r) = (id[ra].min(id[rb]), id[ra].max(id[rb]));
            parent[ra] = rb;
            size[rb] += size[ra];
            id[rb] = n + step;
            Merge {
                left: l,
                right: r,
                height: h,
                size: size[rb],
            }
        })
        .collect()
}

/// Flat labels after the first `applied` merges.
fn cut(n: usize, merges: &[Merge], applied: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n + merges.len()).collect();
    for (step, m) in merges.iter().take(applied).enumerate() {
        parent[m.left] = n + step;
        parent[m.right] = n + step;
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::cluster::testutil::{column, same_partition};
    use crate::distance::Metric;

    fn run(
        x: &EmbeddingMatrix,
        metric: Metric,
        linkage: Linkage,
        stop: Stop,
    ) -> AgglomerativeResult {
        agglomerative(x, &AgglomerativeParams::new(metric, linkage, stop)).unwrap()
    }

    fn random(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect();
        EmbeddingMatrix::from_f64(n, d, &data).unwrap()
    }

    const ALL: [Linkage; 4] = [
        Linkage::Single,
        Linkage::Complete,
        Linkage::Average,
        Linkage::Ward,
    ];

    #[test]
    fn average_two_clusters() {
        let x = column(&[0.0, 1.0, 10.0]);
        let r = run(&x, Metric::L2, Linkage::Average, Stop::NClusters(2.into()));
        assert!(same_partition(r.assignment.labels(), &[0, 0, 1]));
    }

    #[test]
    fn single_threshold_two() {
        let x = column(&[0.0, 1.0, 10.0]);
        let r = run(
            &x,
            Metric::L2,
            Linkage::Single,
            Stop::DistanceThreshold(2.0),
        );
        assert_eq!(r.assignment.n_clusters(), 2);
        assert_eq!(r.n_merges_applied, 1);
    }

    #[test]
    fn threshold_is_strict() {
        let x = column(&[0.0, 1.0, 10.0]);
        let r = run(
            &x,
            Metric::L2,
            Linkage::Single,
            Stop::DistanceThreshold(1.0),
        );
        assert_eq!(r.assignment.n_clusters(), 3);
    }

    #[test]
    fn extreme_counts() {
        let x = random(12, 3, 1);
        for linkage in ALL {
            let all = run(&x, Metric::L2, linkage, Stop::NClusters(12.into()));
            assert_eq!(all.assignment.n_clusters(), 12);
            let one = run(&x, Metric::L2, linkage, Stop::NClusters(1.into()));
            assert_eq!(one.assignment.n_clusters(), 1);
        }
    }

    #[test]
    fn ward_heights_match_variance_increase() {
        // two pairs at distance 1 whose centroids are 10 apart
        let x = column(&[0.0, 1.0, 10.0, 11.0]);
        let r = run(&x, Metric::L2, Linkage::Ward, Stop::NClusters(1.into()));
        let h: Vec<f64> = r.merges.iter().map(|m| m.height).collect();
        assert!((h[0] - 1.0).abs() < 1e-12 && (h[1] - 1.0).abs() < 1e-12);
        // sqrt(2 * n_a n_b / (n_a + n_b)) * centroid distance
        assert!(
            (h[2] - 10.0 * (2.0f64 * 4.0 / 4.0).sqrt()).abs() < 1e-9,
            "{h:?}"
        );
    }

    #[test]
    fn heights_monotone_along_the_tree() {
        for seed in 0..10 {
            let x = random(40, 4, seed);
            for linkage in ALL {
                let r = run(&x, Metric::L2, linkage, Stop::NClusters(1.into()));
                let n = 40;
                for (i, m) in r.merges.iter().enumerate() {
                    for child in [m.left, m.right] {
                        if child >= n {
                            assert!(r.merges[child - n].height <= m.height + 1e-12);
                            assert!(child - n < i);
                        }
                    }
                }
                for w in r.merges.windows(2) {
                    assert!(w[0].height <= w[1].height);
                }
            }
        }
    }

    #[test]
    fn cosine_rejects_zero_rows() {
        let x = EmbeddingMatrix::from_f64(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let err = agglomerative(
            &x,
            &AgglomerativeParams::new(Metric::Cosine, Linkage::Average, Stop::NClusters(2.into())),
        );
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn count_cut_matches_threshold_cut() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..50 {
            let n = rng.random_range(5..30);
            let x = random(n, 3, 1000 + seed);
            let linkage = ALL[seed as usize % 4];
            let k = rng.random_range(1..n);
            let by_count = run(&x, Metric::L2, linkage, Stop::NClusters(k.into()));
            let h = &by_count.merges;
            let below = h[n - k - 1].height;
            let above = if n - k < h.len() {
                h[n - k].height
            } else {
                below + 1.0
            };
            assert!(above > below, "tied heights in a continuous instance");
            let t = 0.5 * (below + above);
            let by_threshold = run(&x, Metric::L2, linkage, Stop::DistanceThreshold(t));
            assert!(same_partition(
                by_count.assignment.labels(),
                by_threshold.assignment.labels()
            ));
        }
    }
}

use embclust_core::cluster::{
    agglomerative, hdbscan, AgglomerativeParams, HdbscanParams, Linkage, Stop,
};
use embclust_core::distance::Metric;
use embclust_core::embedspace::{
    load_embeddings, load_labels, save_array, EmbeddingMatrix, LabelVector, NoisePolicy,
};
use embclust_core::metrics::{ami, ari, nmi, silhouette};
use embclust_core::reduce::{pca_fit, standardize_for_threshold, zscore, PcaTarget};
use proptest::prelude::*;

const P: NoisePolicy = NoisePolicy::NoiseAsCluster;

fn label_pair() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(0i64..5, n),
            proptest::collection::vec(0i64..5, n),
        )
    })
}

fn points(max_n: usize, d: usize) -> impl Strategy<Value = EmbeddingMatrix> {
    (6usize..max_n).prop_flat_map(move |n| {
        proptest::collection::vec(-10.0f64..10.0, n * d)
            .prop_map(move |v| EmbeddingMatrix::from_f64(n, d, &v).unwrap())
    })
}

/// Same partition, noise (-1) matched to noise.
fn same_partition(a: &[i64], b: &[i64]) -> bool {
    use std::collections::HashMap;
    let (mut ab, mut ba) = (HashMap::new(), HashMap::new());
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            (*x < 0) == (*y < 0)
                && *ab.entry(*x).or_insert(*y) == *y
                && *ba.entry(*y).or_insert(*x) == *x
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_are_symmetric((u, v) in label_pair()) {
        prop_assert!((ami(&u, &v, P).unwrap() - ami(&v, &u, P).unwrap()).abs() < 1e-10);
        prop_assert!((nmi(&u, &v, P).unwrap() - nmi(&v, &u, P).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&u, &v, P).unwrap() - ari(&v, &u, P).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn scores_ignore_label_names((u, v) in label_pair(), shift in 1i64..100) {
        let renamed: Vec<i64> = v.iter().map(|l| (4 - l) * 7 + shift).collect();
        prop_assert!((ami(&u, &v, P).unwrap() - ami(&u, &renamed, P).unwrap()).abs() < 1e-10);
        prop_assert!((ari(&u, &v, P).unwrap() - ari(&u, &renamed, P).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn scores_ignore_sample_order((u, v) in label_pair(), rot in 0usize..40) {
        let r = rot % u.len();
        let (mut u2, mut v2) = (u.clone(), v.clone());
        u2.rotate_left(r);
        v2.rotate_left(r);
        prop_assert!((ami(&u, &v, P).unwrap() - ami(&u2, &v2, P).unwrap()).abs() < 1e-10);
        prop_assert!((nmi(&u, &v, P).unwrap() - nmi(&u2, &v2, P).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn nmi_in_unit_interval((u, v) in label_pair()) {
        let s = nmi(&u, &v, P).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!(ami(&u, &v, P).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn npy_round_trip(x in points(30, 3), labels in proptest::collection::vec(0i64..9, 30)) {
        let dir = tempfile::tempdir().unwrap();
        let xp = dir.path().join("x.npy");
        let lp = dir.path().join("y.npy");
        save_array(&x, &xp).unwrap();
        prop_assert_eq!(load_embeddings(&xp).unwrap(), x);
        let lv = LabelVector::new(labels.clone(), "y").unwrap();
        save_array(&lv, &lp).unwrap();
        let loaded = load_labels(&lp).unwrap();
        prop_assert_eq!(loaded.labels(), &labels[..]);
    }

    #[test]
    fn silhouette_bounded(x in points(30, 2), k in 2i64..4) {
        let labels: Vec<i64> = (0..x.n_samples() as i64).map(|i| i % k).collect();
        let s = silhouette(&x, &labels, Metric::L2).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn zscore_centres_columns(x in points(25, 3)) {
        let z = zscore(&x);
        for c in 0..3 {
            let mean: f64 = z.rows().map(|r| r[c] as f64).sum::<f64>() / z.n_samples() as f64;
            prop_assert!(mean.abs() < 1e-5);
        }
    }

    #[test]
    fn pca_variance_target_monotone(x in points(30, 5), a in 0.05f64..1.0, b in 0.05f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let k_lo = pca_fit(&x, PcaTarget::VarianceFraction(lo)).unwrap().n_components();
        let k_hi = pca_fit(&x, PcaTarget::VarianceFraction(hi)).unwrap().n_components();
        prop_assert!(k_lo <= k_hi);
    }

    #[test]
    fn agglomerative_row_order_invariant(x in points(25, 3), rot in 1usize..25, li in 0usize..4) {
        let linkage = [Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Ward][li];
        let n = x.n_samples();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let y = x.select_rows(&order).unwrap();
        let params = AgglomerativeParams::new(Metric::L2, linkage, Stop::NClusters(3.into()));
        let a = agglomerative(&x, &params).unwrap();
        let b = agglomerative(&y, &params).unwrap();
        let mut back = vec![0i64; n];
        for (pos, &orig) in order.iter().enumerate() {
            back[orig] = b.assignment.labels()[pos];
        }
        prop_assert!(same_partition(a.assignment.labels(), &back));
    }

    #[test]
    fn hdbscan_row_order_invariant(x in points(60, 2), rot in 1usize..60) {
        let n = x.n_samples();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let y = x.select_rows(&order).unwrap();
        let params = HdbscanParams { min_cluster_size: 3, max_cluster_size_fraction: 0.6, ..Default::default() };
        let a = hdbscan(&x, &params).unwrap();
        let b = hdbscan(&y, &params).unwrap();
        let mut back = vec![0i64; n];
        for (pos, &orig) in order.iter().enumerate() {
            back[orig] = b.assignment.labels()[pos];
        }
        prop_assert_eq!(a.assignment.n_noise(), b.assignment.n_noise());
        prop_assert!(same_partition(a.assignment.labels(), &back));
    }
}

/// Mean pairwise L2 distance after threshold standardization stays within a
/// factor of 2 across dimensionalities.
#[test]
fn threshold_standardization_comparable_across_dims() {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut means = Vec::new();
    for d in [16usize, 64, 256] {
        let data: Vec<f64> = (0..200 * d)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let x = EmbeddingMatrix::from_f64(200, d, &data).unwrap();
        let s = standardize_for_threshold(&x, Metric::L2).unwrap();
        let mut total = 0.0;
        let mut count = 0.0;
        for i in 0..200 {
            for j in i + 1..200 {
                total += Metric::L2.distance(s.row(i), s.row(j));
                count += 1.0;
            }
        }
        means.push(total / count);
    }
    let (lo, hi) = means
        .iter()
        .fold((f64::MAX, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
    assert!(hi / lo <= 2.0, "{means:?}");
}

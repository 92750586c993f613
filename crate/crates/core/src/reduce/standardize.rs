use crate::distance::Metric;
use crate::embedspace::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Per-column mean and standard deviation (`ddof` 0 or 1), in f64.
pub(crate) fn column_stats(x: &EmbeddingMatrix, ddof: usize) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.n_samples(), x.n_dims());
    let mut mean = vec![0.0f64; d];
    for r in x.rows() {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0f64; d];
    for r in x.rows() {
        for ((s, &v), m) in var.iter_mut().zip(r).zip(&mean) {
            let c = v as f64 - m;
            *s += c * c;
        }
    }
    let denom = n.saturating_sub(ddof).max(1) as f64;
    let std = var.into_iter().map(|s| (s / denom).sqrt()).collect();
    (mean, std)
}

/// Standardizes every column to mean 0 and sample standard deviation 1.
/// Zero-variance columns become all-zero.
pub fn zscore(x: &EmbeddingMatrix) -> EmbeddingMatrix {
    let (mean, std) = column_stats(x, 1);
    let d = x.n_dims();
    let data: Vec<f64> = x
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = i % d;
            if std[c] > 0.0 {
                (v as f64 - mean[c]) / std[c]
            } else {
                0.0
            }
        })
        .collect();
    EmbeddingMatrix::from_f64(x.n_samples(), d, &data).expect("finite by construction")
}

/// Centers each dimension, divides every dimension by the single average
/// per-dimension standard deviation, then by `D` for L1, `sqrt(D)` for L2.
/// Axis ratios are preserved.
pub fn standardize_for_threshold(x: &EmbeddingMatrix, metric: Metric) -> Result<EmbeddingMatrix> {
    let (mean, std) = column_stats(x, 0);
    let d = x.n_dims();
    let avg_std = std.iter().sum::<f64>() / d as f64;
    if avg_std.is_nan() || avg_std <= 0.0 {
        return Err(Error::Degenerate(
            "all dimensions have zero variance; cannot standardize".into(),
        ));
    }
    let dim_scale = match metric {
        Metric::L1 => d as f64,
        Metric::L2 => (d as f64).sqrt(),
        Metric::Linf | Metric::Cosine => 1.0,
    };
    let divisor = avg_std * dim_scale;
    let data: Vec<f64> = x
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v as f64 - mean[i % d]) / divisor)
        .collect();
    EmbeddingMatrix::from_f64(x.n_samples(), d, &data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(n: usize, d: usize, scales: &[f64], seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, 1.0).unwrap();
        let data: Vec<f64> = (0..n * d)
            .map(|i| z.sample(&mut rng) * scales[i % d] + 3.0)
            .collect();
        EmbeddingMatrix::from_f64(n, d, &data).unwrap()
    }

    #[test]
    fn zscore_column() {
        let x = EmbeddingMatrix::from_rows(&[[1.0f32, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        let z = zscore(&x);
        let (mean, std) = column_stats(&z, 1);
        assert!(mean[0].abs() < 1e-9 && (std[0] - 1.0).abs() < 1e-6);
        assert!(z.rows().all(|r| r[1] == 0.0));
        // columns handled independently
        assert!((z.row(0)[0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn threshold_l2_scaling() {
        let x = gaussian(20_000, 4, &[1.0; 4], 1);
        let s = standardize_for_threshold(&x, Metric::L2).unwrap();
        let (mean, std) = column_stats(&s, 0);
        for (m, sd) in mean.iter().zip(&std) {
            assert!(m.abs() < 1e-6);
            assert!((sd - 0.5).abs() < 0.02, "{}", sd);
        }
    }

    #[test]
    fn threshold_linf_only_normalizes() {
        let x = gaussian(5_000, 3, &[2.0; 3], 2);
        let s = standardize_for_threshold(&x, Metric::Linf).unwrap();
        let (_, std) = column_stats(&s, 0);
        let avg = std.iter().sum::<f64>() / 3.0;
        assert!((avg - 1.0).abs() < 1e-6);
    }

    #[test]
    fn threshold_preserves_axis_ratio() {
        let x = gaussian(5_000, 2, &[1.0, 4.0], 3);
        let (_, before) = column_stats(&x, 0);
        let s = standardize_for_threshold(&x, Metric::L1).unwrap();
        let (_, after) = column_stats(&s, 0);
        assert!(((before[1] / before[0]) - (after[1] / after[0])).abs() < 1e-5);
    }

    #[test]
    fn threshold_rejects_constant_data() {
        let x = EmbeddingMatrix::new(3, 2, vec![1.0; 6]).unwrap();
        assert!(matches!(
            standardize_for_threshold(&x, Metric::L2),
            Err(Error::Degenerate(_))
        ));
    }
}

//! Fits the low-dimensional membership curve `1 / (1 + a d^(2b))` to the
//! target produced by `spread` and `min_dist`.

const SAMPLES: usize = 300;

fn target(spread: f64, min_dist: f64) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..SAMPLES)
        .map(|i| spread * 3.0 * i as f64 / (SAMPLES - 1) as f64)
        .collect();
    let ys = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    (xs, ys)
}

fn model(x: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * x.powf(2.0 * b))
}

fn sse(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (model(x, a, b) - y).powi(2))
        .sum()
}

/// Least-squares `(a, b)` via Levenberg–Marquardt from `(1, 1)`.
pub fn fit_ab(spread: f64, min_dist: f64) -> (f64, f64) {
    let (xs, ys) = target(spread, min_dist);
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = sse(&xs, &ys, a, b);
    for _ in 0..500 {
        // normal equations J^T J and J^T r
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let p = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let denom = 1.0 + a * p;
            let f = 1.0 / denom;
            let r = f - y;
            let dfa = -p / (denom * denom);
            let dfb = if x > 0.0 {
                -a * p * 2.0 * x.ln() / (denom * denom)
            } else {
                0.0
            };
            jaa += dfa * dfa;
            jab += dfa * dfb;
            jbb += dfb * dfb;
            ga += dfa * r;
            gb += dfb * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let m_aa = jaa * (1.0 + lambda);
            let m_bb = jbb * (1.0 + lambda);
            let det = m_aa * m_bb - jab * jab;
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let da = -(m_bb * ga - jab * gb) / det;
            let db = -(m_aa * gb - jab * ga) / det;
            let (na, nb) = (a + da, b + db);
            let new_cost = if na > 0.0 && nb > 0.0 {
                sse(&xs, &ys, na, nb)
            } else {
                f64::INFINITY
            };
            if new_cost < cost {
                let rel = (cost - new_cost) / cost.max(1e-300);
                a = na;
                b = nb;
                cost = new_cost;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

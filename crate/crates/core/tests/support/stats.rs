//! Sampling and closed-form mixture helpers for threshold tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `n` draws from `Σ w·N(μ, σ²)` over `(w, μ, σ)` components.
pub fn mixture(seed: u64, n: usize, parts: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut taken = 0;
    for (k, &(w, mu, sd)) in parts.iter().enumerate() {
        let count = if k + 1 == parts.len() { n - taken } else { (w * n as f64).round() as usize };
        taken += count;
        let d = Normal::new(mu, sd).unwrap();
        out.extend((0..count).map(|_| d.sample(&mut rng)));
    }
    out
}

fn weighted_pdf(x: f64, (w, mu, sd): (f64, f64, f64)) -> f64 {
    w * (-(x - mu) * (x - mu) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Point between the two means where the weighted densities meet, by
/// bisection.
pub fn analytic_intersection(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    let f = |x: f64| weighted_pdf(x, a) - weighted_pdf(x, b);
    let (mut lo, mut hi) = (a.1, b.1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f(lo) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn mean_plus_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    m + (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

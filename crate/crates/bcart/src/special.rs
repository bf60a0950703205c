//! Special functions used by the closed-form leaf models.

pub use statrs::function::gamma::{digamma, gamma, ln_gamma};

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    static TABLE: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    let t = TABLE.get_or_init(|| (0..256).map(|k| ln_gamma(k as f64 + 1.0)).collect());
    match t.get(n as usize) {
        Some(&v) => v,
        None => ln_gamma(n as f64 + 1.0),
    }
}

/// `log A − ψ(A)`, the per-unit effective-parameter contribution of a
/// gamma-posterior block with shape `A`.
///
/// For large `A` the difference cancels catastrophically, so the asymptotic
/// series is used there.
pub fn log_minus_digamma(a: f64) -> f64 {
    if a > 1e3 {
        let a2 = a * a;
        1.0 / (2.0 * a) + 1.0 / (12.0 * a2) - 1.0 / (120.0 * a2 * a2)
    } else {
        a.ln() - digamma(a)
    }
}

/// Unbiased sample mean and variance.  `None` below two observations.
pub fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    if n < 2 {
        return None;
    }
    Some((mean, m2 / (n - 1) as f64))
}

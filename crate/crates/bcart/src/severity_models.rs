//! Average-severity leaf models.
//!
//! Each family splits its parameters into a moment-estimated part `θ_M`
//! (shape for gamma/Weibull, log-scale sd for lognormal) and a conjugate part
//! `θ_B` (rate, scale or log-mean) that is integrated out analytically.
//!
//! | family | density of `S̄`              | `θ_M` | `θ_B` prior          |
//! |--------|------------------------------|-------|----------------------|
//! | GammaN | `Gamma(Nα, Nβ)`              | `α`   | `β ~ Gamma(α_π,β_π)` |
//! | Gamma  | `Gamma(α, β)`                | `α`   | `β ~ Gamma(α_π,β_π)` |
//! | LN     | `LN(μ, σ²)`                  | `σ`   | `μ ~ N(μ_π, σ_π²)`   |
//! | Weib   | `(α/β) x^{α−1} e^{−x^α/β}`   | `α`   | `β ~ IG(α_π, β_π)`   |

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::special::{digamma, gamma, ln_gamma, log_minus_digamma, mean_var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityFamily {
    GammaN,
    Gamma,
    #[serde(rename = "ln")]
    LogNormal,
    #[serde(rename = "weib")]
    Weibull,
}

/// Hyperparameters for the `θ_B` priors of all four families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityPriors {
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub ln_mean: f64,
    pub ln_sd: f64,
    pub weib_shape: f64,
    pub weib_scale: f64,
}

impl Default for SeverityPriors {
    fn default() -> Self {
        Self { gamma_shape: 0.01, gamma_rate: 0.01, ln_mean: 0.0, ln_sd: 10.0, weib_shape: 2.0, weib_scale: 1.0 }
    }
}

impl SeverityPriors {
    pub fn validate(&self) -> Result<(), String> {
        let pos = [self.gamma_shape, self.gamma_rate, self.ln_sd, self.weib_shape, self.weib_scale];
        if pos.iter().any(|&x| !(x > 0.0 && x.is_finite())) || !self.ln_mean.is_finite() {
            return Err("severity prior hyperparameters must be positive and finite".into());
        }
        if self.weib_shape <= 1.0 {
            return Err("Weibull prior shape must exceed 1".into());
        }
        Ok(())
    }
}

/// One claimant as seen by a severity leaf: claim count and average severity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SevObs {
    pub n: f64,
    pub sbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmeError {
    TooFew,
    Degenerate,
    NoRoot,
}

fn weib_ratio_ln(a: f64) -> f64 {
    ln_gamma(1.0 + 2.0 / a) - 2.0 * ln_gamma(1.0 + 1.0 / a)
}

/// Weibull shape whose squared coefficient of variation equals `cv2`.
pub fn weibull_shape(cv2: f64) -> Result<f64, MmeError> {
    let target = (1.0 + cv2).ln();
    let solve = |lo: f64, hi: f64| -> Option<f64> {
        // ratio is decreasing in α; bisect on log α
        let (mut l, mut h) = (lo.ln(), hi.ln());
        let f = |la: f64| weib_ratio_ln(la.exp()) - target;
        if f(l) < 0.0 || f(h) > 0.0 {
            return None;
        }
        for _ in 0..200 {
            let m = 0.5 * (l + h);
            if f(m) > 0.0 {
                l = m;
            } else {
                h = m;
            }
            if h - l < 1e-15 {
                break;
            }
        }
        Some((0.5 * (l + h)).exp())
    };
    solve(0.02, 200.0).or_else(|| solve(0.002, 2000.0)).ok_or(MmeError::NoRoot)
}

/// Moment estimate of `θ_M` over the leaf's claimants.
pub fn mme_known_param(fam: SeverityFamily, obs: &[SevObs]) -> Result<f64, MmeError> {
    let (mean, var) = mean_var(obs.iter().map(|o| o.sbar)).ok_or(MmeError::TooFew)?;
    if !(var > 0.0) || !(mean > 0.0) {
        return Err(MmeError::Degenerate);
    }
    let cv2 = var / (mean * mean);
    Ok(match fam {
        SeverityFamily::GammaN => {
            let nbar = obs.iter().map(|o| o.n).sum::<f64>() / obs.len() as f64;
            1.0 / (cv2 * nbar)
        }
        SeverityFamily::Gamma => 1.0 / cv2,
        SeverityFamily::LogNormal => cv2.ln_1p().sqrt(),
        SeverityFamily::Weibull => weibull_shape(cv2)?,
    })
}

fn weight(fam: SeverityFamily, o: &SevObs) -> f64 {
    if fam == SeverityFamily::GammaN {
        o.n
    } else {
        1.0
    }
}

/// Posterior law of `θ_B` in a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SevPosterior {
    /// `β ~ Gamma(shape, rate)`.
    Gamma { shape: f64, rate: f64 },
    /// `μ ~ N(mean, var)`.
    Normal { mean: f64, var: f64 },
    /// `β ~ InvGamma(shape, scale)`.
    InvGamma { shape: f64, scale: f64 },
}

impl SevPosterior {
    pub fn mean(&self) -> f64 {
        match *self {
            SevPosterior::Gamma { shape, rate } => shape / rate,
            SevPosterior::Normal { mean, .. } => mean,
            SevPosterior::InvGamma { shape, scale } => scale / (shape - 1.0),
        }
    }
}

pub fn posterior_params(fam: SeverityFamily, obs: &[SevObs], pr: &SeverityPriors, theta_m: f64) -> SevPosterior {
    match fam {
        SeverityFamily::GammaN | SeverityFamily::Gamma => {
            let (mut a, mut b) = (pr.gamma_shape, pr.gamma_rate);
            for o in obs {
                let w = weight(fam, o);
                a += w * theta_m;
                b += w * o.sbar;
            }
            SevPosterior::Gamma { shape: a, rate: b }
        }
        SeverityFamily::LogNormal => {
            let s2 = theta_m * theta_m;
            let p2 = pr.ln_sd * pr.ln_sd;
            let n = obs.len() as f64;
            let var = s2 * p2 / (n * p2 + s2);
            let sy: f64 = obs.iter().map(|o| o.sbar.ln()).sum();
            SevPosterior::Normal { mean: var * (pr.ln_mean / p2 + sy / s2), var }
        }
        SeverityFamily::Weibull => {
            let s: f64 = obs.iter().map(|o| o.sbar.powf(theta_m)).sum();
            SevPosterior::InvGamma { shape: obs.len() as f64 + pr.weib_shape, scale: s + pr.weib_scale }
        }
    }
}

/// Log density of one observation at `(θ_M, θ_B)`.
pub fn log_density(fam: SeverityFamily, o: &SevObs, theta_m: f64, theta_b: f64) -> f64 {
    let x = o.sbar;
    match fam {
        SeverityFamily::GammaN | SeverityFamily::Gamma => {
            let w = weight(fam, o);
            let (a, b) = (w * theta_m, w * theta_b);
            a * b.ln() - ln_gamma(a) + (a - 1.0) * x.ln() - b * x
        }
        SeverityFamily::LogNormal => {
            let s = theta_m;
            let z = (x.ln() - theta_b) / s;
            -x.ln() - s.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
        }
        SeverityFamily::Weibull => {
            let a = theta_m;
            a.ln() - theta_b.ln() + (a - 1.0) * x.ln() - x.powf(a) / theta_b
        }
    }
}

/// Log of the leaf's marginal likelihood with `θ_B` integrated out.
pub fn integrated_log_lik(fam: SeverityFamily, obs: &[SevObs], pr: &SeverityPriors, theta_m: f64) -> f64 {
    match fam {
        SeverityFamily::GammaN | SeverityFamily::Gamma => {
            let (a0, b0) = (pr.gamma_shape, pr.gamma_rate);
            let mut c = a0 * b0.ln() - ln_gamma(a0);
            let (mut a, mut b) = (a0, b0);
            for o in obs {
                let w = weight(fam, o);
                let k = w * theta_m;
                c += k * w.ln() + (k - 1.0) * o.sbar.ln() - ln_gamma(k);
                a += k;
                b += w * o.sbar;
            }
            c + ln_gamma(a) - a * b.ln()
        }
        SeverityFamily::LogNormal => {
            let s2 = theta_m * theta_m;
            let p2 = pr.ln_sd * pr.ln_sd;
            let n = obs.len() as f64;
            let (mut sy, mut syy, mut slx) = (0.0, 0.0, 0.0);
            for o in obs {
                let y = o.sbar.ln();
                sy += y;
                syy += y * y;
                slx += y;
            }
            let var = s2 * p2 / (n * p2 + s2);
            let mean = var * (pr.ln_mean / p2 + sy / s2);
            -slx - 0.5 * n * s2.ln() - 0.5 * n * (2.0 * PI).ln() + 0.5 * var.ln() - pr.ln_sd.ln() - syy / (2.0 * s2)
                - pr.ln_mean * pr.ln_mean / (2.0 * p2)
                + mean * mean / (2.0 * var)
        }
        SeverityFamily::Weibull => {
            let (a0, b0) = (pr.weib_shape, pr.weib_scale);
            let a = theta_m;
            let n = obs.len() as f64;
            let (mut slx, mut sxa) = (0.0, 0.0);
            for o in obs {
                slx += o.sbar.ln();
                sxa += o.sbar.powf(a);
            }
            a0 * b0.ln() - ln_gamma(a0) + n * a.ln() + (a - 1.0) * slx + ln_gamma(n + a0) - (n + a0) * (sxa + b0).ln()
        }
    }
}

/// Fitted summary of one severity leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityLeafFit {
    pub family: SeverityFamily,
    pub theta_m: f64,
    pub posterior: SevPosterior,
    pub theta_b: f64,
    pub n_obs: usize,
    /// Mean claim count over the leaf's claimants.
    pub n_mean: f64,
    pub dic: f64,
    pub p_d: f64,
}

/// `p_D` of the leaf in closed form (`1 +` the `θ_B` contribution).
pub fn p_d(fam: SeverityFamily, obs: &[SevObs], pr: &SeverityPriors, theta_m: f64) -> f64 {
    let post = posterior_params(fam, obs, pr, theta_m);
    1.0 + match (fam, post) {
        (SeverityFamily::GammaN | SeverityFamily::Gamma, SevPosterior::Gamma { shape, .. }) => {
            let k: f64 = obs.iter().map(|o| weight(fam, o) * theta_m).sum();
            2.0 * log_minus_digamma(shape) * k
        }
        (SeverityFamily::LogNormal, _) => {
            let n = obs.len() as f64;
            let p2 = pr.ln_sd * pr.ln_sd;
            n * p2 / (n * p2 + theta_m * theta_m)
        }
        (SeverityFamily::Weibull, SevPosterior::InvGamma { shape, scale }) => {
            let c = (shape - 1.0).ln() - digamma(shape);
            obs.iter().map(|o| 2.0 * (c + o.sbar.powf(theta_m) / scale)).sum()
        }
        _ => unreachable!("posterior law matches family"),
    }
}

/// `(DIC_t, p_Dt)` with the deviance evaluated at the posterior mean.
pub fn dic_t(fam: SeverityFamily, obs: &[SevObs], pr: &SeverityPriors, theta_m: f64) -> (f64, f64) {
    let tb = posterior_params(fam, obs, pr, theta_m).mean();
    let d = -2.0 * obs.iter().map(|o| log_density(fam, o, theta_m, tb)).sum::<f64>();
    let pd = p_d(fam, obs, pr, theta_m);
    (d + 2.0 * pd, pd)
}

pub fn fit_leaf(fam: SeverityFamily, obs: &[SevObs], pr: &SeverityPriors) -> Result<SeverityLeafFit, MmeError> {
    let theta_m = mme_known_param(fam, obs)?;
    let posterior = posterior_params(fam, obs, pr, theta_m);
    let (dic, p_d) = dic_t(fam, obs, pr, theta_m);
    let n_mean = obs.iter().map(|o| o.n).sum::<f64>() / obs.len() as f64;
    Ok(SeverityLeafFit { family: fam, theta_m, posterior, theta_b: posterior.mean(), n_obs: obs.len(), n_mean, dic, p_d })
}

/// Expected average severity under the fitted leaf.
pub fn predict_severity(fit: &SeverityLeafFit) -> f64 {
    let (a, b) = (fit.theta_m, fit.theta_b);
    match fit.family {
        SeverityFamily::GammaN | SeverityFamily::Gamma => a / b,
        SeverityFamily::LogNormal => (b + a * a / 2.0).exp(),
        SeverityFamily::Weibull => b.powf(1.0 / a) * gamma(1.0 + 1.0 / a),
    }
}

/// Model variance of the average severity; `n_mean` only enters GammaN.
pub fn model_variance(fit: &SeverityLeafFit, n_mean: f64) -> f64 {
    let (a, b) = (fit.theta_m, fit.theta_b);
    match fit.family {
        SeverityFamily::GammaN => a / (n_mean * b * b),
        SeverityFamily::Gamma => a / (b * b),
        SeverityFamily::LogNormal => (a * a).exp_m1() * (2.0 * b + a * a).exp(),
        SeverityFamily::Weibull => {
            let g1 = gamma(1.0 + 1.0 / a);
            b.powf(2.0 / a) * (gamma(1.0 + 2.0 / a) - g1 * g1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(n: f64, sbar: f64) -> SevObs {
        SevObs { n, sbar }
    }

    #[test]
    fn mme_examples() {
        let obs = [o(1.0, 1.0), o(1.0, 3.0)];
        assert_eq!(mme_known_param(SeverityFamily::GammaN, &obs).unwrap(), 2.0);
        assert!(mme_known_param(SeverityFamily::Gamma, &[o(1.0, 2.0), o(1.0, 2.0)]).is_err());
        assert!((weibull_shape(1.0).unwrap() - 1.0).abs() < 1e-9);
        // lognormal moment inversion: cv² = e − 1 gives σ̂² = 1
        let cv2 = std::f64::consts::E - 1.0;
        let s = cv2.ln_1p().sqrt();
        assert!((s * s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn integrated_examples() {
        let one = [o(1.0, 1.0)];
        let pr = SeverityPriors { gamma_shape: 1.0, gamma_rate: 1.0, weib_shape: 2.0, weib_scale: 1.0, ..Default::default() };
        let l = integrated_log_lik(SeverityFamily::GammaN, &one, &pr, 1.0);
        assert!((l + 4f64.ln()).abs() < 1e-14);
        let l = integrated_log_lik(SeverityFamily::Weibull, &one, &pr, 1.0);
        assert!((l - 0.25f64.ln()).abs() < 1e-14);
        let post = posterior_params(SeverityFamily::GammaN, &one, &pr, 1.0);
        assert_eq!(post.mean(), 1.0);
        let pd = p_d(SeverityFamily::GammaN, &one, &pr, 1.0);
        assert!((pd - (1.0 + 2.0 * (2f64.ln() - digamma(2.0)))).abs() < 1e-14);
        assert!((pd - 1.540_725_690_922_956).abs() < 1e-12);
    }

    #[test]
    fn empty_node_returns_prior() {
        let pr = SeverityPriors { gamma_shape: 2.0, gamma_rate: 1.0, ..Default::default() };
        assert_eq!(posterior_params(SeverityFamily::Gamma, &[], &pr, 1.0).mean(), 2.0);
    }

    #[test]
    fn ln_flat_prior_limit() {
        let obs = [o(1.0, 2.0), o(1.0, 5.0), o(1.0, 9.0)];
        let pr = SeverityPriors { ln_sd: 1e8, ..Default::default() };
        let m = posterior_params(SeverityFamily::LogNormal, &obs, &pr, 0.7).mean();
        let ybar = obs.iter().map(|o| o.sbar.ln()).sum::<f64>() / 3.0;
        assert!((m - ybar).abs() < 1e-9);
    }

    fn fit(family: SeverityFamily, theta_m: f64, theta_b: f64) -> SeverityLeafFit {
        SeverityLeafFit {
            family,
            theta_m,
            posterior: SevPosterior::Gamma { shape: 1.0, rate: 1.0 },
            theta_b,
            n_obs: 1,
            n_mean: 1.0,
            dic: 0.0,
            p_d: 1.0,
        }
    }

    #[test]
    fn predictions_and_variances() {
        assert_eq!(predict_severity(&fit(SeverityFamily::Gamma, 2.0, 4.0)), 0.5);
        assert!((predict_severity(&fit(SeverityFamily::LogNormal, 1e-9, 0.0)) - 1.0).abs() < 1e-12);
        assert!((predict_severity(&fit(SeverityFamily::Weibull, 1.0, 3.0)) - 3.0).abs() < 1e-12);
        assert_eq!(model_variance(&fit(SeverityFamily::GammaN, 1.0, 1.0), 2.0), 0.5);
        assert!(model_variance(&fit(SeverityFamily::LogNormal, 1e-9, 0.0), 1.0) < 1e-15);
        assert!((model_variance(&fit(SeverityFamily::Weibull, 1.0, 1.0), 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ln_pd_limit_is_two() {
        let pr = SeverityPriors::default();
        let obs: Vec<SevObs> = (0..1_000_000).map(|i| o(1.0, 1.0 + (i % 7) as f64)).collect();
        assert!((p_d(SeverityFamily::LogNormal, &obs, &pr, 1.0) - 2.0).abs() < 1e-4);
    }

    #[test]
    fn dic_matches_density_recomputation() {
        let obs = [o(1.0, 120.0), o(2.0, 300.0), o(1.0, 75.0)];
        let pr = SeverityPriors::default();
        let a = mme_known_param(SeverityFamily::GammaN, &obs).unwrap();
        let (dic, pd) = dic_t(SeverityFamily::GammaN, &obs, &pr, a);
        let b = posterior_params(SeverityFamily::GammaN, &obs, &pr, a).mean();
        let mut d = 0.0;
        for x in &obs {
            let (k, r) = (x.n * a, x.n * b);
            d += k * r.ln() - ln_gamma(k) + (k - 1.0) * x.sbar.ln() - r * x.sbar;
        }
        assert!((dic - (-2.0 * d + 2.0 * pd)).abs() < 1e-12 * dic.abs());
    }
}

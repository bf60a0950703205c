//! Joint `(N, S)` leaf models: compound Poisson-gamma (CPG) and its
//! zero-inflated extension (ZICPG1/2/3).
//!
//! Given `N > 0`, `S ~ Gamma(Nα, β)`; `α` is moment-estimated from the leaf's
//! claimants, while `λ`, `β` (and `μ` for ZICPG) carry gamma priors and are
//! integrated out.

use serde::{Deserialize, Serialize};

use crate::frequency_models::{zi_sums, CountPriors, FreqObs, Latent, ZiVariant};
use crate::severity_models::{mme_known_param, MmeError, SevObs, SeverityFamily};
use crate::special::{ln_factorial, ln_gamma, log_minus_digamma};

pub use crate::frequency_models::sample_latent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JointFamily {
    Cpg,
    Zicpg(ZiVariant),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointObs {
    pub v: f64,
    pub n: u32,
    pub s: f64,
}

fn freq_obs(obs: &[JointObs]) -> Vec<FreqObs> {
    obs.iter().map(|o| FreqObs { v: o.v, n: o.n }).collect()
}

/// Moment estimate of `α` over the claimants, using the GammaN form.
pub fn alpha_hat(obs: &[JointObs]) -> Result<f64, MmeError> {
    let pos: Vec<SevObs> =
        obs.iter().filter(|o| o.n > 0).map(|o| SevObs { n: o.n as f64, sbar: o.s / o.n as f64 }).collect();
    mme_known_param(SeverityFamily::GammaN, &pos)
}

fn log_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Observed-data density of `(N, S)` under ZICPG with weights `(w, u)`.
pub fn zicpg_density(n: u32, s: f64, mu: f64, lambda: f64, alpha: f64, beta: f64, w: f64, u: f64) -> Result<f64, String> {
    let mw = mu * w;
    match (n, s) {
        (0, s) if s == 0.0 => Ok(1.0 / (1.0 + mw) + mw / (1.0 + mw) * (-lambda * u).exp()),
        (0, _) => Err("positive amount with zero count".into()),
        (_, s) if s <= 0.0 => Err("non-positive amount with positive count".into()),
        (n, s) => {
            let m = lambda * u;
            let lp = (mw / (1.0 + mw)).ln() + n as f64 * m.ln() - m - ln_factorial(n as u64)
                + log_gamma_pdf(s, n as f64 * alpha, beta);
            Ok(lp.exp())
        }
    }
}

/// Augmented density of `(N, S, δ, φ)`.
#[allow(clippy::too_many_arguments)]
pub fn augmented_density(
    n: u32,
    s: f64,
    lat: Latent,
    mu: f64,
    lambda: f64,
    alpha: f64,
    beta: f64,
    w: f64,
    u: f64,
) -> Result<f64, String> {
    if n > 0 && !lat.delta {
        return Err("δ = 0 with a positive count".into());
    }
    if !(lat.phi > 0.0) {
        return Err("φ must be positive".into());
    }
    if (n == 0) != (s == 0.0) {
        return Err("count and amount disagree on a claim".into());
    }
    let mw = mu * w;
    let mut lp = -lat.phi * (1.0 + mw);
    if lat.delta {
        let m = lambda * u;
        lp += mw.ln() + n as f64 * m.ln() - m - ln_factorial(n as u64);
    }
    if n > 0 {
        lp += log_gamma_pdf(s, n as f64 * alpha, beta);
    }
    Ok(lp.exp())
}

/// `Σ_{N>0} Nα` and `Σ_{N>0} S`.
fn beta_sums(obs: &[JointObs], alpha: f64) -> (f64, f64, f64) {
    let (mut k, mut s, mut c) = (0.0, 0.0, 0.0);
    for o in obs.iter().filter(|o| o.n > 0) {
        let a = o.n as f64 * alpha;
        k += a;
        s += o.s;
        c += (a - 1.0) * o.s.ln() - ln_gamma(a);
    }
    (k, s, c)
}

/// Log of the leaf's integrated (augmented, for ZICPG) likelihood.
pub fn joint_integrated_log_lik(fam: JointFamily, obs: &[JointObs], pr: &CountPriors, alpha: f64, lat: &[Latent]) -> f64 {
    let (k, s, c) = beta_sums(obs, alpha);
    let beta_block = c + pr.beta.log_normaliser_ratio(k, s);
    let count_block = match fam {
        JointFamily::Cpg => {
            let (mut sn, mut sv, mut d) = (0.0, 0.0, 0.0);
            for o in obs {
                sn += o.n as f64;
                sv += o.v;
                if o.n > 0 {
                    d += o.n as f64 * o.v.ln() - ln_factorial(o.n as u64);
                }
            }
            d + pr.lambda.log_normaliser_ratio(sn, sv)
        }
        JointFamily::Zicpg(var) => {
            let z = zi_sums(var, &freq_obs(obs), lat);
            z.data_term
                + pr.mu.log_normaliser_ratio(z.sum_delta, z.sum_phi_w)
                + pr.lambda.log_normaliser_ratio(z.sum_delta_n, z.sum_delta_u)
        }
    };
    count_block + beta_block
}

/// Posterior gamma laws `(shape, rate)` of each block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPosterior {
    pub mu: Option<(f64, f64)>,
    pub lambda: (f64, f64),
    pub beta: (f64, f64),
}

pub fn joint_posterior(fam: JointFamily, obs: &[JointObs], pr: &CountPriors, alpha: f64, lat: &[Latent]) -> JointPosterior {
    let (k, s, _) = beta_sums(obs, alpha);
    let beta = (pr.beta.shape + k, pr.beta.rate + s);
    match fam {
        JointFamily::Cpg => {
            let sn: f64 = obs.iter().map(|o| o.n as f64).sum();
            let sv: f64 = obs.iter().map(|o| o.v).sum();
            JointPosterior { mu: None, lambda: (pr.lambda.shape + sn, pr.lambda.rate + sv), beta }
        }
        JointFamily::Zicpg(var) => {
            let z = zi_sums(var, &freq_obs(obs), lat);
            JointPosterior {
                mu: Some((pr.mu.shape + z.sum_delta, pr.mu.rate + z.sum_phi_w)),
                lambda: (pr.lambda.shape + z.sum_delta_n, pr.lambda.rate + z.sum_delta_u),
                beta,
            }
        }
    }
}

/// `(μ̄, λ̄, β̄)`; `μ̄` is `None` for CPG.
pub fn joint_posterior_params(
    fam: JointFamily,
    obs: &[JointObs],
    pr: &CountPriors,
    alpha: f64,
    lat: &[Latent],
) -> (Option<f64>, f64, f64) {
    let p = joint_posterior(fam, obs, pr, alpha, lat);
    (p.mu.map(|(a, b)| a / b), p.lambda.0 / p.lambda.1, p.beta.0 / p.beta.1)
}

/// Observed-data log density of one record at the given parameters.
pub fn joint_log_density(fam: JointFamily, o: &JointObs, mu: Option<f64>, lambda: f64, alpha: f64, beta: f64) -> f64 {
    let sev = if o.n > 0 { log_gamma_pdf(o.s, o.n as f64 * alpha, beta) } else { 0.0 };
    let count = match fam {
        JointFamily::Cpg => {
            let m = lambda * o.v;
            o.n as f64 * m.ln() - m - ln_factorial(o.n as u64)
        }
        JointFamily::Zicpg(var) => {
            let (w, u) = var.wu(o.v);
            let mw = mu.expect("zero-inflated fit") * w;
            let m = lambda * u;
            if o.n == 0 {
                (1.0 / (1.0 + mw) + mw / (1.0 + mw) * (-m).exp()).ln()
            } else {
                (mw / (1.0 + mw)).ln() + o.n as f64 * m.ln() - m - ln_factorial(o.n as u64)
            }
        }
    };
    count + sev
}

pub fn joint_p_d(fam: JointFamily, obs: &[JointObs], pr: &CountPriors, alpha: f64, lat: &[Latent]) -> f64 {
    let p = joint_posterior(fam, obs, pr, alpha, lat);
    let (k, _, _) = beta_sums(obs, alpha);
    let beta_term = 2.0 * log_minus_digamma(p.beta.0) * k;
    let count_term = match fam {
        JointFamily::Cpg => {
            let sn: f64 = obs.iter().map(|o| o.n as f64).sum();
            2.0 * log_minus_digamma(p.lambda.0) * sn
        }
        JointFamily::Zicpg(var) => {
            let z = zi_sums(var, &freq_obs(obs), lat);
            2.0 * log_minus_digamma(p.mu.expect("zero-inflated").0) * z.sum_delta
                + 2.0 * log_minus_digamma(p.lambda.0) * z.sum_delta_n
        }
    };
    1.0 + count_term + beta_term
}

pub fn joint_dic_t(fam: JointFamily, obs: &[JointObs], pr: &CountPriors, alpha: f64, lat: &[Latent]) -> (f64, f64) {
    let (mu, lambda, beta) = joint_posterior_params(fam, obs, pr, alpha, lat);
    let d = -2.0 * obs.iter().map(|o| joint_log_density(fam, o, mu, lambda, alpha, beta)).sum::<f64>();
    let pd = joint_p_d(fam, obs, pr, alpha, lat);
    (d + 2.0 * pd, pd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLeafFit {
    pub family: JointFamily,
    pub alpha: f64,
    pub posterior: JointPosterior,
    pub mu: Option<f64>,
    pub lambda: f64,
    pub beta: f64,
    pub n_obs: usize,
    pub dic: f64,
    pub p_d: f64,
    /// Pure premium per policy-year.
    pub premium: f64,
}

pub fn fit_leaf(fam: JointFamily, obs: &[JointObs], pr: &CountPriors, lat: &[Latent]) -> Result<JointLeafFit, MmeError> {
    let alpha = alpha_hat(obs)?;
    let posterior = joint_posterior(fam, obs, pr, alpha, lat);
    let (mu, lambda, beta) = joint_posterior_params(fam, obs, pr, alpha, lat);
    let (dic, p_d) = joint_dic_t(fam, obs, pr, alpha, lat);
    let mut f = JointLeafFit { family: fam, alpha, posterior, mu, lambda, beta, n_obs: obs.len(), dic, p_d, premium: 0.0 };
    f.premium = premium_per_year(&f);
    Ok(f)
}

/// `μ̄λ̄α̂ / (β̄(1+μ̄))` for ZICPG, `λ̄α̂/β̄` for CPG.
pub fn premium_per_year(f: &JointLeafFit) -> f64 {
    match f.family {
        JointFamily::Cpg => f.lambda * f.alpha / f.beta,
        JointFamily::Zicpg(_) => {
            let mu = f.mu.expect("zero-inflated fit");
            mu * f.lambda * f.alpha / (f.beta * (1.0 + mu))
        }
    }
}

/// Expected aggregate claim of a record with exposure `v`.
pub fn premium(f: &JointLeafFit, v: f64) -> f64 {
    match f.family {
        JointFamily::Cpg => f.lambda * v * f.alpha / f.beta,
        JointFamily::Zicpg(var) => {
            let (w, u) = var.wu(v);
            let mw = f.mu.expect("zero-inflated fit") * w;
            mw / (1.0 + mw) * f.lambda * u * f.alpha / f.beta
        }
    }
}

/// Per-year variance of the aggregate claim used as the DS weight.
pub fn ds_variance(f: &JointLeafFit) -> f64 {
    let (l, a, b) = (f.lambda, f.alpha, f.beta);
    match f.family {
        JointFamily::Cpg => l * a * (1.0 + a) / (b * b),
        JointFamily::Zicpg(_) => {
            let m = f.mu.expect("zero-inflated fit");
            m * l * a * (1.0 + a + m + a * m + a * l) / ((1.0 + m) * b * b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_with(fam: JointFamily, mu: Option<f64>, lambda: f64, alpha: f64, beta: f64) -> JointLeafFit {
        let p = JointPosterior { mu: None, lambda: (1.0, 1.0), beta: (1.0, 1.0) };
        JointLeafFit { family: fam, alpha, posterior: p, mu, lambda, beta, n_obs: 1, dic: 0.0, p_d: 1.0, premium: 0.0 }
    }

    #[test]
    fn density_examples() {
        let d = zicpg_density(0, 0.0, 1.0, 2f64.ln(), 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((d - 0.75).abs() < 1e-15);
        let d = zicpg_density(1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((d - 0.5 * (-2f64).exp()).abs() < 1e-15);
        assert!((zicpg_density(0, 0.0, 3.0, 0.0, 1.0, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(zicpg_density(0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        let lat = Latent { delta: false, phi: 0.4 };
        assert!(augmented_density(1, 1.0, lat, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        let a = augmented_density(0, 0.0, lat, 1.5, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((a - (-0.4f64 * 2.5).exp()).abs() < 1e-15);
    }

    #[test]
    fn integrated_examples() {
        let pr = CountPriors::unit();
        let one = [JointObs { v: 1.0, n: 0, s: 0.0 }];
        let lat = [Latent { delta: false, phi: 0.3 }];
        let l = joint_integrated_log_lik(JointFamily::Zicpg(ZiVariant::Three), &one, &pr, 1.0, &lat);
        assert!((l - ((-0.3f64).exp() / 1.3).ln()).abs() < 1e-14);
        let one = [JointObs { v: 1.0, n: 1, s: 2.0 }];
        let l = joint_integrated_log_lik(JointFamily::Cpg, &one, &pr, 1.0, &[]);
        assert!((l - (1.0f64 / 36.0).ln()).abs() < 1e-14);
        let (_, _, b) = joint_posterior_params(JointFamily::Cpg, &one, &pr, 1.0, &[]);
        assert!((b - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn posterior_means() {
        let pr = CountPriors::unit();
        let (mu, l, b) = joint_posterior_params(JointFamily::Zicpg(ZiVariant::One), &[], &pr, 1.0, &[]);
        assert_eq!((mu, l, b), (Some(1.0), 1.0, 1.0));
        let obs = [JointObs { v: 1.0, n: 1, s: 2.0 }, JointObs { v: 1.0, n: 2, s: 5.0 }];
        let lat = [Latent { delta: true, phi: 0.5 }, Latent { delta: true, phi: 0.5 }];
        let (mu, _, _) = joint_posterior_params(JointFamily::Zicpg(ZiVariant::One), &obs, &pr, 1.0, &lat);
        assert_eq!(mu, Some(1.5));
    }

    #[test]
    fn empty_claims_pd_is_one() {
        let pr = CountPriors::unit();
        let obs = [JointObs { v: 1.0, n: 0, s: 0.0 }];
        let lat = [Latent { delta: false, phi: 0.3 }];
        assert_eq!(joint_p_d(JointFamily::Zicpg(ZiVariant::Two), &obs, &pr, 1.0, &lat), 1.0);
    }

    #[test]
    fn premium_and_variance_examples() {
        let z = fit_with(JointFamily::Zicpg(ZiVariant::Three), Some(1.0), 2.0, 3.0, 4.0);
        assert!((premium_per_year(&z) - 0.75).abs() < 1e-15);
        let c = fit_with(JointFamily::Cpg, None, 0.2, 1.0, 0.005);
        assert!((premium(&c, 1.0) - 40.0).abs() < 1e-12);
        let z1 = fit_with(JointFamily::Zicpg(ZiVariant::One), Some(1.0), 2.0, 3.0, 4.0);
        assert_eq!(premium(&z1, 0.0), 0.0);
        let z = fit_with(JointFamily::Zicpg(ZiVariant::Three), Some(1.0), 1.0, 1.0, 1.0);
        assert!((ds_variance(&z) - 2.5).abs() < 1e-15);
        let c = fit_with(JointFamily::Cpg, None, 1.0, 1.0, 1.0);
        assert_eq!(ds_variance(&c), 2.0);
        let c = fit_with(JointFamily::Cpg, None, 1.0, 1.0, 1e12);
        assert!(ds_variance(&c) < 1e-20);
    }
}

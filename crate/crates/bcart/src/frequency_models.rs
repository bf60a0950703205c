//! Claim-count leaf models: Poisson with an exposure offset, and zero-inflated
//! Poisson in three exposure embeddings.
//!
//! The zero-inflated law has a structural zero with probability `1/(1+μw)` and
//! otherwise `Poisson(λu)`.  It is handled through the augmentation
//! `f(N, δ, φ) = e^{−φ(1+μw)} [μw (λu)^N e^{−λu} / N!]^δ`, which turns both `μ`
//! and `λ` into conjugate gamma blocks given the latents `(δ, φ)`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::special::{ln_factorial, ln_gamma, log_minus_digamma};

/// How exposure enters the zero-inflation weight `w` and the Poisson mean `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZiVariant {
    /// `w = 1`, `u = v`.
    One,
    /// `w = v`, `u = 1`.
    Two,
    /// `w = u = v`.
    Three,
}

impl ZiVariant {
    pub fn wu(self, v: f64) -> (f64, f64) {
        match self {
            ZiVariant::One => (1.0, v),
            ZiVariant::Two => (v, 1.0),
            ZiVariant::Three => (v, v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrequencyFamily {
    Poisson,
    Zip(ZiVariant),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub const fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    /// `log ∫ θ^{a−1+k} e^{−θ(b+r)} b^a/Γ(a) dθ` for data counts `k` and rate mass `r`.
    pub fn log_normaliser_ratio(&self, k: f64, r: f64) -> f64 {
        let (a, b) = (self.shape, self.rate);
        a * b.ln() - ln_gamma(a) + ln_gamma(a + k) - (a + k) * (b + r).ln()
    }
}

/// Gamma priors on `μ` (zero inflation), `λ` (Poisson rate) and `β` (gamma rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountPriors {
    pub mu: GammaPrior,
    pub lambda: GammaPrior,
    pub beta: GammaPrior,
}

impl Default for CountPriors {
    fn default() -> Self {
        let g = GammaPrior::new(0.01, 0.01);
        Self { mu: g, lambda: g, beta: g }
    }
}

impl CountPriors {
    pub fn unit() -> Self {
        let g = GammaPrior::new(1.0, 1.0);
        Self { mu: g, lambda: g, beta: g }
    }

    pub fn validate(&self) -> Result<(), String> {
        for g in [self.mu, self.lambda, self.beta] {
            if !(g.shape > 0.0 && g.rate > 0.0 && g.shape.is_finite() && g.rate.is_finite()) {
                return Err("gamma prior hyperparameters must be positive and finite".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqObs {
    pub v: f64,
    pub n: u32,
}

/// Augmentation latents of one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub delta: bool,
    pub phi: f64,
}

impl Default for Latent {
    fn default() -> Self {
        Self { delta: true, phi: 1.0 }
    }
}

/// Draws `(δ, φ)` for one record given `μw` and `λu`.
pub fn sample_latent<R: Rng + ?Sized>(n: u32, mu_w: f64, lambda_u: f64, rng: &mut R) -> Latent {
    let delta = if n > 0 {
        true
    } else {
        let t = mu_w * (-lambda_u).exp();
        rng.gen::<f64>() < t / (1.0 + t)
    };
    let phi = Exp::new(1.0 + mu_w).expect("positive rate").sample(rng);
    Latent { delta, phi }
}

/// Sufficient statistics of the two gamma blocks given latents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ZiSums {
    pub sum_delta: f64,
    pub sum_phi_w: f64,
    pub sum_delta_n: f64,
    pub sum_delta_u: f64,
    /// `Σ [δ (log w + N log u − log N!) − φ]`.
    pub data_term: f64,
}

pub fn zi_sums(var: ZiVariant, obs: &[FreqObs], lat: &[Latent]) -> ZiSums {
    let mut z = ZiSums::default();
    for (o, l) in obs.iter().zip(lat) {
        let (w, u) = var.wu(o.v);
        z.sum_phi_w += l.phi * w;
        z.data_term -= l.phi;
        if l.delta {
            z.sum_delta += 1.0;
            z.sum_delta_n += o.n as f64;
            z.sum_delta_u += u;
            z.data_term += w.ln();
            if o.n > 0 {
                z.data_term += o.n as f64 * u.ln() - ln_factorial(o.n as u64);
            }
        }
    }
    z
}

/// Posterior gamma laws `(shape, rate)` of `μ` (zero-inflated only) and `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqPosterior {
    pub mu: Option<(f64, f64)>,
    pub lambda: (f64, f64),
}

impl FreqPosterior {
    pub fn mu_mean(&self) -> Option<f64> {
        self.mu.map(|(a, b)| a / b)
    }

    pub fn lambda_mean(&self) -> f64 {
        self.lambda.0 / self.lambda.1
    }
}

pub fn freq_posterior(fam: FrequencyFamily, obs: &[FreqObs], pr: &CountPriors, lat: &[Latent]) -> FreqPosterior {
    match fam {
        FrequencyFamily::Poisson => {
            let sn: f64 = obs.iter().map(|o| o.n as f64).sum();
            let sv: f64 = obs.iter().map(|o| o.v).sum();
            FreqPosterior { mu: None, lambda: (pr.lambda.shape + sn, pr.lambda.rate + sv) }
        }
        FrequencyFamily::Zip(var) => {
            let z = zi_sums(var, obs, lat);
            FreqPosterior {
                mu: Some((pr.mu.shape + z.sum_delta, pr.mu.rate + z.sum_phi_w)),
                lambda: (pr.lambda.shape + z.sum_delta_n, pr.lambda.rate + z.sum_delta_u),
            }
        }
    }
}

/// Log integrated (augmented, for ZIP) likelihood of a count leaf.
pub fn freq_integrated_log_lik(fam: FrequencyFamily, obs: &[FreqObs], pr: &CountPriors, lat: &[Latent]) -> f64 {
    match fam {
        FrequencyFamily::Poisson => {
            let (mut sn, mut sv, mut c) = (0.0, 0.0, 0.0);
            for o in obs {
                sn += o.n as f64;
                sv += o.v;
                if o.n > 0 {
                    c += o.n as f64 * o.v.ln() - ln_factorial(o.n as u64);
                }
            }
            c + pr.lambda.log_normaliser_ratio(sn, sv)
        }
        FrequencyFamily::Zip(var) => {
            let z = zi_sums(var, obs, lat);
            z.data_term
                + pr.mu.log_normaliser_ratio(z.sum_delta, z.sum_phi_w)
                + pr.lambda.log_normaliser_ratio(z.sum_delta_n, z.sum_delta_u)
        }
    }
}

/// Observed-data log pmf of a count.
pub fn log_pmf(fam: FrequencyFamily, n: u32, v: f64, mu: f64, lambda: f64) -> f64 {
    match fam {
        FrequencyFamily::Poisson => {
            let m = lambda * v;
            n as f64 * m.ln() - m - ln_factorial(n as u64)
        }
        FrequencyFamily::Zip(var) => {
            let (w, u) = var.wu(v);
            let mw = mu * w;
            let m = lambda * u;
            if n == 0 {
                (1.0 / (1.0 + mw) + mw / (1.0 + mw) * (-m).exp()).ln()
            } else {
                (mw / (1.0 + mw)).ln() + n as f64 * m.ln() - m - ln_factorial(n as u64)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyLeafFit {
    pub family: FrequencyFamily,
    pub posterior: FreqPosterior,
    pub mu: Option<f64>,
    pub lambda: f64,
    pub sums: ZiSums,
    pub n_obs: usize,
    pub dic: f64,
    pub p_d: f64,
}

/// Effective number of parameters; there is no moment-estimated parameter,
/// hence no leading 1.
pub fn freq_p_d(fam: FrequencyFamily, obs: &[FreqObs], pr: &CountPriors, lat: &[Latent]) -> f64 {
    let post = freq_posterior(fam, obs, pr, lat);
    match fam {
        FrequencyFamily::Poisson => {
            let sn: f64 = obs.iter().map(|o| o.n as f64).sum();
            2.0 * log_minus_digamma(post.lambda.0) * sn
        }
        FrequencyFamily::Zip(var) => {
            let z = zi_sums(var, obs, lat);
            let (am, _) = post.mu.expect("zero-inflated posterior");
            2.0 * log_minus_digamma(am) * z.sum_delta + 2.0 * log_minus_digamma(post.lambda.0) * z.sum_delta_n
        }
    }
}

pub fn freq_dic_t(fam: FrequencyFamily, obs: &[FreqObs], pr: &CountPriors, lat: &[Latent]) -> (f64, f64) {
    let post = freq_posterior(fam, obs, pr, lat);
    let (mu, lambda) = (post.mu_mean().unwrap_or(f64::INFINITY), post.lambda_mean());
    let d = -2.0 * obs.iter().map(|o| log_pmf(fam, o.n, o.v, mu, lambda)).sum::<f64>();
    let pd = freq_p_d(fam, obs, pr, lat);
    (d + 2.0 * pd, pd)
}

pub fn fit_leaf(fam: FrequencyFamily, obs: &[FreqObs], pr: &CountPriors, lat: &[Latent]) -> FrequencyLeafFit {
    let posterior = freq_posterior(fam, obs, pr, lat);
    let sums = match fam {
        FrequencyFamily::Zip(var) => zi_sums(var, obs, lat),
        FrequencyFamily::Poisson => ZiSums::default(),
    };
    let (dic, p_d) = freq_dic_t(fam, obs, pr, lat);
    FrequencyLeafFit {
        family: fam,
        posterior,
        mu: posterior.mu_mean(),
        lambda: posterior.lambda_mean(),
        sums,
        n_obs: obs.len(),
        dic,
        p_d,
    }
}

/// Mean and variance of the claim count at exposure `v`.
pub fn count_moments(fam: FrequencyFamily, mu: Option<f64>, lambda: f64, v: f64) -> (f64, f64) {
    match fam {
        FrequencyFamily::Poisson => (lambda * v, lambda * v),
        FrequencyFamily::Zip(var) => {
            let (w, u) = var.wu(v);
            let mw = mu.expect("zero-inflated fit") * w;
            let p = mw / (1.0 + mw);
            let m = lambda * u;
            (p * m, p * m * (1.0 + m - p * m))
        }
    }
}

pub fn predict_frequency(fit: &FrequencyLeafFit, v: f64) -> f64 {
    count_moments(fit.family, fit.mu, fit.lambda, v).0
}

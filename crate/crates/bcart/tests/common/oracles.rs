//! Quadrature and Monte Carlo oracles for the leaf likelihoods.
//!
//! Densities and conjugate updates are written out here from scratch (with
//! `statrs` for the special functions) so the checks do not share code with
//! the closed forms they test.

use bcart::frequency_models::{self as fm, CountPriors, FreqObs, FrequencyFamily, GammaPrior, Latent, ZiVariant};
use bcart::joint_models::{self as jm, JointFamily, JointObs};
use bcart::severity_models::{self as sm, SevObs, SeverityFamily, SeverityPriors};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn ln_fact(n: u32) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub fn gamma_lpdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

fn inv_gamma_lpdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

fn normal_lpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

fn poisson_lpmf(n: u32, m: f64) -> f64 {
    n as f64 * m.ln() - m - ln_fact(n)
}

/// Log density of one average severity at `(θ_M, θ_B)`.
pub fn sev_lpdf(fam: SeverityFamily, o: &SevObs, tm: f64, tb: f64) -> f64 {
    let x = o.sbar;
    match fam {
        SeverityFamily::GammaN => gamma_lpdf(x, o.n * tm, o.n * tb),
        SeverityFamily::Gamma => gamma_lpdf(x, tm, tb),
        SeverityFamily::LogNormal => normal_lpdf(x.ln(), tb, tm) - x.ln(),
        // f(x) = (α/β) x^{α−1} exp(−x^α/β)
        SeverityFamily::Weibull => tm.ln() - tb.ln() + (tm - 1.0) * x.ln() - x.powf(tm) / tb,
    }
}

fn sev_prior_lpdf(fam: SeverityFamily, pr: &SeverityPriors, tb: f64) -> f64 {
    match fam {
        SeverityFamily::GammaN | SeverityFamily::Gamma => gamma_lpdf(tb, pr.gamma_shape, pr.gamma_rate),
        SeverityFamily::LogNormal => normal_lpdf(tb, pr.ln_mean, pr.ln_sd),
        SeverityFamily::Weibull => inv_gamma_lpdf(tb, pr.weib_shape, pr.weib_scale),
    }
}

/// Augmented log density of one `(N, δ, φ)` given `(μ, λ)`.
fn zi_aug_lpdf(var: ZiVariant, o: &FreqObs, l: &Latent, mu: f64, lambda: f64) -> f64 {
    let (w, u) = match var {
        ZiVariant::One => (1.0, o.v),
        ZiVariant::Two => (o.v, 1.0),
        ZiVariant::Three => (o.v, o.v),
    };
    let mut lp = -l.phi * (1.0 + mu * w);
    if l.delta {
        lp += (mu * w).ln() + poisson_lpmf(o.n, lambda * u);
    }
    lp
}

fn amount_lpdf(o: &JointObs, alpha: f64, beta: f64) -> f64 {
    if o.n > 0 {
        gamma_lpdf(o.s, o.n as f64 * alpha, beta)
    } else {
        0.0
    }
}

fn finite_or_floor(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// `log ∫_{−∞}^{∞} exp(g(t)) dt` for a unimodal `g`: locate the mode (coarse
/// grid over `[lo, hi]`, then ternary search), bracket the mass where `g` is
/// within 60 nats of it, and integrate three pieces with double-exponential
/// quadrature.
pub fn log_integral(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let cells = 200;
    let h0 = (hi - lo) / cells as f64;
    let best = (0..=cells).map(|i| lo + i as f64 * h0).max_by(|x, y| finite_or_floor(g(*x)).total_cmp(&finite_or_floor(g(*y)))).unwrap_or(lo);
    let (mut a, mut b) = (best - h0, best + h0);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if g(m1) < g(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let c = 0.5 * (a + b);
    let gc = g(c);
    let h = 1e-3;
    let curv = -(g(c + h) - 2.0 * gc + g(c - h)) / (h * h);
    let s = if curv > 0.0 { curv.sqrt().recip() } else { 1.0 };
    let reach = |dir: f64| {
        let mut step = s;
        while g(c + dir * step) - gc > -60.0 && step < 1e4 {
            step *= 2.0;
        }
        c + dir * step
    };
    let (l, r) = (reach(-1.0), reach(1.0));
    let f = |t: f64| (g(t) - gc).exp();
    let pieces = [(l, c - s), (c - s, c + s), (c + s, r)];
    let total: f64 = pieces.iter().map(|&(x, y)| quadrature::integrate(&f, x, y, 1e-14).integral).sum();
    gc + total.ln()
}

/// `log ∫_0^∞ exp(L(θ)) dθ`, integrated on `t = ln θ`.
pub fn log_integral_positive(l: impl Fn(f64) -> f64) -> f64 {
    log_integral(|t| l(t.exp()) + t, -700.0, 700.0)
}

/// Quadrature value of a severity leaf's integrated log likelihood.
pub fn quad_severity(fam: SeverityFamily, obs: &[SevObs], pr: &SeverityPriors, tm: f64) -> f64 {
    let l = |tb: f64| sev_prior_lpdf(fam, pr, tb) + obs.iter().map(|o| sev_lpdf(fam, o, tm, tb)).sum::<f64>();
    match fam {
        SeverityFamily::LogNormal => log_integral(l, pr.ln_mean - 100.0, pr.ln_mean + 100.0),
        _ => log_integral_positive(l),
    }
}

/// Quadrature value of a Poisson leaf.
pub fn quad_poisson(obs: &[FreqObs], pr: &CountPriors) -> f64 {
    log_integral_positive(|lam| {
        gamma_lpdf(lam, pr.lambda.shape, pr.lambda.rate) + obs.iter().map(|o| poisson_lpmf(o.n, lam * o.v)).sum::<f64>()
    })
}

fn quad_beta_block(obs: &[JointObs], pr: &CountPriors, alpha: f64) -> f64 {
    log_integral_positive(|b| gamma_lpdf(b, pr.beta.shape, pr.beta.rate) + obs.iter().map(|o| amount_lpdf(o, alpha, b)).sum::<f64>())
}

/// Quadrature value of a CPG leaf: the λ and β integrals separate.
pub fn quad_cpg(obs: &[JointObs], pr: &CountPriors, alpha: f64) -> f64 {
    let fo: Vec<FreqObs> = obs.iter().map(|o| FreqObs { v: o.v, n: o.n }).collect();
    quad_poisson(&fo, pr) + quad_beta_block(obs, pr, alpha)
}

/// Quadrature value of a ZICPG leaf given latents: nested 2-D quadrature over
/// `(μ, λ)` times the β integral.
pub fn quad_zicpg(var: ZiVariant, obs: &[JointObs], pr: &CountPriors, alpha: f64, lat: &[Latent]) -> f64 {
    let fo: Vec<FreqObs> = obs.iter().map(|o| FreqObs { v: o.v, n: o.n }).collect();
    let inner = |mu: f64| {
        log_integral_positive(|lam| {
            gamma_lpdf(mu, pr.mu.shape, pr.mu.rate)
                + gamma_lpdf(lam, pr.lambda.shape, pr.lambda.rate)
                + fo.iter().zip(lat).map(|(o, l)| zi_aug_lpdf(var, o, l, mu, lam)).sum::<f64>()
        })
    };
    log_integral_positive(inner) + quad_beta_block(obs, pr, alpha)
}

/// A random positive number in `[lo, hi)`.
fn unif(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

pub fn random_severity_priors(rng: &mut ChaCha8Rng) -> SeverityPriors {
    SeverityPriors {
        gamma_shape: unif(rng, 0.5, 3.0),
        gamma_rate: unif(rng, 0.5, 3.0),
        ln_mean: unif(rng, 2.0, 6.0),
        ln_sd: unif(rng, 0.5, 3.0),
        weib_shape: unif(rng, 1.5, 4.0),
        weib_scale: unif(rng, 0.5, 3.0),
    }
}

pub fn random_count_priors(rng: &mut ChaCha8Rng) -> CountPriors {
    let mut g = || GammaPrior::new(unif(rng, 0.5, 3.0), unif(rng, 0.5, 3.0));
    CountPriors { mu: g(), lambda: g(), beta: g() }
}

/// 2–5 claimants with distinct average severities.
pub fn random_sev_node(rng: &mut ChaCha8Rng) -> Vec<SevObs> {
    let k = rng.gen_range(2..=5);
    (0..k).map(|_| SevObs { n: rng.gen_range(1..=4) as f64, sbar: unif(rng, 20.0, 500.0) }).collect()
}

/// 1–5 records of exposure in (0.1, 1] and counts 0..=5.
pub fn random_freq_node(rng: &mut ChaCha8Rng) -> Vec<FreqObs> {
    let k = rng.gen_range(1..=5);
    (0..k).map(|_| FreqObs { v: unif(rng, 0.1, 1.0), n: rng.gen_range(0..=5) }).collect()
}

/// 3–5 records with at least two claimants of distinct amount per claim.
pub fn random_joint_node(rng: &mut ChaCha8Rng) -> Vec<JointObs> {
    let k = rng.gen_range(3..=5);
    (0..k)
        .map(|i| {
            let n = if i < 2 { rng.gen_range(1..=4) } else { rng.gen_range(0..=3) };
            let s = if n > 0 { n as f64 * unif(rng, 20.0, 500.0) } else { 0.0 };
            JointObs { v: unif(rng, 0.1, 1.0), n, s }
        })
        .collect()
}

/// Latents consistent with the counts: `δ = 1` for claimants.
pub fn random_latents(rng: &mut ChaCha8Rng, counts: &[u32]) -> Vec<Latent> {
    counts.iter().map(|&n| Latent { delta: n > 0 || rng.gen_bool(0.5), phi: unif(rng, 0.05, 3.0) }).collect()
}

/// Families covered by the conjugacy oracle.
pub const CONJUGACY_FAMILIES: [&str; 7] = ["gamman", "gamma", "ln", "weib", "poisson", "cpg", "zicpg3"];

fn sev_family(name: &str) -> SeverityFamily {
    match name {
        "gamman" => SeverityFamily::GammaN,
        "gamma" => SeverityFamily::Gamma,
        "ln" => SeverityFamily::LogNormal,
        "weib" => SeverityFamily::Weibull,
        _ => unreachable!(),
    }
}

fn zi_variant(name: &str) -> ZiVariant {
    match name.chars().last() {
        Some('1') => ZiVariant::One,
        Some('2') => ZiVariant::Two,
        _ => ZiVariant::Three,
    }
}

/// Largest `|closed form − quadrature|` of the log integrated likelihood over
/// `nodes` random nodes (equivalently the relative error of the likelihood).
pub fn conjugacy_max_error(family: &str, nodes: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..nodes {
        let (closed, quad) = match family {
            "gamman" | "gamma" | "ln" | "weib" => {
                let fam = sev_family(family);
                let pr = random_severity_priors(rng);
                let obs = random_sev_node(rng);
                let tm = sm::mme_known_param(fam, &obs).expect("distinct severities");
                (sm::integrated_log_lik(fam, &obs, &pr, tm), quad_severity(fam, &obs, &pr, tm))
            }
            "poisson" => {
                let pr = random_count_priors(rng);
                let obs = random_freq_node(rng);
                (fm::freq_integrated_log_lik(FrequencyFamily::Poisson, &obs, &pr, &[]), quad_poisson(&obs, &pr))
            }
            "cpg" => {
                let pr = random_count_priors(rng);
                let obs = random_joint_node(rng);
                let alpha = jm::alpha_hat(&obs).expect("two claimants");
                (jm::joint_integrated_log_lik(JointFamily::Cpg, &obs, &pr, alpha, &[]), quad_cpg(&obs, &pr, alpha))
            }
            zi => {
                let var = zi_variant(zi);
                let pr = random_count_priors(rng);
                let obs = random_joint_node(rng);
                let lat = random_latents(rng, &obs.iter().map(|o| o.n).collect::<Vec<_>>());
                let alpha = jm::alpha_hat(&obs).expect("two claimants");
                (
                    jm::joint_integrated_log_lik(JointFamily::Zicpg(var), &obs, &pr, alpha, &lat),
                    quad_zicpg(var, &obs, &pr, alpha, &lat),
                )
            }
        };
        worst = worst.max((closed - quad).abs());
    }
    worst
}

/// `Σ_δ ∫ f_aug(N, S, δ, φ) dφ` using the library's augmented density and the
/// analytic φ integral `∫ e^{−φ(1+μw)} dφ = 1/(1+μw)`.
#[allow(clippy::too_many_arguments)]
pub fn marginalised_augmented(n: u32, s: f64, mu: f64, lambda: f64, alpha: f64, beta: f64, w: f64, u: f64) -> f64 {
    let phi0 = 0.7;
    let c = 1.0 + mu * w;
    [false, true]
        .iter()
        .filter_map(|&delta| jm::augmented_density(n, s, Latent { delta, phi: phi0 }, mu, lambda, alpha, beta, w, u).ok())
        .map(|f| f * (phi0 * c).exp() / c)
        .sum()
}

// ---------------------------------------------------------------------------
// p_D Monte Carlo.

fn draw_gamma(rng: &mut ChaCha8Rng, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).unwrap().sample(rng)
}

/// Families whose closed-form p_D is checked by Monte Carlo.
pub const PD_FAMILIES: [&str; 12] =
    ["gamman", "gamma", "ln", "weib", "poisson", "zip1", "zip2", "zip3", "cpg", "zicpg1", "zicpg2", "zicpg3"];

/// `(closed form, Monte Carlo)` p_D for one random node: the Monte Carlo
/// value is `D̄ − D(θ̄)` over `draws` posterior draws of `θ_B` (plus one for
/// the moment-estimated parameter of severity and joint leaves).
pub fn pd_pair(family: &str, draws: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match family {
        "gamman" | "gamma" | "ln" | "weib" => {
            let fam = sev_family(family);
            let pr = random_severity_priors(rng);
            let obs = random_sev_node(rng);
            let tm = sm::mme_known_param(fam, &obs).unwrap();
            let dev = |tb: f64| -2.0 * obs.iter().map(|o| sev_lpdf(fam, o, tm, tb)).sum::<f64>();
            // Conjugate posterior of θ_B, derived independently.
            let (mean, dbar) = match fam {
                SeverityFamily::GammaN | SeverityFamily::Gamma => {
                    let w = |o: &SevObs| if fam == SeverityFamily::GammaN { o.n } else { 1.0 };
                    let a = pr.gamma_shape + obs.iter().map(|o| w(o) * tm).sum::<f64>();
                    let b = pr.gamma_rate + obs.iter().map(|o| w(o) * o.sbar).sum::<f64>();
                    (a / b, (0..draws).map(|_| dev(draw_gamma(rng, a, b))).sum::<f64>() / draws as f64)
                }
                SeverityFamily::LogNormal => {
                    let (s2, p2) = (tm * tm, pr.ln_sd * pr.ln_sd);
                    let prec = 1.0 / p2 + obs.len() as f64 / s2;
                    let m = (pr.ln_mean / p2 + obs.iter().map(|o| o.sbar.ln()).sum::<f64>() / s2) / prec;
                    let nd = Normal::new(m, prec.recip().sqrt()).unwrap();
                    (m, (0..draws).map(|_| dev(nd.sample(rng))).sum::<f64>() / draws as f64)
                }
                SeverityFamily::Weibull => {
                    let a = pr.weib_shape + obs.len() as f64;
                    let b = pr.weib_scale + obs.iter().map(|o| o.sbar.powf(tm)).sum::<f64>();
                    // β ~ IG(a, b)  ⇔  1/β ~ Gamma(a, rate b)
                    (b / (a - 1.0), (0..draws).map(|_| dev(1.0 / draw_gamma(rng, a, b))).sum::<f64>() / draws as f64)
                }
            };
            (sm::p_d(fam, &obs, &pr, tm), 1.0 + dbar - dev(mean))
        }
        "poisson" | "zip1" | "zip2" | "zip3" => {
            let pr = random_count_priors(rng);
            let obs = random_freq_node(rng);
            if family == "poisson" {
                let a = pr.lambda.shape + obs.iter().map(|o| o.n as f64).sum::<f64>();
                let b = pr.lambda.rate + obs.iter().map(|o| o.v).sum::<f64>();
                let dev = |l: f64| -2.0 * obs.iter().map(|o| poisson_lpmf(o.n, l * o.v)).sum::<f64>();
                let dbar = (0..draws).map(|_| dev(draw_gamma(rng, a, b))).sum::<f64>() / draws as f64;
                (fm::freq_p_d(FrequencyFamily::Poisson, &obs, &pr, &[]), dbar - dev(a / b))
            } else {
                let var = zi_variant(family);
                let lat = random_latents(rng, &obs.iter().map(|o| o.n).collect::<Vec<_>>());
                let ((am, bm), (al, bl)) = zi_posterior(var, &obs, &lat, &pr);
                let dev = |mu: f64, l: f64| -2.0 * obs.iter().zip(&lat).map(|(o, z)| zi_aug_lpdf(var, o, z, mu, l)).sum::<f64>();
                let dbar = (0..draws).map(|_| dev(draw_gamma(rng, am, bm), draw_gamma(rng, al, bl))).sum::<f64>() / draws as f64;
                (fm::freq_p_d(FrequencyFamily::Zip(var), &obs, &pr, &lat), dbar - dev(am / bm, al / bl))
            }
        }
        _ => {
            let pr = random_count_priors(rng);
            let obs = random_joint_node(rng);
            let alpha = jm::alpha_hat(&obs).unwrap();
            let ab = pr.beta.shape + obs.iter().map(|o| o.n as f64 * alpha).sum::<f64>();
            let bb = pr.beta.rate + obs.iter().map(|o| o.s).sum::<f64>();
            let amt = |b: f64| -2.0 * obs.iter().map(|o| amount_lpdf(o, alpha, b)).sum::<f64>();
            let fo: Vec<FreqObs> = obs.iter().map(|o| FreqObs { v: o.v, n: o.n }).collect();
            if family == "cpg" {
                let a = pr.lambda.shape + obs.iter().map(|o| o.n as f64).sum::<f64>();
                let b = pr.lambda.rate + obs.iter().map(|o| o.v).sum::<f64>();
                let cnt = |l: f64| -2.0 * fo.iter().map(|o| poisson_lpmf(o.n, l * o.v)).sum::<f64>();
                let dbar = (0..draws).map(|_| cnt(draw_gamma(rng, a, b)) + amt(draw_gamma(rng, ab, bb))).sum::<f64>() / draws as f64;
                (jm::joint_p_d(JointFamily::Cpg, &obs, &pr, alpha, &[]), 1.0 + dbar - cnt(a / b) - amt(ab / bb))
            } else {
                let var = zi_variant(family);
                let lat = random_latents(rng, &obs.iter().map(|o| o.n).collect::<Vec<_>>());
                let ((am, bm), (al, bl)) = zi_posterior(var, &fo, &lat, &pr);
                let cnt = |mu: f64, l: f64| -2.0 * fo.iter().zip(&lat).map(|(o, z)| zi_aug_lpdf(var, o, z, mu, l)).sum::<f64>();
                let dbar = (0..draws)
                    .map(|_| cnt(draw_gamma(rng, am, bm), draw_gamma(rng, al, bl)) + amt(draw_gamma(rng, ab, bb)))
                    .sum::<f64>()
                    / draws as f64;
                (
                    jm::joint_p_d(JointFamily::Zicpg(var), &obs, &pr, alpha, &lat),
                    1.0 + dbar - cnt(am / bm, al / bl) - amt(ab / bb),
                )
            }
        }
    }
}

/// Gamma posteriors `(shape, rate)` of `μ` and `λ` given latents.
fn zi_posterior(var: ZiVariant, obs: &[FreqObs], lat: &[Latent], pr: &CountPriors) -> ((f64, f64), (f64, f64)) {
    let (mut am, mut bm, mut al, mut bl) = (pr.mu.shape, pr.mu.rate, pr.lambda.shape, pr.lambda.rate);
    for (o, z) in obs.iter().zip(lat) {
        let (w, u) = match var {
            ZiVariant::One => (1.0, o.v),
            ZiVariant::Two => (o.v, 1.0),
            ZiVariant::Three => (o.v, o.v),
        };
        bm += z.phi * w;
        if z.delta {
            am += 1.0;
            al += o.n as f64;
            bl += u;
        }
    }
    ((am, bm), (al, bl))
}

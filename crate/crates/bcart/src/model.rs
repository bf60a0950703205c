//! Dispatch from a model family to its leaf machinery, plus the columnar view
//! of a dataset that trees are grown on.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, Normal};
use serde::{Deserialize, Serialize};

use crate::data_model::{average_severity, severity_subset, Dataset, EncodingTarget};
use crate::error::{BcartError, Result};
use crate::frequency_models::{self as fm, CountPriors, FreqObs, FrequencyFamily, FrequencyLeafFit, Latent, ZiVariant};
use crate::joint_models::{self as jm, JointFamily, JointLeafFit, JointObs};
use crate::severity_models::{self as sm, SevObs, SevPosterior, SeverityFamily, SeverityLeafFit, SeverityPriors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Family {
    Severity(SeverityFamily),
    Frequency(FrequencyFamily),
    Joint(JointFamily),
}

impl Family {
    pub const ALL: [&'static str; 12] =
        ["gamman", "gamma", "ln", "weib", "poisson", "zip1", "zip2", "zip3", "cpg", "zicpg1", "zicpg2", "zicpg3"];

    pub fn is_severity(self) -> bool {
        matches!(self, Family::Severity(_))
    }

    pub fn needs_latents(self) -> bool {
        matches!(self, Family::Frequency(FrequencyFamily::Zip(_)) | Family::Joint(JointFamily::Zicpg(_)))
    }

    pub fn zi_variant(self) -> Option<ZiVariant> {
        match self {
            Family::Frequency(FrequencyFamily::Zip(v)) | Family::Joint(JointFamily::Zicpg(v)) => Some(v),
            _ => None,
        }
    }

    /// Severity trees encode categories by amount per claim, all others by
    /// claims per unit exposure.
    pub fn encoding_target(self) -> EncodingTarget {
        if self.is_severity() {
            EncodingTarget::Severity
        } else {
            EncodingTarget::Frequency
        }
    }

    /// Claimants each child must keep so the moment estimates stay defined.
    pub fn min_positive(self) -> usize {
        match self {
            Family::Frequency(_) => 0,
            _ => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Severity(SeverityFamily::GammaN) => "gamman",
            Family::Severity(SeverityFamily::Gamma) => "gamma",
            Family::Severity(SeverityFamily::LogNormal) => "ln",
            Family::Severity(SeverityFamily::Weibull) => "weib",
            Family::Frequency(FrequencyFamily::Poisson) => "poisson",
            Family::Frequency(FrequencyFamily::Zip(ZiVariant::One)) => "zip1",
            Family::Frequency(FrequencyFamily::Zip(ZiVariant::Two)) => "zip2",
            Family::Frequency(FrequencyFamily::Zip(ZiVariant::Three)) => "zip3",
            Family::Joint(JointFamily::Cpg) => "cpg",
            Family::Joint(JointFamily::Zicpg(ZiVariant::One)) => "zicpg1",
            Family::Joint(JointFamily::Zicpg(ZiVariant::Two)) => "zicpg2",
            Family::Joint(JointFamily::Zicpg(ZiVariant::Three)) => "zicpg3",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = BcartError;

    fn from_str(s: &str) -> Result<Self> {
        use ZiVariant::*;
        Ok(match s.to_ascii_lowercase().as_str() {
            "gamman" => Family::Severity(SeverityFamily::GammaN),
            "gamma" => Family::Severity(SeverityFamily::Gamma),
            "ln" | "lognormal" => Family::Severity(SeverityFamily::LogNormal),
            "weib" | "weibull" => Family::Severity(SeverityFamily::Weibull),
            "poisson" => Family::Frequency(FrequencyFamily::Poisson),
            "zip1" => Family::Frequency(FrequencyFamily::Zip(One)),
            "zip2" => Family::Frequency(FrequencyFamily::Zip(Two)),
            "zip3" => Family::Frequency(FrequencyFamily::Zip(Three)),
            "cpg" => Family::Joint(JointFamily::Cpg),
            "zicpg1" => Family::Joint(JointFamily::Zicpg(One)),
            "zicpg2" => Family::Joint(JointFamily::Zicpg(Two)),
            "zicpg3" => Family::Joint(JointFamily::Zicpg(Three)),
            other => {
                return Err(BcartError::Config(format!("unknown family `{other}` (expected one of {:?})", Family::ALL)))
            }
        })
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for Family {
    type Error = BcartError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub severity_priors: SeverityPriors,
    #[serde(default)]
    pub count_priors: CountPriors,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self { family, severity_priors: SeverityPriors::default(), count_priors: CountPriors::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.severity_priors.validate().map_err(BcartError::Config)?;
        self.count_priors.validate().map_err(BcartError::Config)
    }
}

/// A dataset laid out by column for tree growing.  Severity families only
/// see claimants.
#[derive(Debug, Clone)]
pub struct FitData {
    pub ds: Dataset,
    /// `x[j][i]`: numeric value or level index.
    pub x: Vec<Vec<f64>>,
    pub n_levels: Vec<Option<usize>>,
    pub target: EncodingTarget,
    /// Root fallback scores per categorical covariate (the global ratio).
    pub global_scores: Vec<Vec<f64>>,
    pub positive: Vec<bool>,
    /// Record indices sorted by value, per numeric covariate (empty for
    /// categorical ones).
    pub order: Vec<Vec<u32>>,
}

impl FitData {
    pub fn new(ds: &Dataset, family: Family) -> Result<Self> {
        let ds = if family.is_severity() { severity_subset(ds)? } else { ds.clone() };
        if family.min_positive() > 0 && ds.n_positive() < family.min_positive() {
            return Err(BcartError::Degenerate(format!(
                "{family} needs at least {} positive claims, found {}",
                family.min_positive(),
                ds.n_positive()
            )));
        }
        let p = ds.spec.len();
        let x: Vec<Vec<f64>> = (0..p).map(|j| ds.records.iter().map(|r| r.x[j]).collect()).collect();
        let n_levels: Vec<Option<usize>> = ds.spec.iter().map(|c| c.n_levels()).collect();
        let target = family.encoding_target();
        let g = crate::data_model::global_score(&ds, target);
        let global_scores = n_levels.iter().map(|k| k.map(|k| vec![g; k]).unwrap_or_default()).collect();
        let positive = ds.records.iter().map(|r| r.n > 0).collect();
        let order = x
            .iter()
            .zip(&n_levels)
            .map(|(col, k)| {
                if k.is_some() {
                    return Vec::new();
                }
                let mut o: Vec<u32> = (0..col.len() as u32).collect();
                o.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                o
            })
            .collect();
        Ok(Self { ds, x, n_levels, target, global_scores, positive, order })
    }

    pub fn len(&self) -> usize {
        self.ds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ds.is_empty()
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }

    fn sev_obs(&self, rows: &[u32]) -> Vec<SevObs> {
        rows.iter()
            .map(|&i| {
                let r = &self.ds.records[i as usize];
                SevObs { n: r.n as f64, sbar: average_severity(r) }
            })
            .collect()
    }

    fn freq_obs(&self, rows: &[u32]) -> Vec<FreqObs> {
        rows.iter()
            .map(|&i| {
                let r = &self.ds.records[i as usize];
                FreqObs { v: r.v, n: r.n }
            })
            .collect()
    }

    fn joint_obs(&self, rows: &[u32]) -> Vec<JointObs> {
        rows.iter()
            .map(|&i| {
                let r = &self.ds.records[i as usize];
                JointObs { v: r.v, n: r.n, s: r.s }
            })
            .collect()
    }
}

/// Posterior laws a leaf draws `θ_B` from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DrawLaw {
    Severity(SevPosterior),
    Count { mu: Option<(f64, f64)>, lambda: (f64, f64) },
}

/// Cached per-leaf score inside a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafScore {
    pub theta_m: f64,
    /// Integrated (augmented) log likelihood; `−∞` for degenerate leaves.
    pub log_lik: f64,
    pub law: Option<DrawLaw>,
}

impl LeafScore {
    fn degenerate() -> Self {
        Self { theta_m: f64::NAN, log_lik: f64::NEG_INFINITY, law: None }
    }
}

fn gather(lat: &[Latent], rows: &[u32]) -> Vec<Latent> {
    if lat.is_empty() {
        return Vec::new();
    }
    rows.iter().map(|&i| lat[i as usize]).collect()
}

impl ModelSpec {
    /// Scores one leaf holding `rows` given the chain's latents.
    pub fn score_leaf(&self, data: &FitData, rows: &[u32], lat: &[Latent]) -> LeafScore {
        match self.family {
            Family::Severity(f) => {
                let obs = data.sev_obs(rows);
                match sm::mme_known_param(f, &obs) {
                    Ok(tm) => LeafScore {
                        theta_m: tm,
                        log_lik: sm::integrated_log_lik(f, &obs, &self.severity_priors, tm),
                        law: Some(DrawLaw::Severity(sm::posterior_params(f, &obs, &self.severity_priors, tm))),
                    },
                    Err(_) => LeafScore::degenerate(),
                }
            }
            Family::Frequency(f) => {
                let obs = data.freq_obs(rows);
                let l = gather(lat, rows);
                let post = fm::freq_posterior(f, &obs, &self.count_priors, &l);
                LeafScore {
                    theta_m: f64::NAN,
                    log_lik: fm::freq_integrated_log_lik(f, &obs, &self.count_priors, &l),
                    law: Some(DrawLaw::Count { mu: post.mu, lambda: post.lambda }),
                }
            }
            Family::Joint(f) => {
                let obs = data.joint_obs(rows);
                let l = gather(lat, rows);
                match jm::alpha_hat(&obs) {
                    Ok(a) => {
                        let post = jm::joint_posterior(f, &obs, &self.count_priors, a, &l);
                        LeafScore {
                            theta_m: a,
                            log_lik: jm::joint_integrated_log_lik(f, &obs, &self.count_priors, a, &l),
                            law: Some(DrawLaw::Count { mu: post.mu, lambda: post.lambda }),
                        }
                    }
                    Err(_) => LeafScore::degenerate(),
                }
            }
        }
    }

    /// Fitted summary (posterior means, DIC) of one leaf.
    pub fn fit_leaf(&self, data: &FitData, rows: &[u32], lat: &[Latent]) -> Result<LeafFit> {
        let degenerate = |_| BcartError::Degenerate(format!("leaf with {} records has no moment estimate", rows.len()));
        Ok(match self.family {
            Family::Severity(f) => {
                LeafFit::Severity(sm::fit_leaf(f, &data.sev_obs(rows), &self.severity_priors).map_err(degenerate)?)
            }
            Family::Frequency(f) => {
                LeafFit::Frequency(fm::fit_leaf(f, &data.freq_obs(rows), &self.count_priors, &gather(lat, rows)))
            }
            Family::Joint(f) => LeafFit::Joint(
                jm::fit_leaf(f, &data.joint_obs(rows), &self.count_priors, &gather(lat, rows)).map_err(degenerate)?,
            ),
        })
    }
}

/// Draws `θ_B` from a leaf's posterior: `[μ, λ]` for count laws (μ is NaN
/// without zero inflation), `[θ_B, NaN]` for severity laws.
pub fn draw_theta<R: Rng + ?Sized>(law: &DrawLaw, rng: &mut R) -> [f64; 2] {
    let g = |(a, b): (f64, f64), rng: &mut R| GammaDist::new(a, 1.0 / b).expect("valid gamma").sample(rng);
    match *law {
        DrawLaw::Count { mu, lambda } => [mu.map(|m| g(m, rng)).unwrap_or(f64::NAN), g(lambda, rng)],
        DrawLaw::Severity(SevPosterior::Gamma { shape, rate }) => [g((shape, rate), rng), f64::NAN],
        DrawLaw::Severity(SevPosterior::Normal { mean, var }) => {
            [Normal::new(mean, var.sqrt()).expect("valid normal").sample(rng), f64::NAN]
        }
        DrawLaw::Severity(SevPosterior::InvGamma { shape, scale }) => [1.0 / g((shape, scale), rng), f64::NAN],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeafFit {
    Severity(SeverityLeafFit),
    Frequency(FrequencyLeafFit),
    Joint(JointLeafFit),
}

impl LeafFit {
    pub fn dic(&self) -> f64 {
        match self {
            LeafFit::Severity(f) => f.dic,
            LeafFit::Frequency(f) => f.dic,
            LeafFit::Joint(f) => f.dic,
        }
    }

    pub fn p_d(&self) -> f64 {
        match self {
            LeafFit::Severity(f) => f.p_d,
            LeafFit::Frequency(f) => f.p_d,
            LeafFit::Joint(f) => f.p_d,
        }
    }

    /// The leaf's point prediction for a record with exposure `v`: average
    /// severity, expected count, or expected aggregate amount.
    pub fn predict(&self, v: f64) -> f64 {
        match self {
            LeafFit::Severity(f) => sm::predict_severity(f),
            LeafFit::Frequency(f) => fm::predict_frequency(f, v),
            LeafFit::Joint(f) => jm::premium(f, v),
        }
    }

    /// Model variance at a one-year generic record.
    pub fn variance(&self) -> f64 {
        match self {
            LeafFit::Severity(f) => sm::model_variance(f, f.n_mean),
            LeafFit::Frequency(f) => fm::count_moments(f.family, f.mu, f.lambda, 1.0).1,
            LeafFit::Joint(f) => jm::ds_variance(f),
        }
    }
}

//! Seeded synthetic claim datasets.
//!
//! Every generator draws from a single ChaCha8 stream seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`, consuming variates record by record in
//! a fixed order (covariates left to right, exposure, count, severity), so a
//! seed reproduces the same dataset on every platform.
//!
//! * Scenario 1: `x1, x2 ~ N(0,1)`, `v = 1`, `N ~ Poisson(λ)` with the low
//!   rate where `x1·x2 ≤ 0` and the high rate elsewhere, and
//!   `S̄ | N > 0 ~ Gamma(1, rate 0.001 + ζN)`.
//! * Scenario 2.1 / 2.2: five covariates (two signal, three noise), uniform
//!   exposure, four-cell frequency and severity maps on `(x1, x2)`, and
//!   `S̄ | N > 0 ~ Gamma(N, rate N·β)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data_model::{CovariateSpec, Dataset, PolicyRecord};
use crate::error::{BcartError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    S1,
    S2_1,
    S2_2,
}

impl std::str::FromStr for Scenario {
    type Err = BcartError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['.', '-'], "_").as_str() {
            "s1" | "1" => Ok(Scenario::S1),
            "s2_1" | "2_1" => Ok(Scenario::S2_1),
            "s2_2" | "2_2" => Ok(Scenario::S2_2),
            _ => Err(BcartError::Config(format!("unknown scenario `{s}` (expected s1, s2.1 or s2.2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub seed: u64,
    /// Severity dependence on the claim count (Scenario 1 only).
    #[serde(default)]
    pub zeta: f64,
    /// Low and high Poisson rates (Scenario 1 only).
    #[serde(default = "default_lambda_pair")]
    pub lambda_pair: (f64, f64),
}

fn default_lambda_pair() -> (f64, f64) {
    (1.0, 7.0)
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, n: usize, seed: u64) -> Self {
        Self { scenario, n, seed, zeta: 0.0, lambda_pair: default_lambda_pair() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(BcartError::Config("n must be at least 1".into()));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(BcartError::Config("zeta must be finite and non-negative".into()));
        }
        let (a, b) = self.lambda_pair;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(BcartError::Config("lambda pair must be positive".into()));
        }
        Ok(())
    }
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Dataset> {
    match cfg.scenario {
        Scenario::S1 => gen_scenario1(cfg),
        Scenario::S2_1 | Scenario::S2_2 => gen_scenario2(cfg),
    }
}

/// Scenario 1 Poisson rate.
pub fn scenario1_lambda(x1: f64, x2: f64, pair: (f64, f64)) -> f64 {
    if x1 * x2 <= 0.0 {
        pair.0
    } else {
        pair.1
    }
}

/// Four-cell map on `(x1, x2)` with values ordered
/// `[x1≤a & x2>b, x1>a & x2>b, x1>a & x2≤b, x1≤a & x2≤b]`.
fn quad(x1: f64, x2: f64, (a, b): (f64, f64), vals: [f64; 4]) -> f64 {
    match (x1 <= a, x2 > b) {
        (true, true) => vals[0],
        (false, true) => vals[1],
        (false, false) => vals[2],
        (true, false) => vals[3],
    }
}

pub fn scenario2_lambda(s: Scenario, x1: f64, x2: f64) -> f64 {
    let split = if s == Scenario::S2_2 { (0.1, 0.8) } else { (0.47, 0.52) };
    quad(x1, x2, split, [0.1, 0.2, 0.3, 0.15])
}

pub fn scenario2_beta(s: Scenario, x1: f64, x2: f64) -> f64 {
    let split = if s == Scenario::S2_2 { (0.9, 0.2) } else { (0.53, 0.48) };
    quad(x1, x2, split, [0.005, 0.01, 0.004, 0.008])
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> u32 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng) as u32
    }
}

fn gamma_rate(shape: f64, rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(rng)
}

pub fn gen_scenario1(cfg: &ScenarioConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let records = (0..cfg.n)
        .map(|_| {
            let x1 = z.sample(&mut rng);
            let x2 = z.sample(&mut rng);
            let n = poisson(scenario1_lambda(x1, x2, cfg.lambda_pair), &mut rng);
            let s = if n > 0 {
                n as f64 * gamma_rate(1.0, 0.001 + cfg.zeta * n as f64, &mut rng)
            } else {
                0.0
            };
            PolicyRecord { x: vec![x1, x2], v: 1.0, n, s }
        })
        .collect();
    Dataset::new(vec![CovariateSpec::numeric("x1"), CovariateSpec::numeric("x2")], records)
}

/// `x4 ~ N(0, 5)` is read as variance 5.
pub fn gen_scenario2(cfg: &ScenarioConfig) -> Result<Dataset> {
    cfg.validate()?;
    if cfg.scenario == Scenario::S1 {
        return Err(BcartError::Config("gen_scenario2 needs scenario s2.1 or s2.2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let sd4 = 5f64.sqrt();
    let records = (0..cfg.n)
        .map(|_| {
            let x1 = z.sample(&mut rng);
            let x2 = rng.gen_range(-1.0..1.0);
            let x3 = rng.gen_range(-5.0..5.0);
            let x4 = sd4 * z.sample(&mut rng);
            let x5 = rng.gen_range(1..=4) as f64;
            // Exposure must be positive; (0, 1] rather than [0, 1).
            let v = 1.0 - rng.gen::<f64>();
            let n = poisson(scenario2_lambda(cfg.scenario, x1, x2) * v, &mut rng);
            let s = if n > 0 {
                let nf = n as f64;
                nf * gamma_rate(nf, nf * scenario2_beta(cfg.scenario, x1, x2), &mut rng)
            } else {
                0.0
            };
            PolicyRecord { x: vec![x1, x2, x3, x4, x5], v, n, s }
        })
        .collect();
    let spec = ["x1", "x2", "x3", "x4", "x5"].iter().map(|c| CovariateSpec::numeric(c)).collect();
    Dataset::new(spec, records)
}

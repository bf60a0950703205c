//! Persisted models and run manifests.
//!
//! A [`ModelArtifact`] carries everything needed to route and predict: the
//! covariate spec the tree was grown on, the tree with its per-node encoding
//! tables, the leaf fits, and provenance (seed and a SHA-256 digest of the
//! run configuration).  A [`RunManifest`] keeps every chain's diagnostics
//! and the best tree per leaf count so selection can be redone offline.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data_model::{CovariateSpec, Dataset, DatasetManifest};
use crate::error::{BcartError, Result};
use crate::mcmc::{ChainSummary, SweepConfig, TreeRecord};
use crate::model::{Family, ModelSpec};
use crate::prediction_eval::FittedTree;
use crate::tree::HyperParams;

pub const FORMAT_VERSION: u32 = 1;

/// Name of the claim-count covariate appended for sequential severity trees.
pub const COUNT_COVARIATE: &str = "N";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSource {
    /// Observed claim count.
    Observed,
    /// Expected count from a frequency tree.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// Hex SHA-256 of the canonical JSON run configuration.
    pub config_digest: String,
    pub crate_version: String,
}

impl Provenance {
    pub fn new<T: Serialize>(seed: u64, config: &T) -> Result<Self> {
        Ok(Self { seed, config_digest: digest(config)?, crate_version: env!("CARGO_PKG_VERSION").to_string() })
    }
}

/// Hex SHA-256 of `value`'s JSON form.
pub fn digest<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub model: ModelSpec,
    /// Covariates of the input data (without any appended count covariate).
    pub covariates: Vec<CovariateSpec>,
    /// Set when the tree also routes on a claim-count covariate appended last.
    #[serde(default)]
    pub count_covariate: Option<CountSource>,
    pub record: TreeRecord,
    pub leaf_paths: Vec<String>,
    pub provenance: Provenance,
}

impl ModelArtifact {
    pub fn new(
        model: ModelSpec,
        covariates: Vec<CovariateSpec>,
        count_covariate: Option<CountSource>,
        record: TreeRecord,
        provenance: Provenance,
    ) -> Self {
        let mut names: Vec<String> = covariates.iter().map(|c| c.name.clone()).collect();
        if count_covariate.is_some() {
            names.push(COUNT_COVARIATE.into());
        }
        let leaf_paths = record.tree.leaf_paths(&names);
        Self { format_version: FORMAT_VERSION, model, covariates, count_covariate, record, leaf_paths, provenance }
    }

    pub fn family(&self) -> Family {
        self.model.family
    }

    pub fn fitted(&self) -> Result<FittedTree<'_>> {
        FittedTree::new(&self.record.tree, &self.record.fits)
    }

    pub fn names(&self) -> Vec<String> {
        self.covariates.iter().map(|c| c.name.clone()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Loads and checks internal consistency.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let a: ModelArtifact =
            serde_json::from_str(&text).map_err(|e| BcartError::Mismatch(format!("not a model artifact: {e}")))?;
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(BcartError::Mismatch(format!("artifact format {} (expected {FORMAT_VERSION})", self.format_version)));
        }
        let width = self.covariates.len() + self.count_covariate.is_some() as usize;
        if self.record.tree.n_levels.len() != width {
            return Err(BcartError::Mismatch(format!("tree routes on {} covariates, spec lists {width}", self.record.tree.n_levels.len())));
        }
        for (c, k) in self.covariates.iter().zip(&self.record.tree.n_levels) {
            if c.n_levels() != *k {
                return Err(BcartError::Mismatch(format!("covariate `{}` kind differs between spec and tree", c.name)));
            }
        }
        self.fitted().map(|_| ())
    }

    /// Fails with a mismatch error unless `ds` has exactly this covariate spec.
    pub fn check_data(&self, ds: &Dataset) -> Result<()> {
        if ds.spec != self.covariates {
            let want: Vec<&str> = self.covariates.iter().map(|c| c.name.as_str()).collect();
            let got: Vec<&str> = ds.spec.iter().map(|c| c.name.as_str()).collect();
            return Err(BcartError::Mismatch(format!("model expects covariates {want:?}, data has {got:?}")));
        }
        Ok(())
    }
}

/// One row of the per-leaf-count DIC table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DicRow {
    pub leaves: usize,
    pub gamma: f64,
    pub rho: f64,
    pub p_d: f64,
    pub dic: f64,
    pub log_lik: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub config: SweepConfig,
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub count_covariate: Option<CountSource>,
    pub dataset: DatasetManifest,
    pub provenance: Provenance,
    pub chains: Vec<ChainSummary>,
    pub dic_table: Vec<DicRow>,
    /// Most frequent post-burn-in leaf count over all chains.
    pub modal_leaves: usize,
    pub candidates: Vec<TreeRecord>,
}

pub fn dic_table(candidates: &[TreeRecord], selected: &TreeRecord) -> Vec<DicRow> {
    candidates
        .iter()
        .map(|r| DicRow {
            leaves: r.leaves,
            gamma: r.hp.gamma,
            rho: r.hp.rho,
            p_d: r.p_d,
            dic: r.dic,
            log_lik: r.log_lik,
            selected: r.leaves == selected.leaves,
        })
        .collect()
}

/// Modal leaf count over the chains' post-burn-in traces.
pub fn modal_leaves(chains: &[ChainSummary], burn_in: usize) -> usize {
    let mut counts = std::collections::BTreeMap::<usize, usize>::new();
    for c in chains {
        let skip = burn_in / c.trace_thin.max(1);
        for &b in c.leaf_trace.iter().skip(skip) {
            *counts.entry(b as usize).or_default() += 1;
        }
    }
    counts.into_iter().max_by_key(|&(b, c)| (c, std::cmp::Reverse(b))).map_or(1, |(b, _)| b)
}

impl RunManifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| BcartError::Mismatch(format!("not a run manifest: {e}")))?;
        if m.format_version != FORMAT_VERSION {
            return Err(BcartError::Mismatch(format!("manifest format {} (expected {FORMAT_VERSION})", m.format_version)));
        }
        Ok(m)
    }

    /// Re-runs DIC selection over the stored candidates.
    pub fn select(&self, leaf_range: Option<(usize, usize)>) -> Result<ModelArtifact> {
        let pool = crate::mcmc::best_per_leaf_count(&self.candidates, leaf_range);
        let rec = crate::mcmc::select_tree(&pool)
            .ok_or_else(|| BcartError::Config("no candidate trees in the leaf range".into()))?;
        Ok(ModelArtifact::new(self.config.model, self.covariates.clone(), self.count_covariate, rec, self.provenance.clone()))
    }
}

/// Hyper-parameters as `γ:ρ` pairs, e.g. `0.95:10,0.99:5`.
pub fn parse_grid(s: &str) -> Result<Vec<HyperParams>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (g, r) = p
                .split_once(':')
                .ok_or_else(|| BcartError::Config(format!("grid entry `{p}` is not gamma:rho")))?;
            let num = |x: &str| x.trim().parse::<f64>().map_err(|_| BcartError::Config(format!("bad number `{x}` in grid")));
            let hp = HyperParams::new(num(g)?, num(r)?);
            hp.validate().map_err(BcartError::Config)?;
            Ok(hp)
        })
        .collect()
}

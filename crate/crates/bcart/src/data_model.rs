//! Claim datasets: schema, validated records, CSV I/O, categorical target
//! encoding, stratified splitting and the positive-claim subset.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BcartError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateKind {
    Numeric,
    /// Level labels in index order.  An empty list asks `load_csv` to infer
    /// the levels (sorted) from the file.
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: CovariateKind,
}

impl CovariateSpec {
    pub fn numeric(name: &str) -> Self {
        Self { name: name.to_string(), kind: CovariateKind::Numeric }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: CovariateKind::Categorical { levels: levels.iter().map(|s| s.to_string()).collect() },
        }
    }

    pub fn n_levels(&self) -> Option<usize> {
        match &self.kind {
            CovariateKind::Numeric => None,
            CovariateKind::Categorical { levels } => Some(levels.len()),
        }
    }
}

/// One policy: covariates (numeric values, or level indices stored as `f64`),
/// exposure in years, claim count and aggregate claim amount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub x: Vec<f64>,
    pub v: f64,
    pub n: u32,
    pub s: f64,
}

impl PolicyRecord {
    pub fn average_severity(&self) -> f64 {
        average_severity(self)
    }
}

/// `S/N` for claimants, zero otherwise.
pub fn average_severity(r: &PolicyRecord) -> f64 {
    if r.n > 0 {
        r.s / r.n as f64
    } else {
        0.0
    }
}

/// Names of the response columns in a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub exposure: String,
    pub count: String,
    pub amount: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self { exposure: "exposure".into(), count: "numclaims".into(), amount: "claimcst0".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub columns: ColumnMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub spec: Vec<CovariateSpec>,
    pub records: Vec<PolicyRecord>,
}

fn check_record(spec: &[CovariateSpec], r: &PolicyRecord) -> std::result::Result<(), String> {
    if r.x.len() != spec.len() {
        return Err(format!("expected {} covariates, found {}", spec.len(), r.x.len()));
    }
    for (c, &x) in spec.iter().zip(&r.x) {
        if !x.is_finite() {
            return Err(format!("non-finite value for `{}`", c.name));
        }
        if let Some(k) = c.n_levels() {
            if x < 0.0 || x.fract() != 0.0 || x as usize >= k {
                return Err(format!("level index {x} out of range for `{}`", c.name));
            }
        }
    }
    if !(r.v > 0.0 && r.v <= 1.0) {
        return Err("exposure out of range".into());
    }
    if !r.s.is_finite() || r.s < 0.0 {
        return Err("negative or non-finite amount".into());
    }
    if r.n == 0 && r.s != 0.0 {
        return Err("positive amount with zero count".into());
    }
    if r.n > 0 && r.s <= 0.0 {
        return Err("zero amount with positive count".into());
    }
    Ok(())
}

fn check_spec(spec: &[CovariateSpec]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for c in spec {
        if !seen.insert(c.name.as_str()) {
            return Err(BcartError::Config(format!("duplicate covariate `{}`", c.name)));
        }
        if let CovariateKind::Categorical { levels } = &c.kind {
            let uniq: std::collections::HashSet<_> = levels.iter().collect();
            if levels.is_empty() || uniq.len() != levels.len() {
                return Err(BcartError::Config(format!("`{}` needs non-empty, unique levels", c.name)));
            }
        }
    }
    Ok(())
}

impl Dataset {
    /// Validates every record against `spec`; the first offending row is reported.
    pub fn new(spec: Vec<CovariateSpec>, records: Vec<PolicyRecord>) -> Result<Self> {
        check_spec(&spec)?;
        for (i, r) in records.iter().enumerate() {
            check_record(&spec, r).map_err(|msg| BcartError::Row { row: i + 1, msg })?;
        }
        if records.is_empty() {
            return Err(BcartError::Degenerate("dataset has no records".into()));
        }
        Ok(Self { spec, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.spec
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| BcartError::UnknownCovariate(name.to_string()))
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { spec: self.spec.clone(), records: idx.iter().map(|&i| self.records[i].clone()).collect() }
    }

    /// Appends a numeric covariate (e.g. the claim count used by sequential models).
    pub fn with_covariate(&self, name: &str, values: &[f64]) -> Result<Dataset> {
        if values.len() != self.len() {
            return Err(BcartError::Config(format!("`{name}` has {} values for {} records", values.len(), self.len())));
        }
        let mut spec = self.spec.clone();
        spec.push(CovariateSpec::numeric(name));
        let records = self
            .records
            .iter()
            .zip(values)
            .map(|(r, &x)| {
                let mut r = r.clone();
                r.x.push(x);
                r
            })
            .collect();
        Dataset::new(spec, records)
    }

    pub fn n_positive(&self) -> usize {
        self.records.iter().filter(|r| r.n > 0).count()
    }

    pub fn manifest(&self) -> DatasetManifest {
        let n = self.len();
        let pos = self.n_positive();
        DatasetManifest {
            n,
            n_positive: pos,
            zero_fraction: (n - pos) as f64 / n as f64,
            total_exposure: self.records.iter().map(|r| r.v).sum(),
            total_claims: self.records.iter().map(|r| r.n as u64).sum(),
            total_amount: self.records.iter().map(|r| r.s).sum(),
            covariates: self.spec.iter().map(|c| c.name.clone()).collect(),
        }
    }
}

/// Counts and class balance, emitted next to fitted artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub n_positive: usize,
    pub zero_fraction: f64,
    pub total_exposure: f64,
    pub total_claims: u64,
    pub total_amount: f64,
    pub covariates: Vec<String>,
}

/// Min / mean / max / sd of the average severity over claimants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeveritySummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub sd: f64,
}

pub fn severity_summary(ds: &Dataset) -> Option<SeveritySummary> {
    let sb: Vec<f64> = ds.records.iter().filter(|r| r.n > 0).map(average_severity).collect();
    let (mean, var) = crate::special::mean_var(sb.iter().copied())?;
    Some(SeveritySummary {
        min: sb.iter().copied().fold(f64::INFINITY, f64::min),
        mean,
        max: sb.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        sd: var.sqrt(),
    })
}

/// Reads a CSV with a header row.  Categorical cells hold level labels.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| BcartError::MissingColumn(name.to_string()))
    };
    let cov_cols: Vec<usize> = schema.covariates.iter().map(|c| col(&c.name)).collect::<Result<_>>()?;
    let (cv, cn, cs) = (col(&schema.columns.exposure)?, col(&schema.columns.count)?, col(&schema.columns.amount)?);

    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;

    // Resolve categorical levels, inferring them where the schema leaves them open.
    let mut spec = schema.covariates.clone();
    for (c, &j) in spec.iter_mut().zip(&cov_cols) {
        if let CovariateKind::Categorical { levels } = &mut c.kind {
            if levels.is_empty() {
                let mut set: Vec<String> = rows.iter().map(|r| r.get(j).unwrap_or("").trim().to_string()).collect();
                set.sort();
                set.dedup();
                *levels = set;
            }
        }
    }
    let lookups: Vec<Option<HashMap<&str, usize>>> = spec
        .iter()
        .map(|c| match &c.kind {
            CovariateKind::Numeric => None,
            CovariateKind::Categorical { levels } => {
                Some(levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect())
            }
        })
        .collect();

    let mut records = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let line = i + 1;
        let err = |msg: String| BcartError::Row { row: line, msg };
        let cell = |j: usize| row.get(j).unwrap_or("").trim();
        let num = |j: usize, what: &str| -> Result<f64> {
            cell(j).parse::<f64>().map_err(|_| err(format!("non-numeric {what} `{}`", cell(j))))
        };
        let mut x = Vec::with_capacity(spec.len());
        for ((c, &j), lk) in spec.iter().zip(&cov_cols).zip(&lookups) {
            match lk {
                None => x.push(num(j, &c.name)?),
                Some(map) => {
                    let lv = map.get(cell(j)).ok_or_else(|| err(format!("unknown level `{}` for `{}`", cell(j), c.name)))?;
                    x.push(*lv as f64);
                }
            }
        }
        let v = num(cv, "exposure")?;
        let nf = num(cn, "count")?;
        if nf < 0.0 || nf.fract() != 0.0 {
            return Err(err(format!("claim count must be a non-negative integer, got {nf}")));
        }
        let s = num(cs, "amount")?;
        let r = PolicyRecord { x, v, n: nf as u32, s };
        check_record(&spec, &r).map_err(err)?;
        records.push(r);
    }
    Dataset::new(spec, records)
}

/// Writes `ds` in the layout `load_csv` reads back with the same schema.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, columns: &ColumnMap) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = ds.spec.iter().map(|c| c.name.as_str()).collect();
    header.extend([columns.exposure.as_str(), columns.count.as_str(), columns.amount.as_str()]);
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row: Vec<String> = ds
            .spec
            .iter()
            .zip(&r.x)
            .map(|(c, &x)| match &c.kind {
                CovariateKind::Numeric => format!("{x:?}"),
                CovariateKind::Categorical { levels } => levels[x as usize].clone(),
            })
            .collect();
        row.push(format!("{:?}", r.v));
        row.push(r.n.to_string());
        row.push(format!("{:?}", r.s));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingTarget {
    /// Claims per unit exposure, `ΣN / Σv`.
    Frequency,
    /// Amount per claim, `ΣS / ΣN`.
    Severity,
}

impl EncodingTarget {
    pub fn num_den(self, r: &PolicyRecord) -> (f64, f64) {
        match self {
            EncodingTarget::Frequency => (r.n as f64, r.v),
            EncodingTarget::Severity => (r.s, r.n as f64),
        }
    }
}

/// Level scores of one categorical covariate within one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingTable {
    pub covariate: usize,
    pub target: EncodingTarget,
    pub scores: Vec<f64>,
}

/// Per-level target ratios, with `fallback[level]` wherever a level has no
/// denominator mass among the given records.
pub fn level_scores<'a>(
    n_levels: usize,
    cov: usize,
    target: EncodingTarget,
    records: impl Iterator<Item = &'a PolicyRecord>,
    fallback: &[f64],
) -> Vec<f64> {
    let mut num = vec![0.0; n_levels];
    let mut den = vec![0.0; n_levels];
    for r in records {
        let l = r.x[cov] as usize;
        let (a, b) = target.num_den(r);
        num[l] += a;
        den[l] += b;
    }
    (0..n_levels).map(|l| if den[l] > 0.0 { num[l] / den[l] } else { fallback[l] }).collect()
}

/// The dataset-wide ratio for `target`; zero if the denominator vanishes.
pub fn global_score(ds: &Dataset, target: EncodingTarget) -> f64 {
    let (a, b) = ds.records.iter().map(|r| target.num_den(r)).fold((0.0, 0.0), |s, x| (s.0 + x.0, s.1 + x.1));
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Target-encodes categorical covariate `cov` over `rows`.  Levels without
/// denominator mass take the fallback table's score, or the global ratio when
/// no fallback is given (the root).
pub fn encode_categorical(
    ds: &Dataset,
    rows: &[usize],
    cov: &str,
    target: EncodingTarget,
    fallback: Option<&EncodingTable>,
) -> Result<EncodingTable> {
    let j = ds.covariate_index(cov)?;
    let k = ds.spec[j].n_levels().ok_or_else(|| BcartError::NotCategorical(cov.to_string()))?;
    if rows.is_empty() {
        return Err(BcartError::Degenerate("encoding over an empty row set".into()));
    }
    let fb = match fallback {
        Some(t) => t.scores.clone(),
        None => vec![global_score(ds, target); k],
    };
    let scores = level_scores(k, j, target, rows.iter().map(|&i| &ds.records[i]), &fb);
    Ok(EncodingTable { covariate: j, target, scores })
}

/// Train/test split preserving the share of claimants.  The test set gets
/// `round(frac·n)` records of which `round(frac·n·share)` are claimants.
///
/// Each class is shuffled by a ChaCha8 stream seeded with `seed`; both parts
/// keep the input order.
pub fn stratified_split(ds: &Dataset, test_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(BcartError::Config(format!("test fraction {test_frac} outside (0,1)")));
    }
    let n = ds.len();
    let (mut pos, mut zero): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| ds.records[i].n > 0);
    let n_test = (test_frac * n as f64).round() as usize;
    let n_test_pos = ((n_test as f64) * pos.len() as f64 / n as f64).round() as usize;
    let n_test_pos = n_test_pos.min(pos.len()).max(n_test.saturating_sub(zero.len()));
    let n_test_zero = n_test - n_test_pos;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    zero.shuffle(&mut rng);
    let mut test: Vec<usize> = pos[..n_test_pos].iter().chain(&zero[..n_test_zero]).copied().collect();
    let mut train: Vec<usize> = pos[n_test_pos..].iter().chain(&zero[n_test_zero..]).copied().collect();
    test.sort_unstable();
    train.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(BcartError::Config("split leaves an empty part".into()));
    }
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Claimants only.  An empty result is a degeneracy for severity fitting.
pub fn severity_subset(ds: &Dataset) -> Result<Dataset> {
    let idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.records[i].n > 0).collect();
    if idx.is_empty() {
        return Err(BcartError::Degenerate("no positive claims".into()));
    }
    Ok(ds.subset(&idx))
}

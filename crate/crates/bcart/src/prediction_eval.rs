//! Predictions, frequency–severity combination, sequential Monte Carlo
//! aggregation and the evaluation metrics.
//!
//! Metrics work on a partition of the test set into cells (the leaves of one
//! tree, or the superimposed leaves of a frequency and a severity tree):
//!
//! * RSS — `Σ_i (y_i − ŷ_i)²` over records;
//! * SE — `Σ_t (Σ y / Σ d − ŷ_t)²` with `d = N` for severity and `d = v`
//!   for frequency and aggregate amounts;
//! * DS — the SE summands divided by the cell's model variance `V̂_t`;
//! * Lift — empirical `Σ y / Σ d` of the highest-predicted cell over that of
//!   the lowest-predicted cell.
//!
//! Cell predictions and variances are those of a generic one-year record.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data_model::{average_severity, Dataset, PolicyRecord};
use crate::error::{BcartError, Result};
use crate::frequency_models::{count_moments, FrequencyLeafFit};
use crate::model::LeafFit;
use crate::severity_models::{model_variance, predict_severity, SeverityFamily, SeverityLeafFit};
use crate::tree::{superimpose, PartitionLabels, Tree};

/// A tree together with its fitted leaves (in leaf-id order).
#[derive(Debug, Clone, Copy)]
pub struct FittedTree<'a> {
    pub tree: &'a Tree,
    pub fits: &'a [LeafFit],
}

impl<'a> FittedTree<'a> {
    pub fn new(tree: &'a Tree, fits: &'a [LeafFit]) -> Result<Self> {
        if tree.n_leaves() != fits.len() {
            return Err(BcartError::Mismatch(format!("{} leaves but {} leaf fits", tree.n_leaves(), fits.len())));
        }
        Ok(Self { tree, fits })
    }

    /// Number of covariates the tree routes on.
    pub fn p(&self) -> usize {
        self.tree.n_levels.len()
    }

    pub fn leaf(&self, x: &[f64]) -> (usize, &'a LeafFit) {
        let id = self.tree.route(x);
        (id, &self.fits[id - 1])
    }
}

/// Leaf-model expectation at the leaf `x` falls in.
pub fn predict(model: FittedTree, x: &[f64], v: f64) -> f64 {
    model.leaf(x).1.predict(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Severity,
    Frequency,
    Aggregate,
}

impl MetricKind {
    /// `(y, d)` of a record: the response and the SE denominator weight.
    pub fn response(self, r: &PolicyRecord) -> (f64, f64) {
        match self {
            MetricKind::Severity => (r.s, r.n as f64),
            MetricKind::Frequency => (r.n as f64, r.v),
            MetricKind::Aggregate => (r.s, r.v),
        }
    }

    /// Per-record response compared with the per-record prediction in RSS.
    pub fn record_response(self, r: &PolicyRecord) -> f64 {
        match self {
            MetricKind::Severity => average_severity(r),
            MetricKind::Frequency => r.n as f64,
            MetricKind::Aggregate => r.s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub definition: String,
    pub n_records: usize,
    /// Generic-record prediction.
    pub pred: f64,
    /// Generic-record model variance.
    pub var: Option<f64>,
    pub sum_y: f64,
    pub sum_d: f64,
    pub exposure: f64,
}

impl Cell {
    pub fn empirical(&self) -> Option<f64> {
        (self.sum_d > 0.0).then(|| self.sum_y / self.sum_d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEstimates {
    pub kind: MetricKind,
    pub cells: Vec<Cell>,
    /// Cell index per test record.
    pub labels: Vec<usize>,
    /// Per-record predictions.
    pub preds: Vec<f64>,
    /// Per-record responses.
    pub ys: Vec<f64>,
}

impl CellEstimates {
    /// Builds cells from per-record labels; `cell_info(first record index)`
    /// supplies each cell's definition, prediction and variance.
    pub fn from_labels(
        kind: MetricKind,
        test: &Dataset,
        labels: &PartitionLabels,
        preds: Vec<f64>,
        mut cell_info: impl FnMut(usize) -> (String, f64, Option<f64>),
    ) -> Self {
        let mut cells: Vec<Option<Cell>> = vec![None; labels.n_cells];
        for (i, (r, &c)) in test.records.iter().zip(&labels.labels).enumerate() {
            let (y, d) = kind.response(r);
            let cell = cells[c].get_or_insert_with(|| {
                let (definition, pred, var) = cell_info(i);
                Cell { definition, n_records: 0, pred, var, sum_y: 0.0, sum_d: 0.0, exposure: 0.0 }
            });
            cell.n_records += 1;
            cell.sum_y += y;
            cell.sum_d += d;
            cell.exposure += r.v;
        }
        let ys = test.records.iter().map(|r| kind.record_response(r)).collect();
        Self { kind, cells: cells.into_iter().map(|c| c.expect("occupied cell")).collect(), labels: labels.labels.clone(), preds, ys }
    }
}

/// Cells given by the leaves of a single tree.  Severity evaluation uses the
/// claimants of `test` only.
pub fn single_tree_cells(model: FittedTree, test: &Dataset, kind: MetricKind, names: &[String]) -> Result<CellEstimates> {
    let test = if kind == MetricKind::Severity { crate::data_model::severity_subset(test)? } else { test.clone() };
    check_width(model, &test)?;
    let xs: Vec<&[f64]> = test.records.iter().map(|r| r.x.as_slice()).collect();
    let labels = PartitionLabels::of_tree(model.tree, &xs);
    let preds = test.records.iter().map(|r| predict(model, &r.x, r.v)).collect();
    let paths = model.tree.leaf_paths(names);
    Ok(CellEstimates::from_labels(kind, &test, &labels, preds, |i| {
        let (id, fit) = model.leaf(&test.records[i].x);
        (paths[id - 1].clone(), fit.predict(1.0), Some(fit.variance()))
    }))
}

fn check_width(model: FittedTree, test: &Dataset) -> Result<()> {
    if model.p() != test.spec.len() {
        return Err(BcartError::Mismatch(format!(
            "tree routes on {} covariates, data has {}",
            model.p(),
            test.spec.len()
        )));
    }
    Ok(())
}

fn as_frequency(f: &LeafFit) -> Result<&FrequencyLeafFit> {
    match f {
        LeafFit::Frequency(f) => Ok(f),
        _ => Err(BcartError::Mismatch("expected a frequency tree".into())),
    }
}

fn as_severity(f: &LeafFit) -> Result<&SeverityLeafFit> {
    match f {
        LeafFit::Severity(f) => Ok(f),
        _ => Err(BcartError::Mismatch("expected a severity tree".into())),
    }
}

/// Variance of the aggregate amount of a generic record from count moments
/// and the severity fit.  GammaN decomposes over individual claims
/// `Y ~ Gamma(α, β)`; other families use the average-severity law directly.
pub fn aggregate_variance(en: f64, var_n: f64, sev: &SeverityLeafFit) -> f64 {
    match sev.family {
        SeverityFamily::GammaN => {
            let (a, b) = (sev.theta_m, sev.theta_b);
            en * a / (b * b) + (a / b).powi(2) * var_n
        }
        _ => {
            let m = predict_severity(sev);
            (var_n + en * en) * model_variance(sev, 1.0) + var_n * m * m
        }
    }
}

/// Frequency–severity combination over the superimposed partition:
/// `Ŝ_t = N̂_{s(t)} · S̄̂_{l(t)}`.  The severity tree must route on the same
/// covariates as the frequency tree (no claim-count covariate).
pub fn combine_fs(freq: FittedTree, sev: FittedTree, test: &Dataset, names: &[String]) -> Result<CellEstimates> {
    check_width(freq, test)?;
    if sev.p() != freq.p() {
        return Err(BcartError::Config(
            "severity tree splits on a claim-count covariate; use the Monte Carlo aggregation instead".into(),
        ));
    }
    let xs: Vec<&[f64]> = test.records.iter().map(|r| r.x.as_slice()).collect();
    let labels = superimpose(freq.tree, sev.tree, &xs);
    let mut preds = Vec::with_capacity(test.len());
    for r in &test.records {
        let f = as_frequency(freq.leaf(&r.x).1)?;
        let s = as_severity(sev.leaf(&r.x).1)?;
        preds.push(count_moments(f.family, f.mu, f.lambda, r.v).0 * predict_severity(s));
    }
    let fpaths = freq.tree.leaf_paths(names);
    let spaths = sev.tree.leaf_paths(names);
    Ok(CellEstimates::from_labels(MetricKind::Aggregate, test, &labels, preds, |i| {
        let x = &test.records[i].x;
        let (fi, f) = freq.leaf(x);
        let (si, s) = sev.leaf(x);
        let (f, s) = (as_frequency(f).expect("checked"), as_severity(s).expect("checked"));
        let (en, vn) = count_moments(f.family, f.mu, f.lambda, 1.0);
        let def = format!("[{}] x [{}]", fpaths[fi - 1], spaths[si - 1]);
        (def, en * predict_severity(s), Some(aggregate_variance(en, vn, s)))
    }))
}

/// Draws a claim count from a frequency fit at exposure `v`.
pub fn draw_count<R: Rng + ?Sized>(f: &FrequencyLeafFit, v: f64, rng: &mut R) -> u32 {
    let mean = match (f.family, f.mu) {
        (crate::frequency_models::FrequencyFamily::Zip(var), Some(mu)) => {
            let (w, u) = var.wu(v);
            let p = mu * w / (1.0 + mu * w);
            if rng.gen::<f64>() >= p {
                return 0;
            }
            f.lambda * u
        }
        _ => f.lambda * v,
    };
    if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as u32
    } else {
        0
    }
}

/// Draws an average severity for `n ≥ 1` claims at posterior-mean parameters.
pub fn draw_severity<R: Rng + ?Sized>(s: &SeverityLeafFit, n: u32, rng: &mut R) -> f64 {
    let (a, b) = (s.theta_m, s.theta_b);
    let g = |shape: f64, rate: f64, rng: &mut R| Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(rng);
    match s.family {
        SeverityFamily::GammaN => g(n as f64 * a, n as f64 * b, rng),
        SeverityFamily::Gamma => g(a, b, rng),
        SeverityFamily::LogNormal => {
            let z: f64 = StandardNormal.sample(rng);
            (b + a * z).exp()
        }
        SeverityFamily::Weibull => {
            let e: f64 = Exp1.sample(rng);
            (b * e).powf(1.0 / a)
        }
    }
}

/// How the claim-count covariate of a sequential severity tree is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountCovariate {
    /// The simulated count `N*`.
    Simulated,
    /// The frequency tree's expected count `N̂`.
    Expected,
}

/// Monte Carlo mean and variance of the aggregate amount of one record.
/// A severity tree with one more covariate than the frequency tree takes the
/// claim count as its last covariate.
#[allow(clippy::too_many_arguments)]
pub fn mc_aggregate<R: Rng + ?Sized>(
    freq: FittedTree,
    sev: FittedTree,
    x: &[f64],
    v: f64,
    count_cov: CountCovariate,
    reps: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(BcartError::Config("Monte Carlo repetitions must be at least 1".into()));
    }
    let f = as_frequency(freq.leaf(x).1)?;
    let with_n = sev.p() == x.len() + 1;
    if !with_n && sev.p() != x.len() {
        return Err(BcartError::Mismatch("severity tree width does not match the covariates".into()));
    }
    let n_hat = count_moments(f.family, f.mu, f.lambda, v).0;
    let mut xs = x.to_vec();
    if with_n {
        xs.push(n_hat);
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let n = draw_count(f, v, rng);
        if n == 0 {
            samples.push(0.0);
            continue;
        }
        if with_n {
            xs[x.len()] = match count_cov {
                CountCovariate::Simulated => n as f64,
                CountCovariate::Expected => n_hat,
            };
        }
        let s = as_severity(sev.leaf(&xs).1)?;
        samples.push(n as f64 * draw_severity(s, n, rng));
    }
    let (m, var) = crate::special::mean_var(samples.iter().copied()).unwrap_or((samples[0], 0.0));
    Ok((m, var))
}

/// Per-record stream for Monte Carlo evaluation: master seed plus record index.
pub fn record_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64))
}

/// Sequential-model cells: frequency leaf × severity leaf reached with the
/// count covariate set to `N̂` of a one-year record.  Cell predictions and
/// variances come from `reps` simulations of that generic record; per-record
/// predictions from `reps` simulations at the record's exposure.
pub fn sequential_cells(
    freq: FittedTree,
    sev: FittedTree,
    test: &Dataset,
    names: &[String],
    count_cov: CountCovariate,
    reps: usize,
    seed: u64,
) -> Result<CellEstimates> {
    check_width(freq, test)?;
    let mut keys = Vec::with_capacity(test.len());
    let mut preds = Vec::with_capacity(test.len());
    for (i, r) in test.records.iter().enumerate() {
        let (fi, f) = freq.leaf(&r.x);
        let f = as_frequency(f)?;
        let si = if sev.p() == r.x.len() + 1 {
            let mut xs = r.x.clone();
            xs.push(count_moments(f.family, f.mu, f.lambda, 1.0).0);
            sev.tree.route(&xs)
        } else {
            sev.tree.route(&r.x)
        };
        keys.push((fi, si));
        let (m, _) = mc_aggregate(freq, sev, &r.x, r.v, count_cov, reps, &mut record_rng(seed, i))?;
        preds.push(m);
    }
    let labels = PartitionLabels::from_keys(&keys);
    let mut sev_names = names.to_vec();
    sev_names.push("N".into());
    let fpaths = freq.tree.leaf_paths(names);
    let spaths = sev.tree.leaf_paths(&sev_names);
    let mut err = None;
    let cells = CellEstimates::from_labels(MetricKind::Aggregate, test, &labels, preds, |i| {
        let (fi, si) = keys[i];
        let def = format!("[{}] x [{}]", fpaths[fi - 1], spaths[si - 1]);
        let rng = &mut record_rng(seed ^ 0x5EED_CE11, labels.labels[i]);
        match mc_aggregate(freq, sev, &test.records[i].x, 1.0, count_cov, reps, rng) {
            Ok((m, v)) => (def, m, Some(v)),
            Err(e) => {
                err = Some(e);
                (def, f64::NAN, None)
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(cells),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub kind: MetricKind,
    pub rss: f64,
    pub se: f64,
    pub ds: Option<f64>,
    pub lift: Option<f64>,
    pub n_cells: usize,
    /// Cells without a positive denominator (skipped in SE/DS).
    pub skipped_cells: usize,
    pub cells: Vec<Cell>,
}

pub fn metrics(model: &str, est: &CellEstimates) -> Result<MetricReport> {
    if est.cells.is_empty() {
        return Err(BcartError::Degenerate("no cells to evaluate".into()));
    }
    let rss = est.ys.iter().zip(&est.preds).map(|(y, p)| (y - p).powi(2)).sum();
    let mut se = 0.0;
    let mut ds = Some(0.0);
    let mut skipped = 0;
    for c in &est.cells {
        let Some(e) = c.empirical() else {
            skipped += 1;
            continue;
        };
        let term = (e - c.pred).powi(2);
        se += term;
        ds = match (ds, c.var) {
            (Some(acc), Some(v)) if v > 0.0 => Some(acc + term / v),
            _ => None,
        };
    }
    Ok(MetricReport {
        model: model.to_string(),
        kind: est.kind,
        rss,
        se,
        ds,
        lift: lift(&est.cells),
        n_cells: est.cells.len(),
        skipped_cells: skipped,
        cells: est.cells.clone(),
    })
}

/// Empirical ratio of the highest- to the lowest-predicted cell; `None` with
/// fewer than two cells or an empty extreme cell.
pub fn lift(cells: &[Cell]) -> Option<f64> {
    if cells.len() < 2 {
        return None;
    }
    let by = |a: &&Cell, b: &&Cell| a.pred.total_cmp(&b.pred);
    let hi = cells.iter().max_by(by)?;
    let lo = cells.iter().min_by(by)?;
    let (h, l) = (hi.empirical()?, lo.empirical()?);
    (l > 0.0).then(|| h / l)
}

impl MetricReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Summary row followed by the per-cell table.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::fs::File::create(path)?;
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:?}"));
        writeln!(w, "model,kind,rss,se,ds,lift,n_cells")?;
        writeln!(w, "{},{:?},{:?},{:?},{},{},{}", self.model, self.kind, self.rss, self.se, opt(self.ds), opt(self.lift), self.n_cells)?;
        writeln!(w)?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["cell", "definition", "n_records", "pred", "var", "sum_y", "sum_d", "exposure"])?;
        for (i, c) in self.cells.iter().enumerate() {
            cw.write_record([
                (i + 1).to_string(),
                c.definition.clone(),
                c.n_records.to_string(),
                format!("{:?}", c.pred),
                opt(c.var),
                format!("{:?}", c.sum_y),
                format!("{:?}", c.sum_d),
                format!("{:?}", c.exposure),
            ])?;
        }
        cw.flush()?;
        Ok(())
    }
}

/// Pairwise ARI between trees on the same points.
pub fn ari_table(trees: &[(&str, &Tree)], xs: &[&[f64]]) -> BTreeMap<(String, String), f64> {
    let parts: Vec<PartitionLabels> = trees.iter().map(|(_, t)| PartitionLabels::of_tree(t, xs)).collect();
    let mut out = BTreeMap::new();
    for i in 0..trees.len() {
        for j in 0..trees.len() {
            out.insert((trees[i].0.to_string(), trees[j].0.to_string()), crate::tree::ari(&parts[i], &parts[j]));
        }
    }
    out
}

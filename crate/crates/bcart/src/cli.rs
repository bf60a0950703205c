//! Command-line front end: `simulate | fit | select | predict | evaluate |
//! compare-trees`.
//!
//! Exit codes: 0 success, 2 configuration error (including usage errors),
//! 3 data degeneracy, 4 artifact mismatch.
//!
//! `fit` accepts `--config file.json`, a JSON document with the same keys as
//! the long flags (snake_case); flags given on the command line win.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::artifact::{self, CountSource, ModelArtifact, Provenance, RunManifest, COUNT_COVARIATE};
use crate::data_model::{self, ColumnMap, CovariateSpec, Dataset, Schema};
use crate::error::{BcartError, Result};
use crate::frequency_models::CountPriors;
use crate::mcmc::{self, ChainConfig, SweepConfig};
use crate::model::{Family, FitData, ModelSpec};
use crate::prediction_eval::{self as pe, CountCovariate, MetricKind, MetricReport};
use crate::severity_models::SeverityPriors;
use crate::simulation::{self, Scenario, ScenarioConfig};
use crate::tree::{superimpose, HyperParams, MoveProbs, PartitionLabels};

#[derive(Debug, Parser)]
#[command(name = "bcart", version, about = "Bayesian CART for claim frequency, severity and aggregate loss")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic claims dataset.
    Simulate(SimulateArgs),
    /// Run the (γ, ρ) sweep, select a tree by DIC and save it.
    Fit(FitArgs),
    /// Re-select from a fit manifest, optionally within a leaf-count range.
    Select(SelectArgs),
    /// Per-record predictions from a saved model.
    Predict(PredictArgs),
    /// RSS / SE / DS / Lift on a test set for one model or a frequency–severity pair.
    Evaluate(EvaluateArgs),
    /// Pairwise adjusted Rand index between the partitions of saved trees.
    CompareTrees(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ColumnArgs {
    #[arg(long, default_value = "exposure")]
    pub exposure_col: String,
    #[arg(long, default_value = "numclaims")]
    pub count_col: String,
    #[arg(long, default_value = "claimcst0")]
    pub amount_col: String,
}

impl ColumnArgs {
    fn map(&self) -> ColumnMap {
        ColumnMap { exposure: self.exposure_col.clone(), count: self.count_col.clone(), amount: self.amount_col.clone() }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Severity dependence on the claim count (scenario 1).
    #[arg(long, default_value_t = 0.0)]
    pub zeta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_low: f64,
    #[arg(long, default_value_t = 7.0)]
    pub lambda_high: f64,
    /// Output CSV (the training part when `--test-frac` is set).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Stratified test share written to `--test-output`.
    #[arg(long, requires = "test_output")]
    pub test_frac: Option<f64>,
    #[arg(long)]
    pub test_output: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountCovArg {
    /// Observed claim count.
    Observed,
    /// Expected count from `--freq-model`.
    Expected,
}

impl From<CountCovArg> for CountSource {
    fn from(c: CountCovArg) -> Self {
        match c {
            CountCovArg::Observed => CountSource::Observed,
            CountCovArg::Expected => CountSource::Expected,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model family: gamman, gamma, ln, weib, poisson, zip1-3, cpg, zicpg1-3.
    #[arg(long)]
    pub family: Option<String>,
    /// Covariate columns (default: every non-response column).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Covariates to treat as categorical (levels inferred, sorted).
    #[arg(long, value_delimiter = ',')]
    pub categorical: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Hyper-parameter grid as `γ:ρ` pairs, e.g. `0.95:10,0.99:5`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Selection range of leaf counts, `lo:hi`.
    #[arg(long)]
    pub leaf_range: Option<String>,
    /// Concurrent chains (0 = available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Add the claim count as a covariate of a severity tree.
    #[arg(long, value_enum)]
    pub count_covariate: Option<CountCovArg>,
    /// Frequency model supplying the expected count.
    #[arg(long)]
    pub freq_model: Option<PathBuf>,
    /// Model artifact (JSON).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Run manifest with chain diagnostics, DIC table and candidates.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

/// `fit --config` document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFileConfig {
    pub family: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub categorical: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub burn_in: Option<usize>,
    pub restarts: Option<usize>,
    pub grid: Option<Vec<HyperParams>>,
    pub min_leaf: Option<usize>,
    pub window: Option<usize>,
    pub window_share: Option<f64>,
    pub move_probs: Option<MoveProbs>,
    pub leaf_range: Option<(usize, usize)>,
    pub jobs: Option<usize>,
    pub count_covariate: Option<CountCovArg>,
    pub severity_priors: Option<SeverityPriors>,
    pub count_priors: Option<CountPriors>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub leaf_range: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Frequency model for an expected-count covariate.
    #[arg(long)]
    pub freq_model: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McCountArg {
    Simulated,
    Expected,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model to evaluate; with `--severity-model`, the frequency tree.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub severity_model: Option<PathBuf>,
    /// Frequency model for a single severity tree with an expected-count covariate.
    #[arg(long)]
    pub freq_model: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Monte Carlo repetitions for sequential aggregation.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Count covariate value used inside the Monte Carlo aggregation.
    #[arg(long, value_enum, default_value_t = McCountArg::Simulated)]
    pub mc_count: McCountArg,
    /// Report JSON.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Report CSV (summary and per-cell table).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, num_args = 2.., required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Frequency model for expected-count covariates.
    #[arg(long)]
    pub freq_model: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::CompareTrees(a) => cmd_compare(&a),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let scenario: Scenario = a.scenario.parse()?;
    let cfg = ScenarioConfig { scenario, n: a.n, seed: a.seed, zeta: a.zeta, lambda_pair: (a.lambda_low, a.lambda_high) };
    let ds = simulation::generate(&cfg)?;
    let cols = a.columns.map();
    match (a.test_frac, &a.test_output) {
        (Some(f), Some(test_path)) => {
            let (train, test) = data_model::stratified_split(&ds, f, a.seed)?;
            data_model::write_csv(&train, &a.output, &cols)?;
            data_model::write_csv(&test, test_path, &cols)?;
            println!("wrote {} training and {} test records", train.len(), test.len());
        }
        _ => {
            data_model::write_csv(&ds, &a.output, &cols)?;
            println!("wrote {} records", ds.len());
        }
    }
    Ok(())
}

fn csv_header(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

/// Schema from explicit covariate names, or every non-response column.
pub fn infer_schema(path: &Path, cols: &ColumnMap, covariates: Option<&[String]>, categorical: &[String]) -> Result<Schema> {
    let header = csv_header(path)?;
    let names: Vec<String> = match covariates {
        Some(c) => c.to_vec(),
        None => header
            .iter()
            .filter(|h| **h != cols.exposure && **h != cols.count && **h != cols.amount)
            .cloned()
            .collect(),
    };
    for c in categorical {
        if !names.contains(c) {
            return Err(BcartError::UnknownCovariate(c.clone()));
        }
    }
    let covariates = names
        .iter()
        .map(|n| if categorical.contains(n) { CovariateSpec::categorical(n, &[]) } else { CovariateSpec::numeric(n) })
        .collect();
    Ok(Schema { covariates, columns: cols.clone() })
}

/// Loads data for a saved model; a missing column or unknown level is an
/// artifact mismatch.
pub fn load_for_model(path: &Path, model: &ModelArtifact, cols: &ColumnMap) -> Result<Dataset> {
    let schema = Schema { covariates: model.covariates.clone(), columns: cols.clone() };
    let ds = data_model::load_csv(path, &schema).map_err(|e| match e {
        BcartError::MissingColumn(c) if c != cols.exposure && c != cols.count && c != cols.amount => {
            BcartError::Mismatch(format!("data lacks model covariate `{c}`"))
        }
        BcartError::Row { row, msg } if msg.contains("unknown level") => {
            BcartError::Mismatch(format!("row {row}: {msg}"))
        }
        e => e,
    })?;
    model.check_data(&ds)?;
    Ok(ds)
}

/// Appends the count covariate a model routes on, if any.
pub fn with_count_covariate(ds: &Dataset, source: Option<CountSource>, freq: Option<&ModelArtifact>) -> Result<Dataset> {
    match source {
        None => Ok(ds.clone()),
        Some(CountSource::Observed) => {
            let n: Vec<f64> = ds.records.iter().map(|r| r.n as f64).collect();
            ds.with_covariate(COUNT_COVARIATE, &n)
        }
        Some(CountSource::Expected) => {
            let f = freq.ok_or_else(|| BcartError::Config("an expected-count covariate needs --freq-model".into()))?;
            if !matches!(f.family(), Family::Frequency(_)) {
                return Err(BcartError::Mismatch("--freq-model is not a frequency model".into()));
            }
            f.check_data(ds)?;
            let model = f.fitted()?;
            let n: Vec<f64> = ds.records.iter().map(|r| pe::predict(model, &r.x, r.v)).collect();
            ds.with_covariate(COUNT_COVARIATE, &n)
        }
    }
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || BcartError::Config(format!("leaf range `{s}` is not lo:hi"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (lo, hi) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Merges flags over the optional config file into a sweep configuration.
pub fn fit_config(a: &FitArgs) -> Result<(SweepConfig, FitFileConfig)> {
    let file: FitFileConfig = match &a.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
            .map_err(|e| BcartError::Config(format!("{}: {e}", p.display())))?,
        None => FitFileConfig::default(),
    };
    let family: Family = a
        .family
        .clone()
        .or(file.family.clone())
        .ok_or_else(|| BcartError::Config("--family is required".into()))?
        .parse()?;
    let mut model = ModelSpec::new(family);
    if let Some(p) = file.severity_priors {
        model.severity_priors = p;
    }
    if let Some(p) = file.count_priors {
        model.count_priors = p;
    }
    let mut cfg = SweepConfig::new(model);
    if let Some(g) = &a.grid {
        cfg.grid = artifact::parse_grid(g)?;
    } else if let Some(g) = &file.grid {
        cfg.grid = g.clone();
    }
    let d = ChainConfig::default();
    cfg.chain = ChainConfig {
        steps: a.steps.or(file.steps).unwrap_or(d.steps),
        burn_in: a.burn_in.or(file.burn_in).unwrap_or(d.burn_in),
        window: a.window.or(file.window).unwrap_or(d.window),
        window_share: file.window_share.unwrap_or(d.window_share),
        move_probs: file.move_probs.unwrap_or(d.move_probs),
        min_leaf: a.min_leaf.or(file.min_leaf).unwrap_or(d.min_leaf),
    };
    cfg.restarts = a.restarts.or(file.restarts).unwrap_or(cfg.restarts);
    cfg.seed = a.seed.or(file.seed).unwrap_or(0);
    cfg.jobs = a.jobs.or(file.jobs).unwrap_or(0);
    cfg.leaf_range = match &a.leaf_range {
        Some(s) => Some(parse_range(s)?),
        None => file.leaf_range,
    };
    cfg.validate()?;
    Ok((cfg, file))
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let (cfg, file) = fit_config(a)?;
    let cols = a.columns.map();
    let categorical = a.categorical.clone().or(file.categorical.clone()).unwrap_or_default();
    let covs = a.covariates.clone().or(file.covariates.clone());
    let schema = infer_schema(&a.data, &cols, covs.as_deref(), &categorical)?;
    let ds = data_model::load_csv(&a.data, &schema)?;
    let count_cov: Option<CountSource> = a.count_covariate.or(file.count_covariate).map(Into::into);
    if count_cov.is_some() && !cfg.model.family.is_severity() {
        return Err(BcartError::Config("a count covariate only applies to severity families".into()));
    }
    let freq = a.freq_model.as_ref().map(ModelArtifact::load).transpose()?;
    let fit_ds = with_count_covariate(&ds, count_cov, freq.as_ref())?;
    let data = FitData::new(&fit_ds, cfg.model.family)?;
    let res = mcmc::run_sweep(&cfg, &data)?;

    let provenance = Provenance::new(cfg.seed, &cfg)?;
    let art = ModelArtifact::new(cfg.model, ds.spec.clone(), count_cov, res.selected.clone(), provenance.clone());
    art.save(&a.output)?;
    let table = artifact::dic_table(&res.candidates, &res.selected);
    let modal = artifact::modal_leaves(&res.chains, cfg.chain.burn_in);
    println!("{:>6} {:>6} {:>6} {:>10} {:>12}", "leaves", "gamma", "rho", "p_D", "DIC");
    for r in &table {
        let mark = if r.selected { " *" } else { "" };
        println!("{:>6} {:>6} {:>6} {:>10.2} {:>12.2}{mark}", r.leaves, r.gamma, r.rho, r.p_d, r.dic);
    }
    println!("selected {} leaves; modal post-burn-in leaf count {modal}", res.selected.leaves);
    if let Some(m) = &a.manifest {
        RunManifest {
            format_version: artifact::FORMAT_VERSION,
            config: cfg.clone(),
            covariates: ds.spec.clone(),
            count_covariate: count_cov,
            dataset: ds.manifest(),
            provenance,
            chains: res.chains,
            dic_table: table,
            modal_leaves: modal,
            candidates: res.candidates,
        }
        .save(m)?;
    }
    Ok(())
}

pub fn cmd_select(a: &SelectArgs) -> Result<()> {
    let m = RunManifest::load(&a.manifest)?;
    let range = a.leaf_range.as_deref().map(parse_range).transpose()?;
    let art = m.select(range)?;
    println!("selected {} leaves (DIC {:.2})", art.record.leaves, art.record.dic);
    art.save(&a.output)
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let art = ModelArtifact::load(&a.model)?;
    let cols = a.columns.map();
    let ds = load_for_model(&a.data, &art, &cols)?;
    let freq = a.freq_model.as_ref().map(ModelArtifact::load).transpose()?;
    let routed = with_count_covariate(&ds, art.count_covariate, freq.as_ref())?;
    let model = art.fitted()?;
    let mut w = csv::Writer::from_path(&a.output)?;
    w.write_record(["row", "leaf", "prediction"])?;
    for (i, r) in routed.records.iter().enumerate() {
        let (leaf, fit) = model.leaf(&r.x);
        w.write_record([(i + 1).to_string(), leaf.to_string(), format!("{:?}", fit.predict(r.v))])?;
    }
    w.flush()?;
    Ok(())
}

/// `evaluate` output: the metric report plus, for tree pairs, the
/// superimposed-cell count and the partitions' ARI on the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub report: MetricReport,
    pub ari: Option<f64>,
    pub superimposed_cells: Option<usize>,
    pub sequential: bool,
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let cols = a.columns.map();
    let first = ModelArtifact::load(&a.model)?;
    let test = load_for_model(&a.data, &first, &cols)?;
    let out = match &a.severity_model {
        None => {
            let freq = a.freq_model.as_ref().map(ModelArtifact::load).transpose()?;
            let routed = with_count_covariate(&test, first.count_covariate, freq.as_ref())?;
            let kind = match first.family() {
                Family::Severity(_) => MetricKind::Severity,
                Family::Frequency(_) => MetricKind::Frequency,
                Family::Joint(_) => MetricKind::Aggregate,
            };
            let mut names = first.names();
            if first.count_covariate.is_some() {
                names.push(COUNT_COVARIATE.into());
            }
            let est = pe::single_tree_cells(first.fitted()?, &routed, kind, &names)?;
            EvaluationReport {
                report: pe::metrics(&first.family().to_string(), &est)?,
                ari: None,
                superimposed_cells: None,
                sequential: false,
            }
        }
        Some(sp) => {
            let sev = ModelArtifact::load(sp)?;
            if !matches!(first.family(), Family::Frequency(_)) {
                return Err(BcartError::Mismatch("--model must be a frequency tree when --severity-model is given".into()));
            }
            if !sev.family().is_severity() {
                return Err(BcartError::Mismatch("--severity-model is not a severity tree".into()));
            }
            sev.check_data(&test)?;
            let names = first.names();
            let name = format!("{}+{}", first.family(), sev.family());
            let (freq_m, sev_m) = (first.fitted()?, sev.fitted()?);
            if sev.count_covariate.is_some() {
                let mc = match a.mc_count {
                    McCountArg::Simulated => CountCovariate::Simulated,
                    McCountArg::Expected => CountCovariate::Expected,
                };
                let est = pe::sequential_cells(freq_m, sev_m, &test, &names, mc, a.reps, a.seed)?;
                EvaluationReport {
                    superimposed_cells: Some(est.cells.len()),
                    report: pe::metrics(&name, &est)?,
                    ari: None,
                    sequential: true,
                }
            } else {
                let est = pe::combine_fs(freq_m, sev_m, &test, &names)?;
                let xs: Vec<&[f64]> = test.records.iter().map(|r| r.x.as_slice()).collect();
                let fa = PartitionLabels::of_tree(freq_m.tree, &xs);
                let sa = PartitionLabels::of_tree(sev_m.tree, &xs);
                let cells = superimpose(freq_m.tree, sev_m.tree, &xs).n_cells;
                EvaluationReport {
                    report: pe::metrics(&name, &est)?,
                    ari: Some(crate::tree::ari(&fa, &sa)),
                    superimposed_cells: Some(cells),
                    sequential: false,
                }
            }
        }
    };
    let r = &out.report;
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!(
        "{}: RSS {:.4e}  SE {:.4}  DS {}  Lift {}  cells {}",
        r.model,
        r.rss,
        r.se,
        opt(r.ds),
        opt(r.lift),
        r.n_cells
    );
    if let Some(ari) = out.ari {
        println!("ARI(frequency tree, severity tree) = {ari:.4}");
    }
    std::fs::write(&a.output, serde_json::to_string_pretty(&out)?)?;
    if let Some(c) = &a.csv {
        r.write_csv(c)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AriEntry {
    pub a: String,
    pub b: String,
    pub ari: f64,
}

pub fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let cols = a.columns.map();
    let arts: Vec<ModelArtifact> = a.models.iter().map(ModelArtifact::load).collect::<Result<_>>()?;
    let test = load_for_model(&a.data, &arts[0], &cols)?;
    let freq = a.freq_model.as_ref().map(ModelArtifact::load).transpose()?;
    let mut parts = Vec::new();
    for art in &arts {
        art.check_data(&test)?;
        let routed = with_count_covariate(&test, art.count_covariate, freq.as_ref())?;
        let xs: Vec<&[f64]> = routed.records.iter().map(|r| r.x.as_slice()).collect();
        parts.push(PartitionLabels::of_tree(&art.record.tree, &xs));
    }
    let label = |i: usize| format!("{} ({}) [{}]", arts[i].family(), arts[i].record.leaves, a.models[i].display());
    let mut entries = Vec::new();
    for i in 0..arts.len() {
        for j in 0..arts.len() {
            let v = crate::tree::ari(&parts[i], &parts[j]);
            if j > i {
                println!("ARI {} vs {} = {v:.4}", label(i), label(j));
            }
            entries.push(AriEntry { a: label(i), b: label(j), ari: v });
        }
    }
    if let Some(o) = &a.output {
        std::fs::write(o, serde_json::to_string_pretty(&entries)?)?;
    }
    Ok(())
}

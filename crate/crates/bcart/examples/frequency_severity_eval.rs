//! Frequency–severity pair (Poisson × Gamma) against a single joint CPG tree
//! on held-out Scenario 2.1 data: RSS, SE, DS and Lift of each.
//!
//! `cargo run --release --example frequency_severity_eval -- [seed] [steps]`

use bcart::data_model::{severity_subset, stratified_split, Dataset};
use bcart::mcmc::{run_sweep, ChainConfig, SweepConfig, SweepResult};
use bcart::model::{FitData, ModelSpec};
use bcart::prediction_eval::{combine_fs, metrics, single_tree_cells, FittedTree, MetricKind, MetricReport};
use bcart::simulation::{generate, Scenario, ScenarioConfig};
use bcart::tree::HyperParams;

fn fit(family: &str, ds: &Dataset, rhos: &[f64], seed: u64, steps: usize) -> bcart::Result<SweepResult> {
    let mut cfg = SweepConfig::new(ModelSpec::new(family.parse()?));
    cfg.grid = rhos.iter().map(|&r| HyperParams::new(0.99, r)).collect();
    cfg.chain = ChainConfig { steps, burn_in: steps / 4, ..Default::default() };
    cfg.seed = seed;
    run_sweep(&cfg, &FitData::new(ds, cfg.model.family)?)
}

fn row(r: &MetricReport) {
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!("{:<22} cells {:>2}  RSS {:>14.1}  SE {:>10.4}  DS {:>8}  Lift {:>6}", r.model, r.n_cells, r.rss, r.se, opt(r.ds), opt(r.lift));
}

fn main() -> bcart::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4000);
    let ds = generate(&ScenarioConfig::new(Scenario::S2_1, 5000, seed))?;
    let (train, test) = stratified_split(&ds, 0.2, seed)?;
    let names: Vec<String> = train.spec.iter().map(|c| c.name.clone()).collect();

    let pois = fit("poisson", &train, &[13.0, 10.0], seed, steps)?;
    let gam = fit("gamma", &severity_subset(&train)?, &[10.0, 8.0], seed, steps)?;
    let cpg = fit("cpg", &train, &[4.0, 3.0], seed, steps)?;

    let f = FittedTree::new(&pois.selected.tree, &pois.selected.fits)?;
    let s = FittedTree::new(&gam.selected.tree, &gam.selected.fits)?;
    let j = FittedTree::new(&cpg.selected.tree, &cpg.selected.fits)?;
    let pair = format!("Poisson({}) x Gamma({})", pois.selected.leaves, gam.selected.leaves);
    row(&metrics(&pair, &combine_fs(f, s, &test, &names)?)?);
    row(&metrics(&format!("CPG({})", cpg.selected.leaves), &single_tree_cells(j, &test, MetricKind::Aggregate, &names)?)?);
    Ok(())
}

//! Sequential model on Scenario 1: a Gamma severity tree that splits on the
//! observed claim count, combined with a Poisson tree by Monte Carlo
//! aggregation (the count covariate set to the simulated `N*`).
//!
//! `cargo run --release --example sequential_mc -- [seed] [steps] [reps]`

use bcart::data_model::{severity_subset, stratified_split, Dataset};
use bcart::mcmc::{run_sweep, ChainConfig, SweepConfig, SweepResult};
use bcart::model::{FitData, ModelSpec};
use bcart::prediction_eval::{metrics, sequential_cells, CountCovariate, FittedTree};
use bcart::simulation::{generate, Scenario, ScenarioConfig};
use bcart::tree::HyperParams;

fn fit(family: &str, ds: &Dataset, seed: u64, steps: usize) -> bcart::Result<SweepResult> {
    let mut cfg = SweepConfig::new(ModelSpec::new(family.parse()?));
    cfg.grid = vec![HyperParams::new(0.99, 10.0), HyperParams::new(0.99, 7.0)];
    cfg.chain = ChainConfig { steps, burn_in: steps / 4, ..Default::default() };
    cfg.seed = seed;
    run_sweep(&cfg, &FitData::new(ds, cfg.model.family)?)
}

fn main() -> bcart::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3000);
    let reps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let ds = generate(&ScenarioConfig { zeta: 0.001, ..ScenarioConfig::new(Scenario::S1, 5000, seed) })?;
    let (train, test) = stratified_split(&ds, 0.2, seed)?;
    let names: Vec<String> = train.spec.iter().map(|c| c.name.clone()).collect();

    let pois = fit("poisson", &train, seed, steps)?;
    let claimants = severity_subset(&train)?;
    let n: Vec<f64> = claimants.records.iter().map(|r| r.n as f64).collect();
    let gam1 = fit("gamma", &claimants.with_covariate("N", &n)?, seed, steps)?;

    let f = FittedTree::new(&pois.selected.tree, &pois.selected.fits)?;
    let s = FittedTree::new(&gam1.selected.tree, &gam1.selected.fits)?;
    let cells = sequential_cells(f, s, &test, &names, CountCovariate::Simulated, reps, seed)?;
    let report = metrics("Poisson + Gamma1", &cells)?;
    println!("RSS {:.1}  SE {:.2}  DS {:?}  Lift {:?}", report.rss, report.se, report.ds, report.lift);
    for c in &report.cells {
        println!("{:>9.1} predicted, {:>9.1} observed  {}", c.pred, c.empirical().unwrap_or(f64::NAN), c.definition);
    }
    Ok(())
}

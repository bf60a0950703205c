//! How much do separately grown frequency and severity trees agree?  Fits a
//! Poisson and a Gamma tree on Scenario 2.1 (shared split points) and 2.2
//! (different split points) and prints the test-set adjusted Rand index.
//!
//! `cargo run --release --example compare_trees -- [seed] [steps]`

use bcart::data_model::{severity_subset, stratified_split, Dataset};
use bcart::mcmc::{run_sweep, ChainConfig, SweepConfig, SweepResult};
use bcart::model::{FitData, ModelSpec};
use bcart::prediction_eval::ari_table;
use bcart::simulation::{generate, Scenario, ScenarioConfig};
use bcart::tree::HyperParams;

fn fit(family: &str, ds: &Dataset, seed: u64, steps: usize) -> bcart::Result<SweepResult> {
    let mut cfg = SweepConfig::new(ModelSpec::new(family.parse()?));
    cfg.grid = vec![HyperParams::new(0.99, 10.0), HyperParams::new(0.99, 8.0)];
    cfg.chain = ChainConfig { steps, burn_in: steps / 4, ..Default::default() };
    cfg.seed = seed;
    run_sweep(&cfg, &FitData::new(ds, cfg.model.family)?)
}

fn main() -> bcart::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4000);
    for scenario in [Scenario::S2_1, Scenario::S2_2] {
        let ds = generate(&ScenarioConfig::new(scenario, 5000, seed))?;
        let (train, test) = stratified_split(&ds, 0.2, seed)?;
        let pois = fit("poisson", &train, seed, steps)?;
        let gam = fit("gamma", &severity_subset(&train)?, seed, steps)?;
        let xs: Vec<&[f64]> = test.records.iter().map(|r| r.x.as_slice()).collect();
        let table = ari_table(&[("poisson", &pois.selected.tree), ("gamma", &gam.selected.tree)], &xs);
        println!(
            "{scenario:?}: Poisson({}) vs Gamma({}) ARI {:.3}",
            pois.selected.leaves,
            gam.selected.leaves,
            table[&("poisson".to_string(), "gamma".to_string())]
        );
    }
    Ok(())
}

//! Severity trees on Scenario 1 claimants with and without the claim count
//! as a covariate: Gamma (no count), Gamma1 (observed `N`) and Gamma2
//! (`N̂` from a Poisson tree).  Prints each model's DIC table.
//!
//! `cargo run --release --example severity_scenario1 -- [seed] [steps]`

use bcart::data_model::{severity_subset, stratified_split, Dataset};
use bcart::mcmc::{run_sweep, ChainConfig, SweepConfig, SweepResult};
use bcart::model::{FitData, ModelSpec};
use bcart::prediction_eval::{predict, FittedTree};
use bcart::simulation::{generate, Scenario, ScenarioConfig};
use bcart::tree::HyperParams;

fn fit(family: &str, ds: &Dataset, seed: u64, steps: usize) -> bcart::Result<SweepResult> {
    let mut cfg = SweepConfig::new(ModelSpec::new(family.parse()?));
    cfg.grid = vec![HyperParams::new(0.95, 10.0), HyperParams::new(0.99, 10.0), HyperParams::new(0.99, 7.0)];
    cfg.chain = ChainConfig { steps, burn_in: steps / 4, ..Default::default() };
    cfg.seed = seed;
    run_sweep(&cfg, &FitData::new(ds, cfg.model.family)?)
}

fn show(name: &str, r: &SweepResult) {
    println!("{name}");
    for c in &r.candidates {
        let mark = if c.leaves == r.selected.leaves { "*" } else { " " };
        println!("  {mark} {:>2} leaves  γ={:<4} ρ={:<3} p_D {:>6.2}  DIC {:>9.1}", c.leaves, c.hp.gamma, c.hp.rho, c.p_d, c.dic);
    }
}

fn main() -> bcart::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4000);
    let ds = generate(&ScenarioConfig { zeta: 0.001, ..ScenarioConfig::new(Scenario::S1, 5000, seed) })?;
    let (train, _test) = stratified_split(&ds, 0.2, seed)?;

    let pois = fit("poisson", &train, seed, steps)?;
    let freq = FittedTree::new(&pois.selected.tree, &pois.selected.fits)?;
    let claimants = severity_subset(&train)?;
    let n_obs: Vec<f64> = claimants.records.iter().map(|r| r.n as f64).collect();
    let n_hat: Vec<f64> = claimants.records.iter().map(|r| predict(freq, &r.x, r.v)).collect();

    show("Gamma", &fit("gamma", &claimants, seed, steps)?);
    show("Gamma1 (observed N)", &fit("gamma", &claimants.with_covariate("N", &n_obs)?, seed, steps)?);
    show("Gamma2 (N̂ from Poisson tree)", &fit("gamma", &claimants.with_covariate("N", &n_hat)?, seed, steps)?);
    Ok(())
}

//! Fits Poisson-BCART to a Scenario 1 dataset and prints the DIC table and
//! the selected tree's leaf rates.
//!
//! `cargo run --release --example frequency_scenario1 -- [seed] [steps]`

use std::time::Instant;

use bcart::data_model::stratified_split;
use bcart::mcmc::{run_sweep, ChainConfig, SweepConfig};
use bcart::model::{FitData, LeafFit, ModelSpec};
use bcart::simulation::{generate, Scenario, ScenarioConfig};

fn main() -> bcart::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let ds = generate(&ScenarioConfig { zeta: 0.001, ..ScenarioConfig::new(Scenario::S1, 5000, seed) })?;
    let (train, _test) = stratified_split(&ds, 0.2, seed)?;
    let data = FitData::new(&train, "poisson".parse()?)?;
    let steps: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let mut cfg = SweepConfig::new(ModelSpec::new("poisson".parse()?));
    cfg.chain = ChainConfig { steps, burn_in: steps / 5, ..Default::default() };
    cfg.seed = seed;
    let t0 = Instant::now();
    let res = run_sweep(&cfg, &data)?;
    println!("sweep took {:.1?}", t0.elapsed());
    for c in &res.chains {
        println!(
            "γ={} ρ={} restart {}: acceptance {:.3}, converged at {:?}, modal leaves {}",
            c.hp.gamma, c.hp.rho, c.restart, c.acceptance_rate, c.converged_at, c.modal_leaves
        );
    }
    println!("{:>6} {:>10} {:>8}", "leaves", "DIC", "p_D");
    for r in &res.candidates {
        println!("{:>6} {:>10.1} {:>8.2}", r.leaves, r.dic, r.p_d);
    }
    let names: Vec<String> = train.spec.iter().map(|c| c.name.clone()).collect();
    for (path, fit) in res.selected.tree.leaf_paths(&names).iter().zip(&res.selected.fits) {
        if let LeafFit::Frequency(f) = fit {
            println!("{path}: λ̄ = {:.3} ({} records)", f.lambda, f.n_obs);
        }
    }
    Ok(())
}

//! Joint CPG tree on Scenario 2.1 or 2.2: DIC table and the per-leaf
//! frequency, severity and premium estimates of the selected tree.
//!
//! `cargo run --release --example joint_scenario2 -- [s2.1|s2.2] [seed] [steps]`

use bcart::data_model::stratified_split;
use bcart::mcmc::{run_sweep, ChainConfig, SweepConfig};
use bcart::model::{FitData, LeafFit, ModelSpec};
use bcart::simulation::{generate, Scenario, ScenarioConfig};
use bcart::tree::HyperParams;

fn main() -> bcart::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario: Scenario = args.next().unwrap_or_else(|| "s2.1".into()).parse()?;
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5000);
    let ds = generate(&ScenarioConfig::new(scenario, 5000, seed))?;
    let (train, _test) = stratified_split(&ds, 0.2, seed)?;

    let mut cfg = SweepConfig::new(ModelSpec::new("cpg".parse()?));
    cfg.grid = [5.0, 4.0, 3.0, 2.0].iter().map(|&rho| HyperParams::new(0.99, rho)).collect();
    cfg.chain = ChainConfig { steps, burn_in: steps / 4, ..Default::default() };
    cfg.seed = seed;
    let res = run_sweep(&cfg, &FitData::new(&train, cfg.model.family)?)?;

    for c in &res.candidates {
        let mark = if c.leaves == res.selected.leaves { "*" } else { " " };
        println!("{mark} {:>2} leaves  ρ={:<3} p_D {:>6.2}  DIC {:>9.1}", c.leaves, c.hp.rho, c.p_d, c.dic);
    }
    let names: Vec<String> = train.spec.iter().map(|c| c.name.clone()).collect();
    for (path, fit) in res.selected.tree.leaf_paths(&names).iter().zip(&res.selected.fits) {
        if let LeafFit::Joint(j) = fit {
            println!(
                "{path}\n    λ̄ {:.3}  α̂ {:.2}  β̄ {:.5}  mean claim {:.0}  premium {:.2}  ({} records)",
                j.lambda,
                j.alpha,
                j.beta,
                j.alpha / j.beta,
                j.premium,
                j.n_obs
            );
        }
    }
    Ok(())
}

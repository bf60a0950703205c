//! Generates each synthetic scenario and prints per-dataset summaries:
//! claim rate, share of claimants and average-severity statistics.
//!
//! `cargo run --example simulate_scenarios -- [n] [seed]`

use bcart::data_model::severity_summary;
use bcart::simulation::{generate, Scenario, ScenarioConfig};

fn main() -> bcart::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    for scenario in [Scenario::S1, Scenario::S2_1, Scenario::S2_2] {
        let ds = generate(&ScenarioConfig { zeta: 0.001, ..ScenarioConfig::new(scenario, n, seed) })?;
        let claims: u64 = ds.records.iter().map(|r| r.n as u64).sum();
        let exposure: f64 = ds.records.iter().map(|r| r.v).sum();
        println!("{scenario:?}: {} records, {} covariates", ds.len(), ds.spec.len());
        println!("  claims per year {:.4}, claimants {:.1}%", claims as f64 / exposure, 100.0 * ds.n_positive() as f64 / n as f64);
        if let Some(s) = severity_summary(&ds) {
            println!("  average severity: min {:.2} mean {:.2} max {:.2} sd {:.2}", s.min, s.mean, s.max, s.sd);
        }
    }
    Ok(())
}

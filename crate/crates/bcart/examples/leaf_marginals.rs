//! Closed-form leaf quantities for one small group of policies under every
//! model family: integrated log-likelihood, posterior point estimate,
//! effective parameter count p_D and the leaf DIC.
//!
//! `cargo run --example leaf_marginals`

use bcart::data_model::{CovariateSpec, Dataset, PolicyRecord};
use bcart::frequency_models::Latent;
use bcart::model::{Family, FitData, ModelSpec};

fn main() -> bcart::Result<()> {
    let raw = [(1.0, 0, 0.0), (0.5, 1, 120.0), (1.0, 2, 310.0), (0.8, 0, 0.0), (1.0, 1, 95.0), (0.3, 3, 520.0), (1.0, 0, 0.0)];
    let records: Vec<PolicyRecord> =
        raw.iter().map(|&(v, n, s)| PolicyRecord { x: vec![0.0], v, n, s }).collect();
    let ds = Dataset::new(vec![CovariateSpec::numeric("x")], records)?;

    println!("{:>8} {:>12} {:>12} {:>8} {:>10}", "family", "log m(y)", "prediction", "p_D", "DIC");
    for name in Family::ALL {
        let family: Family = name.parse()?;
        let spec = ModelSpec::new(family);
        let data = FitData::new(&ds, family)?;
        let rows: Vec<u32> = (0..data.len() as u32).collect();
        // Zero-inflated families score given latents; use the "all at risk" draw.
        let lat = if family.needs_latents() { vec![Latent::default(); data.len()] } else { Vec::new() };
        let score = spec.score_leaf(&data, &rows, &lat);
        let fit = spec.fit_leaf(&data, &rows, &lat)?;
        println!("{name:>8} {:>12.4} {:>12.4} {:>8.4} {:>10.3}", score.log_lik, fit.predict(1.0), fit.p_d(), fit.dic());
    }
    Ok(())
}

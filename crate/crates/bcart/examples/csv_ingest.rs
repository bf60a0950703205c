//! CSV ingestion with a categorical covariate: writes a small policy file,
//! loads it with inferred levels, prints the dataset manifest and the
//! root-level target encoding, and checks the write/read round trip.
//!
//! `cargo run --example csv_ingest`

use bcart::data_model::{
    encode_categorical, load_csv, write_csv, ColumnMap, CovariateKind, CovariateSpec, EncodingTarget, Schema,
};

fn main() -> bcart::Result<()> {
    let dir = std::env::temp_dir().join(format!("bcart-csv-ingest-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("policies.csv");
    std::fs::write(
        &path,
        "area,veh_value,exposure,numclaims,claimcst0\n\
         A,1.06,0.30,0,0\n\
         C,0.47,0.99,1,650\n\
         A,2.21,0.55,0,0\n\
         B,1.51,1.00,2,1200\n\
         C,0.90,0.45,0,0\n\
         B,0.71,0.85,1,310\n",
    )?;
    let schema = Schema {
        covariates: vec![
            CovariateSpec { name: "area".into(), kind: CovariateKind::Categorical { levels: Vec::new() } },
            CovariateSpec::numeric("veh_value"),
        ],
        columns: ColumnMap::default(),
    };
    let ds = load_csv(&path, &schema)?;
    println!("{}", serde_json::to_string_pretty(&ds.manifest())?);

    let rows: Vec<usize> = (0..ds.len()).collect();
    let levels = match &ds.spec[0].kind {
        CovariateKind::Categorical { levels } => levels.clone(),
        CovariateKind::Numeric => unreachable!(),
    };
    for target in [EncodingTarget::Frequency, EncodingTarget::Severity] {
        let table = encode_categorical(&ds, &rows, "area", target, None)?;
        let pairs: Vec<String> = levels.iter().zip(&table.scores).map(|(l, s)| format!("{l}={s:.3}")).collect();
        println!("{target:?} encoding: {}", pairs.join(", "));
    }

    let copy = dir.join("copy.csv");
    write_csv(&ds, &copy, &schema.columns)?;
    let again = load_csv(&copy, &Schema { covariates: ds.spec.clone(), columns: ColumnMap::default() })?;
    println!("round trip identical: {}", again == ds);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

//! Loading DMU data from CSV with a TOML schema, then summarizing it.
//!
//!     cargo run --example csv_ingest -- data.csv schema.toml
//!
//! Without arguments a small inline dataset is used.

use dea_tobit::dataset::{self, Schema};
use dea_tobit::dea::{self, DeaModel};

const DATA: &str = "\
country,HBP,MD,NMN,CHE,income
Alpha,12.0,3.1,22.5,5.2,LI
Beta,9.5,4.0,25.1,,LMI
Gamma,15.2,2.2,19.8,6.9,LI
Delta,11.1,5.3,30.2,4.4,HUMI
";

const SCHEMA: &str = "\
[columns]
country = \"identifier\"
HBP = \"input\"
MD = \"input\"
NMN = \"output\"
CHE = \"explanatory\"
income = \"group\"
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ds = match args.as_slice() {
        [data, schema] => dataset::parse_csv(data.as_ref(), &Schema::from_toml_file(schema.as_ref())?)?,
        _ => dataset::parse_csv_reader(DATA.as_bytes(), &Schema::from_toml_str(SCHEMA)?)?,
    };

    println!("{} DMUs, identifier column {:?}", ds.len(), ds.identifier());
    for c in dataset::describe(&ds)?.columns {
        // missing explanatory cells are skipped, so counts can differ
        println!(
            "{:<6} {:<12} n={:<3} mean={:>8.3} sd={:>8.3} [{}, {}]",
            c.name,
            format!("{:?}", c.role),
            c.count,
            c.mean,
            c.sd.unwrap_or(f64::NAN),
            c.min,
            c.max
        );
    }

    let run = dea::run_all(&ds, DeaModel::vrs_input())?;
    if ds.group().is_some() {
        for g in dataset::group_summary(&ds, &run.scores())? {
            println!("group {:<5} n={} mean theta {:.3}", g.label, g.count, g.mean_score);
        }
    }

    // a schema that does not match the file is reported, not guessed
    let bad = Schema::from_toml_str("[columns]\ncountry = \"identifier\"\nNOPE = \"input\"\n")?;
    if let Err(e) = dataset::parse_csv_reader(DATA.as_bytes(), &bad) {
        println!("\nexpected error: {e}");
    }
    Ok(())
}

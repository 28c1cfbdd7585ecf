//! CRS vs VRS scores and the scale efficiency they imply.
//!
//!     cargo run --example scale_efficiency

use dea_tobit::dea::{self, DeaModel};
use dea_tobit::pipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = pipeline::generate_synthetic(12, 2, 2, 1, 3)?;
    let crs = dea::run_all(&ds, DeaModel::crs_input())?;
    let vrs = dea::run_all(&ds, DeaModel::vrs_input())?;
    let se = dea::scale_efficiency(&crs, &vrs)?;

    println!("{:<6} {:>7} {:>7} {:>7}", "DMU", "CRS", "VRS", "scale");
    for ((c, v), s) in crs.results.iter().zip(&vrs.results).zip(&se) {
        println!("{:<6} {:>7.3} {:>7.3} {:>7.3}", c.dmu, c.score, v.score, s);
    }
    println!("\nefficient: {} under CRS, {} under VRS", crs.efficient_count, vrs.efficient_count);
    Ok(())
}

//! Input-oriented VRS scores, peers, slacks and multiplier weights.
//!
//!     cargo run --example dea_scores

use dea_tobit::dataset::{Column, Dataset, VariableRole};
use dea_tobit::dea::{self, DeaModel, Orientation, ReturnsToScale};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = Dataset::new(
        "unit",
        ["A", "B", "C", "D", "E"].map(String::from).to_vec(),
        vec![
            Column::new("staff", VariableRole::Input, vec![2.0, 3.0, 6.0, 4.0, 5.0]),
            Column::new("beds", VariableRole::Input, vec![5.0, 3.0, 4.0, 6.0, 5.0]),
            Column::new("visits", VariableRole::Output, vec![1.0, 4.0, 4.0, 3.0, 2.0]),
        ],
        None,
    )?;

    let run = dea::run_all(&ds, DeaModel::vrs_input())?;
    println!("{:<4} {:>6}  {:<22} {:>9} {:>9}", "DMU", "theta", "peers", "s-(staff)", "s-(beds)");
    for r in &run.results {
        println!(
            "{:<4} {:>6.3}  {:<22} {:>9.3} {:>9.3}",
            r.dmu,
            r.score,
            dea::format_peers(&r.peers),
            r.input_slacks[0],
            r.input_slacks[1]
        );
    }
    println!("\npeer counts: {:?}", run.peer_counts);
    println!("mean theta {:.3}, {} of {} efficient", run.mean_score, run.efficient_count, run.len());

    let d = &run.results[3];
    println!(
        "\nD's weights: v = {:?}, u = {:?}, intercept {:.3}",
        d.weights.input_weights, d.weights.output_weights, d.weights.intercept
    );

    let out = dea::run_all(&ds, DeaModel::new(ReturnsToScale::Vrs, Orientation::Output))?;
    println!("output-oriented phi: {:?}", out.results.iter().map(|r| r.raw_score).collect::<Vec<_>>());

    let mut csv = Vec::new();
    dea::write_scores_csv(&run, &mut csv)?;
    print!("\n{}", String::from_utf8(csv)?);
    Ok(())
}

//! Fitting a left-censored Tobit model and printing its table.
//!
//!     cargo run --example tobit_fit

use dea_tobit::tobit::{self, InferenceRow, PValueReference, Regressors, TobitSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spend = vec![2.1, 3.4, 1.2, 5.6, 4.4, 2.9, 6.1, 3.3, 1.8, 4.9, 5.2, 2.5];
    let coverage = vec![55.0, 60.0, 48.0, 80.0, 71.0, 52.0, 90.0, 66.0, 45.0, 75.0, 70.0, 58.0];
    let inefficiency = [0.21, 0.32, 0.40, 0.0, 0.15, 0.02, 0.0, 0.0, 0.45, 0.10, 0.0, 0.29];

    let mut reg = Regressors::empty();
    reg.push("spend", spend).push("coverage", coverage.clone());
    // a scaled copy of a regressor is collinear and gets dropped
    reg.push("coverage_pct", coverage.iter().map(|c| c / 100.0).collect());

    let fit = tobit::fit(&reg, &inefficiency, &TobitSpec::default())?;
    println!("converged in {} iterations; {} of {} censored", fit.iterations, fit.n_censored(), fit.n_obs);
    for row in tobit::inference_table(&fit)? {
        match row {
            InferenceRow::Estimated(c) => {
                println!("{:<13} {:>11.7} {:>10.7} {:>6.2} {:>6.3}", c.name, c.coef, c.se, c.t, c.p)
            }
            InferenceRow::Dropped { name, reason } => println!("{name:<13} {:>11}  ({reason})", tobit::DROPPED_MARK),
        }
    }
    println!("sigma         {:>11.7} {:>10.7}", fit.sigma, fit.se_sigma);
    // With a response on [0, 1) the likelihood is a density above 1, so
    // logL can be positive and McFadden's R2 can exceed 1.
    for (label, value) in tobit::footer(&fit) {
        println!("{label}: {value}");
    }

    let t_spec = TobitSpec { p_value_reference: PValueReference::StudentT, ..TobitSpec::default() };
    let t_fit = tobit::fit(&reg, &inefficiency, &t_spec)?;
    println!("\np-values with t({}) reference: {:?}", t_fit.residual_df(), t_fit.p_values);
    Ok(())
}

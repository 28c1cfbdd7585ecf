//! Checks that reported regression statistics hang together: t from
//! coefficient and standard error, McFadden pseudo-R2 from log-likelihood
//! and the LR statistic.
//!
//!     cargo run --example stat_consistency

use dea_tobit::tobit::{self, CoefficientRow, PValueReference};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, coef, se, df) in [("CHE", -0.063752, 0.0216531, 40), ("CCI", 0.0155259, 0.0041438, 36)] {
        let z = CoefficientRow::new(name, coef, se, PValueReference::Normal, df);
        let t = CoefficientRow::new(name, coef, se, PValueReference::StudentT, df);
        println!("{name}: t = {:.2}, p(z) = {:.4}, p(t{df}) = {:.4}", z.t, z.p, t.p);
    }
    for (model, ll, lr) in [("model 1", -10.158682, 23.37), ("model 2", -2.307881, 39.07)] {
        let r2 = tobit::pseudo_r2_from_lr(ll, lr)?;
        println!("{model}: logL0 = {:.6}, pseudo R2 = {r2:.4}", ll - lr / 2.0);
    }
    Ok(())
}

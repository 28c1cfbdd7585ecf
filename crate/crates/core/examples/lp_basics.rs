//! Solving a small LP and reading its duals.
//!
//!     cargo run --example lp_basics

use dea_tobit::lp::{self, LinearProgram, LpStatus, Relation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // max 3x + 5y  s.t.  x <= 4, 2y <= 12, 3x + 2y <= 18
    let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
    lp.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0)
        .add_constraint(vec![0.0, 2.0], Relation::Le, 12.0)
        .add_constraint(vec![3.0, 2.0], Relation::Le, 18.0);
    println!("{lp}");

    let sol = lp::solve(&lp)?;
    assert_eq!(sol.status, LpStatus::Optimal);
    println!("objective = {} after {} iterations", sol.objective, sol.iterations);
    println!("x = {:?}", sol.primal);
    // shadow prices: change in the optimum per unit of each right-hand side
    println!("duals = {:?}", sol.duals);
    println!("dual objective = {}", sol.dual_objective);

    // a free variable with a lower bound moved below zero
    let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
    lp.add_constraint(vec![1.0, -1.0], Relation::Eq, 3.0).set_bounds(1, -10.0, None);
    let sol = lp::solve(&lp)?;
    println!("\nmin x + y, x - y = 3, y >= -10: objective {} at {:?}", sol.objective, sol.primal);

    let mut infeasible = LinearProgram::minimize(vec![1.0]);
    infeasible.add_constraint(vec![1.0], Relation::Ge, 2.0).add_constraint(vec![1.0], Relation::Le, 1.0);
    println!("x >= 2 and x <= 1: {:?}", lp::solve(&infeasible)?.status);
    Ok(())
}

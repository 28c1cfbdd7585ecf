//! Test-only oracles, kept independent of the library's solution paths.
#![allow(dead_code)]

use dea_tobit::lp::{LinearProgram, Relation, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BOX: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub enum Vertex {
    Infeasible,
    /// Optimum of the LP with an added `sum x <= BOX` row; `box_active`
    /// means the original problem is unbounded.
    Best { objective: f64, x: Vec<f64>, box_active: bool },
}

/// Solves a small square system by Gaussian elimination; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(p, k);
        b.swap(p, k);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for c in k..n {
                a[i][c] -= f * a[k][c];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Enumerates every basic feasible solution of `lp` (all variables `>= 0`,
/// no upper bounds) plus a large bounding row, and returns the best one.
pub fn vertex_enumeration(lp: &LinearProgram) -> Vertex {
    let nv = lp.num_vars();
    let mut rows: Vec<(Vec<f64>, Relation, f64)> =
        lp.constraints.iter().map(|c| (c.coefficients.clone(), c.relation, c.rhs)).collect();
    rows.push((vec![1.0; nv], Relation::Le, BOX));
    let m = rows.len();
    // Equality form: structural columns then one slack per inequality.
    let mut cols: Vec<Vec<f64>> = (0..nv).map(|j| rows.iter().map(|r| r.0[j]).collect()).collect();
    for (i, r) in rows.iter().enumerate() {
        let sign = match r.1 {
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
            Relation::Eq => continue,
        };
        let mut col = vec![0.0; m];
        col[i] = sign;
        cols.push(col);
    }
    let b: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let sign = if lp.sense == Sense::Minimize { 1.0 } else { -1.0 };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for subset in combinations(cols.len(), m) {
        let a: Vec<Vec<f64>> = (0..m).map(|i| subset.iter().map(|&j| cols[j][i]).collect()).collect();
        let Some(xb) = solve_square(a, b.clone()) else { continue };
        if xb.iter().any(|v| *v < -1e-9) {
            continue;
        }
        let mut x = vec![0.0; nv];
        for (k, &j) in subset.iter().enumerate() {
            if j < nv {
                x[j] = xb[k].max(0.0);
            }
        }
        let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        if best.as_ref().is_none_or(|(o, _)| sign * obj < sign * *o) {
            best = Some((obj, x));
        }
    }
    match best {
        None => Vertex::Infeasible,
        Some((objective, x)) => {
            let box_active = x.iter().sum::<f64>() > BOX * (1.0 - 1e-9);
            Vertex::Best { objective, x, box_active }
        }
    }
}

/// Random LP with `nv` variables and `nc` constraints, all variables `>= 0`.
pub fn random_lp(rng: &mut ChaCha8Rng, nv: usize, nc: usize) -> LinearProgram {
    let sense = if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let objective = (0..nv).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut lp = LinearProgram::new(sense, objective);
    for _ in 0..nc {
        let coefficients = (0..nv).map(|_| rng.random_range(-5.0..5.0)).collect();
        let u: f64 = rng.random();
        let relation = if u < 0.6 {
            Relation::Le
        } else if u < 0.9 {
            Relation::Ge
        } else {
            Relation::Eq
        };
        lp.add_constraint(coefficients, relation, rng.random_range(-5.0..10.0));
    }
    lp
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

use dea_tobit::dataset::{Column, Dataset, VariableRole};

/// Random positive dataset with `n` DMUs, `m` inputs and `s` outputs.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize, s: usize) -> Dataset {
    let mut columns = Vec::new();
    for i in 0..m {
        let v = (0..n).map(|_| rng.random_range(1.0..100.0)).collect();
        columns.push(Column::new(format!("x{i}"), VariableRole::Input, v));
    }
    for r in 0..s {
        let v = (0..n).map(|_| rng.random_range(1.0..100.0)).collect();
        columns.push(Column::new(format!("y{r}"), VariableRole::Output, v));
    }
    Dataset::new("dmu", (0..n).map(|j| format!("D{j:02}")).collect(), columns, None).unwrap()
}

pub fn random_shape(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (rng.random_range(1..=10), rng.random_range(1..=3), rng.random_range(1..=3))
}

/// Φ(z) from the positive-term erf series near zero and the erfc continued
/// fraction in the tails.
pub fn reference_norm_cdf(z: f64) -> f64 {
    let x = z.abs() / std::f64::consts::SQRT_2;
    let tail = if x < 3.0 {
        // erf(x) = 2/√π e^{-x²} Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1))
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term > 1e-18 * sum {
            n += 1.0;
            term *= 2.0 * x * x / (2.0 * n + 1.0);
            sum += term;
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * sum
    } else {
        // erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
        let mut frac = x;
        for k in (1..200).rev() {
            frac = x + (k as f64 / 2.0) / frac;
        }
        (-x * x).exp() / std::f64::consts::PI.sqrt() / frac
    };
    if z < 0.0 {
        0.5 * tail
    } else {
        1.0 - 0.5 * tail
    }
}

/// Tobit log-likelihood written term by term with [`reference_norm_cdf`].
/// `x` rows are observations; left-censored where `y <= lower`.
pub fn reference_tobit_ll(beta: &[f64], sigma: f64, x: &[Vec<f64>], y: &[f64], lower: f64) -> f64 {
    let mut ll = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let mu: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        if yi <= lower {
            ll += reference_norm_cdf((lower - mu) / sigma).ln();
        } else {
            let e = (yi - mu) / sigma;
            ll += -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - 0.5 * e * e;
        }
    }
    ll
}

/// Derivative-free maximizer: coarse grid over β and log σ, then compass
/// search with halving steps. Returns `(β, σ)`.
pub fn grid_search_mle(x: &[Vec<f64>], y: &[f64], lower: f64) -> (Vec<f64>, f64) {
    let k = x[0].len();
    let f = |p: &[f64]| reference_tobit_ll(&p[..k], p[k].exp(), x, y, lower);
    let mut best = vec![0.0; k + 1];
    let mut best_val = f(&best);
    // coarse grid: each coordinate in {-4, -2, 0, 2, 4}
    let levels = [-4.0, -2.0, 0.0, 2.0, 4.0];
    let total = levels.len().pow((k + 1) as u32);
    for idx in 0..total {
        let mut rem = idx;
        let p: Vec<f64> = (0..=k)
            .map(|_| {
                let v = levels[rem % levels.len()];
                rem /= levels.len();
                v
            })
            .collect();
        let v = f(&p);
        if v > best_val {
            best_val = v;
            best = p;
        }
    }
    let mut step = 1.0;
    while step > 1e-9 {
        let mut improved = false;
        for c in 0..=k {
            for dir in [1.0, -1.0] {
                let mut cand = best.clone();
                cand[c] += dir * step;
                let v = f(&cand);
                if v > best_val {
                    best_val = v;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let sigma = best[k].exp();
    best.truncate(k);
    (best, sigma)
}

pub struct TobitFixture {
    pub covariates: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl TobitFixture {
    /// Design rows with the intercept as the last column.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.y.len())
            .map(|i| {
                let mut r: Vec<f64> = self.covariates.iter().map(|c| c[i]).collect();
                r.push(1.0);
                r
            })
            .collect()
    }

    pub fn regressors(&self) -> dea_tobit::tobit::Regressors {
        let mut reg = dea_tobit::tobit::Regressors::empty();
        for (j, c) in self.covariates.iter().enumerate() {
            reg.push(format!("x{j}"), c.clone());
        }
        reg
    }

    pub fn censored_share(&self) -> f64 {
        self.y.iter().filter(|v| **v <= 0.0).count() as f64 / self.y.len() as f64
    }
}

/// Latent `y* = xβ + c + σ ε` censored at zero; redraws until 20–50% of
/// observations are censored.
pub fn tobit_fixture(seed: u64, n: usize, k: usize) -> TobitFixture {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    loop {
        let covariates: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| r.random_range(0.0..3.0)).collect()).collect();
        let beta: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
        let cons = r.random_range(-0.5..0.5);
        let sigma = r.random_range(0.3..1.0);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut r);
                let mu: f64 = cons + (0..k).map(|j| beta[j] * covariates[j][i]).sum::<f64>();
                (mu + sigma * e).max(0.0)
            })
            .collect();
        let fx = TobitFixture { covariates, y };
        let share = fx.censored_share();
        if (0.2..=0.5).contains(&share) {
            return fx;
        }
    }
}

//! Dense two-phase revised simplex.
//!
//! Problems are converted to the internal standard form `min c'z, A'z = b',
//! z >= 0, b' >= 0` (bound shifts, free-variable splitting, explicit upper
//! bound rows, power-of-two row equilibration, slack/surplus/artificial
//! columns). Pricing starts with Dantzig's rule and switches permanently to
//! Bland's rule once a run of degenerate pivots is observed, which guarantees
//! termination on cycling instances.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Internal feasibility / optimality tolerance.
pub const INTERNAL_TOL: f64 = 1e-9;
/// Tolerance promised on reported residuals and duality gaps.
pub const REPORTED_TOL: f64 = 1e-8;

const PIVOT_TOL: f64 = 1e-9;
const BREAKDOWN_PIVOT: f64 = 1e-11;
const REFACTOR_EVERY: usize = 40;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("invalid bounds for variable {var}: lower {lower}, upper {upper}")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A dense linear program. Variables default to `0 <= x < +inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<Option<f64>>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let nv = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            lower_bounds: vec![0.0; nv],
            upper_bounds: vec![None; nv],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_constraint(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coefficients, relation, rhs });
        self
    }

    /// Sets the bounds of one variable; `f64::NEG_INFINITY` makes it free below.
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: Option<f64>) -> &mut Self {
        self.lower_bounds[var] = lower;
        self.upper_bounds[var] = upper;
        self
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let nv = self.num_vars();
        if self.lower_bounds.len() != nv || self.upper_bounds.len() != nv {
            return Err(LpError::DimensionMismatch(format!(
                "{} objective coefficients but {} lower / {} upper bounds",
                nv,
                self.lower_bounds.len(),
                self.upper_bounds.len()
            )));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::NonFinite(format!("objective coefficient {j}")));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coefficients.len() != nv {
                return Err(LpError::DimensionMismatch(format!(
                    "constraint {i} has {} coefficients, expected {nv}",
                    row.coefficients.len()
                )));
            }
            if let Some(j) = row.coefficients.iter().position(|a| !a.is_finite()) {
                return Err(LpError::NonFinite(format!("constraint {i}, coefficient {j}")));
            }
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("right-hand side of constraint {i}")));
            }
        }
        for j in 0..nv {
            let lo = self.lower_bounds[j];
            let hi = self.upper_bounds[j];
            let bad = lo.is_nan()
                || lo == f64::INFINITY
                || matches!(hi, Some(u) if !u.is_finite() || u < lo);
            if bad {
                return Err(LpError::InvalidBounds { var: j, lower: lo, upper: hi.unwrap_or(f64::INFINITY) });
            }
        }
        Ok(())
    }

    /// Largest absolute violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.constraints {
            let lhs: f64 = row.coefficients.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match row.relation {
                Relation::Le => (lhs - row.rhs).max(0.0),
                Relation::Ge => (row.rhs - lhs).max(0.0),
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower_bounds[j] - xj);
            if let Some(u) = self.upper_bounds[j] {
                worst = worst.max(xj - u);
            }
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Plain-text dump for bug reports; [`LinearProgram::from_dump`] reads it back.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let fmt_row = |v: &[f64]| v.iter().map(|a| format!("{a:e}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "LPDUMP 1");
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = writeln!(out, "sense {sense}");
        let _ = writeln!(out, "vars {}", self.num_vars());
        let _ = writeln!(out, "rows {}", self.num_constraints());
        let _ = writeln!(out, "obj {}", fmt_row(&self.objective));
        for (lo, hi) in self.lower_bounds.iter().zip(&self.upper_bounds) {
            let hi = hi.map_or_else(|| "inf".to_string(), |u| format!("{u:e}"));
            let lo = if lo.is_infinite() { "-inf".to_string() } else { format!("{lo:e}") };
            let _ = writeln!(out, "bound {lo} {hi}");
        }
        for row in &self.constraints {
            let _ = writeln!(out, "row {} {:e} {}", row.relation.symbol(), row.rhs, fmt_row(&row.coefficients));
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self, LpError> {
        let bad = |msg: &str| LpError::DimensionMismatch(format!("malformed dump: {msg}"));
        let num = |tok: &str| -> Result<f64, LpError> {
            match tok {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => tok.parse::<f64>().map_err(|_| bad(tok)),
            }
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("LPDUMP 1") {
            return Err(bad("missing header"));
        }
        let mut sense = Sense::Minimize;
        let mut objective = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut constraints = Vec::new();
        for line in lines {
            let mut toks = line.split_whitespace();
            match toks.next() {
                Some("sense") => {
                    sense = match toks.next() {
                        Some("min") => Sense::Minimize,
                        Some("max") => Sense::Maximize,
                        _ => return Err(bad(line)),
                    }
                }
                Some("vars") | Some("rows") => {}
                Some("obj") => objective = toks.map(num).collect::<Result<_, _>>()?,
                Some("bound") => {
                    let lo = num(toks.next().ok_or_else(|| bad(line))?)?;
                    let hi = num(toks.next().ok_or_else(|| bad(line))?)?;
                    lower.push(lo);
                    upper.push(if hi.is_infinite() { None } else { Some(hi) });
                }
                Some("row") => {
                    let relation = match toks.next() {
                        Some("<=") => Relation::Le,
                        Some("=") => Relation::Eq,
                        Some(">=") => Relation::Ge,
                        _ => return Err(bad(line)),
                    };
                    let rhs = num(toks.next().ok_or_else(|| bad(line))?)?;
                    let coefficients = toks.map(num).collect::<Result<_, _>>()?;
                    constraints.push(Constraint { coefficients, relation, rhs });
                }
                _ => return Err(bad(line)),
            }
        }
        let lp = Self { sense, objective, constraints, lower_bounds: lower, upper_bounds: upper };
        lp.validate()?;
        Ok(lp)
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value in the problem's own sense. NaN unless optimal.
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Shadow prices `d objective / d rhs_i` of the original constraints.
    pub duals: Vec<f64>,
    /// Dual objective including contributions of finite variable bounds.
    pub dual_objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn terminal(status: LpStatus, nv: usize, nc: usize, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            primal: vec![f64::NAN; nv],
            duals: vec![f64::NAN; nc],
            dual_objective: f64::NAN,
            iterations,
        }
    }
}

/// How an original variable maps onto standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = lower + z[col]
    Shifted { col: usize, lower: f64 },
    /// x = upper - z[col]
    Mirrored { col: usize, upper: f64 },
    /// x = z[pos] - z[neg]
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct StandardForm {
    /// Column-major: `cols[j][i]`.
    cols: Vec<Vec<f64>>,
    kinds: Vec<ColKind>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    /// Multiplier taking a standard-form row dual back to the original row:
    /// product of the sign flip and the row scale.
    row_factor: Vec<f64>,
    /// Number of rows that came from original constraints (the rest are
    /// upper-bound rows).
    n_original_rows: usize,
    var_map: Vec<VarMap>,
    /// Constant term of the min-form objective from bound shifts.
    cost_offset: f64,
    initial_basis: Vec<usize>,
}

fn power_of_two_scale(max_abs: f64) -> f64 {
    if max_abs == 0.0 || !max_abs.is_finite() {
        return 1.0;
    }
    let e = max_abs.log2().round();
    (2f64).powi(-(e as i32))
}

fn standardize(lp: &LinearProgram) -> StandardForm {
    let sense_sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let nv = lp.num_vars();

    // Structural columns.
    let mut var_map = Vec::with_capacity(nv);
    let mut n_struct = 0;
    // For each structural column: (original var, sign).
    let mut struct_src: Vec<(usize, f64)> = Vec::new();
    let mut cost_offset = 0.0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..nv {
        let lo = lp.lower_bounds[j];
        let hi = lp.upper_bounds[j];
        let c = sense_sign * lp.objective[j];
        if lo.is_finite() {
            var_map.push(VarMap::Shifted { col: n_struct, lower: lo });
            struct_src.push((j, 1.0));
            cost_offset += c * lo;
            if let Some(u) = hi {
                bound_rows.push((n_struct, u - lo));
            }
            n_struct += 1;
        } else if let Some(u) = hi {
            var_map.push(VarMap::Mirrored { col: n_struct, upper: u });
            struct_src.push((j, -1.0));
            cost_offset += c * u;
            n_struct += 1;
        } else {
            var_map.push(VarMap::Split { pos: n_struct, neg: n_struct + 1 });
            struct_src.push((j, 1.0));
            struct_src.push((j, -1.0));
            n_struct += 2;
        }
    }

    // Rows: original constraints then bound rows, each as (coeffs over
    // structural cols, relation, rhs).
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for con in &lp.constraints {
        let mut a = vec![0.0; n_struct];
        let mut rhs = con.rhs;
        for (col, &(j, sign)) in struct_src.iter().enumerate() {
            a[col] = sign * con.coefficients[j];
        }
        for (j, map) in var_map.iter().enumerate() {
            match *map {
                VarMap::Shifted { lower, .. } => rhs -= con.coefficients[j] * lower,
                VarMap::Mirrored { upper, .. } => rhs -= con.coefficients[j] * upper,
                VarMap::Split { .. } => {}
            }
        }
        rows.push((a, con.relation, rhs));
    }
    let n_original_rows = rows.len();
    for &(col, width) in &bound_rows {
        let mut a = vec![0.0; n_struct];
        a[col] = 1.0;
        rows.push((a, Relation::Le, width));
    }

    let mut row_factor = Vec::with_capacity(rows.len());
    for (a, rel, rhs) in rows.iter_mut() {
        let max_abs = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = power_of_two_scale(max_abs);
        for v in a.iter_mut() {
            *v *= scale;
        }
        *rhs *= scale;
        let mut factor = scale;
        if *rhs < 0.0 {
            for v in a.iter_mut() {
                *v = -*v;
            }
            *rhs = -*rhs;
            *rel = rel.flipped();
            factor = -factor;
        }
        row_factor.push(factor);
    }

    let m = rows.len();
    let mut cols: Vec<Vec<f64>> = (0..n_struct).map(|j| rows.iter().map(|r| r.0[j]).collect()).collect();
    let mut kinds = vec![ColKind::Structural; n_struct];
    let mut cost: Vec<f64> = struct_src.iter().map(|&(j, s)| sense_sign * s * lp.objective[j]).collect();
    let mut initial_basis = vec![usize::MAX; m];
    for (i, (_, rel, _)) in rows.iter().enumerate() {
        match rel {
            Relation::Le => {
                let mut col = vec![0.0; m];
                col[i] = 1.0;
                initial_basis[i] = cols.len();
                cols.push(col);
                kinds.push(ColKind::Slack);
                cost.push(0.0);
            }
            Relation::Ge => {
                let mut col = vec![0.0; m];
                col[i] = -1.0;
                cols.push(col);
                kinds.push(ColKind::Slack);
                cost.push(0.0);
            }
            Relation::Eq => {}
        }
    }
    for (i, (_, rel, _)) in rows.iter().enumerate() {
        if *rel != Relation::Le {
            let mut col = vec![0.0; m];
            col[i] = 1.0;
            initial_basis[i] = cols.len();
            cols.push(col);
            kinds.push(ColKind::Artificial);
            cost.push(0.0);
        }
    }

    StandardForm {
        cols,
        kinds,
        cost,
        rhs: rows.iter().map(|r| r.2).collect(),
        row_factor,
        n_original_rows,
        var_map,
        cost_offset,
        initial_basis,
    }
}

/// Dense basis inverse with eta updates and periodic refactorization.
struct Basis {
    m: usize,
    head: Vec<usize>,
    /// Row-major `m x m`.
    inv: Vec<f64>,
    since_refactor: usize,
}

impl Basis {
    fn refactor(&mut self, cols: &[Vec<f64>]) -> Result<(), LpError> {
        let m = self.m;
        // Gauss-Jordan with partial pivoting on [B | I].
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.head.iter().enumerate() {
            for i in 0..m {
                a[i * m + k] = cols[j][i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let (p, best) = (k..m)
                .map(|i| (i, a[i * m + k].abs()))
                .fold((k, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if best < BREAKDOWN_PIVOT {
                return Err(LpError::NumericalBreakdown(format!("singular basis at column {k}")));
            }
            if p != k {
                for c in 0..m {
                    a.swap(p * m + c, k * m + c);
                    inv.swap(p * m + c, k * m + c);
                }
            }
            let piv = a[k * m + k];
            for c in 0..m {
                a[k * m + c] /= piv;
                inv[k * m + c] /= piv;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = a[i * m + k];
                if f != 0.0 {
                    for c in 0..m {
                        a[i * m + c] -= f * a[k * m + c];
                        inv[i * m + c] -= f * inv[k * m + c];
                    }
                }
            }
        }
        self.inv = inv;
        self.since_refactor = 0;
        Ok(())
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m).map(|i| (0..m).map(|k| self.inv[i * m + k] * col[k]).sum()).collect()
    }

    /// `c_B^T B^{-1}`.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m).map(|k| (0..m).map(|i| cb[i] * self.inv[i * m + k]).sum()).collect()
    }

    fn row_of_inverse(&self, r: usize) -> &[f64] {
        &self.inv[r * self.m..(r + 1) * self.m]
    }

    fn pivot(&mut self, r: usize, entering: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[r];
        for c in 0..m {
            self.inv[r * m + c] /= piv;
        }
        for i in 0..m {
            if i == r || w[i] == 0.0 {
                continue;
            }
            let f = w[i];
            for c in 0..m {
                self.inv[i * m + c] -= f * self.inv[r * m + c];
            }
        }
        self.head[r] = entering;
        self.since_refactor += 1;
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    sf: &'a StandardForm,
    basis: Basis,
    x_b: Vec<f64>,
    in_basis: Vec<bool>,
    iterations: usize,
    max_iterations: usize,
    bland: bool,
    degenerate_run: usize,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm) -> Result<Self, LpError> {
        let m = sf.rhs.len();
        let n = sf.cols.len();
        let mut in_basis = vec![false; n];
        for &j in &sf.initial_basis {
            in_basis[j] = true;
        }
        let mut basis = Basis { m, head: sf.initial_basis.clone(), inv: Vec::new(), since_refactor: 0 };
        basis.refactor(&sf.cols)?;
        let x_b = basis.ftran(&sf.rhs);
        Ok(Self {
            sf,
            basis,
            x_b,
            in_basis,
            iterations: 0,
            max_iterations: 50_000 + 200 * (m + n),
            bland: false,
            degenerate_run: 0,
        })
    }

    fn refresh(&mut self) -> Result<(), LpError> {
        self.basis.refactor(&self.sf.cols)?;
        self.x_b = self.basis.ftran(&self.sf.rhs);
        for v in self.x_b.iter_mut() {
            if *v < 0.0 && *v > -INTERNAL_TOL {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.head.iter().map(|&j| cost[j]).collect();
        self.basis.btran(&cb)
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        cost[j] - self.sf.cols[j].iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>()
    }

    fn run_phase(&mut self, cost: &[f64], allow_artificial: bool) -> Result<PhaseOutcome, LpError> {
        let n = self.sf.cols.len();
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::NumericalBreakdown(format!(
                    "iteration limit {} reached",
                    self.max_iterations
                )));
            }
            if self.basis.since_refactor >= REFACTOR_EVERY {
                self.refresh()?;
            }
            let y = self.duals(cost);

            let mut entering = None;
            let mut best = -INTERNAL_TOL;
            for j in 0..n {
                if self.in_basis[j] || (!allow_artificial && self.sf.kinds[j] == ColKind::Artificial) {
                    continue;
                }
                let d = self.reduced_cost(cost, &y, j);
                if self.bland {
                    if d < -INTERNAL_TOL {
                        entering = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let mut w = self.basis.ftran(&self.sf.cols[q]);
            let mut leaving = self.ratio_test(&w);
            if let Some(r) = leaving {
                if w[r].abs() < 1e3 * PIVOT_TOL && self.basis.since_refactor > 0 {
                    self.refresh()?;
                    w = self.basis.ftran(&self.sf.cols[q]);
                    leaving = self.ratio_test(&w);
                }
            }
            let Some(r) = leaving else {
                return Ok(PhaseOutcome::Unbounded);
            };
            if w[r].abs() < BREAKDOWN_PIVOT {
                return Err(LpError::NumericalBreakdown(format!("pivot magnitude {:e}", w[r].abs())));
            }

            let step = self.x_b[r] / w[r];
            if step.abs() <= INTERNAL_TOL {
                self.degenerate_run += 1;
                if self.degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            for i in 0..self.x_b.len() {
                if i != r {
                    self.x_b[i] -= step * w[i];
                    if self.x_b[i] < 0.0 && self.x_b[i] > -INTERNAL_TOL {
                        self.x_b[i] = 0.0;
                    }
                }
            }
            self.x_b[r] = step.max(0.0);
            let old = self.basis.head[r];
            self.in_basis[old] = false;
            self.in_basis[q] = true;
            self.basis.pivot(r, q, &w);
            self.iterations += 1;
        }
    }

    fn ratio_test(&self, w: &[f64]) -> Option<usize> {
        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for (i, &wi) in w.iter().enumerate() {
            if wi <= PIVOT_TOL {
                continue;
            }
            let ratio = self.x_b[i].max(0.0) / wi;
            let better = match leaving {
                None => true,
                Some(l) => {
                    if ratio < best_ratio - INTERNAL_TOL {
                        true
                    } else if ratio <= best_ratio + INTERNAL_TOL {
                        if self.bland {
                            self.basis.head[i] < self.basis.head[l]
                        } else {
                            wi > w[l]
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                leaving = Some(i);
                best_ratio = best_ratio.min(ratio);
            }
        }
        leaving
    }

    /// Pivots zero-valued artificials out of the basis where possible.
    fn expel_artificials(&mut self) -> Result<(), LpError> {
        let m = self.basis.m;
        for r in 0..m {
            let j = self.basis.head[r];
            if self.sf.kinds[j] != ColKind::Artificial {
                continue;
            }
            let row: Vec<f64> = self.basis.row_of_inverse(r).to_vec();
            let mut best: Option<(usize, f64)> = None;
            for (q, col) in self.sf.cols.iter().enumerate() {
                if self.in_basis[q] || self.sf.kinds[q] == ColKind::Artificial {
                    continue;
                }
                let alpha: f64 = row.iter().zip(col).map(|(a, b)| a * b).sum();
                if alpha.abs() > 1e-7 && best.is_none_or(|(_, b)| alpha.abs() > b) {
                    best = Some((q, alpha.abs()));
                }
            }
            // No candidate means the row is redundant; the artificial stays
            // basic at zero and can never leave.
            if let Some((q, _)) = best {
                let w = self.basis.ftran(&self.sf.cols[q]);
                self.in_basis[j] = false;
                self.in_basis[q] = true;
                self.basis.pivot(r, q, &w);
                self.iterations += 1;
            }
        }
        self.refresh()
    }
}

/// Solves `lp` to optimality, or classifies it as infeasible or unbounded.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let nv = lp.num_vars();
    let nc = lp.num_constraints();
    let sf = standardize(lp);
    let n = sf.cols.len();

    let mut simplex = Simplex::new(&sf)?;

    let phase1_cost: Vec<f64> =
        sf.kinds.iter().map(|k| if *k == ColKind::Artificial { 1.0 } else { 0.0 }).collect();
    if sf.kinds.contains(&ColKind::Artificial) {
        simplex.run_phase(&phase1_cost, true)?;
        simplex.refresh()?;
        let infeas: f64 = simplex
            .basis
            .head
            .iter()
            .zip(&simplex.x_b)
            .filter(|(j, _)| sf.kinds[**j] == ColKind::Artificial)
            .map(|(_, v)| v.max(0.0))
            .sum();
        let rhs_scale = sf.rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if infeas > INTERNAL_TOL * rhs_scale {
            return Ok(LpSolution::terminal(LpStatus::Infeasible, nv, nc, simplex.iterations));
        }
        simplex.expel_artificials()?;
    }

    match simplex.run_phase(&sf.cost, false)? {
        PhaseOutcome::Unbounded => {
            return Ok(LpSolution::terminal(LpStatus::Unbounded, nv, nc, simplex.iterations));
        }
        PhaseOutcome::Optimal => {}
    }
    simplex.refresh()?;

    let mut z = vec![0.0; n];
    for (r, &j) in simplex.basis.head.iter().enumerate() {
        z[j] = simplex.x_b[r].max(0.0);
    }
    let primal: Vec<f64> = sf
        .var_map
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, lower } => lower + z[col],
            VarMap::Mirrored { col, upper } => upper - z[col],
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();

    let sense_sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let y = simplex.duals(&sf.cost);
    let duals: Vec<f64> = (0..sf.n_original_rows).map(|i| sense_sign * y[i] * sf.row_factor[i]).collect();
    let min_form_dual: f64 = y.iter().zip(&sf.rhs).map(|(a, b)| a * b).sum::<f64>() + sf.cost_offset;

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&primal),
        primal,
        duals,
        dual_objective: sense_sign * min_form_dual,
        iterations: simplex.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn min_x_at_least_three() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Ge, 3.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.primal[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.duals[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn max_sum_on_simplex() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
        let sol = solve(&lp).unwrap();
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.dual_objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.duals[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_is_classified() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, 2.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_classified() {
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_bounded_variables() {
        // min x - y, -2 <= x free above, y in [0, 5], x + y >= -1
        let mut lp = LinearProgram::minimize(vec![1.0, -1.0]);
        lp.set_bounds(0, -2.0, None).set_bounds(1, 0.0, Some(5.0));
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, -1.0);
        let sol = solve(&lp).unwrap();
        assert_abs_diff_eq!(sol.objective, -7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.dual_objective, -7.0, epsilon = 1e-12);

        // fully free variable: min |shift| style, x free, x >= -4 via row
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, None);
        lp.add_constraint(vec![1.0], Relation::Ge, -4.0);
        let sol = solve(&lp).unwrap();
        assert_abs_diff_eq!(sol.primal[0], -4.0, epsilon = 1e-12);

        // free below with an upper bound
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, Some(2.5));
        let sol = solve(&lp).unwrap();
        assert_abs_diff_eq!(sol.primal[0], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 2.0);
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 4.0);
        let sol = solve(&lp).unwrap();
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-12);
        assert!(lp.max_violation(&sol.primal) < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve(&lp), Err(LpError::DimensionMismatch(_))));
        let mut lp = LinearProgram::minimize(vec![f64::NAN]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve(&lp), Err(LpError::NonFinite(_))));
    }

    #[test]
    fn beale_cycling_instance_terminates() {
        // Beale (1955): cycles under Dantzig's rule with naive tie-breaking.
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, -0.05, epsilon = 1e-10);
    }

    #[test]
    fn kuhn_cycling_instance_terminates() {
        // Kuhn's example, also cycles without an anti-cycling rule.
        let mut lp = LinearProgram::minimize(vec![-2.0, -3.0, 1.0, 12.0]);
        lp.add_constraint(vec![-2.0, -9.0, 1.0, 9.0], Relation::Le, 0.0);
        lp.add_constraint(vec![1.0 / 3.0, 1.0, -1.0 / 3.0, -2.0], Relation::Le, 0.0);
        lp.add_constraint(vec![2.0, 3.0, -1.0, -12.0], Relation::Le, 2.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, -2.0, epsilon = 1e-10);
    }

    #[test]
    fn dump_round_trips() {
        let mut lp = LinearProgram::maximize(vec![1.5, -0.25, 3.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, None).set_bounds(2, 1.0, Some(4.0));
        lp.add_constraint(vec![1.0, 2.0, 0.1], Relation::Le, 7.0);
        lp.add_constraint(vec![0.0, 1.0, -1.0], Relation::Ge, -2.0);
        lp.add_constraint(vec![1.0, 1.0, 1.0], Relation::Eq, 3.3);
        let back = LinearProgram::from_dump(&lp.dump()).unwrap();
        assert_eq!(back, lp);
    }
}

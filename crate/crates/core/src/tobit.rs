//! Censored (Tobit) regression by maximum likelihood.
//!
//! The latent response is `y* = xβ + u`, `u ~ N(0, σ²)`, observed as `y*`
//! when it lies strictly between the censoring bounds and as the bound
//! otherwise. Estimation runs Newton's method in Olsen's parameters
//! `γ = β/σ`, `h = 1/σ`, where the log-likelihood is globally concave.
//! Standard errors come from the inverse observed information, mapped back to
//! `(β, σ)` with the delta method.

use std::f64::consts::SQRT_2;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use thiserror::Error;

pub const INTERCEPT_NAME: &str = "cons";
/// Relative squared-residual threshold below which a column counts as a
/// linear combination of the columns before it.
pub const RANK_TOL: f64 = 1e-10;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum TobitError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid censoring bounds: lower {lower}, upper {upper:?}")]
    InvalidBounds { lower: f64, upper: Option<f64> },
    #[error("response at row {row} is {value}, outside the censoring bounds [{lower}, {upper}]")]
    ResponseOutOfBounds { row: usize, value: f64, lower: f64, upper: f64 },
    #[error("all {0} observations are censored")]
    AllCensored(usize),
    #[error("{n} observations are not enough for {params} coefficients")]
    InsufficientObservations { n: usize, params: usize },
    #[error("design is rank deficient: every regressor was dropped")]
    RankDeficientDesign,
    #[error("fit did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },
    #[error("null log-likelihood is zero; pseudo R-squared is undefined")]
    ZeroNullLikelihood,
}

/// Reference distribution for coefficient p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueReference {
    /// Standard normal (z).
    Normal,
    /// Student t with `n - k` degrees of freedom.
    StudentT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TobitSpec {
    pub lower: f64,
    /// Optional right-censoring bound.
    pub upper: Option<f64>,
    pub include_intercept: bool,
    pub max_iterations: usize,
    /// Convergence threshold on the gradient's infinity norm.
    pub gradient_tolerance: f64,
    /// Smallest parameter step tried by the line search.
    pub step_tolerance: f64,
    pub p_value_reference: PValueReference,
}

impl Default for TobitSpec {
    fn default() -> Self {
        Self {
            lower: 0.0,
            upper: None,
            include_intercept: true,
            max_iterations: 200,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-14,
            p_value_reference: PValueReference::Normal,
        }
    }
}

impl TobitSpec {
    fn validate(&self) -> Result<(), TobitError> {
        let bad = !self.lower.is_finite() || matches!(self.upper, Some(u) if !u.is_finite() || u <= self.lower);
        if bad {
            return Err(TobitError::InvalidBounds { lower: self.lower, upper: self.upper });
        }
        Ok(())
    }

    fn upper_or_inf(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }
}

/// Named regressor columns (without the intercept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressors {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Regressors {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Self {
        Self { names, columns }
    }

    pub fn empty() -> Self {
        Self { names: Vec::new(), columns: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) -> &mut Self {
        self.names.push(name.into());
        self.columns.push(column);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedVariable {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TobitFit {
    /// Names of the estimated coefficients; the intercept, if any, is last.
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    #[serde(with = "nan_as_null::vec")]
    pub se_beta: Vec<f64>,
    #[serde(with = "nan_as_null::vec")]
    pub t_stats: Vec<f64>,
    #[serde(with = "nan_as_null::vec")]
    pub p_values: Vec<f64>,
    pub sigma: f64,
    #[serde(with = "nan_as_null")]
    pub se_sigma: f64,
    pub log_likelihood: f64,
    /// Log-likelihood of the intercept-only model.
    pub null_log_likelihood: f64,
    pub lr_chi2: f64,
    /// Slope coefficients tested by the LR statistic.
    pub df: usize,
    pub prob_chi2: f64,
    pub pseudo_r2: Option<f64>,
    pub n_obs: usize,
    pub n_left_censored: usize,
    pub n_right_censored: usize,
    pub n_uncensored: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Regressor names in the order they were supplied, dropped ones included.
    pub requested: Vec<String>,
    pub dropped_variables: Vec<DroppedVariable>,
    pub spec: TobitSpec,
}

/// Serializes NaN as `null` (JSON has no NaN) and reads `null` back as NaN.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|x| (!x.is_nan()).then_some(*x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
        }
    }
}

impl TobitFit {
    pub fn n_censored(&self) -> usize {
        self.n_left_censored + self.n_right_censored
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.beta[i])
    }

    /// Residual degrees of freedom used for Student-t p-values.
    pub fn residual_df(&self) -> usize {
        self.n_obs.saturating_sub(self.beta.len()).max(1)
    }
}

/// `log Φ(z)`, accurate far into the lower tail.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z < -37.0 {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - HALF_LN_2PI + series.ln()
    } else {
        (0.5 * erfc(-z / SQRT_2)).ln()
    }
}

/// Inverse Mills ratio `φ(z) / Φ(z)`.
fn mills(z: f64) -> f64 {
    if z < -37.0 {
        // asymptotic expansion of Φ(z)/φ(z) = -1/z (1 - 1/z² + 3/z⁴ - ...)
        let z2 = z * z;
        -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2))
    } else {
        (-0.5 * z * z - HALF_LN_2PI - log_norm_cdf(z)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Censoring {
    Left,
    Right,
    None,
}

fn classify(y: &[f64], spec: &TobitSpec) -> Result<Vec<Censoring>, TobitError> {
    let upper = spec.upper_or_inf();
    y.iter()
        .enumerate()
        .map(|(i, &v)| {
            if !v.is_finite() {
                return Err(TobitError::NonFinite(format!("response row {}", i + 1)));
            }
            if v < spec.lower || v > upper {
                return Err(TobitError::ResponseOutOfBounds { row: i + 1, value: v, lower: spec.lower, upper });
            }
            Ok(if v <= spec.lower {
                Censoring::Left
            } else if v >= upper {
                Censoring::Right
            } else {
                Censoring::None
            })
        })
        .collect()
}

/// Tobit log-likelihood in Olsen's parameterization with its gradient and
/// Hessian. Parameters are `[γ_1..γ_k, h]`.
pub struct OlsenLikelihood<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    kinds: Vec<Censoring>,
    lower: f64,
    upper: f64,
}

impl<'a> OlsenLikelihood<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a [f64], spec: &TobitSpec) -> Result<Self, TobitError> {
        spec.validate()?;
        if x.nrows() != y.len() {
            return Err(TobitError::DimensionMismatch(format!("{} design rows, {} responses", x.nrows(), y.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(TobitError::NonFinite("design matrix".into()));
        }
        Ok(Self { x, y, kinds: classify(y, spec)?, lower: spec.lower, upper: spec.upper_or_inf() })
    }

    pub fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    pub fn value(&self, params: &DVector<f64>) -> f64 {
        let k = self.x.ncols();
        let h = params[k];
        let gamma = params.rows(0, k);
        let mut ll = 0.0;
        for (i, kind) in self.kinds.iter().enumerate() {
            let xg = self.x.row(i).dot(&gamma.transpose());
            ll += match kind {
                Censoring::None => {
                    let e = h * self.y[i] - xg;
                    h.ln() - HALF_LN_2PI - 0.5 * e * e
                }
                Censoring::Left => log_norm_cdf(h * self.lower - xg),
                Censoring::Right => log_norm_cdf(xg - h * self.upper),
            };
        }
        ll
    }

    /// Value, gradient and Hessian at `params`.
    pub fn evaluate(&self, params: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.x.ncols();
        let p = k + 1;
        let h = params[k];
        let gamma = params.rows(0, k);
        let mut ll = 0.0;
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        // per-observation derivative of z w.r.t. the parameters
        let mut dz = DVector::zeros(p);
        for (i, kind) in self.kinds.iter().enumerate() {
            let xi = self.x.row(i);
            let xg = xi.dot(&gamma.transpose());
            match kind {
                Censoring::None => {
                    let y = self.y[i];
                    let e = h * y - xg;
                    ll += h.ln() - HALF_LN_2PI - 0.5 * e * e;
                    for a in 0..k {
                        grad[a] += e * xi[a];
                        for b in 0..=a {
                            hess[(a, b)] -= xi[a] * xi[b];
                        }
                        hess[(k, a)] += xi[a] * y;
                    }
                    grad[k] += 1.0 / h - e * y;
                    hess[(k, k)] -= 1.0 / (h * h) + y * y;
                }
                Censoring::Left | Censoring::Right => {
                    let (z, sign, bound) = if *kind == Censoring::Left {
                        (h * self.lower - xg, -1.0, self.lower)
                    } else {
                        (xg - h * self.upper, 1.0, -self.upper)
                    };
                    // z = sign * xγ + bound * h
                    for a in 0..k {
                        dz[a] = sign * xi[a];
                    }
                    dz[k] = bound;
                    let lam = mills(z);
                    let curv = -lam * (z + lam);
                    ll += log_norm_cdf(z);
                    for a in 0..p {
                        grad[a] += lam * dz[a];
                        for b in 0..=a {
                            hess[(a, b)] += curv * dz[a] * dz[b];
                        }
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        (ll, grad, hess)
    }
}

fn check_beta_sigma(beta: &[f64], sigma: f64, x: &DMatrix<f64>) -> Result<(), TobitError> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(TobitError::NonPositiveSigma(sigma));
    }
    if beta.len() != x.ncols() {
        return Err(TobitError::DimensionMismatch(format!("{} coefficients, {} design columns", beta.len(), x.ncols())));
    }
    if beta.iter().any(|b| !b.is_finite()) || !sigma.is_finite() {
        return Err(TobitError::NonFinite("parameters".into()));
    }
    Ok(())
}

fn olsen_params(beta: &[f64], sigma: f64) -> DVector<f64> {
    let mut p = DVector::zeros(beta.len() + 1);
    for (i, b) in beta.iter().enumerate() {
        p[i] = b / sigma;
    }
    p[beta.len()] = 1.0 / sigma;
    p
}

/// Tobit log-likelihood at `(β, σ)`. `x` is the full design, intercept
/// column included if wanted.
pub fn log_likelihood(beta: &[f64], sigma: f64, x: &DMatrix<f64>, y: &[f64], spec: &TobitSpec) -> Result<f64, TobitError> {
    check_beta_sigma(beta, sigma, x)?;
    let lik = OlsenLikelihood::new(x, y, spec)?;
    // Olsen's likelihood omits the Jacobian term; in (β, σ) each
    // uncensored observation carries -log σ instead of +log h, which agree.
    Ok(lik.value(&olsen_params(beta, sigma)))
}

/// Gradient of [`log_likelihood`] with respect to `(β_1..β_k, σ)`.
pub fn log_likelihood_gradient(
    beta: &[f64],
    sigma: f64,
    x: &DMatrix<f64>,
    y: &[f64],
    spec: &TobitSpec,
) -> Result<Vec<f64>, TobitError> {
    check_beta_sigma(beta, sigma, x)?;
    let lik = OlsenLikelihood::new(x, y, spec)?;
    let (_, g, _) = lik.evaluate(&olsen_params(beta, sigma));
    let k = beta.len();
    // γ = β/σ, h = 1/σ
    let mut out: Vec<f64> = (0..k).map(|i| g[i] / sigma).collect();
    let d_sigma: f64 = (0..k).map(|i| -g[i] * beta[i] / (sigma * sigma)).sum::<f64>() - g[k] / (sigma * sigma);
    out.push(d_sigma);
    Ok(out)
}

struct Maximum {
    params: DVector<f64>,
    log_likelihood: f64,
    hessian: DMatrix<f64>,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
}

fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Option<(DVector<f64>, f64)> {
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * x;
    let xty = x.transpose() * &yv;
    let beta = xtx.cholesky()?.solve(&xty);
    let resid = &yv - x * &beta;
    Some((beta, resid.norm_squared()))
}

fn maximize(x: &DMatrix<f64>, y: &[f64], spec: &TobitSpec) -> Result<Maximum, TobitError> {
    let lik = OlsenLikelihood::new(x, y, spec)?;
    let n = y.len();
    let k = x.ncols();
    let (beta0, rss) = least_squares(x, y).ok_or(TobitError::RankDeficientDesign)?;
    let spread = {
        let mean = y.iter().sum::<f64>() / n as f64;
        (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let sigma0 = (rss / n as f64).sqrt().max(1e-3 * spread).max(1e-8);
    let mut params = olsen_params(beta0.as_slice(), sigma0);

    let (mut ll, mut grad, mut hess) = lik.evaluate(&params);
    let mut iterations = 0;
    let mut converged = grad.amax() < spec.gradient_tolerance;
    while !converged && iterations < spec.max_iterations {
        iterations += 1;
        let neg_h = -&hess;
        let step = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                // Concavity guarantees a PD information matrix in exact
                // arithmetic; regularize if rounding says otherwise.
                let ridge = 1e-8 * neg_h.diagonal().amax().max(1.0);
                match (neg_h + DMatrix::identity(k + 1, k + 1) * ridge).cholesky() {
                    Some(ch) => ch.solve(&grad),
                    None => grad.clone(),
                }
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t * step.amax() > spec.step_tolerance * params.amax().max(1.0) {
            let cand = &params + &step * t;
            if cand[k] > 0.0 {
                let cand_ll = lik.value(&cand);
                if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                    params = cand;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        (ll, grad, hess) = lik.evaluate(&params);
        converged = grad.amax() < spec.gradient_tolerance;
        if !accepted || !ll.is_finite() {
            break;
        }
    }
    if !converged {
        log::warn!("tobit fit stopped after {iterations} iterations with gradient norm {:e}", grad.amax());
    }
    Ok(Maximum { params, log_likelihood: ll, hessian: hess, gradient_norm: grad.amax(), iterations, converged })
}

/// Keeps columns in order, dropping any whose residual after projection on
/// the kept ones is below `RANK_TOL` of its squared norm.
fn independent_columns(columns: &[&[f64]]) -> Vec<Option<String>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::with_capacity(columns.len());
    for col in columns {
        let v0 = DVector::from_column_slice(col);
        let norm2 = v0.norm_squared();
        if norm2 == 0.0 {
            out.push(Some("all values are zero".to_string()));
            continue;
        }
        let mut v = v0.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let r2 = v.norm_squared();
        if r2 <= RANK_TOL * norm2 {
            out.push(Some("collinear with other regressors".to_string()));
        } else {
            basis.push(v / r2.sqrt());
            out.push(None);
        }
    }
    out
}

pub fn t_statistic(coef: f64, se: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else {
        coef / se
    }
}

/// Two-sided p-value of a t (or z) statistic.
pub fn two_sided_p(t: f64, reference: PValueReference, df: usize) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    match reference {
        PValueReference::Normal => erfc(t.abs() / SQRT_2),
        PValueReference::StudentT => {
            let dist = StudentsT::new(0.0, 1.0, df.max(1) as f64).expect("valid t distribution");
            2.0 * dist.sf(t.abs())
        }
    }
}

/// McFadden pseudo-R² recovered from a log-likelihood and its LR statistic:
/// `logL0 = logL - LR/2`, `R² = 1 - logL/logL0`.
pub fn pseudo_r2_from_lr(log_likelihood: f64, lr_chi2: f64) -> Result<f64, TobitError> {
    let null = log_likelihood - lr_chi2 / 2.0;
    if null == 0.0 {
        return Err(TobitError::ZeroNullLikelihood);
    }
    Ok(1.0 - log_likelihood / null)
}

/// Fits a Tobit model. Collinear regressors are dropped (and listed in
/// `dropped_variables`) instead of failing; a non-converged fit is returned
/// with `converged = false`.
pub fn fit(regressors: &Regressors, y: &[f64], spec: &TobitSpec) -> Result<TobitFit, TobitError> {
    spec.validate()?;
    let n = y.len();
    if regressors.names.len() != regressors.columns.len() {
        return Err(TobitError::DimensionMismatch("regressor names and columns differ in count".into()));
    }
    for (name, col) in regressors.names.iter().zip(&regressors.columns) {
        if col.len() != n {
            return Err(TobitError::DimensionMismatch(format!("{name} has {} rows, response has {n}", col.len())));
        }
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(TobitError::NonFinite(format!("{name} at row {}", i + 1)));
        }
    }
    let kinds = classify(y, spec)?;
    let n_left = kinds.iter().filter(|k| **k == Censoring::Left).count();
    let n_right = kinds.iter().filter(|k| **k == Censoring::Right).count();
    let n_unc = n - n_left - n_right;
    if n_unc == 0 {
        return Err(TobitError::AllCensored(n));
    }

    // Intercept goes first so a constant regressor is the one dropped.
    let ones = vec![1.0; n];
    let mut candidates: Vec<(&str, &[f64])> = Vec::new();
    if spec.include_intercept {
        candidates.push((INTERCEPT_NAME, &ones));
    }
    candidates.extend(regressors.names.iter().map(String::as_str).zip(regressors.columns.iter().map(Vec::as_slice)));
    let verdicts = independent_columns(&candidates.iter().map(|c| c.1).collect::<Vec<_>>());

    let mut kept: Vec<(&str, &[f64])> = Vec::new();
    let mut dropped_variables = Vec::new();
    for (cand, verdict) in candidates.iter().zip(verdicts) {
        match verdict {
            None => kept.push(*cand),
            Some(reason) => dropped_variables.push(DroppedVariable { name: cand.0.to_string(), reason }),
        }
    }
    // report order: regressors, then intercept
    if spec.include_intercept && kept.first().map(|c| c.0) == Some(INTERCEPT_NAME) {
        let cons = kept.remove(0);
        kept.push(cons);
    }
    if kept.is_empty() {
        return Err(TobitError::RankDeficientDesign);
    }
    for d in &dropped_variables {
        log::warn!("dropping regressor {}: {}", d.name, d.reason);
    }
    let k = kept.len();
    if n <= k {
        return Err(TobitError::InsufficientObservations { n, params: k });
    }

    let x = DMatrix::from_fn(n, k, |i, j| kept[j].1[i]);
    let max = maximize(&x, y, spec)?;

    let h = max.params[k];
    let gamma = max.params.rows(0, k);
    let beta: Vec<f64> = gamma.iter().map(|g| g / h).collect();
    let sigma = 1.0 / h;

    // delta method: (γ, h) -> (β = γ/h, σ = 1/h)
    let info = -&max.hessian;
    let cov_olsen = info.clone().cholesky().map(|c| c.inverse()).or_else(|| info.try_inverse());
    let (se_beta, se_sigma) = match cov_olsen {
        Some(cov) => {
            let mut jac = DMatrix::zeros(k + 1, k + 1);
            for i in 0..k {
                jac[(i, i)] = 1.0 / h;
                jac[(i, k)] = -gamma[i] / (h * h);
            }
            jac[(k, k)] = -1.0 / (h * h);
            let cov = &jac * cov * jac.transpose();
            ((0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(), cov[(k, k)].max(0.0).sqrt())
        }
        None => (vec![f64::NAN; k], f64::NAN),
    };

    let slopes = kept.iter().filter(|c| c.0 != INTERCEPT_NAME).count();
    let null_log_likelihood = if slopes == 0 && spec.include_intercept {
        max.log_likelihood
    } else {
        let ones = DMatrix::from_element(n, 1, 1.0);
        maximize(&ones, y, spec)?.log_likelihood
    };
    let lr_chi2 = 2.0 * (max.log_likelihood - null_log_likelihood);
    let prob_chi2 = if slopes == 0 {
        1.0
    } else {
        ChiSquared::new(slopes as f64).expect("positive df").sf(lr_chi2.max(0.0))
    };
    let pseudo_r2 = (null_log_likelihood != 0.0).then(|| 1.0 - max.log_likelihood / null_log_likelihood);

    let names: Vec<String> = kept.iter().map(|c| c.0.to_string()).collect();
    let df_resid = n.saturating_sub(k).max(1);
    let t_stats: Vec<f64> = beta.iter().zip(&se_beta).map(|(b, s)| t_statistic(*b, *s)).collect();
    let p_values = t_stats.iter().map(|t| two_sided_p(*t, spec.p_value_reference, df_resid)).collect();

    Ok(TobitFit {
        names,
        beta,
        se_beta,
        t_stats,
        p_values,
        sigma,
        se_sigma,
        log_likelihood: max.log_likelihood,
        null_log_likelihood,
        lr_chi2,
        df: slopes,
        prob_chi2,
        pseudo_r2,
        n_obs: n,
        n_left_censored: n_left,
        n_right_censored: n_right,
        n_uncensored: n_unc,
        converged: max.converged,
        iterations: max.iterations,
        gradient_norm: max.gradient_norm,
        requested: regressors.names.clone(),
        dropped_variables,
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

impl CoefficientRow {
    pub fn new(name: impl Into<String>, coef: f64, se: f64, reference: PValueReference, df: usize) -> Self {
        let t = t_statistic(coef, se);
        Self { name: name.into(), coef, se, t, p: two_sided_p(t, reference, df) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InferenceRow {
    Estimated(CoefficientRow),
    Dropped { name: String, reason: String },
}

impl InferenceRow {
    pub fn name(&self) -> &str {
        match self {
            InferenceRow::Estimated(r) => &r.name,
            InferenceRow::Dropped { name, .. } => name,
        }
    }
}

/// Coefficient table in request order with dropped regressors in place and
/// the intercept last.
pub fn inference_table(fit: &TobitFit) -> Result<Vec<InferenceRow>, TobitError> {
    if !fit.converged {
        return Err(TobitError::NotConverged { iterations: fit.iterations, gradient_norm: fit.gradient_norm });
    }
    let estimated = |i: usize| {
        InferenceRow::Estimated(CoefficientRow {
            name: fit.names[i].clone(),
            coef: fit.beta[i],
            se: fit.se_beta[i],
            t: fit.t_stats[i],
            p: fit.p_values[i],
        })
    };
    let mut rows = Vec::new();
    let mut order: Vec<&str> = fit.requested.iter().map(String::as_str).collect();
    if fit.spec.include_intercept {
        order.push(INTERCEPT_NAME);
    }
    for name in order {
        if let Some(i) = fit.names.iter().position(|n| n == name) {
            rows.push(estimated(i));
        } else if let Some(d) = fit.dropped_variables.iter().find(|d| d.name == name) {
            rows.push(InferenceRow::Dropped { name: d.name.clone(), reason: d.reason.clone() });
        }
    }
    Ok(rows)
}

pub const DROPPED_MARK: &str = "-----";

/// Regression table as CSV: one row per coefficient, then `sigma` and the
/// likelihood footer rows.
pub fn write_table_csv<W: Write>(fit: &TobitFit, writer: W) -> Result<(), Box<dyn std::error::Error>> {
    let rows = inference_table(fit)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["term", "coef", "std_err", "t", "p"])?;
    for row in &rows {
        match row {
            InferenceRow::Estimated(r) => {
                w.write_record([r.name.clone(), r.coef.to_string(), r.se.to_string(), r.t.to_string(), r.p.to_string()])?
            }
            InferenceRow::Dropped { name, .. } => w.write_record([name.as_str(), DROPPED_MARK, "", "", ""])?,
        }
    }
    w.write_record(["sigma".to_string(), fit.sigma.to_string(), fit.se_sigma.to_string(), String::new(), String::new()])?;
    for (label, value) in footer(fit) {
        w.write_record([label, value, String::new(), String::new(), String::new()])?;
    }
    w.flush()?;
    Ok(())
}

/// Footer rows below the coefficient table, full precision.
pub fn footer(fit: &TobitFit) -> Vec<(String, String)> {
    vec![
        (format!("LR chi2({})", fit.df), fit.lr_chi2.to_string()),
        ("Prob > chi2".into(), fit.prob_chi2.to_string()),
        ("Log likelihood".into(), fit.log_likelihood.to_string()),
        ("Pseudo R2".into(), fit.pseudo_r2.map(|v| v.to_string()).unwrap_or_default()),
        ("Number of obs".into(), fit.n_obs.to_string()),
        ("Left-censored".into(), fit.n_left_censored.to_string()),
        ("Right-censored".into(), fit.n_right_censored.to_string()),
        ("Uncensored".into(), fit.n_uncensored.to_string()),
    ]
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

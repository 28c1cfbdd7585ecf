//! Radial DEA efficiency models (CRS/VRS, input/output orientation) solved in
//! envelopment form, one LP per DMU.
//!
//! Scoring is two-phase: the radial LP finds θ* (or φ*), then an optional
//! second LP fixes the radial factor and maximizes the total slack so that
//! non-radial inefficiency is exposed. Multiplier (weight) form solutions are
//! read off the duals of the radial LP.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::lp::{self, LinearProgram, LpError, LpStatus, Relation};

/// λ above this marks a peer.
pub const LAMBDA_TOL: f64 = 1e-6;
/// Scores within this of 1 are efficient.
pub const EFFICIENCY_TOL: f64 = 1e-6;
/// Slacks below this fraction of the DMU's own value count as zero.
pub const SLACK_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeaError {
    #[error("DEA needs at least one input and one output column (found {inputs} inputs, {outputs} outputs)")]
    MissingVariables { inputs: usize, outputs: usize },
    #[error("DMU index {index} out of range for {n} DMUs")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("DMU {dmu:?}: envelopment LP reported infeasible; the data is corrupted")]
    InfeasibleModel { dmu: String },
    #[error("DMU {dmu:?}: envelopment LP reported unbounded; the data is corrupted")]
    UnboundedModel { dmu: String },
    #[error("DMU {dmu:?}: {source}")]
    Solver { dmu: String, source: LpError },
    #[error("runs are not comparable: {0}")]
    DatasetMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnsToScale {
    Crs,
    Vrs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeaModel {
    pub returns_to_scale: ReturnsToScale,
    pub orientation: Orientation,
    pub slack_phase: bool,
}

impl DeaModel {
    pub fn new(returns_to_scale: ReturnsToScale, orientation: Orientation) -> Self {
        Self { returns_to_scale, orientation, slack_phase: true }
    }

    pub fn vrs_input() -> Self {
        Self::new(ReturnsToScale::Vrs, Orientation::Input)
    }

    pub fn crs_input() -> Self {
        Self::new(ReturnsToScale::Crs, Orientation::Input)
    }

    pub fn without_slack_phase(mut self) -> Self {
        self.slack_phase = false;
        self
    }
}

impl Default for DeaModel {
    fn default() -> Self {
        Self::vrs_input()
    }
}

/// Multiplier-form weights recovered from the radial LP's duals.
///
/// Input orientation: `input_weights . x_k = 1` and the efficiency is
/// `output_weights . y_k + intercept`. Output orientation: `output_weights .
/// y_k = 1` and `input_weights . x_k + intercept` equals φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierWeights {
    pub output_weights: Vec<f64>,
    pub input_weights: Vec<f64>,
    /// Free VRS intercept; zero under CRS.
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peer {
    pub index: usize,
    pub name: String,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeaResult {
    pub dmu: String,
    pub index: usize,
    /// Efficiency in (0, 1]: θ for input orientation, 1/φ for output.
    pub score: f64,
    /// Raw radial factor: θ or φ.
    pub raw_score: f64,
    pub lambdas: Vec<f64>,
    pub peers: Vec<Peer>,
    pub input_slacks: Vec<f64>,
    pub output_slacks: Vec<f64>,
    pub radially_efficient: bool,
    pub pareto_efficient: bool,
    pub weights: MultiplierWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeaRun {
    pub model: DeaModel,
    pub dmu_names: Vec<String>,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub results: Vec<DeaResult>,
    /// How often each DMU is a peer of some other DMU.
    pub peer_counts: Vec<usize>,
    pub mean_score: f64,
    /// Radially efficient DMUs (score of 1).
    pub efficient_count: usize,
    pub efficient_share: f64,
    pub pareto_efficient_count: usize,
}

impl DeaRun {
    pub fn scores(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.score).collect()
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}

/// Borrowed input/output matrices of a dataset.
struct Technology<'a> {
    names: &'a [String],
    inputs: Vec<&'a [f64]>,
    outputs: Vec<&'a [f64]>,
}

impl<'a> Technology<'a> {
    fn new(ds: &'a Dataset) -> Result<Self, DeaError> {
        let inputs: Vec<&[f64]> = ds.inputs().into_iter().map(|c| c.values.as_slice()).collect();
        let outputs: Vec<&[f64]> = ds.outputs().into_iter().map(|c| c.values.as_slice()).collect();
        if inputs.is_empty() || outputs.is_empty() {
            return Err(DeaError::MissingVariables { inputs: inputs.len(), outputs: outputs.len() });
        }
        Ok(Self { names: ds.dmu_names(), inputs, outputs })
    }

    fn n(&self) -> usize {
        self.names.len()
    }

    fn check_index(&self, k: usize) -> Result<(), DeaError> {
        if k >= self.n() {
            return Err(DeaError::IndexOutOfRange { index: k, n: self.n() });
        }
        Ok(())
    }

    /// Variables `[radial, λ_1..λ_n]`.
    fn envelopment_lp(&self, k: usize, model: DeaModel) -> LinearProgram {
        let n = self.n();
        let mut objective = vec![0.0; n + 1];
        objective[0] = 1.0;
        let mut lp = match model.orientation {
            Orientation::Input => LinearProgram::minimize(objective),
            Orientation::Output => LinearProgram::maximize(objective),
        };
        lp.set_bounds(0, f64::NEG_INFINITY, None);
        for x in &self.inputs {
            let mut row = Vec::with_capacity(n + 1);
            match model.orientation {
                Orientation::Input => {
                    row.push(-x[k]);
                    row.extend_from_slice(x);
                    lp.add_constraint(row, Relation::Le, 0.0);
                }
                Orientation::Output => {
                    row.push(0.0);
                    row.extend_from_slice(x);
                    lp.add_constraint(row, Relation::Le, x[k]);
                }
            }
        }
        for y in &self.outputs {
            let mut row = Vec::with_capacity(n + 1);
            match model.orientation {
                Orientation::Input => {
                    row.push(0.0);
                    row.extend_from_slice(y);
                    lp.add_constraint(row, Relation::Ge, y[k]);
                }
                Orientation::Output => {
                    row.push(-y[k]);
                    row.extend_from_slice(y);
                    lp.add_constraint(row, Relation::Ge, 0.0);
                }
            }
        }
        if model.returns_to_scale == ReturnsToScale::Vrs {
            let mut row = vec![1.0; n + 1];
            row[0] = 0.0;
            lp.add_constraint(row, Relation::Eq, 1.0);
        }
        lp
    }

    /// Variables `[λ_1..λ_n, s⁻_1..s⁻_m, s⁺_1..s⁺_s]` with the radial factor
    /// fixed; maximizes total slack.
    fn slack_lp(&self, k: usize, model: DeaModel, radial: f64) -> LinearProgram {
        let (n, m, s) = (self.n(), self.inputs.len(), self.outputs.len());
        let width = n + m + s;
        let mut objective = vec![0.0; width];
        for c in objective.iter_mut().skip(n) {
            *c = 1.0;
        }
        let mut lp = LinearProgram::maximize(objective);
        let (input_scale, output_scale) = match model.orientation {
            Orientation::Input => (radial, 1.0),
            Orientation::Output => (1.0, radial),
        };
        for (i, x) in self.inputs.iter().enumerate() {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(x);
            row[n + i] = 1.0;
            lp.add_constraint(row, Relation::Eq, input_scale * x[k]);
        }
        for (r, y) in self.outputs.iter().enumerate() {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(y);
            row[n + m + r] = -1.0;
            lp.add_constraint(row, Relation::Eq, output_scale * y[k]);
        }
        if model.returns_to_scale == ReturnsToScale::Vrs {
            let mut row = vec![0.0; width];
            row[..n].iter_mut().for_each(|v| *v = 1.0);
            lp.add_constraint(row, Relation::Eq, 1.0);
        }
        lp
    }

    fn solve(&self, k: usize, model: DeaModel) -> Result<DeaResult, DeaError> {
        self.check_index(k)?;
        let (n, m, s) = (self.n(), self.inputs.len(), self.outputs.len());
        let dmu = self.names[k].clone();
        let solver_err = |source| DeaError::Solver { dmu: dmu.clone(), source };

        let lp = self.envelopment_lp(k, model);
        let sol = lp::solve(&lp).map_err(solver_err)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(DeaError::InfeasibleModel { dmu }),
            LpStatus::Unbounded => return Err(DeaError::UnboundedModel { dmu }),
        }
        let raw = sol.primal[0];
        let weights = self.weights_from_duals(&sol.duals, model);

        let (mut lambdas, mut input_slacks, mut output_slacks);
        if model.slack_phase {
            let mut phase2 = None;
            // θ* is feasible only up to solver tolerance; nudge it outward on
            // the rare instance where fixing it exactly is infeasible.
            for relax in [0.0, 1e-10, 1e-9, 1e-8] {
                let fixed = match model.orientation {
                    Orientation::Input => raw * (1.0 + relax),
                    Orientation::Output => raw * (1.0 - relax),
                };
                let sol2 = lp::solve(&self.slack_lp(k, model, fixed)).map_err(solver_err)?;
                if sol2.is_optimal() {
                    phase2 = Some(sol2);
                    break;
                }
            }
            let sol2 = phase2.ok_or_else(|| DeaError::InfeasibleModel { dmu: dmu.clone() })?;
            lambdas = sol2.primal[..n].to_vec();
            input_slacks = sol2.primal[n..n + m].to_vec();
            output_slacks = sol2.primal[n + m..].to_vec();
        } else {
            lambdas = sol.primal[1..].to_vec();
            let (input_scale, output_scale) = match model.orientation {
                Orientation::Input => (raw, 1.0),
                Orientation::Output => (1.0, raw),
            };
            input_slacks = self
                .inputs
                .iter()
                .map(|x| input_scale * x[k] - dot(&lambdas, x))
                .collect();
            output_slacks = self
                .outputs
                .iter()
                .map(|y| dot(&lambdas, y) - output_scale * y[k])
                .collect();
        }
        for v in lambdas.iter_mut().chain(input_slacks.iter_mut()).chain(output_slacks.iter_mut()) {
            *v = v.max(0.0);
        }

        let score = match model.orientation {
            Orientation::Input => raw,
            Orientation::Output => 1.0 / raw,
        }
        .min(1.0);
        let radially_efficient = score >= 1.0 - EFFICIENCY_TOL;
        let slack_free = input_slacks.iter().zip(&self.inputs).all(|(sl, x)| *sl <= SLACK_TOL * x[k])
            && output_slacks.iter().zip(&self.outputs).all(|(sl, y)| *sl <= SLACK_TOL * y[k]);
        let pareto_efficient = radially_efficient && slack_free;
        // clear round-off residue so exported slacks read as exact zeros
        for (sl, x) in input_slacks.iter_mut().zip(&self.inputs).chain(output_slacks.iter_mut().zip(&self.outputs)) {
            if *sl <= 1e-10 * x[k] {
                *sl = 0.0;
            }
        }
        if pareto_efficient {
            // The DMU itself is an optimal reference; report it canonically.
            lambdas = vec![0.0; n];
            lambdas[k] = 1.0;
            input_slacks = vec![0.0; m];
            output_slacks = vec![0.0; s];
        }
        let peers = lambdas
            .iter()
            .enumerate()
            .filter(|(_, l)| **l > LAMBDA_TOL)
            .map(|(j, l)| Peer { index: j, name: self.names[j].clone(), lambda: *l })
            .collect();

        Ok(DeaResult {
            dmu,
            index: k,
            score,
            raw_score: raw,
            lambdas,
            peers,
            input_slacks,
            output_slacks,
            radially_efficient,
            pareto_efficient,
            weights,
        })
    }

    fn weights_from_duals(&self, duals: &[f64], model: DeaModel) -> MultiplierWeights {
        let (m, s) = (self.inputs.len(), self.outputs.len());
        let intercept = match model.returns_to_scale {
            ReturnsToScale::Vrs => duals[m + s],
            ReturnsToScale::Crs => 0.0,
        };
        // Shadow price signs: a `<=` row of a min problem and a `>=` row of a
        // max problem have non-positive duals.
        let (input_sign, output_sign) = match model.orientation {
            Orientation::Input => (-1.0, 1.0),
            Orientation::Output => (1.0, -1.0),
        };
        MultiplierWeights {
            input_weights: duals[..m].iter().map(|d| (input_sign * d).max(0.0)).collect(),
            output_weights: duals[m..m + s].iter().map(|d| (output_sign * d).max(0.0)).collect(),
            intercept,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Envelopment LP for DMU `k`: variables `[θ or φ, λ_1..λ_n]`.
pub fn build_envelopment_lp(k: usize, ds: &Dataset, model: DeaModel) -> Result<LinearProgram, DeaError> {
    let tech = Technology::new(ds)?;
    tech.check_index(k)?;
    Ok(tech.envelopment_lp(k, model))
}

pub fn solve_dmu(k: usize, ds: &Dataset, model: DeaModel) -> Result<DeaResult, DeaError> {
    Technology::new(ds)?.solve(k, model)
}

/// Scores every DMU. Per-DMU solves run on the current rayon pool; the
/// result is ordered by dataset row regardless of scheduling.
pub fn run_all(ds: &Dataset, model: DeaModel) -> Result<DeaRun, DeaError> {
    let tech = Technology::new(ds)?;
    let n = tech.n();
    let solved: Vec<Result<DeaResult, DeaError>> = (0..n).into_par_iter().map(|k| tech.solve(k, model)).collect();
    let results = solved.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut peer_counts = vec![0usize; n];
    for r in &results {
        for p in &r.peers {
            if p.index != r.index {
                peer_counts[p.index] += 1;
            }
        }
    }
    let mean_score = results.iter().map(|r| r.score).sum::<f64>() / n as f64;
    let efficient_count = results.iter().filter(|r| r.radially_efficient).count();
    let pareto_efficient_count = results.iter().filter(|r| r.pareto_efficient).count();
    Ok(DeaRun {
        model,
        dmu_names: ds.dmu_names().to_vec(),
        input_names: ds.inputs().iter().map(|c| c.name.clone()).collect(),
        output_names: ds.outputs().iter().map(|c| c.name.clone()).collect(),
        results,
        peer_counts,
        mean_score,
        efficient_count,
        efficient_share: efficient_count as f64 / n as f64,
        pareto_efficient_count,
    })
}

/// `θ_CRS / θ_VRS` per DMU.
pub fn scale_efficiency(crs: &DeaRun, vrs: &DeaRun) -> Result<Vec<f64>, DeaError> {
    if crs.model.returns_to_scale != ReturnsToScale::Crs || vrs.model.returns_to_scale != ReturnsToScale::Vrs {
        return Err(DeaError::DatasetMismatch("expected one CRS run and one VRS run".into()));
    }
    if crs.model.orientation != vrs.model.orientation {
        return Err(DeaError::DatasetMismatch("runs use different orientations".into()));
    }
    if crs.dmu_names != vrs.dmu_names
        || crs.input_names != vrs.input_names
        || crs.output_names != vrs.output_names
    {
        return Err(DeaError::DatasetMismatch("runs cover different DMUs or variables".into()));
    }
    Ok(crs.results.iter().zip(&vrs.results).map(|(c, v)| c.score / v.score).collect())
}

/// `name:λ` pairs joined by semicolons.
pub fn format_peers(peers: &[Peer]) -> String {
    peers.iter().map(|p| format!("{}:{}", p.name, p.lambda)).collect::<Vec<_>>().join(";")
}

/// One row per DMU: scores, flags, peers, slacks and peer count.
pub fn write_scores_csv<W: Write>(run: &DeaRun, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["dmu", "score", "raw_score", "radially_efficient", "pareto_efficient", "peers"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(run.input_names.iter().map(|n| format!("slack_{n}")));
    header.extend(run.output_names.iter().map(|n| format!("slack_{n}")));
    header.push("peer_count".into());
    w.write_record(&header)?;
    for (r, count) in run.results.iter().zip(&run.peer_counts) {
        let mut rec = vec![
            r.dmu.clone(),
            r.score.to_string(),
            r.raw_score.to_string(),
            r.radially_efficient.to_string(),
            r.pareto_efficient.to_string(),
            format_peers(&r.peers),
        ];
        rec.extend(r.input_slacks.iter().chain(&r.output_slacks).map(f64::to_string));
        rec.push(count.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_peer_counts_csv<W: Write>(run: &DeaRun, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["dmu", "peer_count", "radially_efficient"])?;
    for (r, count) in run.results.iter().zip(&run.peer_counts) {
        w.write_record([r.dmu.as_str(), &count.to_string(), &r.radially_efficient.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

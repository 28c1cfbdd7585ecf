//! Two-stage analysis: DEA scores, an inefficiency response, and one Tobit
//! regression per configured model, assembled into a report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{self, Column, Dataset, DatasetError, DescriptiveStats, GroupColumn, GroupRow, VariableRole};
use crate::dea::{self, DeaError, DeaModel, DeaRun};
use crate::tobit::{self, InferenceRow, PValueReference, Regressors, TobitError, TobitFit, TobitSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("stage 1 (DEA): {0}")]
    Dea(#[from] DeaError),
    #[error("stage 2 (Tobit model {model}): {source}")]
    Tobit { model: String, source: TobitError },
    #[error("writing {path}: {message}")]
    Io { path: String, message: String },
}

/// How DEA scores become the stage-2 response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseTransform {
    /// `1 - θ`, left-censored at 0 (efficient DMUs sit on the bound).
    Inefficiency,
    /// Raw `θ`, right-censored at 1.
    Score,
}

impl ResponseTransform {
    pub fn tobit_bounds(self) -> (f64, Option<f64>) {
        match self {
            ResponseTransform::Inefficiency => (0.0, None),
            ResponseTransform::Score => (0.0, Some(1.0)),
        }
    }

    /// Radially efficient DMUs map exactly onto the censoring bound.
    pub fn apply(self, run: &DeaRun) -> Vec<f64> {
        run.results
            .iter()
            .map(|r| match self {
                ResponseTransform::Inefficiency if r.radially_efficient => 0.0,
                ResponseTransform::Inefficiency => (1.0 - r.score).max(0.0),
                ResponseTransform::Score if r.radially_efficient => 1.0,
                ResponseTransform::Score => r.score.min(1.0),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn all() -> Vec<ReportFormat> {
        vec![ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub variables: Vec<String>,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, variables: &[&str]) -> Self {
        Self { name: name.into(), variables: variables.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub dea: DeaModel,
    pub models: Vec<ModelSpec>,
    pub response: ResponseTransform,
    pub p_value_reference: PValueReference,
    pub formats: Vec<ReportFormat>,
}

pub const MODEL1_VARIABLES: [&str; 5] = ["NM", "MD", "HBP", "CHE", "CHEC"];
pub const MODEL2_VARIABLES: [&str; 9] = ["NM", "MD", "HBP", "CHE", "CHEC", "PVACC", "CCI", "OOPC", "EXHC"];

impl Default for TwoStageConfig {
    /// Input-oriented VRS, Model 1 and Model 2 over the health-system roster.
    fn default() -> Self {
        Self {
            dea: DeaModel::vrs_input(),
            models: vec![ModelSpec::new("model1", &MODEL1_VARIABLES), ModelSpec::new("model2", &MODEL2_VARIABLES)],
            response: ResponseTransform::Inefficiency,
            p_value_reference: PValueReference::Normal,
            formats: ReportFormat::all(),
        }
    }
}

impl TwoStageConfig {
    pub fn with_models(mut self, models: Vec<ModelSpec>) -> Self {
        self.models = models;
        self
    }

    pub fn validate(&self, ds: &Dataset) -> Result<(), PipelineError> {
        let mut seen = std::collections::HashSet::new();
        for m in &self.models {
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(PipelineError::Config(format!("model name {:?} must be non-empty [A-Za-z0-9_-]", m.name)));
            }
            if !seen.insert(&m.name) {
                return Err(PipelineError::Config(format!("duplicate model name {:?}", m.name)));
            }
            if m.variables.is_empty() {
                return Err(PipelineError::Config(format!("model {:?} has no variables", m.name)));
            }
            for v in &m.variables {
                match ds.column(v) {
                    None => {
                        return Err(PipelineError::Config(format!("model {:?}: unknown column {v:?}", m.name)));
                    }
                    Some(c) if !matches!(c.role, VariableRole::Explanatory | VariableRole::Input) => {
                        return Err(PipelineError::Config(format!(
                            "model {:?}: column {v:?} has role {:?}; expected explanatory or input",
                            m.name, c.role
                        )));
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    pub fn tobit_spec(&self) -> TobitSpec {
        let (lower, upper) = self.response.tobit_bounds();
        TobitSpec { lower, upper, p_value_reference: self.p_value_reference, ..TobitSpec::default() }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub name: String,
    pub variables: Vec<String>,
    /// DMUs entering the regression.
    pub n_used: usize,
    /// DMUs left out for missing covariates.
    pub excluded_dmus: Vec<String>,
    pub fit: Option<TobitFit>,
    pub table: Option<Vec<InferenceRow>>,
    pub error: Option<TobitError>,
}

impl RegressionReport {
    pub fn result(&self) -> Result<&[InferenceRow], &TobitError> {
        match (&self.table, &self.error) {
            (Some(t), None) => Ok(t),
            (_, Some(e)) => Err(e),
            (None, None) => unreachable!("regression report without table or error"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: TwoStageConfig,
    pub descriptives: DescriptiveStats,
    pub dea: DeaRun,
    pub mean_theta: f64,
    pub groups: Option<Vec<GroupRow>>,
    pub regressions: Vec<RegressionReport>,
}

impl Report {
    pub fn regression(&self, name: &str) -> Option<&RegressionReport> {
        self.regressions.iter().find(|r| r.name == name)
    }

    /// First stage-2 failure, with model context.
    pub fn first_error(&self) -> Option<PipelineError> {
        self.regressions
            .iter()
            .find_map(|r| r.error.clone().map(|source| PipelineError::Tobit { model: r.name.clone(), source }))
    }
}

fn regress(ds: &Dataset, response: &[f64], model: &ModelSpec, spec: &TobitSpec) -> RegressionReport {
    let cols: Vec<&Column> = model.variables.iter().map(|v| ds.column(v).expect("validated")).collect();
    let complete: Vec<usize> = (0..ds.len()).filter(|&i| cols.iter().all(|c| !c.values[i].is_nan())).collect();
    let excluded_dmus = (0..ds.len())
        .filter(|i| complete.binary_search(i).is_err())
        .map(|i| ds.dmu_names()[i].clone())
        .collect();
    let mut reg = Regressors::empty();
    for c in &cols {
        reg.push(c.name.clone(), complete.iter().map(|&i| c.values[i]).collect());
    }
    let y: Vec<f64> = complete.iter().map(|&i| response[i]).collect();
    let (fit, table, error) = match tobit::fit(&reg, &y, spec) {
        Ok(fit) => match tobit::inference_table(&fit) {
            Ok(t) => (Some(fit), Some(t), None),
            Err(e) => (Some(fit), None, Some(e)),
        },
        Err(e) => (None, None, Some(e)),
    };
    RegressionReport { name: model.name.clone(), variables: model.variables.clone(), n_used: complete.len(), excluded_dmus, fit, table, error }
}

/// Runs both stages. Stage-2 failures are recorded per model in the report
/// (see [`Report::first_error`]) so stage-1 tables survive them.
pub fn two_stage(ds: &Dataset, cfg: &TwoStageConfig) -> Result<Report, PipelineError> {
    cfg.validate(ds)?;
    let descriptives = dataset::describe(ds)?;
    let run = dea::run_all(ds, cfg.dea)?;
    let scores = run.scores();
    let groups = match dataset::group_summary(ds, &scores) {
        Ok(g) => Some(g),
        Err(DatasetError::NoGroupColumn) => None,
        Err(e) => return Err(e.into()),
    };
    let response = cfg.response.apply(&run);
    let spec = cfg.tobit_spec();
    let regressions = cfg.models.par_iter().map(|m| regress(ds, &response, m, &spec)).collect();
    Ok(Report { config: cfg.clone(), descriptives, mean_theta: run.mean_score, dea: run, groups, regressions })
}

pub const INPUT_ROSTER: [&str; 3] = ["HBP", "MD", "NM"];
pub const OUTPUT_ROSTER: [&str; 4] = ["NMN", "SB", "U-5M", "IMBA"];
pub const EXPLANATORY_ROSTER: [&str; 8] = ["BASHP", "MMLB", "CHE", "CHEC", "EXHC", "OOPC", "PVACC", "CCI"];
/// Typical magnitudes for the named columns.
const ROSTER_MEANS: [(&str, f64); 15] = [
    ("HBP", 12.1),
    ("MD", 3.5),
    ("NM", 15.2),
    ("NMN", 23.5),
    ("SB", 18.7),
    ("U-5M", 58.43),
    ("IMBA", 41.5),
    ("BASHP", 75.6),
    ("MMLB", 354.2),
    ("CHE", 5.7),
    ("CHEC", 134.8),
    ("EXHC", 17.2),
    ("OOPC", 35.3),
    ("PVACC", 67.7),
    ("CCI", 49.1),
];
pub const GROUP_LEVELS: [(&str, usize); 3] = [("LI", 22), ("LMI", 18), ("HUMI", 6)];

fn roster_name(roster: &[&str], prefix: &str, j: usize) -> String {
    roster.get(j).map(|s| s.to_string()).unwrap_or_else(|| format!("{prefix}{}", j + 1))
}

fn typical(name: &str) -> f64 {
    ROSTER_MEANS.iter().find(|(n, _)| *n == name).map(|(_, m)| *m).unwrap_or(50.0)
}

/// Seeded synthetic DMU data with the health-system roster.
///
/// A latent inefficiency driven by the covariates shrinks each DMU's
/// distance to a common frontier, so stage 2 has signal to find. When the
/// roster includes OOPC, PVACC and CCI, OOPC is an exact affine combination
/// of the other two and gets dropped by the Tobit fit.
pub fn generate_synthetic(n: usize, m: usize, s: usize, p: usize, seed: u64) -> Result<Dataset, PipelineError> {
    if n == 0 || m == 0 || s == 0 || p == 0 {
        return Err(PipelineError::InvalidArgument(format!("n, m, s, p must be >= 1 (got {n}, {m}, {s}, {p})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n.to_string().len().max(2);
    let names: Vec<String> = (1..=n).map(|i| format!("DMU{i:0width$}")).collect();

    let cov_names: Vec<String> = (0..p).map(|j| roster_name(&EXPLANATORY_ROSTER, "Z", j)).collect();
    let mut covariates: Vec<Vec<f64>> = cov_names
        .iter()
        .map(|name| {
            let mean = typical(name);
            let (lo, hi) = if matches!(name.as_str(), "BASHP" | "PVACC" | "CCI") {
                (mean * 0.5, (mean * 1.45).min(99.0))
            } else {
                (mean * 0.4, mean * 1.6)
            };
            (0..n).map(|_| rng.random_range(lo..hi)).collect()
        })
        .collect();
    let idx = |name: &str| cov_names.iter().position(|c| c == name);
    if let (Some(o), Some(pv), Some(cc)) = (idx("OOPC"), idx("PVACC"), idx("CCI")) {
        covariates[o] = (0..n).map(|i| 100.0 - 0.4 * covariates[pv][i] - 0.3 * covariates[cc][i]).collect();
    }

    // latent inefficiency from standardized covariates
    let weights: Vec<f64> = (0..p).map(|j| if j % 2 == 0 { -0.12 } else { 0.09 }).collect();
    let mut latent: Vec<f64> = (0..n)
        .map(|i| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            0.05 * noise
                + (0..p)
                    .map(|j| {
                        let c = &covariates[j];
                        let mean = c.iter().sum::<f64>() / n as f64;
                        let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-12);
                        weights[j] * (c[i] - mean) / sd
                    })
                    .sum::<f64>()
        })
        .collect();
    // an eighth of the DMUs sit on the true frontier; VRS adds more
    let mut sorted = latent.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[n / 8];
    for v in &mut latent {
        *v -= cut;
    }
    let theta: Vec<f64> = latent.iter().map(|v| (1.0 - v.max(0.0)).max(0.35)).collect();

    let size: Vec<f64> = (0..n).map(|_| rng.random_range(0.6..1.6)).collect();
    let mut columns = Vec::with_capacity(m + s + p);
    for j in 0..m {
        let name = roster_name(&INPUT_ROSTER, "X", j);
        let mean = typical(&name);
        let values = (0..n).map(|i| mean * size[i] * rng.random_range(0.9..1.1) / theta[i]).collect();
        columns.push(Column::new(name, VariableRole::Input, values));
    }
    for r in 0..s {
        let name = roster_name(&OUTPUT_ROSTER, "Y", r);
        let mean = typical(&name);
        let values = (0..n).map(|i| mean * size[i] * rng.random_range(0.85..1.15)).collect();
        columns.push(Column::new(name, VariableRole::Output, values));
    }
    for (name, values) in cov_names.into_iter().zip(covariates) {
        columns.push(Column::new(name, VariableRole::Explanatory, values));
    }

    let mut labels: Vec<String> = Vec::with_capacity(n);
    let total: usize = GROUP_LEVELS.iter().map(|g| g.1).sum();
    for (level, share) in &GROUP_LEVELS[..2] {
        let count = (n * share + total / 2) / total;
        labels.extend(std::iter::repeat_n(level.to_string(), count.min(n - labels.len())));
    }
    labels.extend(std::iter::repeat_n(GROUP_LEVELS[2].0.to_string(), n - labels.len()));
    labels.shuffle(&mut rng);
    let group = GroupColumn { name: "income_group".into(), labels };

    Ok(Dataset::new("country", names, columns, Some(group))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub lp_internal: f64,
    pub lp_reported: f64,
    pub dea_lambda: f64,
    pub dea_efficiency: f64,
    pub dea_slack: f64,
    pub tobit_gradient: f64,
    pub tobit_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub software: String,
    pub version: String,
    pub config: TwoStageConfig,
    pub config_hash: String,
    pub tolerances: Tolerances,
    /// Seconds since the epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub generated_at_unix: u64,
    /// Caller-supplied context, e.g. the command line and input file.
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunMetadata {
    pub fn new(config: &TwoStageConfig) -> Self {
        let generated_at_unix = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()).unwrap_or_else(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
        });
        let spec = TobitSpec::default();
        Self {
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            config_hash: config.hash(),
            tolerances: Tolerances {
                lp_internal: crate::lp::INTERNAL_TOL,
                lp_reported: crate::lp::REPORTED_TOL,
                dea_lambda: dea::LAMBDA_TOL,
                dea_efficiency: dea::EFFICIENCY_TOL,
                dea_slack: dea::SLACK_TOL,
                tobit_gradient: spec.gradient_tolerance,
                tobit_rank: tobit::RANK_TOL,
            },
            generated_at_unix,
            extra: serde_json::Map::new(),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), Box<dyn std::error::Error>>, path: &Path) -> Result<Vec<u8>, PipelineError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| io_err(path, e))?;
    Ok(buf)
}

pub fn descriptives_csv(stats: &DescriptiveStats) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variable", "role", "count", "mean", "sd", "min", "max"]).expect("in-memory write");
    for c in &stats.columns {
        let role = serde_json::to_value(c.role).expect("role serializes");
        w.write_record([
            c.name.clone(),
            role.as_str().unwrap_or_default().to_string(),
            c.count.to_string(),
            c.mean.to_string(),
            c.sd.map(|v| v.to_string()).unwrap_or_default(),
            c.min.to_string(),
            c.max.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn groups_csv(groups: &[GroupRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "count", "mean_score", "members"]).expect("in-memory write");
    for g in groups {
        w.write_record([g.label.clone(), g.count.to_string(), g.mean_score.to_string(), g.members.join(";")])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes the report files into `dir` (created if missing) and returns the
/// paths written, `meta.json` last.
pub fn write_report(report: &Report, meta: &RunMetadata, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), PipelineError> {
        let path = dir.join(name);
        write_file(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    let formats = &report.config.formats;
    if formats.contains(&ReportFormat::Csv) {
        put("descriptives.csv", descriptives_csv(&report.descriptives))?;
        let p = dir.join("scores.csv");
        put("scores.csv", csv_bytes(|b| Ok(dea::write_scores_csv(&report.dea, b)?), &p)?)?;
        let p = dir.join("peer_counts.csv");
        put("peer_counts.csv", csv_bytes(|b| Ok(dea::write_peer_counts_csv(&report.dea, b)?), &p)?)?;
        if let Some(g) = &report.groups {
            put("groups.csv", groups_csv(g))?;
        }
        for r in &report.regressions {
            if let (Some(fit), Some(_)) = (&r.fit, &r.table) {
                let name = format!("tobit_{}.csv", r.name);
                let p = dir.join(&name);
                put(&name, csv_bytes(|b| tobit::write_table_csv(fit, b), &p)?)?;
            }
        }
    }
    if formats.contains(&ReportFormat::Json) {
        let mut json = serde_json::to_vec_pretty(report).map_err(|e| io_err(&dir.join("report.json"), e))?;
        json.push(b'\n');
        put("report.json", json)?;
    }
    if formats.contains(&ReportFormat::Markdown) {
        put("report.md", render_markdown(report).into_bytes())?;
    }
    let mut json = serde_json::to_vec_pretty(meta).map_err(|e| io_err(&dir.join("meta.json"), e))?;
    json.push(b'\n');
    put("meta.json", json)?;
    Ok(written)
}

fn fmt_opt(v: Option<f64>, dp: usize) -> String {
    v.map(|v| format!("{v:.dp$}")).unwrap_or_else(|| "-".into())
}

/// Markdown report: θ to 3 dp, coefficients and standard errors to 7 dp.
pub fn render_markdown(report: &Report) -> String {
    let mut md = String::new();
    let run = &report.dea;
    let rts = serde_json::to_value(run.model.returns_to_scale).expect("serializes");
    let orient = serde_json::to_value(run.model.orientation).expect("serializes");
    let _ = writeln!(md, "# Two-stage efficiency report\n");
    let _ = writeln!(
        md,
        "DEA model: {} {}-oriented, {} DMUs, {} inputs, {} outputs.\n",
        rts.as_str().unwrap_or_default().to_uppercase(),
        orient.as_str().unwrap_or_default(),
        run.len(),
        run.input_names.len(),
        run.output_names.len()
    );

    let _ = writeln!(md, "## Descriptive statistics\n");
    let _ = writeln!(md, "| Variable | Role | N | Mean | SD | Min | Max |");
    let _ = writeln!(md, "|---|---|---:|---:|---:|---:|---:|");
    for c in &report.descriptives.columns {
        let role = serde_json::to_value(c.role).expect("serializes");
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.2} | {} | {:.2} | {:.2} |",
            c.name,
            role.as_str().unwrap_or_default(),
            c.count,
            c.mean,
            fmt_opt(c.sd, 2),
            c.min,
            c.max
        );
    }

    let _ = writeln!(md, "\n## Efficiency scores\n");
    let _ = writeln!(
        md,
        "Mean θ: {:.3}. Efficient DMUs: {} of {} ({:.2}%); inefficient: {} ({:.2}%).\n",
        report.mean_theta,
        run.efficient_count,
        run.len(),
        100.0 * run.efficient_share,
        run.len() - run.efficient_count,
        100.0 * (1.0 - run.efficient_share)
    );
    let _ = writeln!(md, "| DMU | θ | Efficient | Peers | Peer count |");
    let _ = writeln!(md, "|---|---:|:---:|---|---:|");
    for (r, count) in run.results.iter().zip(&run.peer_counts) {
        let peers: Vec<&str> = r.peers.iter().map(|p| p.name.as_str()).collect();
        let _ = writeln!(
            md,
            "| {} | {:.3} | {} | {} | {} |",
            r.dmu,
            r.score,
            if r.radially_efficient { "yes" } else { "no" },
            peers.join(", "),
            count
        );
    }

    if let Some(groups) = &report.groups {
        let _ = writeln!(md, "\n## Group means\n");
        let _ = writeln!(md, "| Group | N | Mean θ | DMUs |");
        let _ = writeln!(md, "|---|---:|---:|---|");
        for g in groups {
            let _ = writeln!(md, "| {} | {} | {:.3} | {} |", g.label, g.count, g.mean_score, g.members.join(", "));
        }
    }

    let reference = match report.config.p_value_reference {
        PValueReference::Normal => "standard normal",
        PValueReference::StudentT => "Student t",
    };
    for r in &report.regressions {
        let _ = writeln!(md, "\n## Tobit regression: {}\n", r.name);
        let _ = writeln!(md, "Observations used: {}; excluded for missing covariates: {}.\n", r.n_used, r.excluded_dmus.len());
        match (&r.table, &r.fit) {
            (Some(rows), Some(fit)) => {
                let _ = writeln!(md, "| Variable | Coef. | Std. Err. | t | P>\\|t\\| |");
                let _ = writeln!(md, "|---|---:|---:|---:|---:|");
                for row in rows {
                    match row {
                        InferenceRow::Estimated(c) => {
                            let _ = writeln!(md, "| {} | {:.7} | {:.7} | {:.2} | {:.3} |", c.name, c.coef, c.se, c.t, c.p);
                        }
                        InferenceRow::Dropped { name, .. } => {
                            let _ = writeln!(md, "| {name} | {} | | | |", tobit::DROPPED_MARK);
                        }
                    }
                }
                let _ = writeln!(md, "| sigma | {:.7} | {:.7} | | |", fit.sigma, fit.se_sigma);
                let _ = writeln!(md);
                let _ = writeln!(md, "- LR chi2({}) = {:.2}", fit.df, fit.lr_chi2);
                let _ = writeln!(md, "- Prob > chi2 = {:.4}", fit.prob_chi2);
                let _ = writeln!(md, "- Log likelihood = {:.6}", fit.log_likelihood);
                let _ = writeln!(md, "- Pseudo R2 = {}", fmt_opt(fit.pseudo_r2, 4));
                let _ = writeln!(
                    md,
                    "- Censored: {} left, {} right; uncensored: {}",
                    fit.n_left_censored, fit.n_right_censored, fit.n_uncensored
                );
                for d in &fit.dropped_variables {
                    let _ = writeln!(md, "- Dropped {}: {}", d.name, d.reason);
                }
                let _ = writeln!(md, "- p-values use the {reference} reference distribution");
            }
            _ => {
                if let Some(e) = &r.error {
                    let _ = writeln!(md, "Model failed: {e}");
                }
            }
        }
    }
    md
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            "dmu",
            vec!["A".into(), "B".into(), "C".into()],
            vec![
                Column::new("x", VariableRole::Input, vec![1.0, 2.0, 3.0]),
                Column::new("y", VariableRole::Output, vec![1.0, 1.0, 1.0]),
                Column::new("z", VariableRole::Explanatory, vec![0.2, 1.0, 1.5]),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn composition_equals_parts() {
        let ds = toy();
        let cfg = TwoStageConfig::default().with_models(vec![ModelSpec::new("m", &["z"])]);
        let report = two_stage(&ds, &cfg).unwrap();
        let run = dea::run_all(&ds, DeaModel::vrs_input()).unwrap();
        assert_eq!(report.dea, run);
        let y: Vec<f64> = run.results.iter().map(|r| if r.radially_efficient { 0.0 } else { 1.0 - r.score }).collect();
        let mut reg = Regressors::empty();
        reg.push("z", vec![0.2, 1.0, 1.5]);
        let fit = tobit::fit(&reg, &y, &TobitSpec::default());
        let r = &report.regressions[0];
        let fit = fit.unwrap();
        assert!(fit.converged);
        assert_eq!(r.fit.as_ref(), Some(&fit));
        assert_eq!(r.table.as_ref(), Some(&tobit::inference_table(&fit).unwrap()));
    }

    #[test]
    fn all_efficient_keeps_stage_one() {
        let ds = Dataset::new(
            "dmu",
            vec!["A".into(), "B".into()],
            vec![
                Column::new("x", VariableRole::Input, vec![1.0, 2.0]),
                Column::new("y", VariableRole::Output, vec![1.0, 2.0]),
                Column::new("z", VariableRole::Explanatory, vec![0.5, 1.0]),
            ],
            None,
        )
        .unwrap();
        let cfg = TwoStageConfig::default().with_models(vec![ModelSpec::new("m", &["z"])]);
        let report = two_stage(&ds, &cfg).unwrap();
        assert_eq!(report.dea.efficient_count, 2);
        assert_eq!(report.regressions[0].result(), Err(&TobitError::AllCensored(2)));
        let err = report.first_error().unwrap();
        assert_eq!(err.to_string(), "stage 2 (Tobit model m): all 2 observations are censored");
        assert!(render_markdown(&report).contains("Model failed: all 2 observations are censored"));
    }

    #[test]
    fn config_validation() {
        let ds = toy();
        let bad = TwoStageConfig::default().with_models(vec![ModelSpec::new("m", &["nope"])]);
        assert!(matches!(two_stage(&ds, &bad), Err(PipelineError::Config(_))));
        let bad = TwoStageConfig::default().with_models(vec![ModelSpec::new("m", &["y"])]);
        assert!(matches!(two_stage(&ds, &bad), Err(PipelineError::Config(_))));
        let bad = TwoStageConfig::default().with_models(vec![ModelSpec::new("m", &[])]);
        assert!(matches!(two_stage(&ds, &bad), Err(PipelineError::Config(_))));
        // inputs are valid regressors
        let ok = TwoStageConfig::default().with_models(vec![ModelSpec::new("m", &["x"])]);
        assert!(ok.validate(&ds).is_ok());
    }

    #[test]
    fn missing_covariates_are_excluded() {
        let mut cols = toy().columns().to_vec();
        cols[2].values[0] = f64::NAN;
        let ds = Dataset::new("dmu", toy().dmu_names().to_vec(), cols, None).unwrap();
        let cfg = TwoStageConfig::default().with_models(vec![ModelSpec::new("m", &["z"])]);
        let r = &two_stage(&ds, &cfg).unwrap().regressions[0];
        assert_eq!(r.excluded_dmus, vec!["A"]);
        assert_eq!(r.n_used + r.excluded_dmus.len(), 3);
    }

    #[test]
    fn synthetic_roster_and_determinism() {
        let a = generate_synthetic(46, 3, 5, 8, 7).unwrap();
        let b = generate_synthetic(46, 3, 5, 8, 7).unwrap();
        assert_eq!(a, b);
        let names: Vec<&str> = a.columns().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            ["HBP", "MD", "NM", "NMN", "SB", "U-5M", "IMBA", "Y5", "BASHP", "MMLB", "CHE", "CHEC", "EXHC", "OOPC", "PVACC", "CCI"]
        );
        let g = a.group().unwrap();
        for (level, count) in GROUP_LEVELS {
            assert_eq!(g.labels.iter().filter(|l| *l == level).count(), count);
        }
        assert_ne!(a, generate_synthetic(46, 3, 5, 8, 8).unwrap());
        assert!(generate_synthetic(0, 3, 5, 8, 7).is_err());
    }

    #[test]
    fn single_dmu_is_efficient() {
        let ds = generate_synthetic(1, 1, 1, 1, 3).unwrap();
        let run = dea::run_all(&ds, DeaModel::vrs_input()).unwrap();
        assert_eq!(run.results[0].score, 1.0);
    }

    #[test]
    fn response_transforms() {
        let run = dea::run_all(&toy(), DeaModel::vrs_input()).unwrap();
        let ineff = ResponseTransform::Inefficiency.apply(&run);
        let raw = ResponseTransform::Score.apply(&run);
        assert_eq!(ineff[0], 0.0);
        assert_eq!(raw[0], 1.0);
        assert!((ineff[1] - 0.5).abs() < 1e-9 && (raw[1] - 0.5).abs() < 1e-9);
    }
}

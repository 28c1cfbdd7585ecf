//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code:
//! 0 ok, 1 data or validation error, 2 usage error, 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::dataset::{self, Dataset, DatasetError, Schema};
use crate::dea::{self, DeaError, DeaModel, Orientation, ReturnsToScale};
use crate::lp::LpError;
use crate::pipeline::{self, ModelSpec, PipelineError, ReportFormat, ResponseTransform, RunMetadata, TwoStageConfig};
use crate::tobit::{self, PValueReference, Regressors, TobitError, TobitSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const ENV_OUT: &str = "DEATOBIT_OUT";
pub const ENV_THREADS: &str = "DEATOBIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dea-tobit", version, about = "Two-stage DEA + Tobit efficiency analysis")]
pub struct Cli {
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true, env = ENV_THREADS, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// More log output on stderr (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Descriptive statistics of every numeric column
    Describe {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// DEA efficiency scores, peers and peer counts
    Dea {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        dea: DeaArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Tobit regressions on a response column or on DEA inefficiency
    Tobit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tobit: TobitArgs,
        /// Response column; without it the response comes from DEA scores
        #[arg(long)]
        response: Option<String>,
        /// Left-censoring bound for --response
        #[arg(long, default_value_t = 0.0, requires = "response")]
        lower: f64,
        /// Right-censoring bound for --response
        #[arg(long, requires = "response")]
        upper: Option<f64>,
        #[command(flatten)]
        dea: DeaArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// DEA, then Tobit regressions of inefficiency, with the full report
    TwoStage {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        dea: DeaArgs,
        #[command(flatten)]
        tobit: TobitArgs,
        /// Report formats
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [FormatArg::Csv, FormatArg::Json, FormatArg::Markdown])]
        format: Vec<FormatArg>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Generate a seeded synthetic dataset and its schema
    Synth {
        #[arg(long, default_value_t = 46, value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        m: u32,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        s: u32,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
        p: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV, one row per DMU
    #[arg(long)]
    pub input: PathBuf,
    /// TOML file with a [columns] table mapping column names to roles
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (falls back to $DEATOBIT_OUT; otherwise stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the main table to stdout even if $DEATOBIT_OUT is set
    #[arg(long, conflicts_with = "out")]
    pub stdout: bool,
}

impl OutArgs {
    fn dir(&self) -> Option<PathBuf> {
        if self.stdout {
            return None;
        }
        self.out.clone().or_else(|| std::env::var_os(ENV_OUT).filter(|v| !v.is_empty()).map(PathBuf::from))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RtsArg {
    Crs,
    Vrs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrientationArg {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Markdown,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PValueArg {
    Z,
    T,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransformArg {
    /// 1 - θ, censored at 0
    Inefficiency,
    /// θ, censored at 1
    Score,
}

#[derive(Debug, Args)]
pub struct DeaArgs {
    #[arg(long, value_enum, default_value_t = RtsArg::Vrs)]
    pub rts: RtsArg,
    #[arg(long, value_enum, default_value_t = OrientationArg::Input)]
    pub orientation: OrientationArg,
    /// Skip the second-phase slack maximization
    #[arg(long)]
    pub no_slack_phase: bool,
}

impl DeaArgs {
    fn model(&self) -> DeaModel {
        let rts = match self.rts {
            RtsArg::Crs => ReturnsToScale::Crs,
            RtsArg::Vrs => ReturnsToScale::Vrs,
        };
        let orientation = match self.orientation {
            OrientationArg::Input => Orientation::Input,
            OrientationArg::Output => Orientation::Output,
        };
        let model = DeaModel::new(rts, orientation);
        if self.no_slack_phase {
            model.without_slack_phase()
        } else {
            model
        }
    }
}

#[derive(Debug, Args)]
pub struct TobitArgs {
    /// Model as name=col1,col2,... (repeatable; default: model1 and model2)
    #[arg(long = "model", value_parser = parse_model)]
    pub models: Vec<ModelSpec>,
    /// p-value reference distribution
    #[arg(long, value_enum, default_value_t = PValueArg::Z)]
    pub p_values: PValueArg,
    /// Stage-2 response built from DEA scores
    #[arg(long, value_enum, default_value_t = TransformArg::Inefficiency)]
    pub response_transform: TransformArg,
}

impl TobitArgs {
    fn config(&self, dea: DeaModel, formats: Vec<ReportFormat>) -> TwoStageConfig {
        let mut cfg = TwoStageConfig { dea, formats, ..TwoStageConfig::default() };
        if !self.models.is_empty() {
            cfg.models = self.models.clone();
        }
        cfg.p_value_reference = match self.p_values {
            PValueArg::Z => PValueReference::Normal,
            PValueArg::T => PValueReference::StudentT,
        };
        cfg.response = match self.response_transform {
            TransformArg::Inefficiency => ResponseTransform::Inefficiency,
            TransformArg::Score => ResponseTransform::Score,
        };
        cfg
    }
}

fn parse_model(s: &str) -> Result<ModelSpec, String> {
    let (name, cols) = s.split_once('=').ok_or_else(|| format!("expected name=col1,col2,... got {s:?}"))?;
    let variables: Vec<String> = cols.split(',').map(|c| c.trim().to_string()).collect();
    if name.trim().is_empty() || variables.iter().any(String::is_empty) {
        return Err(format!("empty model or column name in {s:?}"));
    }
    Ok(ModelSpec { name: name.trim().to_string(), variables })
}

/// An error with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn tobit_code(e: &TobitError) -> i32 {
    match e {
        TobitError::NotConverged { .. } => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn dea_code(e: &DeaError) -> i32 {
    match e {
        DeaError::Solver { source: LpError::NumericalBreakdown(_), .. } => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<DeaError> for CliError {
    fn from(e: DeaError) -> Self {
        Self { code: dea_code(&e), message: format!("stage 1 (DEA): {e}") }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Dea(d) => dea_code(d),
            PipelineError::Tobit { source, .. } => tobit_code(source),
            PipelineError::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self { code, message: e.to_string() }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn load(data: &DataArgs) -> Result<Dataset, CliError> {
    let schema = Schema::from_toml_file(&data.schema).map_err(|e| CliError::data(format!("{}: {e}", data.schema.display())))?;
    dataset::parse_csv(&data.input, &schema).map_err(|e| CliError::data(format!("{}: {e}", data.input.display())))
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Sends `bytes` to `dir/name`, or to stdout when there is no directory.
fn emit(dir: Option<&Path>, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| io_error(d, e))?;
            let path = d.join(name);
            std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
            log::info!("wrote {}", path.display());
            Ok(())
        }
        None => std::io::stdout().lock().write_all(bytes).map_err(|e| CliError::data(format!("stdout: {e}"))),
    }
}

fn csv_to_vec(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::data(e.to_string()))?;
    Ok(buf)
}

fn run_describe(data: &DataArgs, out: &OutArgs) -> Result<(), CliError> {
    let ds = load(data)?;
    let stats = dataset::describe(&ds)?;
    emit(out.dir().as_deref(), "descriptives.csv", &pipeline::descriptives_csv(&stats))
}

fn run_dea(data: &DataArgs, dea_args: &DeaArgs, out: &OutArgs) -> Result<(), CliError> {
    let ds = load(data)?;
    let run = dea::run_all(&ds, dea_args.model())?;
    let dir = out.dir();
    emit(dir.as_deref(), "scores.csv", &csv_to_vec(|b| dea::write_scores_csv(&run, b))?)?;
    if dir.is_some() {
        emit(dir.as_deref(), "peer_counts.csv", &csv_to_vec(|b| dea::write_peer_counts_csv(&run, b))?)?;
    }
    Ok(())
}

fn run_tobit(
    data: &DataArgs,
    args: &TobitArgs,
    response: Option<&str>,
    bounds: (f64, Option<f64>),
    dea_args: &DeaArgs,
    out: &OutArgs,
) -> Result<(), CliError> {
    let ds = load(data)?;
    let cfg = args.config(dea_args.model(), vec![ReportFormat::Csv]);
    cfg.validate(&ds)?;
    let (y, spec) = match response {
        Some(col) => {
            let c = ds.column(col).ok_or_else(|| CliError::data(format!("unknown response column {col:?}")))?;
            let spec = TobitSpec { lower: bounds.0, upper: bounds.1, p_value_reference: cfg.p_value_reference, ..TobitSpec::default() };
            (c.values.clone(), spec)
        }
        None => {
            let run = dea::run_all(&ds, cfg.dea)?;
            (cfg.response.apply(&run), cfg.tobit_spec())
        }
    };
    let dir = out.dir();
    let mut first_err: Option<CliError> = None;
    for m in &cfg.models {
        let cols: Vec<_> = m.variables.iter().map(|v| ds.column(v).expect("validated")).collect();
        let rows: Vec<usize> =
            (0..ds.len()).filter(|&i| !y[i].is_nan() && cols.iter().all(|c| !c.values[i].is_nan())).collect();
        let mut reg = Regressors::empty();
        for c in &cols {
            reg.push(c.name.clone(), rows.iter().map(|&i| c.values[i]).collect());
        }
        let yy: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        match tobit::fit(&reg, &yy, &spec).and_then(|fit| tobit::inference_table(&fit).map(|_| fit)) {
            Ok(fit) => {
                let mut buf = Vec::new();
                tobit::write_table_csv(&fit, &mut buf).map_err(|e| CliError::data(e.to_string()))?;
                if dir.is_none() {
                    emit(None, "", format!("# {}\n", m.name).as_bytes())?;
                }
                emit(dir.as_deref(), &format!("tobit_{}.csv", m.name), &buf)?;
            }
            Err(e) => {
                let err = CliError { code: tobit_code(&e), message: format!("stage 2 (Tobit model {}): {e}", m.name) };
                log::error!("{err}");
                first_err.get_or_insert(err);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn run_two_stage(
    data: &DataArgs,
    dea_args: &DeaArgs,
    args: &TobitArgs,
    formats: &[FormatArg],
    out: &OutArgs,
    argv: &[String],
) -> Result<(), CliError> {
    let ds = load(data)?;
    let formats = formats
        .iter()
        .map(|f| match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Markdown => ReportFormat::Markdown,
        })
        .collect();
    let cfg = args.config(dea_args.model(), formats);
    let report = pipeline::two_stage(&ds, &cfg)?;
    match out.dir() {
        Some(dir) => {
            let mut meta = RunMetadata::new(&cfg);
            meta.extra.insert("command".into(), serde_json::json!(argv));
            meta.extra.insert("input".into(), serde_json::json!(data.input.display().to_string()));
            meta.extra.insert("input_sha256".into(), serde_json::json!(sha256_file(&data.input)?));
            meta.extra.insert("schema".into(), serde_json::json!(data.schema.display().to_string()));
            meta.extra.insert("schema_sha256".into(), serde_json::json!(sha256_file(&data.schema)?));
            pipeline::write_report(&report, &meta, &dir)?;
        }
        None => emit(None, "", pipeline::render_markdown(&report).as_bytes())?,
    }
    match report.first_error() {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn run_synth(n: u32, m: u32, s: u32, p: u32, seed: u64, out: &OutArgs) -> Result<(), CliError> {
    let ds = pipeline::generate_synthetic(n as usize, m as usize, s as usize, p as usize, seed)?;
    let mut csv = Vec::new();
    ds.write_csv(&mut csv)?;
    let dir = out.dir();
    emit(dir.as_deref(), "data.csv", &csv)?;
    if dir.is_some() {
        emit(dir.as_deref(), "schema.toml", ds.schema().to_toml_string().as_bytes())?;
    }
    Ok(())
}

fn execute(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    match &cli.command {
        Command::Describe { data, out } => run_describe(data, out),
        Command::Dea { data, dea, out } => run_dea(data, dea, out),
        Command::Tobit { data, tobit, response, lower, upper, dea, out } => {
            run_tobit(data, tobit, response.as_deref(), (*lower, *upper), dea, out)
        }
        Command::TwoStage { data, dea, tobit, format, out } => run_two_stage(data, dea, tobit, format, out, argv),
        Command::Synth { n, m, s, p, seed, out } => run_synth(*n, *m, *s, *p, *seed, out),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();

    // program name excluded so meta.json does not depend on the install path
    let recorded: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t as usize).build() {
            Ok(pool) => pool.install(|| execute(&cli, &recorded)),
            Err(e) => Err(CliError { code: EXIT_USAGE, message: format!("cannot start {t} threads: {e}") }),
        },
        None => execute(&cli, &recorded),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

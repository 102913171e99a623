//! Command-line interface. Exit codes: 0 success, 1 runtime error, 2 usage
//! error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pinvar_core::metrics::discrete_energy;
use pinvar_core::train::TrainingWeights;
use pinvar_core::{valid_time, Basis, EmbeddingSpec, OdeSystem};
use serde::Serialize;

use crate::dataset_csv::{self, Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::experiment::{
    aggregate_csv, aggregate_median, markdown_tables, radii_rows, read_results, run_sweep, train_model,
    Experiment, ExperimentConfig, GenerationConfig, RadiiSource, Scheme, TrainRequest,
};
use crate::manifest::write_manifest;
use crate::model_file::ModelFile;

#[derive(Debug, Parser)]
#[command(name = "pinvar", version, about = "Physics-informed nonlinear vector autoregression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a reference trajectory.
    Generate(GenerateArgs),
    /// Train a model on a window of a dataset.
    Train(TrainArgs),
    /// Roll a trained model out from a dataset row.
    Predict(PredictArgs),
    /// Score a predicted trajectory against reference data.
    Eval(EvalArgs),
    /// Run the cross-validation grid.
    Sweep(SweepArgs),
    /// Summarise the results of a sweep.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Spring,
    #[value(name = "lotka_volterra", alias = "lotka-volterra")]
    LotkaVolterra,
    Lorenz,
}

impl Problem {
    fn system(self) -> OdeSystem {
        match self {
            Problem::Spring => OdeSystem::spring(),
            Problem::LotkaVolterra => OdeSystem::lotka_volterra(),
            Problem::Lorenz => OdeSystem::lorenz(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisArg {
    H1,
    H2,
    H3,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::H1 => Basis::H1,
            BasisArg::H2 => Basis::H2,
            BasisArg::H3 => Basis::H3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiiArg {
    Training,
    All,
}

impl From<RadiiArg> for RadiiSource {
    fn from(r: RadiiArg) -> Self {
        match r {
            RadiiArg::Training => RadiiSource::Training,
            RadiiArg::All => RadiiSource::All,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub problem: Problem,
    #[arg(long, default_value_t = GenerationConfig::DEFAULT_POINTS)]
    pub n: usize,
    /// Sample spacing of the exact spring solution.
    #[arg(long)]
    pub h: Option<f64>,
    /// RK4 step; implies the RK4 scheme.
    #[arg(long)]
    pub fine_h: Option<f64>,
    #[arg(long)]
    pub downsample: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub basis: BasisArg,
    /// Lookback.
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    /// Stride.
    #[arg(long, default_value_t = 1)]
    pub s: usize,
    /// ODE-fit weight.
    #[arg(long)]
    pub wo: f64,
    /// Ridge weight.
    #[arg(long)]
    pub r: f64,
    /// Data-fit weight.
    #[arg(long, default_value_t = 1.0)]
    pub wd: f64,
    /// 1-based row of the first training input.
    #[arg(long, default_value_t = 2001)]
    pub train_start: usize,
    #[arg(long, default_value_t = 1500)]
    pub train_len: usize,
    #[arg(long, value_enum, default_value = "all")]
    pub radii_from: RadiiArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// 1-based row holding the newest seed state.
    #[arg(long)]
    pub start: usize,
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// 1-based row the prediction was seeded at; prediction `j` is compared
    /// with row `start + j`.
    #[arg(long)]
    pub start: usize,
    /// Valid-time threshold.
    #[arg(long = "M", default_value_t = 1e-4)]
    pub threshold: f64,
    /// Also compute the discrete energy of the prediction under this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Write the metrics JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// JSON experiment config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub problem: Option<Problem>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub bases: Option<Vec<BasisArg>>,
    #[arg(long, value_enum)]
    pub radii_from: Option<RadiiArg>,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// A sweep output directory or a results CSV.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: ReportFormat,
    /// Number of test intervals a cell needs to be reported (default: the
    /// most any cell has).
    #[arg(long)]
    pub intervals: Option<usize>,
}

/// Errors that are the caller's fault rather than the run's.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<pinvar_core::Error> for Failure {
    fn from(e: pinvar_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn json_map(pairs: impl IntoIterator<Item = (&'static str, serde_json::Value)>) -> serde_json::Map<String, serde_json::Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn generate(mut a: GenerateArgs) -> CmdResult {
    let system = a.problem.system();
    let defaults = GenerationConfig::default_for(&system);
    let scheme = match (a.h, a.fine_h, a.downsample) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(Failure::Usage("--h cannot be combined with --fine-h or --downsample".into()))
        }
        (Some(h), None, None) => {
            if a.problem != Problem::Spring {
                return Err(Failure::Usage(
                    "--h selects the exact solution, which only spring has; use --fine-h and --downsample".into(),
                ));
            }
            Scheme::Exact { h }
        }
        (None, None, None) => defaults.scheme,
        (None, fine_h, downsample) => {
            let (df, dd) = match defaults.scheme {
                Scheme::Rk4 { fine_h, downsample } => (fine_h, downsample),
                Scheme::Exact { h } => (h, 1),
            };
            Scheme::Rk4 {
                fine_h: fine_h.unwrap_or(df),
                downsample: downsample.unwrap_or(dd),
            }
        }
    };
    match scheme {
        Scheme::Exact { h } => a.h = Some(h),
        Scheme::Rk4 { fine_h, downsample } => {
            a.fine_h = Some(fine_h);
            a.downsample = Some(downsample);
        }
    }
    let gen = GenerationConfig { n_points: a.n, scheme };
    let dataset = gen.generate(&system)?;
    let extra = json_map([("ode", to_value(&system)), ("generation", to_value(&gen))]);
    dataset_csv::write_dataset(&a.out, &dataset, extra)?;
    write_manifest(&a.out, "generate", &a)?;
    Ok(())
}

/// The dataset and the ODE it samples, with parameters from the file's
/// metadata when present.
fn load_problem(path: &Path) -> Result<(pinvar_core::Dataset, OdeSystem)> {
    let traj = dataset_csv::read_trajectory(path)?;
    let system = match traj.meta.extra.get("ode") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::json(path, e))?,
        None => OdeSystem::from_name(&traj.meta.system)?,
    };
    if traj.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 0,
            message: "dataset has no rows".into(),
        });
    }
    Ok((traj.into_dataset()?, system))
}

fn train(a: TrainArgs) -> CmdResult {
    let (dataset, system) = load_problem(&a.data)?;
    let embedding = EmbeddingSpec::new(a.p, a.s, dataset.dim()).map_err(|e| Failure::Usage(e.to_string()))?;
    let weights = TrainingWeights::new(a.wd, a.wo, a.r).map_err(|e| Failure::Usage(e.to_string()))?;
    if a.train_start == 0 {
        return Err(Error::Config("--train-start is 1-based".into()).into());
    }
    if a.train_len == 0 {
        return Err(Error::Config("training window is empty".into()).into());
    }
    if a.train_start - 1 + a.train_len > dataset.len() {
        return Err(Error::Config(format!(
            "training rows {}..={} exceed the {}-row dataset",
            a.train_start,
            a.train_start + a.train_len - 1,
            dataset.len()
        ))
        .into());
    }
    let rows = radii_rows(a.radii_from.into(), a.train_start, a.train_len, dataset.len());
    let radii = pinvar_core::state_function::compute_radii(&dataset, rows)?;
    let trained = train_model(&TrainRequest {
        dataset: &dataset,
        system,
        basis: a.basis.into(),
        embedding,
        train_start: a.train_start,
        train_len: a.train_len,
        weights,
        radii: &radii,
        radii_from: a.radii_from.into(),
    })?;
    trained.file.write(&a.out)?;
    write_manifest(&a.out, "train", &a)?;
    Ok(())
}

fn predict(a: PredictArgs) -> CmdResult {
    let file = ModelFile::read(&a.model)?;
    let model = file.model()?;
    let dataset = dataset_csv::read_dataset(&a.data)?;
    if dataset.dim() != model.dim() {
        return Err(Error::Other(format!(
            "model has dimension {} but the data has dimension {}",
            model.dim(),
            dataset.dim()
        ))
        .into());
    }
    let hist = model.spec().embedding.history();
    if a.start <= hist || a.start > dataset.len() {
        return Err(Error::Config(format!(
            "--start {} needs rows {}..={} of a {}-row dataset",
            a.start,
            a.start as isize - hist as isize,
            a.start,
            dataset.len()
        ))
        .into());
    }
    let newest = a.start - 1;
    let rollout = model.recursive_predict(dataset.rows(newest - hist, newest + 1), a.steps)?;
    if let Some(step) = rollout.diverged_at {
        eprintln!("warning: prediction became non-finite at step {step}; writing the {} finite steps", rollout.len());
    }
    let mut extra = json_map([("first_index", to_value(&(a.start + 1)))]);
    if let Some(step) = rollout.diverged_at {
        extra.insert("diverged_at".into(), to_value(&step));
    }
    let traj = Trajectory {
        meta: TrajectoryMeta {
            system: file.system.name().into(),
            t0: dataset.time(newest) + model.h,
            h: model.h,
            n: rollout.len(),
            extra,
        },
        dim: rollout.dim,
        points: rollout.points,
    };
    dataset_csv::write_trajectory(&a.out, &traj)?;
    write_manifest(&a.out, "predict", &a)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalReport {
    steps: usize,
    valid_time: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps_evaluated: Option<usize>,
}

fn eval(a: EvalArgs) -> CmdResult {
    if !(a.threshold > 0.0) {
        return Err(Failure::Usage(format!("--M must be positive, got {}", a.threshold)));
    }
    let pred = dataset_csv::read_trajectory(&a.pred)?;
    let reference = dataset_csv::read_dataset(&a.reference)?;
    if pred.dim != reference.dim() {
        return Err(Error::Other(format!(
            "prediction has dimension {} but the reference has dimension {}",
            pred.dim,
            reference.dim()
        ))
        .into());
    }
    let steps = pred.len();
    if a.start == 0 || a.start + steps > reference.len() {
        return Err(Error::Config(format!(
            "{steps} predictions from --start {} run past the {}-row reference",
            a.start,
            reference.len()
        ))
        .into());
    }
    let target = reference.rows(a.start, a.start + steps);
    let vt = valid_time(&pred.points, target, pred.dim, a.threshold)?;
    let mut out = EvalReport {
        steps,
        valid_time: vt,
        energy: None,
        steps_evaluated: None,
    };
    if let Some(path) = &a.model {
        let file = ModelFile::read(path)?;
        let model = file.model()?;
        if model.dim() != pred.dim {
            return Err(Error::Other(format!(
                "model has dimension {} but the prediction has dimension {}",
                model.dim(),
                pred.dim
            ))
            .into());
        }
        let hist = model.spec().embedding.history();
        if a.start <= hist {
            return Err(Error::Config(format!("--start {} leaves fewer than {hist} seed rows", a.start)).into());
        }
        let seed = reference.rows(a.start - 1 - hist, a.start);
        let e = discrete_energy(&model, &file.system, seed, &pred.points, model.h)?;
        out.energy = Some(e.energy);
        out.steps_evaluated = Some(e.steps_evaluated);
    }
    let text = serde_json::to_string_pretty(&out).expect("plain data serializes") + "\n";
    match &a.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Error::io(path, e))?;
            write_manifest(path, "eval", &a)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> CmdResult {
    let mut config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| Error::json(path, e))?
        }
        None => match a.problem {
            Some(p) => ExperimentConfig::for_problem(p.system().name()),
            None => return Err(Failure::Usage("sweep needs --config or --problem".into())),
        },
    };
    if let Some(p) = a.problem {
        if config.problem != p.system().name() {
            config.problem = p.system().name().into();
            config.system = None;
        }
    }
    if let Some(data) = &a.data {
        config.data = Some(data.clone());
        config.generation = None;
    }
    if let Some(bases) = &a.bases {
        config.bases = bases.iter().map(|&b| b.into()).collect();
    }
    if let Some(r) = a.radii_from {
        config.radii_from = r.into();
    }
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be positive".into()));
    }
    let exp = Experiment::load(&config)?;
    let outcome = run_sweep(&exp, Some(&a.out), jobs)?;

    #[derive(Serialize)]
    struct SweepManifest<'a> {
        config: &'a ExperimentConfig,
        jobs: usize,
    }
    write_manifest(
        &a.out,
        "sweep",
        &SweepManifest {
            config: &exp.config,
            jobs,
        },
    )?;
    for e in &outcome.errors {
        eprintln!("warning: {} r={} w_o={}: {}", e.cell.basis, e.cell.r, e.cell.w_o, e.message);
    }
    eprintln!(
        "{} trials, {} failed cells; results in {}",
        outcome.records.len(),
        outcome.errors.len(),
        a.out.display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> CmdResult {
    let path = if a.results.is_dir() {
        a.results.join("results.csv")
    } else {
        a.results.clone()
    };
    let records = if path.exists() { read_results(&path)? } else { Vec::new() };
    if records.is_empty() {
        return Err(Error::Other(format!("no results found in {}", a.results.display())).into());
    }
    let expected = match a.intervals {
        Some(n) => n,
        None => {
            let mut counts = std::collections::HashMap::new();
            for r in &records {
                *counts.entry((r.problem.clone(), r.cell.bits())).or_insert(0usize) += 1;
            }
            counts.into_values().max().unwrap_or(0)
        }
    };
    let agg = aggregate_median(&records, expected);
    for c in &agg.incomplete {
        eprintln!(
            "warning: {} {} r={} w_o={} has {} of {} intervals; left out",
            c.problem, c.cell.basis, c.cell.r, c.cell.w_o, c.found, c.expected
        );
    }
    match a.format {
        ReportFormat::Markdown => print!("{}", markdown_tables(&agg.rows)),
        ReportFormat::Csv => print!("{}", aggregate_csv(&agg.rows)),
    }
    Ok(())
}

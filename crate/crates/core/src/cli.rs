//! Command-line front end.
//!
//! Every subcommand reads and writes plain files: movies and weights in their
//! text formats, sweep results as CSV. `--config <file.json>` supplies flag
//! values from a JSON object whose keys are flag names; flags given on the
//! command line win.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rand::Rng;
use thiserror::Error;

use crate::analytics::{self, AnalyticPoint};
use crate::error::AstmError;
use crate::harness::{self, ExperimentConfig, TrialMode};
use crate::lattice::{flip_pixels, random_movie, ConnectivityMap, LatticeConfig, Movie};
use crate::par::Exec;
use crate::recording::{
    record, AnalogParams, DiscreteParams, Method, QpParams, QpSolver, WeightMatrix,
};
use crate::retrieval;
use crate::tcam::{self, DeviceModel};
use crate::{fmt_prob, rng, selftest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {msg}")]
    Config { path: String, msg: String },
    #[error(transparent)]
    Run(#[from] AstmError),
    #[error("selftest failed: {0}")]
    Selftest(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Run(_) | CliError::Selftest(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "astm",
    version,
    about = "Associative spatial-temporal memory experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub threads: ThreadArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random movie file.
    GenMovie(GenMovieArgs),
    /// Record a movie into a weight file.
    Record(RecordArgs),
    /// Run retrieval from a (possibly corrupted) frame.
    Retrieve(RetrieveArgs),
    /// Capacity search for one method.
    SweepCapacity(CapacityArgs),
    /// Corruption probability against the input flip fraction.
    SweepNoise(NoiseArgs),
    /// Corruption probability against relative weight noise.
    SweepWeightNoise(NoiseArgs),
    /// Discrete-GD capacity against the duty cycle.
    SweepDuty(DutyArgs),
    /// Hebb equilibrium pixel error against the frame count.
    Equilibrium(EquilibriumArgs),
    /// T-CAM Monte Carlo error against the closed-form estimate.
    Tcam(TcamArgs),
    /// Evaluate one closed-form expression.
    Analytic(AnalyticArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct GenMovieArgs {
    #[arg(long)]
    pub side: usize,
    #[arg(long)]
    pub window: usize,
    #[arg(long)]
    pub frames: usize,
    #[arg(long, default_value_t = 0.5)]
    pub duty: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Hebb,
    Qp,
    Agd,
    Dgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverName {
    ActiveSet,
    Hildreth,
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: MethodName,
    /// Learning rate (agd, dgd).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Constraint margin (qp) or margin parameter D (dgd).
    #[arg(long)]
    pub margin: Option<f64>,
    /// Epoch cap (agd, dgd).
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Stop threshold on |error| (agd).
    #[arg(long)]
    pub eps_stop: Option<f64>,
    /// Pass cap for the hildreth solver (qp).
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Constraint tolerance (qp).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub qp_solver: Option<SolverName>,
}

impl MethodArgs {
    pub fn to_method(&self) -> Method {
        match self.method {
            MethodName::Hebb => Method::Hebb,
            MethodName::Qp => {
                let d = QpParams::default();
                Method::Qp(QpParams {
                    margin: self.margin.unwrap_or(d.margin),
                    max_iters: self.max_iters.unwrap_or(d.max_iters),
                    tol: self.tol.unwrap_or(d.tol),
                    solver: match self.qp_solver {
                        Some(SolverName::Hildreth) => QpSolver::Hildreth,
                        Some(SolverName::ActiveSet) => QpSolver::ActiveSet,
                        None => d.solver,
                    },
                })
            }
            MethodName::Agd => {
                let d = AnalogParams::default();
                Method::AnalogGd(AnalogParams {
                    eta: self.eta.unwrap_or(d.eta),
                    max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
                    eps_stop: self.eps_stop.unwrap_or(d.eps_stop),
                })
            }
            MethodName::Dgd => {
                let d = DiscreteParams::default();
                Method::DiscreteGd(DiscreteParams {
                    eta: self.eta.unwrap_or(d.eta),
                    margin: self.margin.unwrap_or(d.margin),
                    max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
                })
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct ThreadArgs {
    /// Worker threads; falls back to ASTM_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl ThreadArgs {
    pub fn exec(&self) -> Result<Exec, CliError> {
        let n = match self.threads {
            Some(n) => Some(n),
            None => match std::env::var("ASTM_THREADS") {
                Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                    CliError::Usage(format!("ASTM_THREADS: '{v}' is not a thread count"))
                })?),
                Err(_) => None,
            },
        };
        Ok(n.map_or(Exec::default(), Exec::with_threads))
    }
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub movie: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub movie: PathBuf,
    /// Fraction of pixels flipped in the starting frame.
    #[arg(long, default_value_t = 0.0)]
    pub flip: f64,
    /// Relative weight noise applied before retrieval.
    #[arg(long, default_value_t = 0.0)]
    pub weight_noise: f64,
    /// Index of the starting frame.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Retrieval steps; defaults to the frame count.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Per-step trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 51)]
    pub side: usize,
    #[arg(long, default_value_t = 11)]
    pub window: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.5)]
    pub duty: f64,
    #[arg(long)]
    pub seed: u64,
    /// Retrieval steps; defaults to the frame count.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Record once and reuse the weights across trials.
    #[arg(long)]
    pub shared_recording: bool,
    /// First batch size for early-stopping probes.
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(
        &self,
        method: Method,
        frames: usize,
        exec: Exec,
    ) -> Result<ExperimentConfig, CliError> {
        let lattice = LatticeConfig::new(self.side, self.window)?;
        let mut cfg = ExperimentConfig::new(lattice, method, frames, self.trials, self.seed);
        cfg.duty = self.duty;
        cfg.horizon = self.horizon;
        cfg.batch = self.batch;
        cfg.exec = exec;
        if self.shared_recording {
            cfg.mode = TrialMode::SharedRecording;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long, default_value_t = 0.01)]
    pub target: f64,
    /// Stop bisecting once the bracket is this narrow.
    #[arg(long, default_value_t = 1)]
    pub resolution: usize,
    #[arg(long, default_value_t = 0.0)]
    pub flip: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_noise: f64,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long)]
    pub frames: usize,
    /// Sweep points, comma separated.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, required = true)]
    pub values: Vec<f64>,
    /// Fixed flip fraction (weight-noise sweep).
    #[arg(long, default_value_t = 0.0)]
    pub flip: f64,
    /// Fixed weight noise (input-noise sweep).
    #[arg(long, default_value_t = 0.0)]
    pub weight_noise: f64,
}

#[derive(Debug, Args)]
pub struct DutyArgs {
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, required = true)]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub target: f64,
    #[arg(long, default_value_t = 1)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Frame counts, comma separated.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, required = true)]
    pub frames: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct TcamArgs {
    #[arg(long)]
    pub pixels: usize,
    #[arg(long)]
    pub frames: usize,
    /// Flip fractions, comma separated.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, required = true)]
    pub flip: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1.0)]
    pub g_on: f64,
    #[arg(long, default_value_t = 0.0)]
    pub g_off: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_g: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Formula {
    /// Hebb per-pixel error from M and Q.
    HebbP,
    /// Its small-error limit.
    HebbPAsymptotic,
    /// T-CAM single-distractor confusion from N and f.
    TcamConfusion,
    /// T-CAM per-retrieval error from N, Q and f.
    TcamError,
    /// Exact binomial single-distractor confusion from N and f.
    TcamBinomial,
    /// T-CAM frames per memristor budget.
    TcamCapacity,
    /// CrossNet frames per memristor budget.
    CrossnetCapacity,
    /// Worst-case T-CAM failure condition (1 or 0).
    Condition,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[arg(long, value_enum)]
    pub formula: Formula,
    #[arg(long)]
    pub connectivity: Option<f64>,
    #[arg(long)]
    pub frames: Option<f64>,
    #[arg(long)]
    pub pixels: Option<f64>,
    #[arg(long)]
    pub flip: Option<f64>,
    #[arg(long)]
    pub memristors: Option<f64>,
    #[arg(long)]
    pub g_off_max: Option<f64>,
    #[arg(long)]
    pub g_on_max: Option<f64>,
}

/// Parses `args` (including the program name), runs the command and writes
/// its primary output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = expand_config(args.into_iter().map(Into::into).collect())?;
    let command = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let matches = match command.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(out, "{}", e.render()).map_err(|err| io_error("stdout", err))?;
                return Ok(());
            }
            return Err(CliError::Usage(first_line(&e.to_string())));
        }
    };
    let cli =
        Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(first_line(&e.to_string())))?;
    let exec = cli.threads.exec()?;
    dispatch(cli.command, exec, out)
}

/// Folds a clap message into one line, dropping the usage and help hints.
fn first_line(s: &str) -> String {
    s.lines()
        .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
        .trim_start_matches("error: ")
        .to_string()
}

/// Replaces `--config <path>` with the flags stored in the JSON file, placed
/// right after the subcommand so later command-line flags override them.
fn expand_config(mut args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(pos) = args.iter().position(|a| a == "--config") else {
        if let Some(pos) = args
            .iter()
            .position(|a| a.to_string_lossy().starts_with("--config="))
        {
            let path = args.remove(pos).to_string_lossy()["--config=".len()..].to_string();
            return insert_config(args, &path);
        }
        return Ok(args);
    };
    if pos + 1 >= args.len() {
        return Err(CliError::Usage("--config needs a path".into()));
    }
    let path = args.remove(pos + 1).to_string_lossy().into_owned();
    args.remove(pos);
    insert_config(args, &path)
}

fn insert_config(mut args: Vec<OsString>, path: &str) -> Result<Vec<OsString>, CliError> {
    let cfg_err = |msg: String| CliError::Config {
        path: path.to_string(),
        msg,
    };
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err(e.to_string()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| cfg_err(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| cfg_err("top level must be an object".into()))?;
    let mut extra: Vec<OsString> = Vec::new();
    for (key, v) in obj {
        let flag = format!("--{}", key.trim_start_matches('-').replace('_', "-"));
        let scalar = |v: &serde_json::Value| -> Result<String, CliError> {
            match v {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(n) => Ok(n.to_string()),
                _ => Err(cfg_err(format!("unsupported value for '{key}'"))),
            }
        };
        match v {
            serde_json::Value::Bool(true) => extra.push(flag.into()),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                let joined = items
                    .iter()
                    .map(scalar)
                    .collect::<Result<Vec<_>, _>>()?
                    .join(",");
                extra.push(flag.into());
                extra.push(joined.into());
            }
            other => {
                extra.push(flag.into());
                extra.push(scalar(other)?.into());
            }
        }
    }
    let at = args.len().min(2);
    args.splice(at..at, extra);
    Ok(args)
}

fn io_error(path: impl AsRef<Path>, source: std::io::Error) -> CliError {
    CliError::Run(AstmError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| io_error("stdout", e)),
    }
}

fn dispatch(command: Command, exec: Exec, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::GenMovie(a) => gen_movie(a, out),
        Command::Record(a) => record_cmd(a, exec, out),
        Command::Retrieve(a) => retrieve_cmd(a, out),
        Command::SweepCapacity(a) => capacity_cmd(a, exec, out),
        Command::SweepNoise(a) => noise_cmd(a, false, exec, out),
        Command::SweepWeightNoise(a) => noise_cmd(a, true, exec, out),
        Command::SweepDuty(a) => duty_cmd(a, exec, out),
        Command::Equilibrium(a) => equilibrium_cmd(a, exec, out),
        Command::Tcam(a) => tcam_cmd(a, exec, out),
        Command::Analytic(a) => analytic_cmd(a, out),
        Command::Selftest => selftest_cmd(out),
    }
}

fn gen_movie(a: GenMovieArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = LatticeConfig::new(a.side, a.window)?;
    let movie = random_movie(cfg.cell_count(), a.frames, a.duty, a.seed)?;
    emit(a.out.as_deref(), &movie.to_text(&cfg)?, out)
}

fn load_movie(path: &Path) -> Result<(LatticeConfig, Movie), CliError> {
    Ok(Movie::parse_text(&read(path)?)?)
}

fn record_cmd(a: RecordArgs, exec: Exec, out: &mut dyn Write) -> Result<(), CliError> {
    let method = a.method.to_method();
    method.validate()?;
    let (cfg, movie) = load_movie(&a.movie)?;
    let conn = ConnectivityMap::build(&cfg);
    let (weights, report) = record(&movie, &conn, &method, exec)?;
    write_file(&a.out, &weights.to_text(&cfg)?)?;
    writeln!(
        out,
        "method={} converged={} epochs={} violations={} weight_rms={}",
        method.name(),
        report.converged,
        report.epochs_used,
        report.violations,
        fmt_prob(report.weight_rms)
    )
    .map_err(|e| io_error("stdout", e))
}

fn retrieve_cmd(a: RetrieveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.flip) {
        return Err(AstmError::InvalidParameter {
            name: "flip",
            reason: format!("{} not in [0, 1]", a.flip),
        }
        .into());
    }
    let (wcfg, weights) = WeightMatrix::parse_text(&read(&a.weights)?)?;
    let (cfg, movie) = load_movie(&a.movie)?;
    if wcfg != cfg {
        return Err(AstmError::InvalidConfig(format!(
            "weights are for L={} m={}, movie is L={} m={}",
            wcfg.side(),
            wcfg.window(),
            cfg.side(),
            cfg.window()
        ))
        .into());
    }
    if a.start >= movie.frame_count() {
        return Err(AstmError::InvalidParameter {
            name: "start",
            reason: format!("{} >= frame count {}", a.start, movie.frame_count()),
        }
        .into());
    }
    let conn = ConnectivityMap::build(&cfg);
    let mut stream = rng::stream(a.seed, 0);
    let flip_seed: u64 = stream.random();
    let noise_seed: u64 = stream.random();
    let weights = retrieval::perturb_weights(&weights, a.weight_noise, noise_seed)?;
    let input = flip_pixels(movie.frame(a.start), a.flip, flip_seed)?;
    let horizon = a.horizon.unwrap_or(movie.frame_count());
    let trace = retrieval::run(&weights, &conn, &input, &movie, a.start, horizon)?;
    if let Some(p) = &a.trace {
        write_file(p, &trace.to_csv())?;
    }
    writeln!(
        out,
        "status={} steps={} initial_wrong={} final_wrong={}",
        trace.status,
        trace.steps_run,
        trace.wrong_counts[0],
        trace.wrong_counts.last().copied().unwrap_or(0)
    )
    .map_err(|e| io_error("stdout", e))
}

fn capacity_cmd(a: CapacityArgs, exec: Exec, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = a.experiment.config(a.method.to_method(), 1, exec)?;
    cfg.flip = a.flip;
    cfg.weight_noise = a.weight_noise;
    let (result, _) = harness::capacity_sweep(&cfg, a.target, a.resolution)?;
    emit(a.experiment.out.as_deref(), &result.to_csv(), out)
}

fn noise_cmd(
    a: NoiseArgs,
    weight_noise: bool,
    exec: Exec,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = a.experiment.config(a.method.to_method(), a.frames, exec)?;
    cfg.flip = a.flip;
    cfg.weight_noise = a.weight_noise;
    let result = if weight_noise {
        harness::weight_noise_sweep(&cfg, &a.values)?
    } else {
        harness::noise_sweep(&cfg, &a.values)?
    };
    emit(a.experiment.out.as_deref(), &result.to_csv(), out)
}

fn duty_cmd(a: DutyArgs, exec: Exec, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = a.experiment.config(a.method.to_method(), 1, exec)?;
    let (result, _) = harness::duty_sweep(&cfg, &a.values, a.target, a.resolution)?;
    emit(a.experiment.out.as_deref(), &result.to_csv(), out)
}

fn equilibrium_cmd(a: EquilibriumArgs, exec: Exec, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = a.experiment.config(Method::Hebb, 1, exec)?;
    let result = harness::equilibrium_sweep(&cfg, &a.frames)?;
    emit(a.experiment.out.as_deref(), &result.to_csv(), out)
}

pub const TCAM_HEADER: &str = "N,Q,f,trials,p_mc,stderr,p_eq14_per_retrieval";

fn tcam_cmd(a: TcamArgs, exec: Exec, out: &mut dyn Write) -> Result<(), CliError> {
    let device = DeviceModel {
        g_on: a.g_on,
        g_off: a.g_off,
        sigma_g: a.sigma_g,
    };
    let mut text = format!("{TCAM_HEADER}\n");
    for &f in &a.flip {
        let e =
            tcam::retrieval_error_mc_with(a.pixels, a.frames, f, a.trials, device, a.seed, exec)?;
        let analytic = analytics::tcam_retrieval_error(a.pixels as f64, a.frames, f);
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            a.pixels,
            a.frames,
            f,
            a.trials,
            fmt_prob(e.p()),
            fmt_prob(e.stderr()),
            fmt_prob(analytic)
        ));
    }
    emit(a.out.as_deref(), &text, out)
}

pub const ANALYTIC_HEADER: &str = "formula,parameters,value";

/// Evaluates one formula from the analytic flags.
pub fn evaluate(a: &AnalyticArgs) -> Result<AnalyticPoint, CliError> {
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| CliError::Usage(format!("--formula {:?} needs --{flag}", a.formula)))
    };
    let (formula, inputs, value) = match a.formula {
        Formula::HebbP | Formula::HebbPAsymptotic => {
            let m = need(a.connectivity, "connectivity")?;
            let q = need(a.frames, "frames")?;
            let (name, v) = if a.formula == Formula::HebbP {
                ("hebb-p", analytics::hebb_pixel_error(m, q))
            } else {
                (
                    "hebb-p-asymptotic",
                    analytics::hebb_pixel_error_asymptotic(m, q),
                )
            };
            (name, vec![("M", m), ("Q", q)], v)
        }
        Formula::TcamConfusion => {
            let n = need(a.pixels, "pixels")?;
            let f = need(a.flip, "flip")?;
            (
                "tcam-confusion",
                vec![("N", n), ("f", f)],
                analytics::tcam_confusion_prob(n, f),
            )
        }
        Formula::TcamError => {
            let n = need(a.pixels, "pixels")?;
            let q = need(a.frames, "frames")?;
            let f = need(a.flip, "flip")?;
            let v = analytics::tcam_retrieval_error(n, q as usize, f);
            ("tcam-error", vec![("N", n), ("Q", q), ("f", f)], v)
        }
        Formula::TcamBinomial => {
            let n = need(a.pixels, "pixels")?;
            let f = need(a.flip, "flip")?;
            let v = analytics::tcam_binomial_tail(n as usize, f);
            ("tcam-binomial", vec![("N", n), ("f", f)], v)
        }
        Formula::TcamCapacity | Formula::CrossnetCapacity => {
            let n = need(a.memristors, "memristors")?;
            let px = need(a.pixels, "pixels")?;
            if a.formula == Formula::TcamCapacity {
                (
                    "tcam-capacity",
                    vec![("n", n), ("N", px)],
                    analytics::tcam_capacity(n, px),
                )
            } else {
                (
                    "crossnet-capacity",
                    vec![("n", n), ("N", px)],
                    analytics::crossnet_capacity(n, px),
                )
            }
        }
        Formula::Condition => {
            let off = need(a.g_off_max, "g-off-max")?;
            let on = need(a.g_on_max, "g-on-max")?;
            let v = analytics::condition_check(off, on) as u8 as f64;
            ("condition", vec![("g_off_max", off), ("g_on_max", on)], v)
        }
    };
    Ok(AnalyticPoint {
        formula,
        inputs,
        value,
    })
}

fn analytic_cmd(a: AnalyticArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let p = evaluate(&a)?;
    let text = format!(
        "{ANALYTIC_HEADER}\n{},{},{}\n",
        p.formula,
        p.parameters(),
        fmt_prob(p.value)
    );
    emit(None, &text, out)
}

fn selftest_cmd(out: &mut dyn Write) -> Result<(), CliError> {
    let checks = selftest::run();
    let mut failed = Vec::new();
    for c in &checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        writeln!(out, "{tag} {} ({})", c.name, c.detail).map_err(|e| io_error("stdout", e))?;
        if !c.pass {
            failed.push(c.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Selftest(failed.join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> Result<String, CliError> {
        let mut buf = Vec::new();
        let mut full = vec!["astm"];
        full.extend_from_slice(args);
        run(full, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn analytic_hebb_row() {
        let s = run_capture(&[
            "analytic",
            "--formula",
            "hebb-p",
            "--connectivity",
            "440",
            "--frames",
            "79",
        ])
        .unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some(ANALYTIC_HEADER));
        let row = lines.next().unwrap();
        assert!(row.starts_with("hebb-p,M=440;Q=79,"));
        let v: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        let exact = 0.5 * crate::special::erfc((440.0f64 / 158.0).sqrt());
        assert!(((v - exact) / exact).abs() < 1e-11);
        assert!((v - 0.01).abs() < 0.002);
    }

    #[test]
    fn missing_input_is_a_usage_error() {
        let e =
            run_capture(&["analytic", "--formula", "tcam-error", "--pixels", "64"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("--frames"));
    }

    #[test]
    fn unknown_subcommand_is_one_line() {
        let e = run_capture(&["frobnicate"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(!e.to_string().contains('\n'));
    }

    #[test]
    fn seed_is_required() {
        let e = run_capture(&["gen-movie", "--side", "5", "--window", "3", "--frames", "2"])
            .unwrap_err();
        assert!(e.to_string().contains("--seed"), "{e}");
    }

    #[test]
    fn config_file_supplies_flags_and_cli_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"formula": "tcam-capacity", "memristors": 1000, "pixels": 10}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let s = run_capture(&["analytic", "--config", p]).unwrap();
        assert!(s.ends_with(",5.00000000000e1\n"), "{s}");
        let s = run_capture(&["analytic", "--config", p, "--pixels", "100"]).unwrap();
        assert!(s.ends_with(",5.00000000000e0\n"), "{s}");
    }

    #[test]
    fn list_flags_override_config_lists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"flip": [0.1, 0.2, 0.3]}"#).unwrap();
        let p = path.to_str().unwrap();
        let args = [
            "tcam",
            "--config",
            p,
            "--pixels",
            "16",
            "--frames",
            "2",
            "--trials",
            "10",
            "--seed",
            "1",
            "--flip",
            "0.25",
            "--threads",
            "1",
        ];
        let s = run_capture(&args).unwrap();
        assert_eq!(s.lines().count(), 2, "{s}");
    }
}

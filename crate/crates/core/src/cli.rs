//! Command-line front end and the JSON-driven experiment runner.
//!
//! Every experiment is a list of independent groups (one per grid point);
//! each group's rows depend only on the experiment spec and the group index, so a
//! manifest is enough to recompute any of them.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::ScheduleKind;
use crate::metrics::{
    fit_lambda, phase_transition_curve, polyfit, poly_argmin, task_seed, tts_scaling, InstanceSet, MetricsError,
    ScalingPoint, DEFAULT_POLY_DEGREE,
};
use crate::qlinalg::concurrence_2q;
use crate::satcore::{
    enumerate_solutions, parse_dimacs, random_instance, random_unique_solution_instance, two_qubit_two_solutions,
    two_qubit_unique, two_qubit_unsat, CnfFormula, SatError,
};
use crate::solver::{
    run_average, run_full_with, run_heralded_restart, run_heralded_single, stream_rng, success_probability,
    FinalState, Mode, NoInjection, ProjectAt, RunConfig, RunOutcome, SolverError, TracePoint,
};

/// Default output directory when `--out-dir` is not given.
pub const OUT_DIR_ENV: &str = "ZENO_KSAT_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNDECIDED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNSAT: i32 = 20;

/// Largest n for which `solve` runs the exhaustive oracle to report UNSAT.
pub const ORACLE_MAX_VARS: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io { .. } | Self::Sat(_) | Self::Json(_) => EXIT_USAGE,
            Self::Solver(SolverError::Config(_) | SolverError::Encoding(_) | SolverError::Dynamics(_)) => EXIT_USAGE,
            _ => EXIT_UNDECIDED,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, data: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, data).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Debug, Parser)]
#[command(name = "zeno-ksat", version, about = "Measurement-driven k-SAT simulator")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full algorithm on a DIMACS file and print the outcome as JSON.
    Solve(SolveArgs),
    /// Write random k-SAT instances as DIMACS files.
    Gen(GenArgs),
    /// Run a JSON experiment spec; writes CSV plus a manifest.
    Experiment(ExperimentArgs),
    /// Recompute rows from a manifest and compare with the stored CSV.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub cnf: PathBuf,
    #[arg(long, default_value = "heralded-restart")]
    pub mode: Mode,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long = "Tf", alias = "tf", default_value_t = 100.0)]
    pub t_f: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Readout duration; `inf` for a projective readout.
    #[arg(long, default_value_t = f64::INFINITY)]
    pub dtm: f64,
    /// `linear` or a JSON file `{"fractions": [...], "thetas": [...]}`.
    #[arg(long, default_value = "linear")]
    pub schedule: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub max_shots: usize,
    /// Also write the JSON outcome here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Keep only instances with exactly one solution.
    #[arg(long)]
    pub unique: bool,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long)]
    pub instances: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Only this group (grid point); all groups by default.
    #[arg(long)]
    pub group: Option<usize>,
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let jobs = cli.jobs;
    with_jobs(jobs, move || match cli.command {
        Command::Solve(a) => cmd_solve(&a).map(|r| {
            println!("{}", serde_json::to_string_pretty(&r).expect("outcome serializes"));
            r.exit_code
        }),
        Command::Gen(a) => cmd_gen(&a).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_OK
        }),
        Command::Experiment(a) => cmd_experiment(&a).map(|m| {
            for o in &m.outputs {
                println!("{}", o.display());
            }
            EXIT_OK
        }),
        Command::Replay(a) => cmd_replay(&a).map(|r| {
            println!("{} of {} rows identical", r.matched, r.checked);
            if r.matched == r.checked {
                EXIT_OK
            } else {
                EXIT_UNDECIDED
            }
        }),
    })
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError> {
    match jobs {
        None => f(),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(f),
    }
}

fn parse_schedule(arg: &str) -> Result<ScheduleKind, CliError> {
    if arg == "linear" {
        return Ok(ScheduleKind::Linear);
    }
    #[derive(Deserialize)]
    struct Table {
        fractions: Vec<f64>,
        thetas: Vec<f64>,
    }
    let t: Table = serde_json::from_str(&read(Path::new(arg))?)?;
    Ok(ScheduleKind::Custom { fractions: t.fractions, thetas: t.thetas })
}

pub fn load_cnf(path: &Path) -> Result<CnfFormula, CliError> {
    Ok(parse_dimacs(&read(path)?)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub shots: usize,
    /// Known only when the exhaustive oracle was run.
    pub satisfiable: Option<bool>,
    pub outcome: RunOutcome,
    #[serde(skip)]
    pub exit_code: i32,
}

/// Repeat the full algorithm up to `max_shots` times. Exit 0 on a verified
/// solution, 20 when no shot verifies and the oracle proves UNSAT, else 1.
pub fn cmd_solve(a: &SolveArgs) -> Result<SolveReport, CliError> {
    let f = load_cnf(&a.cnf)?;
    if a.max_shots == 0 {
        return Err(CliError::Usage("--max-shots must be at least 1".into()));
    }
    let mut cfg = RunConfig::new(a.mode, a.tau, a.t_f, a.dt).with_seed(a.seed).with_readout(a.dtm);
    cfg.schedule = parse_schedule(&a.schedule)?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut total = 0.0;
    let mut last = None;
    let mut shots = 0;
    for _ in 0..a.max_shots {
        shots += 1;
        let mut out = run_full_with(&f, &cfg, &mut NoInjection, &mut rng)?;
        total += out.consumed_time;
        out.consumed_time = total;
        let done = out.verified;
        last = Some(out);
        if done {
            break;
        }
    }
    let outcome = last.expect("at least one shot");
    let satisfiable =
        (!outcome.verified && f.num_vars() <= ORACLE_MAX_VARS).then(|| enumerate_solutions(&f).map(|s| s.count() > 0));
    let satisfiable = match satisfiable {
        Some(r) => Some(r?),
        None if outcome.verified => Some(true),
        None => None,
    };
    let exit_code = if outcome.verified {
        EXIT_OK
    } else if satisfiable == Some(false) {
        EXIT_UNSAT
    } else {
        EXIT_UNDECIDED
    };
    let report = SolveReport { shots, satisfiable, outcome, exit_code };
    if let Some(p) = &a.out {
        write(p, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(report)
}

/// Write `count` instances; with `--unique` every file has exactly one
/// solution by exhaustive check.
pub fn cmd_gen(a: &GenArgs) -> Result<Vec<PathBuf>, CliError> {
    if a.k == 0 || a.k > a.n {
        return Err(CliError::Usage(format!("need 1 <= k <= n, got k = {} and n = {}", a.k, a.n)));
    }
    if !(a.alpha > 0.0) {
        return Err(CliError::Usage(format!("alpha must be positive, got {}", a.alpha)));
    }
    let dir = a.out_dir.clone().unwrap_or_else(default_out_dir);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut paths = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let f = if a.unique {
            random_unique_solution_instance(a.n, a.alpha, a.k, &mut rng)?
        } else {
            random_instance(a.n, a.alpha, a.k, &mut rng)?
        };
        let path = dir.join(format!("k{}_n{}_a{}_s{}_{:04}.cnf", a.k, a.n, a.alpha, a.seed, i));
        let body = format!("c k={} n={} alpha={} seed={} index={}\n{}", a.k, a.n, a.alpha, a.seed, i, f.to_dimacs());
        write(&path, body.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    File(PathBuf),
    Builtin(String),
}

impl InstanceSource {
    pub fn load(&self) -> Result<CnfFormula, CliError> {
        match self {
            Self::File(p) => load_cnf(p),
            Self::Builtin(name) => match name.as_str() {
                "two-qubit-unique" => Ok(two_qubit_unique()),
                "two-qubit-two-solutions" => Ok(two_qubit_two_solutions()),
                "two-qubit-unsat" => Ok(two_qubit_unsat()),
                _ => Err(CliError::Usage(format!(
                    "unknown builtin '{name}' (two-qubit-unique | two-qubit-two-solutions | two-qubit-unsat)"
                ))),
            },
        }
    }
}

fn default_instance() -> InstanceSource {
    InstanceSource::Builtin("two-qubit-unique".into())
}
fn default_tau() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    0.1
}
fn default_dt_m() -> f64 {
    f64::INFINITY
}
fn default_points() -> usize {
    50
}
fn default_shots() -> usize {
    1
}
fn default_k3() -> usize {
    3
}
fn default_alpha_c3() -> f64 {
    4.26
}
fn default_true() -> bool {
    true
}
fn default_herald_trajectories() -> usize {
    2000
}
fn default_instances() -> usize {
    50
}
fn default_modes() -> Vec<Mode> {
    vec![Mode::Average]
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub k: usize,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub t0: f64,
    pub clause: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Final fidelity over a (Δt/τ, T_f/τ) grid, averaged dynamics.
    FidelityContour {
        #[serde(default = "default_instance")]
        instance: InstanceSource,
        dt_over_tau: Vec<f64>,
        tf_over_tau: Vec<f64>,
    },
    /// Averaged-dynamics traces for several ΓT_f with Γ = 1/4τ.
    GammaScan {
        #[serde(default = "default_instance")]
        instance: InstanceSource,
        gamma_tf: Vec<f64>,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_points")]
        points: usize,
    },
    /// Fraction of random instances whose satisfiability is decided.
    PhaseTransition {
        n: usize,
        curves: Vec<CurveSpec>,
        t_fs: Vec<f64>,
        #[serde(default = "default_modes")]
        modes: Vec<Mode>,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_instances")]
        instances: usize,
        #[serde(default = "default_shots")]
        shots: usize,
        /// Heralded trajectories for the exact expected column (0 skips it).
        #[serde(default)]
        trajectories: usize,
    },
    /// TTS₉₉ against n for each T_f, plus fitted λ per T_f.
    TtsScaling(TtsGrid),
    /// TTS₉₉ against T_f for each n, plus the fitted optimum.
    #[serde(rename = "tts-vs-Tf")]
    TtsVsTf(TtsGrid),
    /// One run with per-step diagnostics.
    SingleRunTrace {
        #[serde(default = "default_instance")]
        instance: InstanceSource,
        mode: Mode,
        t_f: f64,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_true")]
        trace: bool,
        #[serde(default)]
        trace_every: usize,
        #[serde(default)]
        inject: Option<Injection>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtsGrid {
    pub ns: Vec<usize>,
    pub t_fs: Vec<f64>,
    #[serde(default = "default_k3")]
    pub k: usize,
    #[serde(default = "default_alpha_c3")]
    pub alpha: f64,
    #[serde(default = "default_true")]
    pub unique: bool,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_herald_trajectories")]
    pub trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_dt_m", with = "inf_as_null")]
    pub dt_m: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub kind: ExperimentKind,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ExperimentKind::FidelityContour { .. } => "fidelity-contour",
            ExperimentKind::GammaScan { .. } => "gamma-scan",
            ExperimentKind::PhaseTransition { .. } => "phase-transition",
            ExperimentKind::TtsScaling(_) => "tts-scaling",
            ExperimentKind::TtsVsTf(_) => "tts-vs-Tf",
            ExperimentKind::SingleRunTrace { .. } => "single-run-trace",
        }
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind_name().to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let empty = |what: &str, len: usize| {
            if len == 0 {
                Err(CliError::Usage(format!("{what} grid is empty")))
            } else {
                Ok(())
            }
        };
        if !(self.tau > 0.0) {
            return Err(CliError::Usage(format!("tau must be positive, got {}", self.tau)));
        }
        match &self.kind {
            ExperimentKind::FidelityContour { dt_over_tau, tf_over_tau, .. } => {
                empty("dt_over_tau", dt_over_tau.len())?;
                empty("tf_over_tau", tf_over_tau.len())
            }
            ExperimentKind::GammaScan { gamma_tf, points, .. } => {
                empty("gamma_tf", gamma_tf.len())?;
                empty("points", *points)
            }
            ExperimentKind::PhaseTransition { curves, t_fs, modes, n, instances, .. } => {
                empty("curves", curves.len())?;
                empty("t_fs", t_fs.len())?;
                empty("modes", modes.len())?;
                empty("instances", *instances)?;
                for c in curves {
                    empty("alphas", c.alphas.len())?;
                    if c.k == 0 || c.k > *n {
                        return Err(CliError::Usage(format!("need 1 <= k <= n, got k = {}", c.k)));
                    }
                }
                Ok(())
            }
            ExperimentKind::TtsScaling(g) | ExperimentKind::TtsVsTf(g) => {
                empty("ns", g.ns.len())?;
                empty("t_fs", g.t_fs.len())?;
                empty("modes", g.modes.len())?;
                empty("instances", g.instances)?;
                if g.ns.iter().any(|&n| g.k == 0 || g.k > n) {
                    return Err(CliError::Usage(format!("need 1 <= k <= n for k = {}", g.k)));
                }
                Ok(())
            }
            ExperimentKind::SingleRunTrace { .. } => Ok(()),
        }
    }
}

/// Rows of one grid point.
pub type Group = Vec<Vec<String>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub groups: Vec<Group>,
}

impl Table {
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in self.groups.iter().flatten() {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Column names of the main CSV for an experiment. Some columns repeat per
/// qubit (`z_j`) or per clause (`rbar_i`).
pub fn table_header(spec: &ExperimentSpec) -> Result<Vec<String>, CliError> {
    Ok(match &spec.kind {
        ExperimentKind::FidelityContour { .. } => {
            header(&["dt_over_tau", "tf_over_tau", "steps", "fidelity", "purity", "concurrence", "p_s"])
        }
        ExperimentKind::GammaScan { instance, .. } => {
            let n = instance.load()?.num_vars();
            let mut h = header(&["gamma_tf", "t", "theta"]);
            h.extend((1..=n).map(|j| format!("z_{j}")));
            h.extend(header(&["purity", "concurrence"]));
            h
        }
        ExperimentKind::PhaseTransition { .. } => header(&[
            "k",
            "n",
            "alpha",
            "t_f",
            "mode",
            "n_prob",
            "n_sat",
            "n_succ",
            "p_succ",
            "std_err",
            "p_succ_expected",
        ]),
        ExperimentKind::TtsScaling(_) | ExperimentKind::TtsVsTf(_) => header(&[
            "mode",
            "t_f",
            "n",
            "instances",
            "p_s",
            "p_s_err",
            "tts_99",
            "median_instance_tts_99",
        ]),
        ExperimentKind::SingleRunTrace { instance, .. } => {
            let f = instance.load()?;
            let mut h = header(&["t", "theta"]);
            h.extend((1..=f.num_vars()).map(|j| format!("z_{j}")));
            h.extend(header(&["purity", "concurrence"]));
            h.extend((1..=f.num_clauses()).map(|i| format!("rbar_{i}")));
            h.extend(header(&["failed_at"]));
            h
        }
    })
}

/// Number of independent groups (grid points).
pub fn group_count(spec: &ExperimentSpec) -> usize {
    match &spec.kind {
        ExperimentKind::FidelityContour { dt_over_tau, tf_over_tau, .. } => dt_over_tau.len() * tf_over_tau.len(),
        ExperimentKind::GammaScan { gamma_tf, .. } => gamma_tf.len(),
        ExperimentKind::PhaseTransition { curves, t_fs, modes, .. } => {
            modes.len() * t_fs.len() * curves.iter().map(|c| c.alphas.len()).sum::<usize>()
        }
        ExperimentKind::TtsScaling(g) | ExperimentKind::TtsVsTf(g) => g.modes.len() * g.t_fs.len() * g.ns.len(),
        ExperimentKind::SingleRunTrace { .. } => 1,
    }
}

fn solution_weight(state: &FinalState, f: &CnfFormula) -> Result<f64, CliError> {
    let probs = state.probabilities();
    Ok(enumerate_solutions(f)?.solutions().iter().map(|s| probs[s.basis_index()]).sum())
}

fn n2_concurrence(state: &FinalState) -> Option<f64> {
    (state.num_qubits() == 2).then(|| concurrence_2q(&state.to_density()).unwrap_or(f64::NAN))
}

/// Instances for `(k, n, alpha)`, identical across `T_f` and modes.
pub fn generate_instances(
    seed: u64,
    k: usize,
    n: usize,
    alpha: f64,
    count: usize,
    unique: bool,
) -> Result<Vec<CnfFormula>, CliError> {
    let key = task_seed(seed, k * 1000 + n, (alpha * 1e6).round() as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    (0..count)
        .map(|_| {
            if unique {
                random_unique_solution_instance(n, alpha, k, &mut rng)
            } else {
                random_instance(n, alpha, k, &mut rng)
            }
            .map_err(CliError::from)
        })
        .collect()
}

fn tts_row(mode: Mode, t_f: f64, p: &ScalingPoint) -> Vec<String> {
    vec![
        mode_name(mode),
        num(t_f),
        p.n.to_string(),
        p.instances.to_string(),
        num(p.p_s),
        num(p.p_s_err),
        num(p.tts_99),
        num(p.median_instance_tts_99),
    ]
}

fn mode_name(mode: Mode) -> String {
    serde_json::to_value(mode).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn trace_rows(trace: &[TracePoint], m: usize, failed_at: Option<f64>) -> Group {
    trace
        .iter()
        .map(|p| {
            let mut r = vec![num(p.t), num(p.theta)];
            r.extend(p.z.iter().map(|&z| num(z)));
            r.push(num(p.purity));
            r.push(opt(p.concurrence));
            match &p.filtered {
                Some(v) => r.extend(v.iter().map(|&x| num(x))),
                None => r.extend(std::iter::repeat_n(String::new(), m)),
            }
            r.push(opt(failed_at));
            r
        })
        .collect()
}

/// Rows of group `g`. Depends only on `spec` and `g`.
pub fn compute_group(spec: &ExperimentSpec, g: usize) -> Result<Group, CliError> {
    let tau = spec.tau;
    match &spec.kind {
        ExperimentKind::FidelityContour { instance, dt_over_tau, tf_over_tau } => {
            let f = instance.load()?;
            let (dt, tf) = (dt_over_tau[g / tf_over_tau.len()] * tau, tf_over_tau[g % tf_over_tau.len()] * tau);
            let mut cfg = RunConfig::new(Mode::Average, tau, tf.max(dt), dt).with_readout(spec.dt_m);
            cfg.seed = spec.seed;
            let out = run_average(&f, &cfg)?;
            let st = out.final_state.expect("average run has a state");
            Ok(vec![vec![
                num(dt / tau),
                num(tf / tau),
                cfg.schedule_for(cfg.t_f)?.num_steps(dt).to_string(),
                num(solution_weight(&st, &f)?),
                num(st.purity()),
                opt(n2_concurrence(&st)),
                num(success_probability(&st, &f, tau, spec.dt_m)?),
            ]])
        }
        ExperimentKind::GammaScan { instance, gamma_tf, dt, points } => {
            let f = instance.load()?;
            let gtf = gamma_tf[g];
            let t_f = 4.0 * tau * gtf;
            let mut cfg = RunConfig::new(Mode::Average, tau, t_f.max(*dt), *dt);
            let steps = cfg.schedule_for(cfg.t_f)?.num_steps(*dt);
            cfg.trace_every = (steps / points).max(1);
            let out = run_average(&f, &cfg)?;
            Ok(out
                .diagnostics
                .iter()
                .map(|p| {
                    let mut r = vec![num(gtf), num(p.t), num(p.theta)];
                    r.extend(p.z.iter().map(|&z| num(z)));
                    r.push(num(p.purity));
                    r.push(opt(p.concurrence));
                    r
                })
                .collect())
        }
        ExperimentKind::PhaseTransition { n, curves, t_fs, modes, dt, instances, shots, trajectories } => {
            let per_mode = t_fs.len() * curves.iter().map(|c| c.alphas.len()).sum::<usize>();
            let mode = modes[g / per_mode];
            let rest = g % per_mode;
            let t_f = t_fs[rest / (per_mode / t_fs.len())];
            let mut idx = rest % (per_mode / t_fs.len());
            let (k, alpha) = curves
                .iter()
                .find_map(|c| {
                    if idx < c.alphas.len() {
                        Some((c.k, c.alphas[idx]))
                    } else {
                        idx -= c.alphas.len();
                        None
                    }
                })
                .expect("group index in range");
            let formulas = generate_instances(spec.seed, k, *n, alpha, *instances, false)?;
            let set = InstanceSet { k, n: *n, alpha, formulas };
            let base = RunConfig::new(mode, tau, t_f, *dt).with_readout(spec.dt_m);
            let rows = phase_transition_curve(
                std::slice::from_ref(&set),
                &base,
                &[t_f],
                *shots,
                *trajectories,
                task_seed(spec.seed, g, 0),
            )?;
            Ok(rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.n.to_string(),
                        num(r.alpha),
                        num(r.t_f),
                        mode_name(r.mode),
                        r.n_prob.to_string(),
                        r.n_sat.to_string(),
                        r.n_succ.to_string(),
                        num(r.p_succ),
                        num(r.std_err),
                        num(r.p_succ_expected),
                    ]
                })
                .collect())
        }
        ExperimentKind::TtsScaling(grid) | ExperimentKind::TtsVsTf(grid) => {
            let per_mode = grid.t_fs.len() * grid.ns.len();
            let mode = grid.modes[g / per_mode];
            let t_f = grid.t_fs[(g % per_mode) / grid.ns.len()];
            let n = grid.ns[g % grid.ns.len()];
            let formulas = generate_instances(spec.seed, grid.k, n, grid.alpha, grid.instances, grid.unique)?;
            let cfg = RunConfig::new(mode, tau, t_f.max(grid.dt), grid.dt).with_readout(spec.dt_m);
            let pts = tts_scaling(&[(n, formulas)], &cfg, grid.trajectories, task_seed(spec.seed, g, 1))?;
            Ok(vec![tts_row(mode, t_f, &pts[0])])
        }
        ExperimentKind::SingleRunTrace { instance, mode, t_f, dt, trace, trace_every, inject } => {
            let f = instance.load()?;
            let mut cfg = RunConfig::new(*mode, tau, *t_f, *dt).with_seed(spec.seed).with_readout(spec.dt_m);
            cfg.trace_every = if *trace { (*trace_every).max(1) } else { 0 };
            let mut rng = stream_rng(spec.seed, 0);
            let out = match (mode, inject) {
                (Mode::Average, _) => run_average(&f, &cfg)?,
                (Mode::HeraldedSingle, Some(i)) => {
                    let step = (i.t0 / dt).round() as usize;
                    run_heralded_single(&f, &cfg, &mut ProjectAt { attempt: 0, step, clause: i.clause }, &mut rng)?
                }
                (Mode::HeraldedSingle, None) => run_heralded_single(&f, &cfg, &mut NoInjection, &mut rng)?,
                (Mode::HeraldedRestart, Some(i)) => {
                    let step = (i.t0 / dt).round() as usize;
                    run_heralded_restart(&f, &cfg, &mut ProjectAt { attempt: 0, step, clause: i.clause }, &mut rng)?
                }
                (Mode::HeraldedRestart, None) => run_heralded_restart(&f, &cfg, &mut NoInjection, &mut rng)?,
            };
            Ok(trace_rows(&out.diagnostics, f.num_clauses(), out.failed_at))
        }
    }
}

/// Derived summaries written next to the main table.
pub fn summarize(spec: &ExperimentSpec, table: &Table) -> Result<Option<Table>, CliError> {
    let (grid, by_tf) = match &spec.kind {
        ExperimentKind::TtsScaling(g) => (g, true),
        ExperimentKind::TtsVsTf(g) => (g, false),
        _ => return Ok(None),
    };
    let rows: Vec<&Vec<String>> = table.groups.iter().flatten().collect();
    let parse = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
    let mut out = Vec::new();
    for mode in &grid.modes {
        let name = mode_name(*mode);
        let mine: Vec<&&Vec<String>> = rows.iter().filter(|r| r[0] == name).collect();
        if by_tf {
            for &t_f in &grid.t_fs {
                let pts: Vec<(usize, f64)> = mine
                    .iter()
                    .filter(|r| parse(&r[1]) == t_f)
                    .map(|r| (r[2].parse().unwrap_or(0), parse(&r[6])))
                    .collect();
                let cells = match fit_lambda(&pts) {
                    Ok(fit) => vec![num(fit.lambda), num(fit.std_err), num(fit.prefactor)],
                    Err(_) => vec![String::new(); 3],
                };
                let mut r = vec![name.clone(), num(t_f)];
                r.extend(cells);
                out.push(r);
            }
        } else {
            for &n in &grid.ns {
                let pts: Vec<(f64, f64)> = mine
                    .iter()
                    .filter(|r| r[2].parse::<usize>().ok() == Some(n))
                    .map(|r| (parse(&r[1]).ln(), parse(&r[6]).ln()))
                    .filter(|p| p.0.is_finite() && p.1.is_finite())
                    .collect();
                let deg = DEFAULT_POLY_DEGREE.min(pts.len().saturating_sub(1));
                let cells = if pts.len() >= 2 {
                    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
                    let c = polyfit(&xs, &ys, deg)?;
                    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let (x, y) = poly_argmin(&c, lo, hi);
                    vec![num(x.exp()), num(y.exp())]
                } else {
                    vec![String::new(); 2]
                };
                let mut r = vec![name.clone(), n.to_string()];
                r.extend(cells);
                out.push(r);
            }
        }
    }
    let header = if by_tf {
        header(&["mode", "t_f", "lambda", "lambda_std_err", "prefactor"])
    } else {
        header(&["mode", "n", "t_f_opt", "tts_99_opt"])
    };
    Ok(Some(Table { header, groups: vec![out] }))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Table, CliError> {
    spec.validate()?;
    let groups = (0..group_count(spec)).map(|g| compute_group(spec, g)).collect::<Result<_, _>>()?;
    Ok(Table { header: table_header(spec)?, groups })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ExperimentSpec,
    pub version: String,
    pub timestamp: u64,
    pub data: PathBuf,
    pub summary: Option<PathBuf>,
    /// Row count of each group, in file order.
    pub group_rows: Vec<usize>,
    #[serde(skip)]
    pub outputs: Vec<PathBuf>,
}

pub fn cmd_experiment(a: &ExperimentArgs) -> Result<Manifest, CliError> {
    let mut spec = ExperimentSpec::from_json(&read(&a.spec)?)?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(t) = a.trajectories {
        match &mut spec.kind {
            ExperimentKind::PhaseTransition { trajectories, .. } => *trajectories = t,
            ExperimentKind::TtsScaling(g) | ExperimentKind::TtsVsTf(g) => g.trajectories = t,
            _ => {}
        }
    }
    if let Some(i) = a.instances {
        match &mut spec.kind {
            ExperimentKind::PhaseTransition { instances, .. } => *instances = i,
            ExperimentKind::TtsScaling(g) | ExperimentKind::TtsVsTf(g) => g.instances = i,
            _ => {}
        }
    }
    let dir = a.out_dir.clone().or_else(|| spec.output_dir.clone()).unwrap_or_else(default_out_dir);
    write_experiment(&spec, &dir)
}

/// Run `spec` and write `<name>.csv`, an optional `<name>_summary.csv` and
/// `<name>_manifest.json` into `dir`.
pub fn write_experiment(spec: &ExperimentSpec, dir: &Path) -> Result<Manifest, CliError> {
    let table = run_experiment(spec)?;
    let name = spec.name();
    let data = dir.join(format!("{name}.csv"));
    write(&data, &table.to_csv()?)?;
    let mut outputs = vec![data.clone()];
    let summary = match summarize(spec, &table)? {
        Some(s) => {
            let p = dir.join(format!("{name}_summary.csv"));
            write(&p, &s.to_csv()?)?;
            outputs.push(p.clone());
            Some(p)
        }
        None => None,
    };
    let manifest_path = dir.join(format!("{name}_manifest.json"));
    let mut manifest = Manifest {
        spec: spec.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        data,
        summary,
        group_rows: table.groups.iter().map(Vec::len).collect(),
        outputs: Vec::new(),
    };
    write(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    outputs.push(manifest_path);
    manifest.outputs = outputs;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayReport {
    pub checked: usize,
    pub matched: usize,
}

/// Recompute groups from a manifest and compare row by row with its CSV.
pub fn cmd_replay(a: &ReplayArgs) -> Result<ReplayReport, CliError> {
    let manifest: Manifest = serde_json::from_str(&read(&a.manifest)?)?;
    let data = if manifest.data.is_absolute() || manifest.data.exists() {
        manifest.data.clone()
    } else {
        a.manifest.parent().unwrap_or(Path::new(".")).join(manifest.data.file_name().unwrap_or_default())
    };
    let text = read(&data)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let stored: Vec<Vec<String>> =
        reader.records().map(|r| r.map(|r| r.iter().map(str::to_string).collect())).collect::<Result<_, _>>()?;
    let groups: Vec<usize> = match a.group {
        Some(g) if g >= manifest.group_rows.len() => {
            return Err(CliError::Usage(format!("group {g} out of range (0..{})", manifest.group_rows.len())))
        }
        Some(g) => vec![g],
        None => (0..manifest.group_rows.len()).collect(),
    };
    let mut report = ReplayReport { checked: 0, matched: 0 };
    for g in groups {
        let start: usize = manifest.group_rows[..g].iter().sum();
        let expect = stored.get(start..start + manifest.group_rows[g]).unwrap_or(&[]);
        let got = compute_group(&manifest.spec, g)?;
        report.checked += manifest.group_rows[g].max(got.len());
        report.matched += got.iter().zip(expect).filter(|(a, b)| a == b).count();
    }
    Ok(report)
}

//! The measurement-driven solver loops: averaged dynamics, heralded single
//! trials, heralded restarts within a time budget, and the final qubit
//! readout with classical verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    average_map_in_place, kraus_measure_in_place, lindblad_step_in_place, sme_step, DynamicsError, MeasurementConfig,
};
use crate::encoding::{clause_observables, projectors_at, retarget, EncodingError, Schedule, ScheduleKind};
use crate::herald::{default_t_min, detect_failure, FilterConfig, FilterState, HeraldError};
use crate::qlinalg::{concurrence_2q, purity, qubit_bit, DensityMatrix, LocalProjector, PureState};
use crate::satcore::{enumerate_solutions, evaluate, Assignment, CnfFormula, SatError};

/// Largest Δt/τ for which averaged runs use the simultaneous Lindblad step
/// instead of sequential per-clause maps.
pub const CONTINUUM_THRESHOLD: f64 = 0.02;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Herald(#[from] HeraldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Average,
    HeraldedSingle,
    HeraldedRestart,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "average" => Ok(Self::Average),
            "heralded-single" => Ok(Self::HeraldedSingle),
            "heralded-restart" | "heralded" => Ok(Self::HeraldedRestart),
            _ => Err(format!("unknown mode '{s}' (average | heralded-single | heralded-restart)")),
        }
    }
}

/// State representation for heralded trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Exact discrete Kraus updates on a state vector.
    #[default]
    PureKraus,
    /// Euler–Maruyama stochastic master equation on a density matrix, all
    /// clauses measured simultaneously.
    DensitySme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tau: f64,
    pub t_f: f64,
    pub dt: f64,
    /// Readout duration; `f64::INFINITY` is a projective readout.
    pub dt_m: f64,
    pub schedule: ScheduleKind,
    /// `None` uses `T_be = max(2τ, 0.1T_f)`, `r_th = −2.5/√T_be`.
    pub filter: Option<FilterConfig>,
    /// `None` uses `5τ`.
    pub t_min: Option<f64>,
    pub mode: Mode,
    #[serde(default)]
    pub backend: Backend,
    pub seed: u64,
    /// Record a diagnostic point every this many steps (0 disables).
    #[serde(default)]
    pub trace_every: usize,
}

impl RunConfig {
    pub fn new(mode: Mode, tau: f64, t_f: f64, dt: f64) -> Self {
        Self {
            tau,
            t_f,
            dt,
            dt_m: f64::INFINITY,
            schedule: ScheduleKind::Linear,
            filter: None,
            t_min: None,
            mode,
            backend: Backend::default(),
            seed: 0,
            trace_every: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_readout(mut self, dt_m: f64) -> Self {
        self.dt_m = dt_m;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        MeasurementConfig::new(self.tau, self.dt)?;
        if !(self.t_f.is_finite() && self.t_f >= self.dt) {
            return Err(SolverError::Config(format!("T_f = {} must be at least dt = {}", self.t_f, self.dt)));
        }
        if self.dt_m.is_nan() || self.dt_m < 0.0 {
            return Err(SolverError::Config(format!("dt_m = {} must be non-negative", self.dt_m)));
        }
        if let Some(t) = self.t_min {
            if !(t >= 0.0) {
                return Err(SolverError::Config(format!("T_min = {t} must be non-negative")));
            }
        }
        if let Some(fc) = &self.filter {
            FilterConfig::new(fc.t_be, fc.r_th, fc.dt)?;
        }
        self.schedule_for(self.t_f)?;
        Ok(())
    }

    pub fn measurement(&self) -> MeasurementConfig {
        MeasurementConfig { tau: self.tau, dt: self.dt }
    }

    pub fn schedule_for(&self, total: f64) -> Result<Schedule, SolverError> {
        Ok(match &self.schedule {
            ScheduleKind::Linear => Schedule::linear(total)?,
            ScheduleKind::Custom { fractions, thetas } => Schedule::custom(total, fractions.clone(), thetas.clone())?,
        })
    }

    pub fn filter_config(&self) -> FilterConfig {
        let mut fc = self.filter.unwrap_or_else(|| FilterConfig::defaults(self.tau, self.t_f, self.dt));
        fc.dt = self.dt;
        fc
    }

    pub fn t_min(&self) -> f64 {
        self.t_min.unwrap_or_else(|| default_t_min(self.tau))
    }

    pub fn uses_continuum(&self) -> bool {
        self.dt / self.tau <= CONTINUUM_THRESHOLD
    }
}

/// Final register state of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum FinalState {
    Density(DensityMatrix),
    Pure(PureState),
}

impl FinalState {
    pub fn num_qubits(&self) -> usize {
        match self {
            Self::Density(r) => r.num_qubits(),
            Self::Pure(p) => p.num_qubits(),
        }
    }

    /// `Tr(ρ P_b)` for every computational basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            Self::Density(r) => r.basis_probabilities(),
            Self::Pure(p) => p.basis_probabilities(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            Self::Density(r) => r.clone(),
            Self::Pure(p) => p.to_density(),
        }
    }

    /// `⟨Ẑ_j⟩`
    pub fn local_z(&self, j: usize) -> f64 {
        local_z_from_probabilities(&self.probabilities(), self.num_qubits(), j)
    }

    pub fn purity(&self) -> f64 {
        match self {
            Self::Density(r) => purity(r),
            Self::Pure(_) => 1.0,
        }
    }
}

pub(crate) fn local_z_from_probabilities(probs: &[f64], n: usize, j: usize) -> f64 {
    let bit = qubit_bit(j, n);
    probs.iter().enumerate().map(|(i, p)| if i & bit != 0 { *p } else { -*p }).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub theta: f64,
    pub z: Vec<f64>,
    pub purity: f64,
    pub concurrence: Option<f64>,
    pub filtered: Option<Vec<f64>>,
}

fn trace_point(state: &FinalState, t: f64, theta: f64, filtered: Option<&FilterState>) -> TracePoint {
    let n = state.num_qubits();
    let probs = state.probabilities();
    let concurrence = (n == 2).then(|| concurrence_2q(&state.to_density()).unwrap_or(f64::NAN));
    TracePoint {
        t,
        theta,
        z: (1..=n).map(|j| local_z_from_probabilities(&probs, n, j)).collect(),
        purity: state.purity(),
        concurrence,
        filtered: filtered.map(|f| f.values().to_vec()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub mode: Mode,
    pub seed: u64,
    /// Modeled time spent, counting Δt per measurement cycle.
    pub consumed_time: f64,
    /// Time of the heralded failure that ended the last detected attempt.
    pub failed_at: Option<f64>,
    pub failures: usize,
    pub readout: Option<Vec<f64>>,
    /// Candidate bitstring (`0` = true).
    pub candidate: Option<String>,
    pub verified: bool,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub diagnostics: Vec<TracePoint>,
    #[serde(skip)]
    pub final_state: Option<FinalState>,
}

impl RunOutcome {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            mode: cfg.mode,
            seed: cfg.seed,
            consumed_time: 0.0,
            failed_at: None,
            failures: 0,
            readout: None,
            candidate: None,
            verified: false,
            warnings: Vec::new(),
            diagnostics: Vec::new(),
            final_state: None,
        }
    }
}

/// Averaged (unrecorded) clause measurements. Returns the final
/// ρ in `final_state`; no readout is taken.
pub fn run_average(f: &CnfFormula, cfg: &RunConfig) -> Result<RunOutcome, SolverError> {
    cfg.validate()?;
    let schedule = cfg.schedule_for(cfg.t_f)?;
    let meas = cfg.measurement();
    let obs = clause_observables(f);
    let mut projs = projectors_at(&obs, 0.0);
    let mut rho = DensityMatrix::uniform_superposition(f.num_vars());
    let steps = schedule.num_steps(cfg.dt);
    let continuum = cfg.uses_continuum();
    let mut out = RunOutcome::new(cfg);
    for c in 1..=steps {
        let theta = schedule.theta_at_step(c, steps);
        retarget(&obs, &mut projs, theta);
        if continuum {
            lindblad_step_in_place(&mut rho, &projs, cfg.tau, cfg.dt);
        } else {
            for p in &projs {
                average_map_in_place(&mut rho, p, &meas);
            }
        }
        if cfg.trace_every > 0 && (c % cfg.trace_every == 0 || c == steps) {
            let st = FinalState::Density(rho.clone());
            out.diagnostics.push(trace_point(&st, c as f64 * cfg.dt, theta, None));
        }
    }
    out.consumed_time = steps as f64 * cfg.dt;
    out.final_state = Some(FinalState::Density(rho));
    Ok(out)
}

/// What a scripted injector does at one step of one attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Injection {
    None,
    /// Project the state onto the violating subspace of this clause before
    /// the step's measurements.
    Project(usize),
    /// Declare the attempt failed at this step, as if the filter had fired.
    Fail,
}

pub trait FailureInjector {
    /// `attempt` counts restarts from 0; `step` counts cycles from 1.
    fn at_step(&mut self, attempt: usize, step: usize, t: f64) -> Injection;
}

/// Injects nothing.
pub struct NoInjection;

impl FailureInjector for NoInjection {
    fn at_step(&mut self, _: usize, _: usize, _: f64) -> Injection {
        Injection::None
    }
}

/// Projects onto one clause's violating subspace at a fixed step of one
/// attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectAt {
    pub attempt: usize,
    pub step: usize,
    pub clause: usize,
}

impl FailureInjector for ProjectAt {
    fn at_step(&mut self, attempt: usize, step: usize, _: f64) -> Injection {
        if attempt == self.attempt && step == self.step {
            Injection::Project(self.clause)
        } else {
            Injection::None
        }
    }
}

/// Result of one heralded attempt.
#[derive(Debug, Clone)]
pub struct HeraldedAttempt {
    pub state: FinalState,
    /// `(time, clause)` of the detected failure; clause is `None` for an
    /// injected `Fail`.
    pub failure: Option<(f64, Option<usize>)>,
    pub elapsed: f64,
    pub trace: Vec<TracePoint>,
}

#[allow(clippy::too_many_arguments)]
fn heralded_attempt<R: Rng + ?Sized>(
    f: &CnfFormula,
    cfg: &RunConfig,
    total: f64,
    detect: bool,
    attempt: usize,
    injector: &mut dyn FailureInjector,
    frozen_theta: Option<f64>,
    rng: &mut R,
) -> Result<HeraldedAttempt, SolverError> {
    let schedule = cfg.schedule_for(total)?;
    let meas = cfg.measurement();
    let fcfg = cfg.filter_config();
    let obs = clause_observables(f);
    let mut projs = projectors_at(&obs, 0.0);
    let n = f.num_vars();
    let mut filter = FilterState::new(obs.len(), &fcfg);
    let mut readouts = vec![0.0; obs.len()];
    let steps = schedule.num_steps(cfg.dt);
    let mut state = match cfg.backend {
        Backend::PureKraus => FinalState::Pure(PureState::uniform(n)),
        Backend::DensitySme => FinalState::Density(DensityMatrix::uniform_superposition(n)),
    };
    let mut trace = Vec::new();
    for c in 1..=steps {
        let t = c as f64 * cfg.dt;
        let theta = frozen_theta.unwrap_or_else(|| schedule.theta_at_step(c, steps));
        retarget(&obs, &mut projs, theta);
        match injector.at_step(attempt, c, t) {
            Injection::Fail if detect => {
                return Ok(HeraldedAttempt { state, failure: Some((t, None)), elapsed: t, trace });
            }
            Injection::None | Injection::Fail => {}
            Injection::Project(i) => force_violation(&mut state, &projs[i]),
        }
        match &mut state {
            FinalState::Pure(psi) => {
                for (r, p) in readouts.iter_mut().zip(&projs) {
                    *r = kraus_measure_in_place(psi, p, &meas, rng);
                }
            }
            FinalState::Density(rho) => {
                let rs = sme_step(rho, &projs, cfg.tau, cfg.dt, rng);
                readouts.copy_from_slice(&rs);
            }
        }
        filter.update(&readouts);
        if cfg.trace_every > 0 && (c % cfg.trace_every == 0 || c == steps) {
            trace.push(trace_point(&state, t, theta, Some(&filter)));
        }
        if detect {
            if let Some(i) = detect_failure(&filter, &fcfg) {
                return Ok(HeraldedAttempt { state, failure: Some((t, Some(i))), elapsed: t, trace });
            }
        }
    }
    Ok(HeraldedAttempt { state, failure: None, elapsed: steps as f64 * cfg.dt, trace })
}

fn force_violation(state: &mut FinalState, p: &LocalProjector) {
    match state {
        FinalState::Pure(psi) => {
            let v = p.apply_vec(psi.amplitudes());
            if v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-24 {
                psi.amplitudes_mut().copy_from_slice(&v);
                psi.renormalize();
            }
        }
        FinalState::Density(rho) => {
            let prho = p.apply_right(&p.apply_left(rho.matrix()));
            let tr = prho.trace().re;
            if tr > 1e-24 {
                let mut next = DensityMatrix::from_matrix_unchecked(prho.scale_real(1.0 / tr));
                next.hermitize();
                *rho = next;
            }
        }
    }
}

/// One heralded trial over the full `T_f`.
pub fn run_heralded_single<R: Rng + ?Sized>(
    f: &CnfFormula,
    cfg: &RunConfig,
    injector: &mut dyn FailureInjector,
    rng: &mut R,
) -> Result<RunOutcome, SolverError> {
    cfg.validate()?;
    let mut out = RunOutcome::new(cfg);
    if cfg.backend == Backend::DensitySme {
        out.warnings.extend(cfg.measurement().continuum_warning());
    }
    let a = heralded_attempt(f, cfg, cfg.t_f, true, 0, injector, None, rng)?;
    out.consumed_time = a.elapsed;
    if let Some((t, _)) = a.failure {
        out.failed_at = Some(t);
        out.failures = 1;
    }
    out.diagnostics = a.trace;
    out.final_state = Some(a.state);
    Ok(out)
}

/// A heralded trial with θ held at a fixed value; used to check that nothing can
/// fail at θ = 0.
pub fn run_heralded_frozen<R: Rng + ?Sized>(
    f: &CnfFormula,
    cfg: &RunConfig,
    theta: f64,
    rng: &mut R,
) -> Result<RunOutcome, SolverError> {
    cfg.validate()?;
    let mut out = RunOutcome::new(cfg);
    let a = heralded_attempt(f, cfg, cfg.t_f, true, 0, &mut NoInjection, Some(theta), rng)?;
    out.consumed_time = a.elapsed;
    out.failed_at = a.failure.map(|(t, _)| t);
    out.failures = usize::from(a.failure.is_some());
    out.diagnostics = a.trace;
    out.final_state = Some(a.state);
    Ok(out)
}

/// Restart heralded trials with the schedule compressed into
/// the remaining budget; once less than `T_min` is left, run one last trial
/// for the remaining time with detection off.
pub fn run_heralded_restart<R: Rng + ?Sized>(
    f: &CnfFormula,
    cfg: &RunConfig,
    injector: &mut dyn FailureInjector,
    rng: &mut R,
) -> Result<RunOutcome, SolverError> {
    cfg.validate()?;
    let mut out = RunOutcome::new(cfg);
    if cfg.backend == Backend::DensitySme {
        out.warnings.extend(cfg.measurement().continuum_warning());
    }
    let t_min = cfg.t_min();
    let mut t_rest = cfg.t_f;
    let mut attempt = 0;
    while t_rest >= t_min && t_rest >= cfg.dt {
        let a = heralded_attempt(f, cfg, t_rest, true, attempt, injector, None, rng)?;
        out.consumed_time += a.elapsed;
        out.diagnostics.extend(a.trace.into_iter().map(|mut p| {
            p.t += out.consumed_time - a.elapsed;
            p
        }));
        match a.failure {
            Some((t, _)) => {
                t_rest -= t;
                out.failed_at = Some(t);
                out.failures += 1;
                attempt += 1;
            }
            None => {
                out.final_state = Some(a.state);
                return Ok(out);
            }
        }
    }
    let last = t_rest.max(cfg.dt);
    let a = heralded_attempt(f, cfg, last, false, attempt, injector, None, rng)?;
    out.consumed_time += a.elapsed;
    out.final_state = Some(a.state);
    Ok(out)
}

fn erf_factor(tau: f64, dt_m: f64) -> f64 {
    if dt_m.is_infinite() {
        1.0
    } else {
        libm::erf((dt_m / (2.0 * tau)).sqrt())
    }
}

/// Local-z readout of duration `dt_m`: picks a basis state with Born weights,
/// then draws each `r_j ~ N(±1/√τ, 1/Δt_m)`. The candidate is `sign(r)`,
/// positive meaning true.
pub fn readout<R: Rng + ?Sized>(state: &FinalState, tau: f64, dt_m: f64, rng: &mut R) -> (Vec<f64>, Assignment) {
    let probs = state.probabilities();
    let n = state.num_qubits();
    let idx = sample_index(&probs, rng);
    let mu = tau.sqrt().recip();
    let r: Vec<f64> = (1..=n)
        .map(|j| {
            let z = if idx & qubit_bit(j, n) != 0 { mu } else { -mu };
            if dt_m.is_infinite() {
                z
            } else if dt_m == 0.0 {
                // no information: only the sign is meaningful
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            } else {
                let g: f64 = StandardNormal.sample(rng);
                z + g / dt_m.sqrt()
            }
        })
        .collect();
    let b = Assignment::new(r.iter().map(|&x| x > 0.0).collect());
    (r, b)
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Exact probability that the readout returns `target`:
/// `2⁻ⁿ Σ_b Tr(ρP_b)(1+e)^(n−h)(1−e)^h` with `e = erf(√(Δt_m/2τ))` and `h`
/// the Hamming distance between `b` and the target.
pub fn readout_success_for(probs: &[f64], n: usize, target: usize, tau: f64, dt_m: f64) -> f64 {
    let e = erf_factor(tau, dt_m);
    let (up, down) = ((1.0 + e) / 2.0, (1.0 - e) / 2.0);
    probs
        .iter()
        .enumerate()
        .map(|(b, &p)| {
            let h = (b ^ target).count_ones() as i32;
            p * up.powi(n as i32 - h) * down.powi(h)
        })
        .sum()
}

/// Success probability summed over every solution of `f`.
pub fn success_probability(state: &FinalState, f: &CnfFormula, tau: f64, dt_m: f64) -> Result<f64, SolverError> {
    let sols = enumerate_solutions(f)?;
    let probs = state.probabilities();
    let n = f.num_vars();
    Ok(sols.solutions().iter().map(|s| readout_success_for(&probs, n, s.basis_index(), tau, dt_m)).sum())
}

/// Run the configured mode, read out, verify. One shot.
pub fn run_full(f: &CnfFormula, cfg: &RunConfig) -> Result<RunOutcome, SolverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_full_with(f, cfg, &mut NoInjection, &mut rng)
}

pub fn run_full_with<R: Rng + ?Sized>(
    f: &CnfFormula,
    cfg: &RunConfig,
    injector: &mut dyn FailureInjector,
    rng: &mut R,
) -> Result<RunOutcome, SolverError> {
    let mut out = match cfg.mode {
        Mode::Average => run_average(f, cfg)?,
        Mode::HeraldedSingle => run_heralded_single(f, cfg, injector, rng)?,
        Mode::HeraldedRestart => run_heralded_restart(f, cfg, injector, rng)?,
    };
    let aborted = cfg.mode == Mode::HeraldedSingle && out.failed_at.is_some();
    if let (false, Some(state)) = (aborted, &out.final_state) {
        let (r, b) = readout(state, cfg.tau, cfg.dt_m, rng);
        out.verified = evaluate(f, &b)?;
        out.candidate = Some(b.to_bitstring());
        out.readout = Some(r);
        if cfg.dt_m.is_finite() {
            out.consumed_time += cfg.dt_m;
        }
    }
    Ok(out)
}

/// Independent RNG stream `stream` of a base seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Closed-form per-qubit readout probability `(1 + |z| e)/2` for a product
/// state with local bias `z` and readout duration `dt_m`.
pub fn biased_bit_probability(z: f64, tau: f64, dt_m: f64) -> f64 {
    0.5 * (1.0 + z.abs() * erf_factor(tau, dt_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;
    use crate::qlinalg::{fidelity_pure, C64};
    use crate::satcore::{two_qubit_two_solutions, two_qubit_unique, two_qubit_unsat};
    use approx::assert_abs_diff_eq;

    fn solution_ket(f: &CnfFormula) -> PureState {
        let s = enumerate_solutions(f).unwrap().unique().unwrap().clone();
        PureState::basis(f.num_vars(), s.basis_index())
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(Mode::Average, 1.0, 10.0, 0.1);
        assert!(c.validate().is_ok());
        c.t_f = 0.01;
        assert!(c.validate().is_err());
        let mut c = RunConfig::new(Mode::Average, 1.0, 10.0, 0.1);
        c.dt_m = -1.0;
        assert!(c.validate().is_err());
        assert_eq!("heralded-restart".parse::<Mode>().unwrap(), Mode::HeraldedRestart);
        assert!("bogus".parse::<Mode>().is_err());
    }

    #[test]
    fn degenerate_single_step_gives_quarter_fidelity() {
        let f = two_qubit_unique();
        let cfg = RunConfig::new(Mode::Average, 1.0, 1.0, 1.0);
        let out = run_average(&f, &RunConfig { dt: 1e4, t_f: 1e4, ..cfg }).unwrap();
        let rho = out.final_state.unwrap().to_density();
        assert_abs_diff_eq!(fidelity_pure(&rho, &solution_ket(&f)).unwrap(), 0.25, epsilon = 1e-6);
    }

    #[test]
    fn long_average_run_concentrates_on_solution() {
        let f = two_qubit_unique();
        let z = |t_f: f64| {
            let out = run_average(&f, &RunConfig::new(Mode::Average, 1.0, t_f, 0.1)).unwrap();
            assert_abs_diff_eq!(out.consumed_time, t_f, epsilon = 1e-9);
            let st = out.final_state.unwrap();
            st.local_z(1).min(-st.local_z(2))
        };
        let (short, long) = (z(100.0), z(4000.0));
        assert!(short > 0.0 && long > short);
        assert!(long > 0.95, "z = {long}");
    }

    #[test]
    fn endpoint_is_exactly_half_pi() {
        let f = two_qubit_unique();
        let mut cfg = RunConfig::new(Mode::Average, 1.0, 1.05, 0.1);
        cfg.trace_every = 1;
        let out = run_average(&f, &cfg).unwrap();
        assert_abs_diff_eq!(out.diagnostics.last().unwrap().theta, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn frozen_at_zero_never_fails() {
        let f = two_qubit_unique();
        let cfg = RunConfig::new(Mode::HeraldedSingle, 1.0, 40.0, 0.05);
        let mut rng = stream_rng(5, 0);
        let mut means = vec![0.0; 3];
        let mut count = 0usize;
        for _ in 0..20 {
            let out = run_heralded_frozen(&f, &cfg, 0.0, &mut rng).unwrap();
            assert!(out.failed_at.is_none());
            let FinalState::Pure(psi) = out.final_state.unwrap() else { panic!() };
            assert_abs_diff_eq!(psi.inner(&PureState::uniform(2)).norm(), 1.0, epsilon = 1e-12);
            count += 1;
        }
        // all readouts at θ = 0 have mean +1/√τ: checked through a direct sampler
        let obs = clause_observables(&f);
        let projs = projectors_at(&obs, 0.0);
        let meas = cfg.measurement();
        let mut psi = PureState::uniform(2);
        let k = 20_000;
        for _ in 0..k {
            for (m, p) in means.iter_mut().zip(&projs) {
                *m += kraus_measure_in_place(&mut psi, p, &meas, &mut rng);
            }
        }
        let tol = 4.0 * (1.0 / meas.dt / k as f64).sqrt();
        for m in means {
            assert!((m / k as f64 - 1.0).abs() < tol);
        }
        assert_eq!(count, 20);
    }

    #[test]
    fn injected_failure_is_heralded() {
        let f = two_qubit_unique();
        let cfg = RunConfig::new(Mode::HeraldedSingle, 1.0, 100.0, 0.05);
        let t_be = cfg.filter_config().t_be;
        let mut rng = stream_rng(11, 0);
        let mut inj = ProjectAt { attempt: 0, step: 1000, clause: 0 };
        let out = run_heralded_single(&f, &cfg, &mut inj, &mut rng).unwrap();
        let t = out.failed_at.expect("failure must be detected");
        assert!(t >= 50.0 - 1e-9 && t <= 50.0 + 2.0 * t_be, "detected at {t}");
    }

    struct FailEarly {
        within: usize,
    }

    impl FailureInjector for FailEarly {
        fn at_step(&mut self, _: usize, step: usize, _: f64) -> Injection {
            if step == self.within {
                Injection::Fail
            } else {
                Injection::None
            }
        }
    }

    #[test]
    fn restart_budget_accounting() {
        let f = two_qubit_unique();
        let mut cfg = RunConfig::new(Mode::HeraldedRestart, 1.0, 30.0, 0.1);
        cfg.t_min = Some(5.0);
        let mut rng = stream_rng(2, 0);
        // each attempt fails after 2.0 time units
        let mut inj = FailEarly { within: 20 };
        let out = run_heralded_restart(&f, &cfg, &mut inj, &mut rng).unwrap();
        assert!(out.consumed_time <= cfg.t_f + cfg.t_min() + cfg.dt + 1e-9);
        // 30 → 28 → … → 4 < 5: 13 failures, then one final run of 4.0
        assert_eq!(out.failures, 13);
        assert_abs_diff_eq!(out.consumed_time, 30.0, epsilon = 1e-9);
        assert!(out.final_state.is_some());
    }

    #[test]
    fn restart_without_failures_matches_single() {
        let f = two_qubit_unique();
        let cfg = RunConfig::new(Mode::HeraldedRestart, 1.0, 6.0, 0.05);
        let single = RunConfig { mode: Mode::HeraldedSingle, ..cfg.clone() };
        // θ frozen would be needed for guaranteed success; instead compare
        // whenever the single run succeeds with the same stream
        for s in 0..10 {
            let a = run_heralded_single(&f, &single, &mut NoInjection, &mut stream_rng(s, 0)).unwrap();
            if a.failed_at.is_some() {
                continue;
            }
            let b = run_heralded_restart(&f, &cfg, &mut NoInjection, &mut stream_rng(s, 0)).unwrap();
            assert_eq!(b.failures, 0);
            assert_eq!(a.final_state, b.final_state);
            assert_abs_diff_eq!(a.consumed_time, b.consumed_time);
        }
    }

    #[test]
    fn readout_projective_and_uninformative() {
        let f = two_qubit_unique();
        let sol = FinalState::Pure(solution_ket(&f));
        let mut rng = stream_rng(3, 0);
        for _ in 0..100 {
            let (_, b) = readout(&sol, 1.0, 50.0, &mut rng);
            assert_eq!(b.to_tf(), "TF");
        }
        let mut counts = [0usize; 4];
        let k = 40_000;
        for _ in 0..k {
            let (_, b) = readout(&sol, 1.0, 0.0, &mut rng);
            counts[b.basis_index()] += 1;
        }
        for c in counts {
            let p = c as f64 / k as f64;
            assert!((p - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / k as f64).sqrt());
        }
    }

    #[test]
    fn bell_readout_is_anticorrelated() {
        let s = FRAC_1_SQRT_2;
        let bell = PureState::new(vec![C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.0, 0.0)])
            .unwrap();
        let st = FinalState::Pure(bell);
        let mut rng = stream_rng(4, 0);
        let k = 20_000;
        let mut first = 0usize;
        for _ in 0..k {
            let (_, b) = readout(&st, 1.0, f64::INFINITY, &mut rng);
            assert_ne!(b.value(1), b.value(2));
            first += usize::from(b.value(1));
        }
        let p = first as f64 / k as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / k as f64).sqrt());
    }

    #[test]
    fn success_probability_limits() {
        let f = two_qubit_unique();
        let sol = FinalState::Pure(solution_ket(&f));
        assert_abs_diff_eq!(success_probability(&sol, &f, 1.0, f64::INFINITY).unwrap(), 1.0);
        assert_abs_diff_eq!(success_probability(&sol, &f, 1.0, 200.0).unwrap(), 1.0, epsilon = 1e-12);
        let mixed = FinalState::Density(DensityMatrix::maximally_mixed(2));
        assert_abs_diff_eq!(success_probability(&mixed, &f, 1.0, f64::INFINITY).unwrap(), 0.25, epsilon = 1e-15);
        let f2 = two_qubit_two_solutions();
        assert_abs_diff_eq!(success_probability(&mixed, &f2, 1.0, f64::INFINITY).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(success_probability(&mixed, &two_qubit_unsat(), 1.0, 3.0).unwrap(), 0.0);
        // Δt_m = 0: every bitstring equally likely whatever the state
        assert_abs_diff_eq!(success_probability(&sol, &f, 1.0, 0.0).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn projective_per_bit_error_matches_gaussian_tail() {
        let e = 0.5 * (1.0 - libm::erf((50.0f64 / 2.0).sqrt()));
        assert!(e < 1e-12 && e > 1e-13);
        let sol = FinalState::Pure(PureState::basis(1, 1));
        let f = CnfFormula::from_signed(1, &[&[1]]).unwrap();
        assert_abs_diff_eq!(1.0 - success_probability(&sol, &f, 1.0, 50.0).unwrap(), e, epsilon = 1e-16);
    }

    #[test]
    fn full_runs_end_to_end() {
        let f = two_qubit_unique();
        let cfg = RunConfig::new(Mode::Average, 1.0, 4000.0, 0.1).with_seed(1);
        let out = run_full(&f, &cfg).unwrap();
        assert!(out.verified);
        assert_eq!(out.candidate.as_deref(), Some("01"));

        let unsat = two_qubit_unsat();
        for seed in 0..20 {
            let out = run_full(&unsat, &RunConfig::new(Mode::Average, 1.0, 50.0, 0.1).with_seed(seed)).unwrap();
            assert!(!out.verified);
        }

        let two = two_qubit_two_solutions();
        let sols = enumerate_solutions(&two).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..20 {
            let out = run_full(&two, &RunConfig::new(Mode::Average, 1.0, 4000.0, 0.1).with_seed(seed)).unwrap();
            assert!(out.verified);
            let b = Assignment::from_bitstring(out.candidate.as_ref().unwrap()).unwrap();
            assert!(sols.contains(&b));
            seen.insert(out.candidate.unwrap());
        }
        assert_eq!(seen.len(), 2);

        let h = run_full(&f, &RunConfig::new(Mode::HeraldedRestart, 1.0, 100.0, 0.05).with_seed(3)).unwrap();
        assert!(h.candidate.is_some());
        let json = serde_json::to_string(&h).unwrap();
        assert!(json.contains("\"consumed_time\""));
    }

    #[test]
    fn density_backend_runs() {
        let f = two_qubit_unique();
        let mut cfg = RunConfig::new(Mode::HeraldedSingle, 1.0, 5.0, 0.01);
        cfg.backend = Backend::DensitySme;
        let out = run_heralded_single(&f, &cfg, &mut NoInjection, &mut stream_rng(1, 0)).unwrap();
        let st = out.final_state.unwrap();
        assert!(matches!(st, FinalState::Density(_)));
        assert!(out.warnings.is_empty());
    }
}

//! Success probabilities, time-to-solution, phase-transition curves and
//! exponential scaling fits.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::solver::{
    run_full_with, run_heralded_restart, run_heralded_single, stream_rng, success_probability, Mode, NoInjection,
    RunConfig, SolverError,
};
use crate::satcore::{enumerate_solutions, CnfFormula};

/// `n_star` when no number of runs reaches the target confidence.
pub const N_STAR_INFINITE: u64 = u64::MAX;

/// Runs needed for at least one success with probability `p_star`:
/// `ceil(log(1−ℙ★)/log(1−ℙ_s))`, at least 1.
pub fn n_star(p_s: f64, p_star: f64) -> u64 {
    if p_s.is_nan() {
        return N_STAR_INFINITE;
    }
    if p_star <= 0.0 || p_s >= 1.0 {
        return 1;
    }
    if p_s <= 0.0 || p_star >= 1.0 {
        return N_STAR_INFINITE;
    }
    let ratio = (1.0 - p_star).ln() / (-p_s).ln_1p();
    // ceil of an exact integer ratio can land one above through rounding
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() < 1e-9 * nearest.max(1.0) { nearest } else { ratio.ceil() };
    if n >= u64::MAX as f64 {
        N_STAR_INFINITE
    } else {
        (n as u64).max(1)
    }
}

/// `N·(T_f + Δt_m)`.
pub fn basic_tts(runs: u64, t_f: f64, dt_m: f64) -> f64 {
    if runs == N_STAR_INFINITE {
        f64::INFINITY
    } else {
        runs as f64 * (t_f + dt_m)
    }
}

/// `N★·(T_f + Δt_m)`.
pub fn tts_with_readout(p_s: f64, p_star: f64, t_f: f64, dt_m: f64) -> f64 {
    basic_tts(n_star(p_s, p_star), t_f, dt_m)
}

/// `T_f·log(0.01)/log(1−ℙ_s)` without the ceiling, floored at one run.
pub fn tts_99(p_s: f64, t_f: f64) -> f64 {
    if p_s.is_nan() {
        return f64::NAN;
    }
    if p_s <= 0.0 {
        return f64::INFINITY;
    }
    if p_s >= 1.0 {
        return t_f;
    }
    t_f * (0.01f64.ln() / (-p_s).ln_1p()).max(1.0)
}

/// `((1 + |z_T| erf(√(Δt_m/2τ)))/2)ⁿ`: success probability for a unique
/// solution and uniform local bias on a product state.
pub fn unique_bias_success(z_t: f64, dt_m: f64, tau: f64, n: usize) -> f64 {
    let e = if dt_m.is_infinite() { 1.0 } else { libm::erf((dt_m / (2.0 * tau)).sqrt()) };
    (0.5 * (1.0 + z_t.abs() * e)).powi(n as i32)
}

pub fn n_star_unique_bias(z_t: f64, dt_m: f64, tau: f64, n: usize, p_star: f64) -> u64 {
    n_star(unique_bias_success(z_t, dt_m, tau, n), p_star)
}

/// Time to a unique solution, `Ň★·(T_f + Δt_m)`.
pub fn ttus(z_t: f64, dt_m: f64, tau: f64, n: usize, p_star: f64, t_f: f64) -> f64 {
    basic_tts(n_star_unique_bias(z_t, dt_m, tau, n, p_star), t_f, dt_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtsReport {
    pub p_s: f64,
    pub confidence: f64,
    pub n_star: u64,
    /// `N·(T_f + Δt_m)` for the caller's shot count.
    pub tts_m: f64,
    pub tts_star: f64,
    pub tts_99: f64,
}

impl TtsReport {
    pub fn new(p_s: f64, confidence: f64, t_f: f64, dt_m: f64, runs: u64) -> Self {
        let n = n_star(p_s, confidence);
        Self {
            p_s,
            confidence,
            n_star: n,
            tts_m: basic_tts(runs, t_f, dt_m),
            tts_star: basic_tts(n, t_f, dt_m),
            tts_99: tts_99(p_s, t_f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub lambda: f64,
    pub prefactor: f64,
    /// Standard error of λ from the regression covariance; NaN with fewer
    /// than three points.
    pub std_err: f64,
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("TTS values must be finite and positive (n = {n}, tts = {tts})")]
    BadTts { n: usize, tts: f64 },
    #[error("least-squares system is singular")]
    Singular,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Sat(#[from] crate::satcore::SatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Least squares of `log TTS = log A + n log λ`.
pub fn fit_lambda(points: &[(usize, f64)]) -> Result<ScalingFit, MetricsError> {
    if points.len() < 2 {
        return Err(MetricsError::TooFewPoints { need: 2, got: points.len() });
    }
    for &(n, tts) in points {
        if !(tts.is_finite() && tts > 0.0) {
            return Err(MetricsError::BadTts { n, tts });
        }
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(MetricsError::Singular);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let std_err = if points.len() > 2 {
        let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let se_slope = (ssr / (k - 2.0) / sxx).sqrt();
        slope.exp() * se_slope
    } else {
        f64::NAN
    };
    Ok(ScalingFit {
        lambda: slope.exp(),
        prefactor: intercept.exp(),
        std_err,
        n_min: points.iter().map(|p| p.0).min().unwrap_or(0),
        n_max: points.iter().map(|p| p.0).max().unwrap_or(0),
    })
}

pub const DEFAULT_POLY_DEGREE: usize = 4;

/// Least-squares polynomial coefficients, lowest order first.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>, MetricsError> {
    if xs.len() != ys.len() || xs.len() <= degree {
        return Err(MetricsError::TooFewPoints { need: degree + 1, got: xs.len().min(ys.len()) });
    }
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let coeffs = a.svd(true, true).solve(&b, 1e-12).map_err(|_| MetricsError::Singular)?;
    Ok(coeffs.iter().copied().collect())
}

pub fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Minimum of a fitted polynomial on `[lo, hi]`, located on a dense grid.
pub fn poly_argmin(coeffs: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    const GRID: usize = 4000;
    (0..=GRID)
        .map(|i| lo + (hi - lo) * i as f64 / GRID as f64)
        .map(|x| (x, polyval(coeffs, x)))
        .fold((lo, f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best })
}

/// Lowest interior local minimum of a sampled curve (`x` ascending).
pub fn local_minimum(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    points
        .windows(3)
        .filter(|w| w[1].1 <= w[0].1 && w[1].1 <= w[2].1 && (w[1].1 < w[0].1 || w[1].1 < w[2].1))
        .map(|w| w[1])
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl SuccessEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let k = xs.len();
        let mean = xs.iter().sum::<f64>() / k.max(1) as f64;
        let std_err = if k > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64 / k as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_err, samples: k }
    }
}

/// Per-run success probability with the readout treated exactly. Averaged
/// runs are deterministic and use one evaluation; heralded runs average the
/// exact readout probability over independent trajectories (aborted single
/// trials count as zero).
pub fn estimate_success(
    f: &CnfFormula,
    cfg: &RunConfig,
    trajectories: usize,
    seed: u64,
) -> Result<SuccessEstimate, MetricsError> {
    if cfg.mode == Mode::Average {
        let out = crate::solver::run_average(f, cfg)?;
        let p = success_probability(out.final_state.as_ref().expect("average run has a state"), f, cfg.tau, cfg.dt_m)?;
        return Ok(SuccessEstimate { mean: p, std_err: 0.0, samples: 1 });
    }
    let samples: Result<Vec<f64>, SolverError> = (0..trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let out = match cfg.mode {
                Mode::HeraldedSingle => run_heralded_single(f, cfg, &mut NoInjection, &mut rng)?,
                _ => run_heralded_restart(f, cfg, &mut NoInjection, &mut rng)?,
            };
            if cfg.mode == Mode::HeraldedSingle && out.failed_at.is_some() {
                return Ok(0.0);
            }
            success_probability(out.final_state.as_ref().expect("completed run has a state"), f, cfg.tau, cfg.dt_m)
        })
        .collect();
    Ok(SuccessEstimate::from_samples(&samples?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub instances: usize,
    /// Success probability averaged over instances and trajectories.
    pub p_s: f64,
    pub p_s_err: f64,
    pub tts_99: f64,
    pub median_instance_tts_99: f64,
}

/// TTS₉₉ for each problem size from the instance-averaged success
/// probability.
pub fn tts_scaling(
    groups: &[(usize, Vec<CnfFormula>)],
    cfg: &RunConfig,
    trajectories: usize,
    seed: u64,
) -> Result<Vec<ScalingPoint>, MetricsError> {
    groups
        .iter()
        .enumerate()
        .map(|(gi, (n, formulas))| {
            let per: Result<Vec<SuccessEstimate>, MetricsError> = formulas
                .par_iter()
                .enumerate()
                .map(|(ii, f)| estimate_success(f, cfg, trajectories, task_seed(seed, gi, ii)))
                .collect();
            let per = per?;
            let means: Vec<f64> = per.iter().map(|e| e.mean).collect();
            let agg = SuccessEstimate::from_samples(&means);
            let mut tts: Vec<f64> = means.iter().map(|&p| tts_99(p, cfg.t_f)).collect();
            tts.sort_by(f64::total_cmp);
            Ok(ScalingPoint {
                n: *n,
                instances: formulas.len(),
                p_s: agg.mean,
                p_s_err: agg.std_err,
                tts_99: tts_99(agg.mean, cfg.t_f),
                median_instance_tts_99: median_sorted(&tts),
            })
        })
        .collect()
}

fn median_sorted(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => f64::NAN,
        k if k % 2 == 1 => xs[k / 2],
        k => 0.5 * (xs[k / 2 - 1] + xs[k / 2]),
    }
}

/// Seed for task `(group, item)` derived from a base seed.
pub fn task_seed(seed: u64, group: usize, item: usize) -> u64 {
    let mut z = seed ^ ((group as u64) << 32) ^ item as u64;
    // splitmix64 finalizer
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceDecision {
    pub satisfiable: bool,
    pub correct: bool,
    pub verified_shots: usize,
}

/// Decide one instance: satisfiable instances succeed when one of `shots`
/// full runs verifies; unsatisfiable ones succeed when none does, which
/// verification guarantees without simulating.
pub fn decide_instance(
    f: &CnfFormula,
    cfg: &RunConfig,
    shots: usize,
    seed: u64,
) -> Result<InstanceDecision, MetricsError> {
    let satisfiable = enumerate_solutions(f)?.count() > 0;
    if !satisfiable {
        return Ok(InstanceDecision { satisfiable, correct: true, verified_shots: 0 });
    }
    let mut rng = stream_rng(seed, 0);
    for shot in 0..shots.max(1) {
        if run_full_with(f, cfg, &mut NoInjection, &mut rng)?.verified {
            return Ok(InstanceDecision { satisfiable, correct: true, verified_shots: shot + 1 });
        }
    }
    Ok(InstanceDecision { satisfiable, correct: false, verified_shots: 0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub k: usize,
    pub n: usize,
    pub alpha: f64,
    pub formulas: Vec<CnfFormula>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub k: usize,
    pub n: usize,
    pub alpha: f64,
    pub t_f: f64,
    pub mode: Mode,
    pub n_prob: usize,
    pub n_sat: usize,
    pub n_succ: usize,
    pub p_succ: f64,
    pub std_err: f64,
    /// Mean exact per-instance decision probability (unsatisfiable ones
    /// count as 1); NaN for heralded runs with no trajectories requested.
    pub p_succ_expected: f64,
}

/// `P_succ = N_succ/N_prob` for every (instance set, T_f).
pub fn phase_transition_curve(
    sets: &[InstanceSet],
    base: &RunConfig,
    t_fs: &[f64],
    shots: usize,
    trajectories: usize,
    seed: u64,
) -> Result<Vec<PhaseRow>, MetricsError> {
    let mut rows = Vec::new();
    for (ti, &t_f) in t_fs.iter().enumerate() {
        let cfg = RunConfig { t_f, ..base.clone() };
        for (si, set) in sets.iter().enumerate() {
            let group = ti * sets.len() + si;
            let results: Result<Vec<(InstanceDecision, f64)>, MetricsError> = set
                .formulas
                .par_iter()
                .enumerate()
                .map(|(ii, f)| {
                    let s = task_seed(seed, group, ii);
                    let d = decide_instance(f, &cfg, shots, s)?;
                    let expected = if !d.satisfiable {
                        1.0
                    } else if trajectories == 0 && cfg.mode != Mode::Average {
                        f64::NAN
                    } else {
                        let p = estimate_success(f, &cfg, trajectories, s.wrapping_add(1))?.mean;
                        1.0 - (1.0 - p).powi(shots.max(1) as i32)
                    };
                    Ok((d, expected))
                })
                .collect();
            let results = results?;
            let n_prob = results.len();
            let n_succ = results.iter().filter(|r| r.0.correct).count();
            let p = n_succ as f64 / n_prob.max(1) as f64;
            rows.push(PhaseRow {
                k: set.k,
                n: set.n,
                alpha: set.alpha,
                t_f,
                mode: cfg.mode,
                n_prob,
                n_sat: results.iter().filter(|r| r.0.satisfiable).count(),
                n_succ,
                p_succ: p,
                std_err: (p * (1.0 - p) / n_prob.max(1) as f64).sqrt(),
                p_succ_expected: results.iter().map(|r| r.1).sum::<f64>() / n_prob.max(1) as f64,
            });
        }
    }
    Ok(rows)
}

/// Write rows as CSV with a header taken from the field names.
pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

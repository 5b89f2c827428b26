//! Filtering of clause readouts and threshold-based failure heralding.
//!
//! The filter is an exponential window truncated to the last `T_be` of the
//! record and normalized by `N_be = 1 − e⁻¹`, updated by the recurrence
//!
//! `r̄(t+Δt) = r̄(t)(1 − Δt/T_be) + [e·r(t) − r(t−T_be)]·Δt/((e−1)T_be)`.
//!
//! Before `T_be` has elapsed the missing history counts as zero, which is the
//! same as integrating over `[0, t]` only; detection is suppressed until the
//! window is full.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeraldError {
    #[error("filter response time {t_be} must be at least the step {dt}")]
    WindowTooShort { t_be: f64, dt: f64 },
    #[error("threshold {0} must be negative and finite")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub t_be: f64,
    pub r_th: f64,
    pub dt: f64,
}

/// `max(2τ, 0.1·T_f)`, never shorter than one step.
pub fn default_response_time(tau: f64, t_f: f64, dt: f64) -> f64 {
    (2.0 * tau).max(0.1 * t_f).max(dt)
}

/// `−2.5/√T_be`
pub fn default_threshold(t_be: f64) -> f64 {
    -2.5 / t_be.sqrt()
}

/// Shortest remaining budget worth a detected run, `5τ`.
pub fn default_t_min(tau: f64) -> f64 {
    5.0 * tau
}

impl FilterConfig {
    pub fn new(t_be: f64, r_th: f64, dt: f64) -> Result<Self, HeraldError> {
        if !(t_be.is_finite() && t_be >= dt * (1.0 - 1e-12)) {
            return Err(HeraldError::WindowTooShort { t_be, dt });
        }
        if !(r_th.is_finite() && r_th < 0.0) {
            return Err(HeraldError::InvalidThreshold(r_th));
        }
        Ok(Self { t_be, r_th, dt })
    }

    pub fn defaults(tau: f64, t_f: f64, dt: f64) -> Self {
        let t_be = default_response_time(tau, t_f, dt);
        Self { t_be, r_th: default_threshold(t_be), dt }
    }

    /// Samples held per channel, `ceil(T_be/dt)`.
    pub fn window_len(&self) -> usize {
        ((self.t_be / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Stationary variance of `r̄` for white input of variance `1/dt`.
    pub fn steady_variance(&self) -> f64 {
        (E + 1.0) / (2.0 * (E - 1.0)) / self.t_be
    }
}

/// Per-clause filtered values with their raw-sample ring buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    values: Vec<f64>,
    ring: Vec<f64>,
    len: usize,
    head: usize,
    steps: usize,
    decay: f64,
    gain: f64,
}

impl FilterState {
    pub fn new(channels: usize, cfg: &FilterConfig) -> Self {
        let len = cfg.window_len();
        let a = cfg.dt / cfg.t_be;
        Self {
            values: vec![0.0; channels],
            ring: vec![0.0; channels * len],
            len,
            head: 0,
            steps: 0,
            decay: 1.0 - a,
            gain: a / (E - 1.0),
        }
    }

    pub fn channels(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// True once a full window of samples has been seen.
    pub fn warmed_up(&self) -> bool {
        self.steps >= self.len
    }

    /// Feed one raw sample per channel, all taken at the same step.
    pub fn update(&mut self, samples: &[f64]) {
        assert_eq!(samples.len(), self.values.len(), "one sample per channel");
        for (i, (&r, v)) in samples.iter().zip(self.values.iter_mut()).enumerate() {
            let slot = &mut self.ring[i * self.len + self.head];
            let old = *slot;
            *v = *v * self.decay + (E * r - old) * self.gain;
            *slot = r;
        }
        self.head = (self.head + 1) % self.len;
        self.steps += 1;
    }
}

/// Lowest-index channel whose filtered value is below threshold. Always
/// `None` during warm-up.
pub fn detect_failure(fs: &FilterState, cfg: &FilterConfig) -> Option<usize> {
    if !fs.warmed_up() {
        return None;
    }
    fs.values.iter().position(|&v| v < cfg.r_th)
}

/// A window function on lag `t − t′ ∈ [0, ∞)`.
pub trait Window {
    fn weight(&self, lag: f64) -> f64;
    /// Largest lag with non-zero weight.
    fn support(&self) -> f64;
}

/// `e^(−lag/T_be)/T_be` for `lag ≤ T_be`, zero beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialWindow {
    pub t_be: f64,
}

impl Window for ExponentialWindow {
    fn weight(&self, lag: f64) -> f64 {
        if (0.0..=self.t_be).contains(&lag) {
            (-lag / self.t_be).exp() / self.t_be
        } else {
            0.0
        }
    }

    fn support(&self) -> f64 {
        self.t_be
    }
}

/// Windowed log-likelihood statistic
/// `𝓑(t) = (1/(2𝒩√τ)) ∫₀ᵗ r(t′) W(t, t′) dt′` with `𝒩 = ∫ W`, evaluated by
/// the trapezoid rule on a record sampled every `dt` (`record[k]` at `k·dt`).
pub fn windowed_statistic<W: Window>(record: &[f64], dt: f64, window: &W, tau: f64) -> f64 {
    let Some(last) = record.len().checked_sub(1) else { return 0.0 };
    let t = last as f64 * dt;
    let mut integral = 0.0;
    let mut norm = 0.0;
    for (k, &r) in record.iter().enumerate() {
        let lag = t - k as f64 * dt;
        let w = window.weight(lag) * if k == 0 || k == last { 0.5 } else { 1.0 };
        integral += w * r * dt;
        norm += w * dt;
    }
    integral / (2.0 * norm * tau.sqrt())
}

/// `r̄(t)` straight from the integral definition with the fixed normalization
/// `N_be = 1 − e⁻¹`, by trapezoid quadrature of a continuous signal.
pub fn integral_filter<F: Fn(f64) -> f64>(signal: F, t: f64, t_be: f64, quad_steps: usize) -> f64 {
    let lo = (t - t_be).max(0.0);
    let h = (t - lo) / quad_steps as f64;
    let n_be = 1.0 - (-1.0f64).exp();
    let mut acc = 0.0;
    for k in 0..=quad_steps {
        let s = lo + k as f64 * h;
        let w = if k == 0 || k == quad_steps { 0.5 } else { 1.0 };
        acc += w * (-(t - s) / t_be).exp() / t_be * signal(s);
    }
    acc * h / n_be
}

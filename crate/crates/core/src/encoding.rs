//! θ-dependent objects: encoded single-qubit states, clause projectors and
//! observables, solution states, the co-rotating Q-frame and the Zeno
//! diagnostic g.
//!
//! A variable's value is encoded as `ry(+θ)|+⟩` (true) or `ry(−θ)|+⟩`
//! (false). Each clause owns the projector onto the one product state that
//! violates it, and the observable `X = 1 − 2P`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qlinalg::{kron, ComplexMatrix, DensityMatrix, LinalgError, LocalProjector, PureState};
use crate::satcore::{evaluate, Assignment, CnfFormula, SatError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("assignment {0} does not satisfy the formula")]
    NotASolution(String),
    #[error("clause index {index} out of range (formula has {count})")]
    ClauseIndex { index: usize, count: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn ry_real(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [[c, -s], [s, c]]
}

/// `exp(−iθσ_y/2)`
pub fn ry(theta: f64) -> ComplexMatrix {
    let r = ry_real(theta);
    ComplexMatrix::from_real(&[&r[0], &r[1]])
}

/// `ry(angle)|+⟩` as real amplitudes.
fn rotated_plus(angle: f64) -> [f64; 2] {
    let r = ry_real(angle);
    [(r[0][0] + r[0][1]) * FRAC_1_SQRT_2, (r[1][0] + r[1][1]) * FRAC_1_SQRT_2]
}

/// `|θ⟩` for true, `|θ̄⟩` for false.
pub fn encoded_amplitudes(theta: f64, truth: bool) -> [f64; 2] {
    rotated_plus(if truth { theta } else { -theta })
}

pub fn encoded_state(theta: f64, truth: bool) -> PureState {
    let a = encoded_amplitudes(theta, truth);
    PureState::product(&[[C64::new(a[0], 0.0), C64::new(a[1], 0.0)]])
}

/// State that violates a literal: `|θ⊥⟩ = ry(π+θ)|+⟩` for a plain
/// variable, `|θ̄⊥⟩ = ry(π−θ)|+⟩` for a negated one.
pub fn violating_amplitudes(theta: f64, negated: bool) -> [f64; 2] {
    rotated_plus(if negated { std::f64::consts::PI - theta } else { std::f64::consts::PI + theta })
}

/// Measurement of one clause, rebuilt for any θ from per-literal factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseObservable {
    pub index: usize,
    pub targets: Vec<usize>,
    pub signs: Vec<i8>,
    pub num_qubits: usize,
}

impl ClauseObservable {
    /// `|w(θ)⟩`, the violating product state on the clause's qubits.
    pub fn violating_weights(&self, theta: f64) -> Vec<C64> {
        self.signs.iter().fold(vec![C64::new(1.0, 0.0)], |acc, &s| {
            let v = violating_amplitudes(theta, s < 0);
            acc.iter().flat_map(|a| v.iter().map(move |x| a * x)).collect()
        })
    }

    pub fn projector(&self, theta: f64) -> LocalProjector {
        LocalProjector::new(&self.targets, self.num_qubits, self.violating_weights(theta))
            .expect("clause targets were validated with the formula")
    }

    /// Re-point an existing projector of this clause at a new θ.
    pub fn update_projector(&self, proj: &mut LocalProjector, theta: f64) {
        proj.set_weights(&self.violating_weights(theta));
    }

    pub fn projector_matrix(&self, theta: f64) -> ComplexMatrix {
        self.projector(theta).to_matrix()
    }

    /// `X(θ) = 1 − 2P(θ)`
    pub fn observable_matrix(&self, theta: f64) -> ComplexMatrix {
        let p = self.projector_matrix(theta);
        &ComplexMatrix::identity(p.dim()) - &p.scale_real(2.0)
    }
}

pub fn clause_observable(f: &CnfFormula, i: usize) -> Result<ClauseObservable, EncodingError> {
    let clause = f
        .clauses()
        .get(i)
        .ok_or(EncodingError::ClauseIndex { index: i, count: f.num_clauses() })?;
    Ok(ClauseObservable {
        index: i,
        targets: clause.literals().iter().map(|l| l.var).collect(),
        signs: clause.literals().iter().map(|l| l.sign()).collect(),
        num_qubits: f.num_vars(),
    })
}

pub fn clause_observables(f: &CnfFormula) -> Vec<ClauseObservable> {
    (0..f.num_clauses())
        .map(|i| clause_observable(f, i).expect("index in range"))
        .collect()
}

/// All clause projectors at one θ, reusable across steps via [`retarget`].
pub fn projectors_at(observables: &[ClauseObservable], theta: f64) -> Vec<LocalProjector> {
    observables.iter().map(|o| o.projector(theta)).collect()
}

pub fn retarget(observables: &[ClauseObservable], projectors: &mut [LocalProjector], theta: f64) {
    for (o, p) in observables.iter().zip(projectors.iter_mut()) {
        o.update_projector(p, theta);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
    /// Monotone θ values at increasing fractions of the total time, linearly
    /// interpolated.
    Custom { fractions: Vec<f64>, thetas: Vec<f64> },
}

/// θ(t) over `[0, total_time]`, rising from 0 to π/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub total_time: f64,
}

impl Schedule {
    pub fn linear(total_time: f64) -> Result<Self, EncodingError> {
        Self::check_time(total_time)?;
        Ok(Self { kind: ScheduleKind::Linear, total_time })
    }

    /// Table values are clamped into `[0, π/2]` and the end points are
    /// pinned to 0 and π/2.
    pub fn custom(total_time: f64, fractions: Vec<f64>, thetas: Vec<f64>) -> Result<Self, EncodingError> {
        Self::check_time(total_time)?;
        if fractions.len() != thetas.len() || fractions.len() < 2 {
            return Err(EncodingError::InvalidSchedule(
                "need at least two (fraction, theta) points of equal length".into(),
            ));
        }
        if fractions[0] != 0.0 || *fractions.last().unwrap() != 1.0 {
            return Err(EncodingError::InvalidSchedule("fractions must run from 0 to 1".into()));
        }
        if fractions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EncodingError::InvalidSchedule("fractions must be strictly increasing".into()));
        }
        let mut thetas: Vec<f64> = thetas.into_iter().map(|t| t.clamp(0.0, FRAC_PI_2)).collect();
        if thetas.iter().any(|t| t.is_nan()) || thetas.windows(2).any(|w| w[1] < w[0]) {
            return Err(EncodingError::InvalidSchedule("theta values must be non-decreasing".into()));
        }
        thetas[0] = 0.0;
        *thetas.last_mut().unwrap() = FRAC_PI_2;
        Ok(Self { kind: ScheduleKind::Custom { fractions, thetas }, total_time })
    }

    fn check_time(total_time: f64) -> Result<(), EncodingError> {
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(EncodingError::InvalidSchedule(format!("total time {total_time} must be positive")));
        }
        Ok(())
    }

    pub fn theta_at_fraction(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match &self.kind {
            ScheduleKind::Linear => s * FRAC_PI_2,
            ScheduleKind::Custom { fractions, thetas } => {
                let k = fractions.partition_point(|&x| x <= s).clamp(1, fractions.len() - 1);
                let (x0, x1) = (fractions[k - 1], fractions[k]);
                let w = (s - x0) / (x1 - x0);
                thetas[k - 1] + w * (thetas[k] - thetas[k - 1])
            }
        }
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.theta_at_fraction(t / self.total_time)
    }

    /// `dθ/dt` by central difference (exact for the linear schedule).
    pub fn theta_rate(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Linear => FRAC_PI_2 / self.total_time,
            ScheduleKind::Custom { .. } => {
                let h = 1e-6 * self.total_time;
                (self.theta(t + h) - self.theta(t - h)) / (2.0 * h)
            }
        }
    }

    /// Number of measurement cycles for step width `dt`: `round(T_f/dt)`,
    /// at least one.
    pub fn num_steps(&self, dt: f64) -> usize {
        ((self.total_time / dt).round() as usize).max(1)
    }

    /// θ applied during cycle `c` of `n` (1-based), so the last cycle sits
    /// exactly at π/2.
    pub fn theta_at_step(&self, c: usize, n: usize) -> f64 {
        self.theta_at_fraction(c as f64 / n as f64)
    }
}

/// Product state of an assignment at angle θ, no satisfiability check.
pub fn product_state(s: &Assignment, theta: f64) -> PureState {
    let factors: Vec<[C64; 2]> = s
        .values()
        .iter()
        .map(|&v| {
            let a = encoded_amplitudes(theta, v);
            [C64::new(a[0], 0.0), C64::new(a[1], 0.0)]
        })
        .collect();
    PureState::product(&factors)
}

/// Common +1 eigenstate of every clause observable.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub signs: Vec<i8>,
    pub theta: f64,
    pub state: PureState,
}

pub fn solution_state(f: &CnfFormula, s: &Assignment, theta: f64) -> Result<SolutionState, EncodingError> {
    if !evaluate(f, s)? {
        return Err(EncodingError::NotASolution(s.to_bitstring()));
    }
    Ok(SolutionState { signs: s.signs(), theta, state: product_state(s, theta) })
}

/// `Q = ⊗ⱼ ry(sⱼ(θ − π/2))`: undoes the rotation of a solution state so it
/// reads the same at every θ.
pub fn q_frame(s: &Assignment, theta: f64) -> ComplexMatrix {
    s.signs().iter().fold(ComplexMatrix::identity(1), |acc, &sj| {
        kron(&acc, &ry(f64::from(sj) * (theta - FRAC_PI_2)))
    })
}

/// `H_Q = ½ θ̇ Σⱼ sⱼ σ_y⁽ʲ⁾`, the generator of the frame's own motion.
pub fn diabatic_hamiltonian(s: &Assignment, theta_rate: f64) -> ComplexMatrix {
    let n = s.len();
    let mut h = ComplexMatrix::zeros(1 << n);
    for (j, &sj) in s.signs().iter().enumerate() {
        let y = crate::qlinalg::embed_on_qubits(&crate::qlinalg::pauli_y(), &[j + 1], n).expect("valid qubit");
        h.axpy(0.5 * theta_rate * f64::from(sj), &y);
    }
    h
}

/// `⟨X⟩ = 1 − 2 Tr(Pρ)`
pub fn observable_expectation(rho: &DensityMatrix, p: &LocalProjector) -> f64 {
    1.0 - 2.0 * p.trace_with(rho.matrix()).re
}

/// `g = (1/2τ) Σᵢ (1 − ⟨Xᵢ⟩²)`, zero exactly at common eigenstates.
pub fn zeno_g(rho: &DensityMatrix, projectors: &[LocalProjector], tau: f64) -> f64 {
    projectors
        .iter()
        .map(|p| {
            let x = observable_expectation(rho, p);
            1.0 - x * x
        })
        .sum::<f64>()
        / (2.0 * tau)
}

//! State-evolution kernels for clause measurements.
//!
//! Each kernel takes the clause projector `P` at the current θ; the
//! observable is always `X = 1 − 2P`, so every map is written in terms of
//! `Pρ`, `ρP` and `PρP` and never forms a dense `2ⁿ × 2ⁿ` operator.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qlinalg::{ComplexMatrix, DensityMatrix, LocalProjector, PureState};

/// Above this Δt/τ the first-order continuum kernels are flagged as coarse.
pub const CONTINUUM_WARN_RATIO: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("measurement time tau must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("step dt must be positive and finite, got {0}")]
    InvalidDt(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    pub tau: f64,
    pub dt: f64,
}

impl MeasurementConfig {
    pub fn new(tau: f64, dt: f64) -> Result<Self, DynamicsError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(DynamicsError::InvalidTau(tau));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DynamicsError::InvalidDt(dt));
        }
        Ok(Self { tau, dt })
    }

    /// Coherence kept between the two outcome branches, `e^(−Δt/2τ)`.
    pub fn beta(&self) -> f64 {
        (-self.dt / (2.0 * self.tau)).exp()
    }

    /// Mean readout on the satisfied branch, `1/√τ`.
    pub fn signal(&self) -> f64 {
        self.tau.sqrt().recip()
    }

    /// Readout standard deviation, `1/√Δt`.
    pub fn noise(&self) -> f64 {
        self.dt.sqrt().recip()
    }

    pub fn continuum_warning(&self) -> Option<String> {
        let ratio = self.dt / self.tau;
        (ratio > CONTINUUM_WARN_RATIO)
            .then(|| format!("dt/tau = {ratio} exceeds {CONTINUUM_WARN_RATIO}; first-order step is coarse"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutSample {
    pub clause: usize,
    pub time: f64,
    pub value: f64,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Density of the clause readout: `p₊ N(+μ, σ²) + p₋ N(−μ, σ²)`.
pub fn readout_density(r: f64, p_minus: f64, cfg: &MeasurementConfig) -> f64 {
    let (mu, sigma) = (cfg.signal(), cfg.noise());
    ((1.0 - p_minus) * std_normal_pdf((r - mu) / sigma) + p_minus * std_normal_pdf((r + mu) / sigma)) / sigma
}

fn readout_cdf(r: f64, p_minus: f64, mu: f64, sigma: f64) -> f64 {
    (1.0 - p_minus) * std_normal_cdf((r - mu) / sigma) + p_minus * std_normal_cdf((r + mu) / sigma)
}

/// Inverts the mixture CDF at `u` by safeguarded Newton iteration.
pub fn invert_readout_cdf(u: f64, p_minus: f64, cfg: &MeasurementConfig) -> f64 {
    let (mu, sigma) = (cfg.signal(), cfg.noise());
    let u = u.clamp(1e-300, 1.0 - 1e-16);
    let (mut lo, mut hi) = (-mu - 40.0 * sigma, mu + 40.0 * sigma);
    let mut r = if u < p_minus { -mu } else { mu };
    for _ in 0..200 {
        let g = readout_cdf(r, p_minus, mu, sigma) - u;
        if g > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let d = readout_density(r, p_minus, cfg);
        let mut next = r - g / d;
        if !(next.is_finite() && next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() <= 1e-13 * sigma.max(mu) {
            return next;
        }
        r = next;
    }
    r
}

pub fn sample_readout<R: Rng + ?Sized>(p_minus: f64, cfg: &MeasurementConfig, rng: &mut R) -> f64 {
    invert_readout_cdf(rng.random::<f64>(), p_minus, cfg)
}

/// Kraus operator for readout `r`, up to normalization: `a·1 + c·P`.
///
/// The satisfied and violated branches carry Gaussian amplitudes whose
/// ratio is `q = exp(−Δt r/√τ)`; the larger one is scaled to 1 so neither
/// coefficient overflows.
pub fn kraus_coefficients(r: f64, cfg: &MeasurementConfig) -> (f64, f64) {
    let x = -cfg.dt * r / cfg.tau.sqrt();
    if x <= 0.0 {
        (1.0, x.exp_m1())
    } else {
        let inv = (-x).exp();
        (inv, -(-x).exp_m1())
    }
}

/// Normalized Gaussian weights `(g₊(r), g₋(r))` with `M_r†M_r = g₊P₊ + g₋P₋`.
pub fn povm_weights(r: f64, cfg: &MeasurementConfig) -> (f64, f64) {
    let (mu, sigma) = (cfg.signal(), cfg.noise());
    (std_normal_pdf((r - mu) / sigma) / sigma, std_normal_pdf((r + mu) / sigma) / sigma)
}

/// Anything a clause projector can act on.
pub trait Register {
    /// `Tr(Pρ)`, the probability of the violating branch.
    fn violation_probability(&self, p: &LocalProjector) -> f64;
    /// Unnormalized `(a + cP) ρ (a + cP)†`.
    fn apply_kraus(&mut self, p: &LocalProjector, a: f64, c: f64);
    fn renormalize(&mut self);
}

impl Register for PureState {
    fn violation_probability(&self, p: &LocalProjector) -> f64 {
        p.expectation_vec(self.amplitudes()).clamp(0.0, 1.0)
    }

    fn apply_kraus(&mut self, p: &LocalProjector, a: f64, c: f64) {
        p.combine_vec(self.amplitudes_mut(), a, c);
    }

    fn renormalize(&mut self) {
        PureState::renormalize(self);
    }
}

/// `Pρ`, `ρP = (Pρ)†` and `PρP` for Hermitian ρ. The shortcut turns any
/// anti-Hermitian roundoff into a commutator term that grows step over step,
/// so every update built on it re-Hermitizes.
struct Sandwich {
    left: ComplexMatrix,
    right: ComplexMatrix,
    both: ComplexMatrix,
}

fn sandwich(rho: &ComplexMatrix, p: &LocalProjector) -> Sandwich {
    let left = p.apply_left(rho);
    let right = left.adjoint();
    let both = p.apply_right(&left);
    Sandwich { left, right, both }
}

impl Register for DensityMatrix {
    fn violation_probability(&self, p: &LocalProjector) -> f64 {
        p.trace_with(self.matrix()).re.clamp(0.0, 1.0)
    }

    fn apply_kraus(&mut self, p: &LocalProjector, a: f64, c: f64) {
        let s = sandwich(self.matrix(), p);
        let m = self.matrix_mut();
        let (aa, ac, cc) = (a * a, a * c, c * c);
        for (((x, l), r), b) in m.data_mut().iter_mut().zip(s.left.data()).zip(s.right.data()).zip(s.both.data()) {
            *x = *x * aa + (l + r) * ac + b * cc;
        }
        self.hermitize();
    }

    fn renormalize(&mut self) {
        DensityMatrix::renormalize(self);
    }
}

/// One generalized clause measurement in place; returns the sampled readout.
pub fn kraus_measure_in_place<S: Register, R: Rng + ?Sized>(
    state: &mut S,
    p: &LocalProjector,
    cfg: &MeasurementConfig,
    rng: &mut R,
) -> f64 {
    let p_minus = state.violation_probability(p);
    let r = sample_readout(p_minus, cfg, rng);
    apply_readout(state, p, cfg, r);
    r
}

/// Condition the state on a given readout value.
pub fn apply_readout<S: Register>(state: &mut S, p: &LocalProjector, cfg: &MeasurementConfig, r: f64) {
    let (a, c) = kraus_coefficients(r, cfg);
    state.apply_kraus(p, a, c);
    state.renormalize();
}

pub fn kraus_measure<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    p: &LocalProjector,
    cfg: &MeasurementConfig,
    rng: &mut R,
) -> (DensityMatrix, f64) {
    let mut out = rho.clone();
    let r = kraus_measure_in_place(&mut out, p, cfg, rng);
    (out, r)
}

/// Unconditioned measurement: `((1+β)/2)ρ + ((1−β)/2)XρX`.
pub fn average_map_in_place(rho: &mut DensityMatrix, p: &LocalProjector, cfg: &MeasurementConfig) {
    // XρX − ρ = −2(Pρ + ρP) + 4PρP
    let k = -0.5 * (-cfg.dt / (2.0 * cfg.tau)).exp_m1();
    add_dissipator(rho, p, k);
    rho.hermitize();
    rho.renormalize();
}

pub fn average_map(rho: &DensityMatrix, p: &LocalProjector, cfg: &MeasurementConfig) -> DensityMatrix {
    let mut out = rho.clone();
    average_map_in_place(&mut out, p, cfg);
    out
}

/// `ρ += k (XρX − ρ)`
fn add_dissipator(rho: &mut DensityMatrix, p: &LocalProjector, k: f64) {
    let s = sandwich(rho.matrix(), p);
    for (((x, l), r), b) in rho
        .matrix_mut()
        .data_mut()
        .iter_mut()
        .zip(s.left.data())
        .zip(s.right.data())
        .zip(s.both.data())
    {
        *x += ((l + r) * -2.0 + b * 4.0) * k;
    }
}

/// `Σᵢ (XᵢρXᵢ − ρ)`
fn dissipator_sum(rho: &ComplexMatrix, projectors: &[LocalProjector]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rho.dim());
    for p in projectors {
        let s = sandwich(rho, p);
        for (((x, l), r), b) in out.data_mut().iter_mut().zip(s.left.data()).zip(s.right.data()).zip(s.both.data()) {
            *x += (l + r) * -2.0 + b * 4.0;
        }
    }
    out
}

/// Euler step of `ρ̇ = (1/4τ) Σᵢ (XᵢρXᵢ − ρ)` with all clauses at once.
/// Returns the state before trace renormalization is applied in
/// [`lindblad_step`]; the trace is preserved exactly by the update itself.
pub fn lindblad_increment(rho: &DensityMatrix, projectors: &[LocalProjector], tau: f64, dt: f64) -> DensityMatrix {
    let mut out = rho.clone();
    out.matrix_mut().axpy(dt / (4.0 * tau), &dissipator_sum(rho.matrix(), projectors));
    out
}

pub fn lindblad_step_in_place(rho: &mut DensityMatrix, projectors: &[LocalProjector], tau: f64, dt: f64) {
    let d = dissipator_sum(rho.matrix(), projectors);
    rho.matrix_mut().axpy(dt / (4.0 * tau), &d);
    rho.hermitize();
    rho.renormalize();
}

pub fn lindblad_step(rho: &DensityMatrix, projectors: &[LocalProjector], tau: f64, dt: f64) -> DensityMatrix {
    let mut out = rho.clone();
    lindblad_step_in_place(&mut out, projectors, tau, dt);
    out
}

/// Second-order (Heun) variant, for convergence checks only.
pub fn lindblad_step_heun(rho: &DensityMatrix, projectors: &[LocalProjector], tau: f64, dt: f64) -> DensityMatrix {
    let k = dt / (4.0 * tau);
    let d1 = dissipator_sum(rho.matrix(), projectors);
    let mut mid = rho.matrix().clone();
    mid.axpy(k, &d1);
    let d2 = dissipator_sum(&mid, projectors);
    let mut out = rho.clone();
    out.matrix_mut().axpy(0.5 * k, &d1);
    out.matrix_mut().axpy(0.5 * k, &d2);
    out.hermitize();
    out.renormalize();
    out
}

/// Euler–Maruyama step of the conditioned master equation with the Wiener
/// increments supplied. Returns the readouts `⟨Xᵢ⟩/√τ + dWᵢ/dt`.
pub fn sme_step_with_increments(
    rho: &mut DensityMatrix,
    projectors: &[LocalProjector],
    tau: f64,
    dt: f64,
    dws: &[f64],
) -> Vec<f64> {
    assert_eq!(projectors.len(), dws.len());
    let kd = dt / (4.0 * tau);
    let ks = 0.5 / tau.sqrt();
    let mut delta = ComplexMatrix::zeros(rho.dim());
    let mut readouts = Vec::with_capacity(dws.len());
    for (p, &dw) in projectors.iter().zip(dws) {
        let s = sandwich(rho.matrix(), p);
        let pm = s.left.trace().re;
        let x = 1.0 - 2.0 * pm;
        readouts.push(x / tau.sqrt() + dw / dt);
        // H[X]ρ = Xρ + ρX − 2⟨X⟩ρ = 4 Tr(Pρ) ρ − 2(Pρ + ρP)
        let h = ks * dw;
        for ((((y, rho_ij), l), r), b) in delta
            .data_mut()
            .iter_mut()
            .zip(rho.matrix().data())
            .zip(s.left.data())
            .zip(s.right.data())
            .zip(s.both.data())
        {
            let lr = l + r;
            *y += (lr * -2.0 + b * 4.0) * kd + (rho_ij * (4.0 * pm) - lr * 2.0) * h;
        }
    }
    rho.matrix_mut().axpy(1.0, &delta);
    rho.hermitize();
    rho.renormalize();
    readouts
}

pub fn sme_step<R: Rng + ?Sized>(
    rho: &mut DensityMatrix,
    projectors: &[LocalProjector],
    tau: f64,
    dt: f64,
    rng: &mut R,
) -> Vec<f64> {
    let sd = dt.sqrt();
    let dws: Vec<f64> = (0..projectors.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * sd
        })
        .collect();
    sme_step_with_increments(rho, projectors, tau, dt, &dws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{clause_observables, projectors_at, solution_state};
    use crate::qlinalg::{fidelity_pure, trace_distance, C64};
    use crate::satcore::{enumerate_solutions, two_qubit_unique, CnfFormula};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(tau: f64, dt: f64) -> MeasurementConfig {
        MeasurementConfig::new(tau, dt).unwrap()
    }

    fn eq32_solution(theta: f64) -> PureState {
        let f = two_qubit_unique();
        let s = enumerate_solutions(&f).unwrap().unique().unwrap().clone();
        solution_state(&f, &s, theta).unwrap().state
    }

    #[test]
    fn config_validation() {
        assert!(MeasurementConfig::new(0.0, 1.0).is_err());
        assert!(MeasurementConfig::new(1.0, -1.0).is_err());
        let c = cfg(2.0, 0.5);
        assert_abs_diff_eq!(c.beta(), (-0.125f64).exp());
        assert!(c.continuum_warning().is_some());
        assert!(cfg(1.0, 0.01).continuum_warning().is_none());
    }

    #[test]
    fn inverse_cdf_round_trips() {
        let c = cfg(1.0, 0.3);
        for &p in &[0.0, 0.2, 0.5, 1.0] {
            for &u in &[1e-12, 0.01, 0.3, 0.5, 0.77, 0.999999] {
                let r = invert_readout_cdf(u, p, &c);
                let back = readout_cdf(r, p, c.signal(), c.noise());
                assert_abs_diff_eq!(back, u, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn povm_is_complete() {
        for (tau, dt) in [(1.0, 0.01), (1.0, 1.0), (0.5, 20.0)] {
            let c = cfg(tau, dt);
            let (mu, sigma) = (c.signal(), c.noise());
            let (lo, hi) = (-mu - 12.0 * sigma, mu + 12.0 * sigma);
            let steps = 200_000;
            let h = (hi - lo) / steps as f64;
            let (mut sp, mut sm) = (0.0, 0.0);
            for i in 0..=steps {
                let r = lo + i as f64 * h;
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                let (gp, gm) = povm_weights(r, &c);
                sp += w * gp * h;
                sm += w * gm * h;
            }
            assert_abs_diff_eq!(sp, 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(sm, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn kraus_coefficients_match_gaussian_ratio() {
        let c = cfg(1.5, 0.4);
        for &r in &[-3.0, -0.2, 0.0, 0.7, 4.0] {
            let (gp, gm) = povm_weights(r, &c);
            let (a, cc) = kraus_coefficients(r, &c);
            // amplitudes on P₊ and P₋ are a and a + c
            assert_abs_diff_eq!((a + cc) / a, (gm / gp).sqrt(), epsilon = 1e-12 * (gm / gp).sqrt().max(1.0));
        }
    }

    #[test]
    fn eigenstate_readout_moments() {
        let f = two_qubit_unique();
        let obs = clause_observables(&f);
        let th = 0.6;
        let p = obs[1].projector(th);
        let c = cfg(1.0, 0.2);
        let psi = eq32_solution(th);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let mut st = psi.clone();
            let r = kraus_measure_in_place(&mut st, &p, &c, &mut rng);
            s1 += r;
            s2 += r * r;
            assert_abs_diff_eq!(st.inner(&psi).norm(), 1.0, epsilon = 1e-12);
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let var_expected = 1.0 / c.dt;
        assert!((mean - 1.0).abs() < 3.0 * (var_expected / n as f64).sqrt(), "mean {mean}");
        // variance of sample variance ≈ 2σ⁴/n
        assert!((var - var_expected).abs() < 3.0 * var_expected * (2.0 / n as f64).sqrt(), "var {var}");
    }

    #[test]
    fn projective_limit_collapses_with_born_weights() {
        let c = cfg(1.0, 50.0);
        let f = two_qubit_unique();
        let p = clause_observables(&f)[0].projector(std::f64::consts::FRAC_PI_2);
        let rho = DensityMatrix::uniform_superposition(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 4000;
        let mut violated = 0;
        for _ in 0..n {
            let (post, r) = kraus_measure(&rho, &p, &c, &mut rng);
            let pm = post.violation_probability(&p);
            let branch_violated = pm > 0.5;
            assert!(pm < 1e-9 || pm > 1.0 - 1e-9, "not projected: {pm}");
            assert_eq!(branch_violated, r < 0.0);
            violated += usize::from(branch_violated);
        }
        let frac = violated as f64 / n as f64;
        assert!((frac - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / n as f64).sqrt(), "frac {frac}");
    }

    #[test]
    fn average_map_limits() {
        let f = two_qubit_unique();
        let p = clause_observables(&f)[0].projector(0.9);
        let rho = DensityMatrix::uniform_superposition(2);
        let same = average_map(&rho, &p, &cfg(1.0, 1e-12));
        assert!(same.matrix().max_abs_diff(rho.matrix()) < 1e-11);
        let full = average_map(&rho, &p, &cfg(1.0, 1e4));
        let x = clause_observables(&f)[0].observable_matrix(0.9);
        let xrx = x.matmul(rho.matrix()).matmul(&x);
        let expect = (rho.matrix() + &xrx).scale_real(0.5);
        assert!(full.matrix().max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn average_map_matches_dense_formula() {
        let f = two_qubit_unique();
        let o = &clause_observables(&f)[2];
        let th = 0.4;
        let c = cfg(0.7, 0.9);
        let rho = DensityMatrix::mixture(&[(0.3, &PureState::basis(2, 1)), (0.7, &eq32_solution(0.2))]).unwrap();
        let out = average_map(&rho, &o.projector(th), &c);
        let x = o.observable_matrix(th);
        let b = c.beta();
        let mut expect = rho.matrix().scale_real((1.0 + b) / 2.0);
        expect.axpy((1.0 - b) / 2.0, &x.matmul(rho.matrix()).matmul(&x));
        assert!(out.matrix().max_abs_diff(&expect) < 1e-13);
        out.validate().unwrap();
    }

    #[test]
    fn kraus_ensemble_equals_average_map() {
        let f = two_qubit_unique();
        let o = &clause_observables(&f)[0];
        let th = 0.7;
        let p = o.projector(th);
        let c = cfg(1.0, 0.8);
        let rho = DensityMatrix::uniform_superposition(2);
        let expect = average_map(&rho, &p, &c);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let d = rho.dim();
        let mut sum = vec![C64::new(0.0, 0.0); d * d];
        let mut sumsq = vec![0.0; d * d];
        for _ in 0..n {
            let (post, _) = kraus_measure(&rho, &p, &c, &mut rng);
            for ((s, q), x) in sum.iter_mut().zip(sumsq.iter_mut()).zip(post.matrix().data()) {
                *s += x;
                *q += x.re * x.re;
            }
        }
        for (i, (s, q)) in sum.iter().zip(&sumsq).enumerate() {
            let mean = s.re / n as f64;
            let sd = ((q / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
            let target = expect.matrix().data()[i].re;
            assert!((mean - target).abs() <= 3.0 * sd + 1e-12, "entry {i}: {mean} vs {target} (sd {sd})");
        }
    }

    #[test]
    fn long_strong_average_runs_stay_physical() {
        // 17 clauses on 4 qubits at dt = τ: ~300 maps with k ≈ 0.2
        let f = CnfFormula::from_signed(
            4,
            &[
                &[1, 2, -4], &[1, -2, 4], &[2, 3, 4], &[-1, -2, 4], &[1, 2, -4], &[1, -2, -4], &[1, 2, -3],
                &[-1, 3, -4], &[1, 3, 4], &[1, -2, -3], &[1, 3, 4], &[-1, 2, -4], &[-2, -3, 4], &[-1, 2, 3],
                &[-1, -2, -3], &[1, 2, 4], &[1, -3, 4],
            ],
        )
        .unwrap();
        let obs = clause_observables(&f);
        let c = cfg(1.0, 1.0);
        let mut rho = DensityMatrix::uniform_superposition(4);
        for step in 1..=40 {
            let ps = projectors_at(&obs, 0.04 * step as f64);
            for p in &ps {
                average_map_in_place(&mut rho, p, &c);
            }
        }
        assert!(rho.matrix().hermiticity_error() < 1e-12);
        assert!(rho.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn lindblad_fixed_point_and_trace() {
        let f = two_qubit_unique();
        let th = 1.1;
        let projs = projectors_at(&clause_observables(&f), th);
        let sol = eq32_solution(th).to_density();
        let next = lindblad_step(&sol, &projs, 1.0, 0.01);
        assert!(next.matrix().max_abs_diff(sol.matrix()) < 1e-14);
        let rho = DensityMatrix::uniform_superposition(2);
        let raw = lindblad_increment(&rho, &projs, 1.0, 0.01);
        assert_abs_diff_eq!(raw.trace(), 1.0, epsilon = 1e-12);
        lindblad_step(&rho, &projs, 1.0, 0.01).validate().unwrap();
    }

    #[test]
    fn single_clause_coherence_decay() {
        // one-qubit clause (b1) at fixed θ: the coherence between the two
        // X eigenstates decays as e^(−t/2τ)
        let f = CnfFormula::from_signed(1, &[&[1]]).unwrap();
        let o = &clause_observables(&f)[0];
        let th = 0.5;
        let p = o.projector(th);
        let w = o.violating_weights(th);
        let viol = PureState::new(w.clone()).unwrap();
        let ok = PureState::new(vec![-w[1], w[0]]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = PureState::normalized(
            ok.amplitudes().iter().zip(viol.amplitudes()).map(|(a, b)| (a + b) * s).collect(),
        )
        .unwrap();
        let mut rho = psi.to_density();
        let (tau, dt, steps) = (1.0, 1e-4, 20_000);
        for _ in 0..steps {
            rho = lindblad_step(&rho, std::slice::from_ref(&p), tau, dt);
        }
        let t = dt * steps as f64;
        let coh: C64 = ok
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                viol.amplitudes().iter().enumerate().map(|(j, b)| a.conj() * rho.matrix().get(i, j) * b).sum::<C64>()
            })
            .sum();
        assert_abs_diff_eq!(coh.norm(), 0.5 * (-t / (2.0 * tau)).exp(), epsilon = 1e-4);
    }

    #[test]
    fn heun_converges_faster_than_euler() {
        let f = two_qubit_unique();
        let projs = projectors_at(&clause_observables(&f), 0.9);
        let rho0 = DensityMatrix::uniform_superposition(2);
        let run = |dt: f64, heun: bool| {
            let mut rho = rho0.clone();
            for _ in 0..(1.0 / dt).round() as usize {
                rho = if heun {
                    lindblad_step_heun(&rho, &projs, 1.0, dt)
                } else {
                    lindblad_step(&rho, &projs, 1.0, dt)
                };
            }
            rho
        };
        let reference = run(1e-4, true);
        let e_euler = trace_distance(&run(0.05, false), &reference);
        let e_heun = trace_distance(&run(0.05, true), &reference);
        assert!(e_heun < 0.1 * e_euler, "heun {e_heun} euler {e_euler}");
        let e_half = trace_distance(&run(0.025, false), &reference);
        let order = (e_euler / e_half).log2();
        assert!((order - 1.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn sme_solution_is_stationary() {
        let f = two_qubit_unique();
        let th = 0.8;
        let projs = projectors_at(&clause_observables(&f), th);
        let sol = eq32_solution(th);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 2000;
        let dt = 0.01;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let mut rho = sol.to_density();
            let r = sme_step(&mut rho, &projs, 1.0, dt, &mut rng);
            assert!(rho.matrix().max_abs_diff(sol.to_density().matrix()) < 1e-13);
            for (s, x) in sums.iter_mut().zip(&r) {
                *s += x;
            }
        }
        let tol = 3.0 * (1.0 / dt / n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64 - 1.0).abs() < tol);
        }
    }

    #[test]
    fn kernels_preserve_state_properties() {
        let f = two_qubit_unique();
        let obs = clause_observables(&f);
        let c = cfg(1.0, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sme = DensityMatrix::maximally_mixed(2);
        let mut kraus = DensityMatrix::maximally_mixed(2);
        let mut avg = DensityMatrix::maximally_mixed(2);
        let mut lme = DensityMatrix::maximally_mixed(2);
        let steps = 300;
        for step in 1..=steps {
            let projs = projectors_at(&obs, 1.5 * step as f64 / steps as f64);
            sme_step(&mut sme, &projs, 1.0, 0.01, &mut rng);
            lindblad_step_in_place(&mut lme, &projs, 1.0, 0.01);
            for p in &projs {
                kraus_measure_in_place(&mut kraus, p, &c, &mut rng);
                average_map_in_place(&mut avg, p, &c);
            }
            // Euler–Maruyama is not positivity preserving; only Hermiticity
            // and trace are guaranteed for the stochastic step
            assert!(sme.matrix().hermiticity_error() < 1e-10);
            assert_abs_diff_eq!(sme.trace(), 1.0, epsilon = 1e-9);
            kraus.validate().unwrap();
            avg.validate().unwrap();
            lme.validate().unwrap();
        }
    }

    #[test]
    fn sme_zero_noise_is_pure_dissipation() {
        let f = CnfFormula::from_signed(1, &[&[-1]]).unwrap();
        let p = clause_observables(&f)[0].projector(0.6);
        let rho0 = DensityMatrix::uniform_superposition(1);
        let mut rho = rho0.clone();
        let mut lme = rho0.clone();
        for _ in 0..500 {
            sme_step_with_increments(&mut rho, std::slice::from_ref(&p), 1.0, 0.01, &[0.0]);
            lme = lindblad_step(&lme, std::slice::from_ref(&p), 1.0, 0.01);
        }
        assert!(trace_distance(&rho, &lme) < 1e-12);
    }

    #[test]
    fn sme_constant_record_matches_reference_ode() {
        // Feeding a fixed record r₀ (dW = (r₀ − ⟨X⟩/√τ)dt) turns the step into
        // a nonlinear ODE; for one qubit and one clause the violation
        // probability obeys ṗ = −(2/√τ) p(1−p)(r₀ − (1−2p)/√τ).
        let f = CnfFormula::from_signed(1, &[&[1]]).unwrap();
        let p = clause_observables(&f)[0].projector(0.9);
        let (tau, r0, t_end): (f64, f64, f64) = (1.0, 0.3, 2.0);
        let rhs = |x: f64| -2.0 / tau.sqrt() * x * (1.0 - x) * (r0 - (1.0 - 2.0 * x) / tau.sqrt());
        let rho0 = DensityMatrix::uniform_superposition(1);
        let mut x = rho0.violation_probability(&p);
        let h = 1e-4;
        for _ in 0..(t_end / h).round() as usize {
            let k1 = rhs(x);
            let k2 = rhs(x + 0.5 * h * k1);
            let k3 = rhs(x + 0.5 * h * k2);
            let k4 = rhs(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let run = |dt: f64| {
            let mut rho = rho0.clone();
            for _ in 0..(t_end / dt).round() as usize {
                let ex = 1.0 - 2.0 * rho.violation_probability(&p);
                let dw = (r0 - ex / tau.sqrt()) * dt;
                sme_step_with_increments(&mut rho, std::slice::from_ref(&p), tau, dt, &[dw]);
            }
            rho.violation_probability(&p)
        };
        let e1 = (run(1e-2) - x).abs();
        let e2 = (run(5e-3) - x).abs();
        assert!(e2 < 1e-3, "error {e2}");
        assert!(e2 < 0.7 * e1, "no first-order convergence: {e1} -> {e2}");
    }

    #[test]
    fn pure_and_density_kraus_agree() {
        let f = two_qubit_unique();
        let p = clause_observables(&f)[1].projector(0.3);
        let c = cfg(1.0, 0.5);
        let psi = PureState::uniform(2);
        for &r in &[-2.0, 0.1, 1.4] {
            let mut a = psi.clone();
            apply_readout(&mut a, &p, &c, r);
            let mut b = psi.to_density();
            apply_readout(&mut b, &p, &c, r);
            assert_abs_diff_eq!(fidelity_pure(&b, &a).unwrap(), 1.0, epsilon = 1e-12);
        }
    }
}

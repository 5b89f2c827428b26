//! Dense complex linear algebra for small qubit registers.
//!
//! Basis ordering: qubit 1 is the leftmost tensor factor, so it is the most
//! significant bit of a basis index (`|q1 q2 … qn⟩`, ascending binary order).
//!
//! The readout axis is `Ẑ = |1⟩⟨1| − |0⟩⟨0|`, the negative of the textbook
//! `σ_z`. With the encoding rotation a `true` variable lands on `|1⟩` at
//! θ = π/2, so `Ẑ = +1` means `true`.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("qubit {qubit} out of range 1..={n}")]
    InvalidQubit { qubit: usize, n: usize },
    #[error("qubit {0} targeted twice")]
    DuplicateTarget(usize),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace {0} differs from 1")]
    TraceNotOne(f64),
    #[error("minimum eigenvalue {0:e} is negative")]
    NotPositive(f64),
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("operation requires {expected} qubits, state has {got}")]
    WrongQubitCount { expected: usize, got: usize },
}

pub(crate) fn log2_exact(dim: usize) -> Result<usize, LinalgError> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(LinalgError::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if data.len() != dim * dim {
            return Err(LinalgError::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_real(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let data = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), dim, "matrix must be square");
                r.iter().map(|&x| C64::new(x, 0.0))
            })
            .collect();
        Self { dim, data }
    }

    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        let dim = a.len();
        assert_eq!(dim, b.len());
        let mut data = Vec::with_capacity(dim * dim);
        for x in a {
            for y in b {
                data.push(x * y.conj());
            }
        }
        Self { dim, data }
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            let out_row = &mut out.data[i * d..(i + 1) * d];
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &other.data[k * d..(k + 1) * d];
                for (o, b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut err: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                err = err.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        err
    }

    /// `(A + A†) / 2`
    pub fn hermitize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            self.data[i * d + i].im = 0.0;
            for j in i + 1..d {
                let avg = (self.data[i * d + j] + self.data[j * d + i].conj()) * 0.5;
                self.data[i * d + j] = avg;
                self.data[j * d + i] = avg.conj();
            }
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.to_nalgebra().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Principal square root of a positive semidefinite Hermitian matrix;
    /// negative eigenvalues are clipped to zero.
    pub fn psd_sqrt(&self) -> Self {
        let eig = self.to_nalgebra().symmetric_eigen();
        let d = self.dim;
        let mut out = Self::zeros(d);
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            if s == 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            for i in 0..d {
                for j in 0..d {
                    out.data[i * d + j] += v[i] * v[j].conj() * s;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim, b.dim);
    let d = da * db;
    let mut out = ComplexMatrix::zeros(d);
    for i in 0..da {
        for j in 0..da {
            let x = a.data[i * da + j];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out.data[(i * db + k) * d + j * db + l] = x * b.data[k * db + l];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Bit of a basis index that carries qubit `q` (1-based) in an `n`-qubit register.
pub(crate) fn qubit_bit(q: usize, n: usize) -> usize {
    1usize << (n - q)
}

fn check_targets(targets: &[usize], n: usize) -> Result<(), LinalgError> {
    for (i, &t) in targets.iter().enumerate() {
        if t == 0 || t > n {
            return Err(LinalgError::InvalidQubit { qubit: t, n });
        }
        if targets[..i].contains(&t) {
            return Err(LinalgError::DuplicateTarget(t));
        }
    }
    Ok(())
}

/// Offsets of every target-bit pattern, indexed so that `targets[0]` is the
/// most significant bit of the local index.
fn target_offsets(targets: &[usize], n: usize) -> Vec<usize> {
    let k = targets.len();
    (0..1usize << k)
        .map(|local| {
            targets.iter().enumerate().fold(0usize, |acc, (q, &t)| {
                if (local >> (k - 1 - q)) & 1 == 1 {
                    acc | qubit_bit(t, n)
                } else {
                    acc
                }
            })
        })
        .collect()
}

/// Full `2ⁿ` operator acting as `op` on `targets` (in the listed order) and
/// as the identity elsewhere.
pub fn embed_on_qubits(op: &ComplexMatrix, targets: &[usize], n: usize) -> Result<ComplexMatrix, LinalgError> {
    check_targets(targets, n)?;
    let k = targets.len();
    if op.dim != 1 << k {
        return Err(LinalgError::DimensionMismatch { expected: 1 << k, got: op.dim });
    }
    let d = 1usize << n;
    let offsets = target_offsets(targets, n);
    let tmask: usize = offsets.iter().fold(0, |a, &o| a | o);
    let mut out = ComplexMatrix::zeros(d);
    for base in (0..d).filter(|b| b & tmask == 0) {
        for (li, &oi) in offsets.iter().enumerate() {
            for (lj, &oj) in offsets.iter().enumerate() {
                out.data[(base | oi) * d + (base | oj)] = op.data[li * op.dim + lj];
            }
        }
    }
    Ok(out)
}

/// Rank-`2^(n-k)` projector `|w⟩⟨w| ⊗ 1` with `|w⟩` a normalized `k`-qubit
/// vector on a subset of qubits. Applied without forming the dense matrix.
#[derive(Debug, Clone)]
pub struct LocalProjector {
    n: usize,
    offsets: Vec<usize>,
    bases: Vec<usize>,
    weights: Vec<C64>,
}

impl LocalProjector {
    pub fn new(targets: &[usize], n: usize, weights: Vec<C64>) -> Result<Self, LinalgError> {
        check_targets(targets, n)?;
        if weights.len() != 1 << targets.len() {
            return Err(LinalgError::DimensionMismatch { expected: 1 << targets.len(), got: weights.len() });
        }
        let offsets = target_offsets(targets, n);
        let tmask: usize = offsets.iter().fold(0, |a, &o| a | o);
        let bases = (0..1usize << n).filter(|b| b & tmask == 0).collect();
        Ok(Self { n, offsets, bases, weights })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    /// Swap in a new `|w⟩` on the same targets; the index tables are reused.
    pub fn set_weights(&mut self, weights: &[C64]) {
        assert_eq!(weights.len(), self.weights.len());
        self.weights.copy_from_slice(weights);
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let d = 1usize << self.n;
        let mut out = ComplexMatrix::zeros(d);
        for &base in &self.bases {
            for (wi, &oi) in self.weights.iter().zip(&self.offsets) {
                for (wj, &oj) in self.weights.iter().zip(&self.offsets) {
                    out.data[(base | oi) * d + (base | oj)] = wi * wj.conj();
                }
            }
        }
        out
    }

    /// `P|ψ⟩`
    pub fn apply_vec(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for &base in &self.bases {
            let amp: C64 = self
                .weights
                .iter()
                .zip(&self.offsets)
                .map(|(w, &o)| w.conj() * psi[base | o])
                .sum();
            for (w, &o) in self.weights.iter().zip(&self.offsets) {
                out[base | o] = w * amp;
            }
        }
        out
    }

    /// In place `ψ ← aψ + cPψ`.
    pub fn combine_vec(&self, psi: &mut [C64], a: f64, c: f64) {
        for &base in &self.bases {
            let amp: C64 = self
                .weights
                .iter()
                .zip(&self.offsets)
                .map(|(w, &o)| w.conj() * psi[base | o])
                .sum::<C64>()
                * c;
            for (w, &o) in self.weights.iter().zip(&self.offsets) {
                let x = &mut psi[base | o];
                *x = *x * a + w * amp;
            }
        }
    }

    /// `⟨ψ|P|ψ⟩`
    pub fn expectation_vec(&self, psi: &[C64]) -> f64 {
        self.bases
            .iter()
            .map(|&base| {
                self.weights
                    .iter()
                    .zip(&self.offsets)
                    .map(|(w, &o)| w.conj() * psi[base | o])
                    .sum::<C64>()
                    .norm_sqr()
            })
            .sum()
    }

    /// `P M`
    pub fn apply_left(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let d = m.dim;
        let mut out = ComplexMatrix::zeros(d);
        let mut amp = vec![C64::new(0.0, 0.0); d];
        for &base in &self.bases {
            amp.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
            for (w, &o) in self.weights.iter().zip(&self.offsets) {
                let wc = w.conj();
                for (a, x) in amp.iter_mut().zip(m.row(base | o)) {
                    *a += wc * x;
                }
            }
            for (w, &o) in self.weights.iter().zip(&self.offsets) {
                let r = base | o;
                for (y, a) in out.data[r * d..(r + 1) * d].iter_mut().zip(&amp) {
                    *y = w * a;
                }
            }
        }
        out
    }

    /// `M P`
    pub fn apply_right(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let d = m.dim;
        let mut out = ComplexMatrix::zeros(d);
        for r in 0..d {
            let row = m.row(r);
            let out_row = &mut out.data[r * d..(r + 1) * d];
            for &base in &self.bases {
                let amp: C64 = self
                    .weights
                    .iter()
                    .zip(&self.offsets)
                    .map(|(w, &o)| row[base | o] * w)
                    .sum();
                for (w, &o) in self.weights.iter().zip(&self.offsets) {
                    out_row[base | o] = amp * w.conj();
                }
            }
        }
        out
    }

    /// `Tr(P M)`
    pub fn trace_with(&self, m: &ComplexMatrix) -> C64 {
        let d = m.dim;
        let mut acc = C64::new(0.0, 0.0);
        for &base in &self.bases {
            for (wi, &oi) in self.weights.iter().zip(&self.offsets) {
                for (wj, &oj) in self.weights.iter().zip(&self.offsets) {
                    acc += wi.conj() * m.data[(base | oi) * d + (base | oj)] * wj;
                }
            }
        }
        acc
    }
}

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(amps: Vec<C64>) -> Result<Self, LinalgError> {
        let n = log2_exact(amps.len())?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(LinalgError::NotNormalized(norm));
        }
        Ok(Self { n, amps })
    }

    /// Normalizes `amps` before wrapping.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self, LinalgError> {
        let n = log2_exact(amps.len())?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n, amps })
    }

    pub fn basis(n: usize, idx: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[idx] = C64::new(1.0, 0.0);
        Self { n, amps }
    }

    /// `|+⟩^⊗n`
    pub fn uniform(n: usize) -> Self {
        let a = C64::new((1usize << n) as f64, 0.0).sqrt().inv();
        Self { n, amps: vec![a; 1 << n] }
    }

    pub fn product(factors: &[[C64; 2]]) -> Self {
        let amps = factors.iter().fold(vec![C64::new(1.0, 0.0)], |acc, f| kron_vec(&acc, f));
        Self { n: factors.len(), amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn renormalize(&mut self) {
        let norm = self.norm();
        self.amps.iter_mut().for_each(|a| *a /= norm);
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { n: self.n, mat: ComplexMatrix::outer(&self.amps, &self.amps) }
    }

    pub fn basis_probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Hermitian, unit-trace, positive semidefinite `2ⁿ × 2ⁿ` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Checked constructor; see [`DensityMatrix::validate`].
    pub fn new(mat: ComplexMatrix) -> Result<Self, LinalgError> {
        let n = log2_exact(mat.dim)?;
        let rho = Self { n, mat };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(mat: ComplexMatrix) -> Self {
        let n = mat.dim.trailing_zeros() as usize;
        Self { n, mat }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1usize << n;
        Self { n, mat: ComplexMatrix::identity(d).scale_real(1.0 / d as f64) }
    }

    pub fn uniform_superposition(n: usize) -> Self {
        PureState::uniform(n).to_density()
    }

    /// Probabilistic mixture of pure states.
    pub fn mixture(parts: &[(f64, &PureState)]) -> Result<Self, LinalgError> {
        let n = parts.first().map(|(_, s)| s.n).unwrap_or(0);
        let mut mat = ComplexMatrix::zeros(1 << n);
        for (p, s) in parts {
            mat.axpy(*p, &s.to_density().mat);
        }
        Self::new(mat)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mat.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn renormalize(&mut self) {
        let tr = self.trace();
        self.mat.data.iter_mut().for_each(|z| *z /= tr);
    }

    pub fn hermitize(&mut self) {
        self.mat.hermitize();
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        op.matmul(&self.mat).trace()
    }

    pub fn basis_probabilities(&self) -> Vec<f64> {
        (0..self.mat.dim).map(|i| self.mat.get(i, i).re).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat.hermitian_eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn validate(&self) -> Result<(), LinalgError> {
        let herm = self.mat.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(LinalgError::TraceNotOne(tr));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(LinalgError::NotPositive(min));
        }
        Ok(())
    }

    /// `U ρ U†`
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self { n: self.n, mat: u.matmul(&self.mat).matmul(&u.adjoint()) }
    }
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
    rho.mat.data.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨φ|ρ|φ⟩`
pub fn fidelity_pure(rho: &DensityMatrix, phi: &PureState) -> Result<f64, LinalgError> {
    if rho.n != phi.n {
        return Err(LinalgError::WrongQubitCount { expected: rho.n, got: phi.n });
    }
    let rphi = rho.mat.apply(&phi.amps);
    Ok(phi.amps.iter().zip(&rphi).map(|(a, b)| a.conj() * b).sum::<C64>().re)
}

pub fn pauli_y() -> ComplexMatrix {
    let i = C64::new(0.0, 1.0);
    ComplexMatrix::from_vec(2, vec![C64::new(0.0, 0.0), -i, i, C64::new(0.0, 0.0)]).expect("2x2")
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])
}

/// Textbook `σ_z = |0⟩⟨0| − |1⟩⟨1|`.
pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, -1.0]])
}

/// Readout axis `Ẑ = |1⟩⟨1| − |0⟩⟨0|`.
pub fn readout_z() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[-1.0, 0.0], &[0.0, 1.0]])
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence_2q(rho: &DensityMatrix) -> Result<f64, LinalgError> {
    if rho.n != 2 {
        return Err(LinalgError::WrongQubitCount { expected: 2, got: rho.n });
    }
    let yy = kron(&pauli_y(), &pauli_y());
    let tilde = yy.matmul(&rho.mat.conj()).matmul(&yy);
    let s = rho.mat.psd_sqrt();
    let mut m = s.matmul(&tilde).matmul(&s);
    m.hermitize();
    let mut lam: Vec<f64> = m.hermitian_eigenvalues().into_iter().map(|x| x.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

/// Single-qubit reduced state of qubit `keep` (1-based).
pub fn reduced_density(rho: &DensityMatrix, keep: usize) -> Result<DensityMatrix, LinalgError> {
    let n = rho.n;
    if keep == 0 || keep > n {
        return Err(LinalgError::InvalidQubit { qubit: keep, n });
    }
    let bit = qubit_bit(keep, n);
    let mut out = ComplexMatrix::zeros(2);
    for base in (0..rho.dim()).filter(|i| i & bit == 0) {
        for a in 0..2 {
            for b in 0..2 {
                let r = base | if a == 1 { bit } else { 0 };
                let c = base | if b == 1 { bit } else { 0 };
                out.data[a * 2 + b] += rho.mat.get(r, c);
            }
        }
    }
    Ok(DensityMatrix { n: 1, mat: out })
}

/// `Tr(ρ Ẑ_j)`: +1 when qubit `j` sits in `|1⟩`.
pub fn local_z(rho: &DensityMatrix, j: usize) -> Result<f64, LinalgError> {
    let n = rho.n;
    if j == 0 || j > n {
        return Err(LinalgError::InvalidQubit { qubit: j, n });
    }
    let bit = qubit_bit(j, n);
    Ok((0..rho.dim())
        .map(|i| {
            let p = rho.mat.get(i, i).re;
            if i & bit != 0 {
                p
            } else {
                -p
            }
        })
        .sum())
}

/// `½ ‖ρ − σ‖₁`
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let mut diff = &a.mat - &b.mat;
    diff.hermitize();
    0.5 * diff.hermitian_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn swap() -> ComplexMatrix {
        ComplexMatrix::from_real(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
    }

    #[test]
    fn kron_basics() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let xx = kron(&pauli_x(), &pauli_x());
        assert!(xx.matmul(&xx).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
        let p0 = ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let p1 = ComplexMatrix::from_real(&[&[0.0, 0.0], &[0.0, 1.0]]);
        let m = kron(&p0, &p1);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == 1 && j == 1 { 1.0 } else { 0.0 };
                assert_eq!(m.get(i, j), c(expect));
            }
        }
    }

    #[test]
    fn embed_single_and_pair() {
        let z1 = embed_on_qubits(&pauli_z(), &[1], 2).unwrap();
        assert_eq!(z1, kron(&pauli_z(), &ComplexMatrix::identity(2)));
        let p00 = ComplexMatrix::diagonal(&[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let big = embed_on_qubits(&p00, &[1, 2], 3).unwrap();
        let rank = big.hermitian_eigenvalues().iter().filter(|&&x| x > 0.5).count();
        assert_eq!(rank, 2);
        assert!(matches!(embed_on_qubits(&pauli_z(), &[3], 2), Err(LinalgError::InvalidQubit { .. })));
        assert!(matches!(embed_on_qubits(&p00, &[1, 1], 2), Err(LinalgError::DuplicateTarget(1))));
        assert!(matches!(
            embed_on_qubits(&p00, &[1], 2),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn embed_order_matches_swap_conjugation() {
        // arbitrary non-symmetric 2-qubit operator
        let data: Vec<C64> = (0..16).map(|i| C64::new(i as f64 * 0.3 - 1.0, (i % 5) as f64 * 0.1)).collect();
        let op = ComplexMatrix::from_vec(4, data).unwrap();
        let ab = embed_on_qubits(&op, &[1, 2], 2).unwrap();
        let ba = embed_on_qubits(&op, &[2, 1], 2).unwrap();
        let s = swap();
        assert!(ba.max_abs_diff(&s.matmul(&ab).matmul(&s)) < 1e-14);
    }

    #[test]
    fn local_projector_matches_dense() {
        let w = vec![c(0.6), C64::new(0.0, 0.8) * c(0.5), c(0.0), C64::new(0.3, 0.4) * c(0.5)];
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let w: Vec<C64> = w.iter().map(|z| z / norm).collect();
        let proj = LocalProjector::new(&[3, 1], 3, w.clone()).unwrap();
        let dense_local = ComplexMatrix::outer(&w, &w);
        let dense = embed_on_qubits(&dense_local, &[3, 1], 3).unwrap();
        assert!(proj.to_matrix().max_abs_diff(&dense) < 1e-14);
        let m = ComplexMatrix::from_vec(8, (0..64).map(|i| C64::new((i * 7 % 11) as f64, (i % 3) as f64)).collect()).unwrap();
        assert!(proj.apply_left(&m).max_abs_diff(&dense.matmul(&m)) < 1e-12);
        assert!(proj.apply_right(&m).max_abs_diff(&m.matmul(&dense)) < 1e-12);
        assert_abs_diff_eq!(proj.trace_with(&m).re, dense.matmul(&m).trace().re, epsilon = 1e-12);
        let psi = PureState::normalized((0..8).map(|i| C64::new(i as f64, 1.0)).collect()).unwrap();
        let pv = proj.apply_vec(psi.amplitudes());
        let dv = dense.apply(psi.amplitudes());
        for (a, b) in pv.iter().zip(&dv) {
            assert!((a - b).norm() < 1e-12);
        }
        let e = psi.to_density().expectation(&dense).re;
        assert_abs_diff_eq!(proj.expectation_vec(psi.amplitudes()), e, epsilon = 1e-12);
    }

    #[test]
    fn purity_examples() {
        assert_abs_diff_eq!(purity(&DensityMatrix::maximally_mixed(2)), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(purity(&DensityMatrix::uniform_superposition(3)), 1.0, epsilon = 1e-14);
        let a = PureState::basis(2, 0);
        let b = PureState::basis(2, 3);
        let mix = DensityMatrix::mixture(&[(0.5, &a), (0.5, &b)]).unwrap();
        assert_abs_diff_eq!(purity(&mix), 0.5, epsilon = 1e-15);
        let eig_sum: f64 = mix.eigenvalues().iter().map(|x| x * x).sum();
        assert_abs_diff_eq!(purity(&mix), eig_sum, epsilon = 1e-10);
    }

    fn bell_psi_plus() -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(vec![c(0.0), c(s), c(s), c(0.0)]).unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let ten = PureState::basis(2, 0b10);
        assert_abs_diff_eq!(fidelity_pure(&ten.to_density(), &ten).unwrap(), 1.0, epsilon = 1e-15);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_abs_diff_eq!(fidelity_pure(&mixed, &bell_psi_plus()).unwrap(), 0.25, epsilon = 1e-15);
        let bell = bell_psi_plus().to_density();
        assert_abs_diff_eq!(fidelity_pure(&bell, &PureState::basis(2, 0b01)).unwrap(), 0.5, epsilon = 1e-15);
        assert!(fidelity_pure(&bell, &PureState::basis(1, 0)).is_err());
    }

    #[test]
    fn concurrence_examples() {
        let product = PureState::product(&[[c(0.6), c(0.8)], [c(1.0), c(0.0)]]).to_density();
        assert_abs_diff_eq!(concurrence_2q(&product).unwrap(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(concurrence_2q(&bell_psi_plus().to_density()).unwrap(), 1.0, epsilon = 1e-7);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let minus = PureState::new(vec![c(0.0), c(s), c(-s), c(0.0)]).unwrap();
        assert_abs_diff_eq!(concurrence_2q(&minus.to_density()).unwrap(), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(concurrence_2q(&DensityMatrix::maximally_mixed(2)).unwrap(), 0.0, epsilon = 1e-7);
        assert!(concurrence_2q(&DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn reduced_density_examples() {
        let a = [c(0.6), c(0.8)];
        let product = PureState::product(&[a, [c(0.0), c(1.0)]]).to_density();
        let r1 = reduced_density(&product, 1).unwrap();
        let expect = ComplexMatrix::outer(&a, &a);
        assert!(r1.matrix().max_abs_diff(&expect) < 1e-15);
        let rb = reduced_density(&bell_psi_plus().to_density(), 2).unwrap();
        assert!(rb.matrix().max_abs_diff(&DensityMatrix::maximally_mixed(1).mat) < 1e-15);
        let rho = DensityMatrix::uniform_superposition(3);
        for q in 1..=3 {
            assert_abs_diff_eq!(reduced_density(&rho, q).unwrap().trace(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn local_z_convention() {
        let ten = PureState::basis(2, 0b10).to_density();
        assert_abs_diff_eq!(local_z(&ten, 1).unwrap(), 1.0);
        assert_abs_diff_eq!(local_z(&ten, 2).unwrap(), -1.0);
        assert_abs_diff_eq!(local_z(&DensityMatrix::uniform_superposition(1), 1).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(local_z(&DensityMatrix::maximally_mixed(2), 2).unwrap(), 0.0);
        assert!(local_z(&ten, 3).is_err());
    }

    #[test]
    fn validate_rejects_bad_states() {
        let mut m = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m.set(0, 1, c(0.1));
        assert!(matches!(DensityMatrix::new(m.clone()), Err(LinalgError::NotHermitian(_))));
        let m2 = ComplexMatrix::identity(2);
        assert!(matches!(DensityMatrix::new(m2), Err(LinalgError::TraceNotOne(_))));
        let m3 = ComplexMatrix::diagonal(&[c(1.5), c(-0.5)]);
        assert!(matches!(DensityMatrix::new(m3), Err(LinalgError::NotPositive(_))));
        assert!(matches!(PureState::new(vec![c(1.0), c(1.0)]), Err(LinalgError::NotNormalized(_))));
        assert!(matches!(PureState::new(vec![c(1.0); 3]), Err(LinalgError::NotPowerOfTwo(3))));
    }

    #[test]
    fn trace_distance_basics() {
        let a = PureState::basis(1, 0).to_density();
        let b = PureState::basis(1, 1).to_density();
        assert_abs_diff_eq!(trace_distance(&a, &b), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(trace_distance(&a, &a), 0.0, epsilon = 1e-14);
    }
}

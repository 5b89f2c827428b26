//! Measurement-driven k-SAT: each clause becomes a θ-dependent qubit
//! observable whose −1 outcome means "violated". Slowly rotating θ from 0 to
//! π/2 while measuring every clause drags the register from |+⟩⊗ⁿ into the
//! solution subspace by the Zeno effect.
//!
//! Layers, bottom up:
//!
//! * [`satcore`]: CNF formulas, DIMACS, exhaustive oracle, random instances.
//! * [`qlinalg`]: dense states, local projectors, purity/fidelity/concurrence.
//! * [`encoding`]: clause observables, schedules, solution states.
//! * [`dynamics`]: Kraus measurements, averaged map, Lindblad and SME steps.
//! * [`herald`]: exponential filters and failure detection.
//! * [`solver`]: the averaged, heralded and restart loops plus readout.
//! * [`metrics`]: TTS, phase-transition curves, λ fits.
//! * [`cli`]: experiment specs, CSV output and the `zeno-ksat` binary.
//!
//! Conventions: qubit 1 is the most significant bit of a basis index; a true
//! variable is |1⟩ at θ = π/2 and the character `0` in a bitstring.

pub mod qlinalg;
pub mod satcore;
pub mod encoding;
pub mod dynamics;
pub mod herald;
pub mod solver;
pub mod metrics;
pub mod cli;

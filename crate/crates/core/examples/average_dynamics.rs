//! Averaged (unrecorded) Zeno dragging on the two-qubit 2-SAT problem with a
//! unique solution: final fidelity, purity and concurrence as the dragging
//! time grows. Γ = 1/4τ.
//!
//! cargo run --release --example average_dynamics [-- dt]

use zeno_ksat::qlinalg::{concurrence_2q, fidelity_pure, purity, PureState};
use zeno_ksat::satcore::{enumerate_solutions, two_qubit_unique};
use zeno_ksat::solver::{run_average, Mode, RunConfig};

fn main() {
    let dt: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.02);
    let f = two_qubit_unique();
    let s = enumerate_solutions(&f).unwrap().unique().unwrap().clone();
    let target = PureState::basis(2, s.basis_index());
    println!("solution {} (bitstring {})", s.to_tf(), s.to_bitstring());
    println!("{:>8} {:>10} {:>10} {:>10} {:>8} {:>8}", "ΓT_f", "fidelity", "purity", "concurr.", "z1", "z2");
    for gamma_tf in [1.0f64, 10.0, 100.0, 1e3, 1e4] {
        let t_f = 4.0 * gamma_tf;
        let out = run_average(&f, &RunConfig::new(Mode::Average, 1.0, t_f.max(dt), dt)).unwrap();
        let st = out.final_state.unwrap();
        let rho = st.to_density();
        println!(
            "{:>8} {:>10.6} {:>10.6} {:>10.6} {:>8.4} {:>8.4}",
            gamma_tf,
            fidelity_pure(&rho, &target).unwrap(),
            purity(&rho),
            concurrence_2q(&rho).unwrap(),
            st.local_z(1),
            st.local_z(2),
        );
    }
}

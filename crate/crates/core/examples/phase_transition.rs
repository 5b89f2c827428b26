//! Probability of deciding satisfiability correctly across clause densities
//! for random 2-SAT at small n. A dip appears around the satisfiability
//! threshold, and it fills in as the dragging time grows.
//!
//! cargo run --release --example phase_transition [-- instances]

use zeno_ksat::cli::generate_instances;
use zeno_ksat::metrics::{phase_transition_curve, InstanceSet};
use zeno_ksat::solver::{Mode, RunConfig};

fn main() {
    let instances: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let (k, n) = (2, 5);
    let alphas = [0.4, 0.8, 1.2, 1.6, 2.0, 2.4, 3.0];
    let sets: Vec<InstanceSet> = alphas
        .iter()
        .map(|&alpha| InstanceSet { k, n, alpha, formulas: generate_instances(5, k, n, alpha, instances, false).unwrap() })
        .collect();
    let base = RunConfig::new(Mode::Average, 1.0, 1.0, 0.1);
    let rows = phase_transition_curve(&sets, &base, &[1.0, 5.0, 20.0], 1, 0, 5).unwrap();
    println!("{:>5} {:>6} {:>6} {:>8} {:>8}", "T_f", "alpha", "P_sat", "P_succ", "±");
    for r in rows {
        println!(
            "{:>5} {:>6} {:>6.3} {:>8.3} {:>8.3}",
            r.t_f,
            r.alpha,
            r.n_sat as f64 / r.n_prob as f64,
            r.p_succ,
            r.std_err
        );
    }
}

//! Conditioned trajectories against the averaged master equation: the mean
//! of many stochastic runs approaches the Lindblad state, while single
//! trajectories stay nearly pure.
//!
//! cargo run --release --example sme_vs_lindblad [-- trajectories]

use zeno_ksat::dynamics::{lindblad_step_in_place, sme_step};
use zeno_ksat::encoding::{clause_observables, projectors_at, retarget, Schedule};
use zeno_ksat::qlinalg::{purity, trace_distance, ComplexMatrix, DensityMatrix};
use zeno_ksat::satcore::two_qubit_unique;
use zeno_ksat::solver::stream_rng;

fn main() {
    let count: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let f = two_qubit_unique();
    let obs = clause_observables(&f);
    let (tau, t_f, dt) = (1.0, 10.0, 0.01);
    let sched = Schedule::linear(t_f).unwrap();
    let steps = sched.num_steps(dt);
    let start = DensityMatrix::uniform_superposition(2);

    let mut avg = start.clone();
    let mut trajs = vec![start; count];
    let mut rngs: Vec<_> = (0..count as u64).map(|i| stream_rng(21, i)).collect();
    let mut ps = projectors_at(&obs, 0.0);
    println!("{:>6} {:>12} {:>14} {:>14}", "t", "trace dist", "Lindblad pur.", "mean traj pur.");
    for c in 1..=steps {
        retarget(&obs, &mut ps, sched.theta_at_step(c, steps));
        lindblad_step_in_place(&mut avg, &ps, tau, dt);
        for (rho, rng) in trajs.iter_mut().zip(rngs.iter_mut()) {
            sme_step(rho, &ps, tau, dt, rng);
        }
        if c % (steps / 10) == 0 {
            let mut sum = ComplexMatrix::zeros(4);
            for r in &trajs {
                sum.axpy(1.0 / count as f64, r.matrix());
            }
            let mean = DensityMatrix::new(sum).unwrap();
            let mean_purity = trajs.iter().map(purity).sum::<f64>() / count as f64;
            println!("{:>6.1} {:>12.4} {:>14.4} {:>14.4}", c as f64 * dt, trace_distance(&mean, &avg), purity(&avg), mean_purity);
        }
    }
}

//! Exponential growth of the 99% time to solution with problem size for
//! unique-solution 3-SAT, fitted as TTS ∝ λⁿ, for averaged and heralded
//! dragging at a few run times.
//!
//! cargo run --release --example tts_scaling [-- instances]

use zeno_ksat::cli::generate_instances;
use zeno_ksat::metrics::{fit_lambda, tts_scaling};
use zeno_ksat::solver::{Mode, RunConfig};

fn main() {
    let instances: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let groups: Vec<_> = (3..=6).map(|n| (n, generate_instances(2, 3, n, 4.26, instances, true).unwrap())).collect();
    for (mode, trajectories) in [(Mode::Average, 0), (Mode::HeraldedRestart, 100)] {
        for t_f in [1.0, 5.0, 20.0] {
            let cfg = RunConfig::new(mode, 1.0, t_f, 0.1);
            let pts = tts_scaling(&groups, &cfg, trajectories, 7).unwrap();
            let fit = fit_lambda(&pts.iter().map(|p| (p.n, p.tts_99)).collect::<Vec<_>>()).unwrap();
            let p_s: Vec<String> = pts.iter().map(|p| format!("{:.3}", p.p_s)).collect();
            println!("{mode:?} T_f = {t_f:>4}: P_s by n {p_s:?}, λ = {:.3} ± {:.3}", fit.lambda, fit.std_err);
        }
    }
}

//! Full solver pipeline on a random 3-SAT instance with a unique solution:
//! heralded dragging with restarts, final readout, classical verification.
//!
//! cargo run --release --example restart_solver [-- n seed]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zeno_ksat::satcore::{enumerate_solutions, random_unique_solution_instance};
use zeno_ksat::solver::{run_full, Mode, RunConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let f = random_unique_solution_instance(n, 4.26, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let answer = enumerate_solutions(&f).unwrap().unique().unwrap().to_bitstring();
    println!("n = {n}, m = {}, solution {answer}", f.num_clauses());

    let cfg = RunConfig::new(Mode::HeraldedRestart, 1.0, 60.0, 0.05).with_readout(4.0);
    for shot in 0..10 {
        let out = run_full(&f, &cfg.clone().with_seed(seed * 100 + shot)).unwrap();
        println!(
            "shot {shot}: {} restarts, time {:.1}, read {}, verified {}",
            out.failures,
            out.consumed_time,
            out.candidate.clone().unwrap_or_default(),
            out.verified
        );
        if out.verified {
            break;
        }
    }
}

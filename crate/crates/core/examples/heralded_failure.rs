//! One heralded trajectory on the two-qubit problem with a clause failure
//! forced at t0. Prints the filtered clause signals against the threshold
//! until the run is aborted.
//!
//! cargo run --release --example heralded_failure [-- seed]

use zeno_ksat::satcore::two_qubit_unique;
use zeno_ksat::solver::{run_heralded_single, stream_rng, Mode, ProjectAt, RunConfig};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let f = two_qubit_unique();
    let mut cfg = RunConfig::new(Mode::HeraldedSingle, 1.0, 100.0, 0.05);
    cfg.trace_every = 20;
    let filter = cfg.filter_config();
    let t0 = 50.0;
    println!("T_be = {}, r_th = {:.4}, failure forced at t = {t0}", filter.t_be, filter.r_th);

    let mut inj = ProjectAt { attempt: 0, step: (t0 / cfg.dt).round() as usize, clause: 0 };
    let out = run_heralded_single(&f, &cfg, &mut inj, &mut stream_rng(seed, 0)).unwrap();
    println!("{:>7} {:>7} {:>7} {:>8} {:>8} {:>8}", "t", "z1", "z2", "r̄1", "r̄2", "r̄3");
    for p in out.diagnostics.iter().filter(|p| p.t >= t0 - 5.0) {
        let r = p.filtered.clone().unwrap_or_default();
        println!("{:>7.2} {:>7.3} {:>7.3} {:>8.3} {:>8.3} {:>8.3}", p.t, p.z[0], p.z[1], r[0], r[1], r[2]);
    }
    match out.failed_at {
        Some(t) => println!("heralded at t = {t:.2} ({:.2} T_be after the failure)", (t - t0) / filter.t_be),
        None => println!("not heralded"),
    }
}

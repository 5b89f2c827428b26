//! Final-readout statistics and time to solution. Compares sampled readouts
//! with the exact success probability, then shows how the required number
//! of runs depends on the readout duration.
//!
//! cargo run --release --example readout_tts

use zeno_ksat::metrics::{n_star, tts_99, tts_with_readout};
use zeno_ksat::satcore::{evaluate, two_qubit_unique};
use zeno_ksat::solver::{readout, run_average, stream_rng, success_probability, Mode, RunConfig};

fn main() {
    let f = two_qubit_unique();
    let t_f = 20.0;
    let st = run_average(&f, &RunConfig::new(Mode::Average, 1.0, t_f, 0.02)).unwrap().final_state.unwrap();
    println!("z = ({:.4}, {:.4}) after T_f = {t_f}", st.local_z(1), st.local_z(2));
    println!("{:>6} {:>9} {:>9} {:>4} {:>10}", "Δt_m", "exact", "sampled", "N★", "TTS(99%)");
    let shots = 20_000u64;
    for dt_m in [0.1, 0.5, 1.0, 2.0, 5.0, f64::INFINITY] {
        let p = success_probability(&st, &f, 1.0, dt_m).unwrap();
        let hits = (0..shots)
            .filter(|&i| evaluate(&f, &readout(&st, 1.0, dt_m, &mut stream_rng(9, i)).1).unwrap())
            .count();
        let cost = if dt_m.is_finite() { tts_with_readout(p, 0.99, t_f, dt_m) } else { tts_99(p, t_f) };
        println!("{dt_m:>6} {p:>9.5} {:>9.5} {:>4} {cost:>10.2}", hits as f64 / shots as f64, n_star(p, 0.99));
    }
}

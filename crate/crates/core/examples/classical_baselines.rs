//! Instance handling and the classical side: DIMACS round trip, exhaustive
//! solution counting and Schöning's random walk on generated instances.
//!
//! cargo run --release --example classical_baselines [-- n]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zeno_ksat::satcore::{enumerate_solutions, parse_dimacs, random_instance, schoening_solve};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    println!("{:>6} {:>10} {:>12} {:>10}", "alpha", "solutions", "schoening", "flips cap");
    for alpha in [2.0, 3.0, 4.0, 4.26, 5.0, 6.0] {
        let f = random_instance(n, alpha, 3, &mut rng).unwrap();
        let back = parse_dimacs(&f.to_dimacs()).unwrap();
        assert_eq!(back, f);
        let count = enumerate_solutions(&f).unwrap().count();
        let found = schoening_solve(&f, 3 * n, 200, &mut rng);
        println!(
            "{alpha:>6} {count:>10} {:>12} {:>10}",
            found.map(|a| a.to_bitstring()).unwrap_or_else(|| "-".into()),
            3 * n
        );
    }
}

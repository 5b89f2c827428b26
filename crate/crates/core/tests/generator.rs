//! Statistical checks on the random instance generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zeno_ksat::satcore::{clause_count, random_instance};

#[test]
fn literal_signs_and_variables_are_uniform() {
    let (n, k) = (12, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut per_var = vec![0usize; n];
    let (mut neg, mut total) = (0usize, 0usize);
    for _ in 0..400 {
        let f = random_instance(n, 4.0, k, &mut rng).unwrap();
        assert_eq!(f.num_clauses(), clause_count(n, 4.0));
        for c in f.clauses() {
            let mut vars: Vec<usize> = c.literals().iter().map(|l| l.var).collect();
            vars.dedup();
            assert_eq!(vars.len(), k, "variables within a clause are distinct");
            for l in c.literals() {
                per_var[l.var - 1] += 1;
                neg += usize::from(l.negated);
                total += 1;
            }
        }
    }
    // sign balance within 4σ of a fair coin
    let sigma = (total as f64 * 0.25).sqrt();
    assert!((neg as f64 - total as f64 / 2.0).abs() < 4.0 * sigma, "{neg}/{total} negated");
    // variable occupation: Pearson χ² with n − 1 = 11 dof, 99.9% point ≈ 31.3
    let expected = total as f64 / n as f64;
    let chi2: f64 = per_var.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 31.3, "chi2 = {chi2}");
}

#[test]
fn clause_count_rounds_half_up() {
    assert_eq!(clause_count(5, 4.3), 22);
    assert_eq!(clause_count(4, 0.625), 3);
    assert_eq!(clause_count(10, 4.26), 43);
}

mod common;

use common::{check_gradient, random_instance};
use spatial_transcoder::cost::{CostCoefficients, Term};

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for seed in 0..100 {
        let (problem, t) = random_instance(seed);
        let check = check_gradient(&problem, &t);
        assert!(check.max_rel_error < 1e-5, "seed {seed}: relative error {}", check.max_rel_error);
        worst = worst.max(check.max_rel_error);
        skipped += check.skipped;
    }
    assert!(skipped < 60, "{skipped} entries skipped near kinks");
    eprintln!("worst relative error {worst:.3e}");
}

#[test]
fn each_term_alone_has_a_consistent_gradient() {
    for term in Term::ALL {
        for seed in 0..10 {
            let (problem, t) = random_instance(1000 + seed);
            let mut c = CostCoefficients { l_max_db: problem.coefficients.l_max_db, ..Default::default() };
            c.set(term, 1.0);
            if c.validate().is_err() {
                c.c_e = 1.0;
            }
            let problem = problem.with_coefficients(c).unwrap();
            let check = check_gradient(&problem, &t);
            assert!(check.max_rel_error < 1e-5, "{} seed {seed}: {}", term.name(), check.max_rel_error);
        }
    }
}

#[test]
fn smoothed_cost_has_a_consistent_gradient() {
    for seed in 0..20 {
        let (problem, t) = random_instance(2000 + seed);
        let mut c = problem.coefficients.clone();
        c.smoothing = 0.05;
        let problem = problem.with_coefficients(c).unwrap();
        let check = check_gradient(&problem, &t);
        assert!(check.max_rel_error < 1e-5, "seed {seed}: {}", check.max_rel_error);
    }
}


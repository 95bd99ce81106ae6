mod common;

use common::*;
use cpc::trainer::MntpTarget;

#[test]
fn contrastive_gradients_match_finite_differences() {
    for seed in 0..20 {
        for (t, literal) in [(1.0, false), (0.3, false), (1.0, true)] {
            let e = contrastive_grad_error(seed, t, literal);
            assert!(e < 1e-4, "seed {seed} T {t} literal {literal}: {e}");
        }
    }
}

#[test]
fn mntp_gradients_match_finite_differences() {
    for seed in 0..5 {
        for target in [MntpTarget::NextToken, MntpTarget::SamePosition] {
            let e = mntp_grad_error(seed, target);
            assert!(e < 1e-4, "seed {seed} {target:?}: {e}");
        }
    }
}

#[test]
fn full_objective_gradients_match_finite_differences() {
    for seed in 0..3 {
        let e = objective_grad_error(seed);
        assert!(e < 1e-4, "seed {seed}: {e}");
    }
}

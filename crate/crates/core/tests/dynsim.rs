mod common;

use certds::dynsim::{falsify, safe_rollout_check};
use certds::learner::{warm_start, LearnResult};
use certds::poly::{Polynomial, PolynomialVector};
use certds::semialg::{ball_set, BoundingBox};
use proptest::prelude::*;

fn decay_result() -> LearnResult {
    let rhs = common::linear([[-1.0, 0.0], [0.0, -1.0]]);
    let ds = common::dataset(&rhs, &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.1, 30);
    warm_start(&ds, 1e-3).unwrap()
}

#[test]
fn falsify_finds_hand_built_violations() {
    let mut r = decay_result();
    r.b = Some(Polynomial::constant(2, -1.0));
    let x0 = ball_set(&[-0.5, 0.0], 0.1).unwrap();
    let xu = vec![ball_set(&[0.5, 0.5], 0.2).unwrap()];
    let domain = BoundingBox::symmetric(2, 1.0);
    let rep = falsify(&r, Some(&x0), &xu, &domain, 500, 3).unwrap();
    assert!(rep.condition("barrier_initial").unwrap().passed);
    let unsafe0 = rep.condition("barrier_unsafe_0").unwrap();
    assert!(!unsafe0.passed);
    assert!((unsafe0.worst_margin + 1.0).abs() < 1e-3, "{}", unsafe0.worst_margin);
    assert!(!unsafe0.counterexamples.is_empty());
    assert!(rep.condition("lyapunov_positive").unwrap().passed);

    r.v = Polynomial::var(2, 0).pow(2);
    let rep = falsify(&r, None, &[], &domain, 500, 3).unwrap();
    let pos = rep.condition("lyapunov_positive").unwrap();
    assert!(!pos.passed && pos.worst_margin < 0.0);
}

#[test]
fn rollouts_catch_field_through_obstacle() {
    let mut r = decay_result();
    // Constant drift to the right, straight through the obstacle.
    r.f = PolynomialVector::new(vec![Polynomial::constant(2, 1.0), Polynomial::zero(2)]).unwrap();
    r.b = Some(Polynomial::constant(2, -1.0));
    let x0 = ball_set(&[-0.5, 0.0], 0.05).unwrap();
    let xu = vec![ball_set(&[0.3, 0.0], 0.15).unwrap()];
    let rep = safe_rollout_check(&r, &x0, &xu, 10, 1e-2, 2.0, 1).unwrap();
    assert!(!rep.passed);
    assert_eq!(rep.barrier_crossings, 0);
    let v = rep.violation.unwrap();
    assert_eq!(v.unsafe_set, 0);
    assert!(v.time > 0.5 && v.time < 1.0, "{}", v.time);
}

#[test]
fn rollout_check_requires_barrier() {
    let r = decay_result();
    let x0 = ball_set(&[-0.5, 0.0], 0.05).unwrap();
    assert!(safe_rollout_check(&r, &x0, &[], 1, 1e-2, 1.0, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn falsify_is_deterministic(seed in any::<u64>(), a in -1.0f64..1.0) {
        let mut r = decay_result();
        r.v = &Polynomial::var(2, 0).pow(2) + &Polynomial::var(2, 1).pow(2).scale(a);
        let domain = BoundingBox::symmetric(2, 1.0);
        let one = falsify(&r, None, &[], &domain, 300, seed).unwrap();
        let two = falsify(&r, None, &[], &domain, 300, seed).unwrap();
        prop_assert_eq!(one, two);
    }

    #[test]
    fn more_samples_never_hide_a_failure(seed in any::<u64>(), a in -0.05f64..0.05, n in 50usize..400) {
        let mut r = decay_result();
        r.v = &Polynomial::var(2, 0).pow(2) + &Polynomial::var(2, 1).pow(2).scale(a);
        let domain = BoundingBox::symmetric(2, 1.0);
        let small = falsify(&r, None, &[], &domain, n, seed).unwrap();
        let large = falsify(&r, None, &[], &domain, 2 * n, seed).unwrap();
        for c in &small.conditions {
            if !c.passed {
                prop_assert!(!large.condition(&c.label).unwrap().passed, "{}", c.label);
            }
        }
    }
}

mod common;

use common::binomial_upper_tail;
use proptest::prelude::*;
use pufcheck::stat::hypothesis_test;

#[test]
fn tail_matches_direct_summation() {
    for &(c1, c2) in &[(1u64, 0u64), (5, 5), (30, 10), (120, 80), (400, 390), (1000, 700)] {
        for &eps in &[0.0, 0.1, 0.5, 0.69, 1.2, 2.0] {
            let p = hypothesis_test(c1, c2, 2000, eps).unwrap();
            let want = binomial_upper_tail(c1, c1 + c2, 1.0 / (1.0 + (-eps).exp()));
            let tol = 1e-9 + 1e-7 * want;
            assert!((p - want).abs() <= tol, "c1={} c2={} eps={}: {} vs {}", c1, c2, eps, p, want);
        }
    }
}

proptest! {
    #[test]
    fn p_value_grows_with_epsilon(c1 in 0u64..300, c2 in 0u64..300, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = hypothesis_test(c1, c2, 1000, lo).unwrap();
        let p_hi = hypothesis_test(c1, c2, 1000, hi).unwrap();
        prop_assert!(p_lo <= p_hi + 1e-12);
        prop_assert!((0.0..=1.0).contains(&p_lo));
    }

    #[test]
    fn p_value_falls_as_the_first_count_grows(c1 in 1u64..300, c2 in 0u64..300, eps in 0.0f64..2.0) {
        let a = hypothesis_test(c1, c2, 1000, eps).unwrap();
        let b = hypothesis_test(c1 + 1, c2, 1000, eps).unwrap();
        prop_assert!(b <= a + 1e-12);
    }
}

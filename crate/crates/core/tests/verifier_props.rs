mod common;

use common::{brute_force_max_ratio, r, random_hmm};
use proptest::prelude::*;

use pufcheck::algebra::Rational;
use pufcheck::hmm::{Feasibility, InformationState};
use pufcheck::mechanisms::{build_geometric_hmm, build_noisy_max_hmm, GeometricSpec, NoisyMaxSpec, NoisyMaxVariant};
use pufcheck::scenario::{dp_neighbor_pairs, LabeledPair};
use pufcheck::smt::SolverConfig;
use pufcheck::verifier::{check_pair_exact, verify, Backend, BackendUsed, VerdictKind, VerificationQuery, VerifyOptions};

fn holds(h: &pufcheck::hmm::Hmm, pi: &InformationState, tau: &InformationState, c: &Rational, k: usize) -> bool {
    check_pair_exact(&VerificationQuery::new(h, pi, tau, c.clone(), k)).unwrap().holds
}

#[test]
fn the_exact_maximum_ratio_is_the_threshold() {
    let tiny = r(1, 1_000_000_000);
    let models = [
        build_geometric_hmm(&GeometricSpec::half()).unwrap(),
        build_geometric_hmm(&GeometricSpec::quarter()).unwrap(),
        build_noisy_max_hmm(&NoisyMaxSpec::new(NoisyMaxVariant::Improved, 3)).unwrap(),
    ];
    for h in &models {
        for p in dp_neighbor_pairs(h, h.dp_adjacency()).unwrap().iter().take(8) {
            for k in 1..=2 {
                let Some(m) = brute_force_max_ratio(h, &p.pi, &p.tau, k) else { continue };
                assert!(holds(h, &p.pi, &p.tau, &m, k), "{} k={} at {}", p.label, k, m);
                if m > Rational::one() {
                    assert!(!holds(h, &p.pi, &p.tau, &(&m - &tiny), k), "{} k={} below {}", p.label, k, m);
                }
            }
        }
    }
}

fn ratio() -> impl Strategy<Value = Rational> {
    (0i64..40, 1i64..10).prop_map(|(a, b)| &Rational::one() + &r(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn verdicts_are_monotone_in_the_bound(
        (h, a) in random_hmm(),
        b in prop::collection::vec(0u8..4, 1..5),
        c1 in ratio(),
        c2 in ratio(),
        k in 1usize..3,
    ) {
        prop_assume!(b.len() == a.len() && b.iter().any(|&w| w > 0));
        let total: i64 = b.iter().map(|&w| w as i64).sum();
        let pi = InformationState::from_rationals(a).unwrap();
        let tau = InformationState::from_rationals(b.iter().map(|&w| r(w as i64, total)).collect()).unwrap();
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        if holds(&h, &pi, &tau, &lo, k) {
            prop_assert!(holds(&h, &pi, &tau, &hi, k));
        }
        match brute_force_max_ratio(&h, &pi, &tau, k) {
            Some(m) => prop_assert_eq!(holds(&h, &pi, &tau, &lo, k), lo >= m),
            None => prop_assert!(!holds(&h, &pi, &tau, &hi, k)),
        }
    }
}

#[test]
fn solver_and_exact_search_agree() {
    let solver = SolverConfig::default();
    if !solver.is_available() {
        eprintln!("z3 not found; skipping");
        return;
    }
    let h = build_geometric_hmm(&GeometricSpec::half()).unwrap();
    let mut pairs = dp_neighbor_pairs(&h, h.dp_adjacency()).unwrap();
    pairs.push(LabeledPair {
        label: "0 vs 2".into(),
        pi: h.point_mass("0").unwrap(),
        tau: h.point_mass("2").unwrap(),
        side_conditions: Vec::new(),
    });
    for c in [r(3, 2), r(2, 1), r(4, 1)] {
        for policy in [Feasibility::Any, Feasibility::Both] {
            let base = VerifyOptions::ratio(c.clone()).k_range(1, 2).policy(policy);
            let exact = verify(&h, &pairs, &base.clone().backend(Backend::Exact)).unwrap();
            let smt = verify(&h, &pairs, &base.backend(Backend::Smt).solver(solver.clone())).unwrap();
            assert_eq!(exact.queries.len(), smt.queries.len());
            for (e, s) in exact.queries.iter().zip(&smt.queries) {
                assert_eq!(s.backend, BackendUsed::Smt);
                assert_eq!(e.verdict, s.verdict, "{} k={} c={}", e.query.pair, e.query.k, c);
                if s.verdict == VerdictKind::Violation {
                    let cex = s.counterexample.as_ref().unwrap();
                    let ids = h.parse_sequence(&cex.sequence).unwrap();
                    let pair = pairs.iter().find(|p| p.label == s.query.pair).unwrap();
                    let cert =
                        pufcheck::verifier::certify_counterexample(&h, &pair.pi, &pair.tau, &c, &ids, None).unwrap();
                    assert!(cert.valid);
                }
            }
        }
    }
}

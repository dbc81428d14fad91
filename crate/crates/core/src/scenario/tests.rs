use super::*;
use crate::algebra::{assignment, Rational};
use crate::hmm::sequence_probability;
use crate::mechanisms::{build_geometric_hmm, build_noisy_max_hmm, GeometricSpec, NoisyMaxSpec, NoisyMaxVariant};

fn fig1() -> Hmm {
    build_geometric_hmm(&GeometricSpec::half()).unwrap()
}

fn consts(is: &InformationState) -> Vec<Rational> {
    is.as_rationals().unwrap()
}

#[test]
fn contagious_pair_conditions_to_point_masses() {
    let h = fig1();
    let sc = contagious_pair_scenario();
    let qs = scenario_queries(&sc, &h).unwrap();
    assert_eq!(qs.len(), 2);
    let z = Rational::zero();
    let o = Rational::one();
    assert_eq!(consts(&qs[0].pi), vec![o.clone(), z.clone(), z.clone()]);
    assert_eq!(consts(&qs[0].tau), vec![z.clone(), z.clone(), o.clone()]);
    assert_eq!(consts(&qs[1].pi), vec![z.clone(), z.clone(), o.clone()]);
    assert_eq!(consts(&qs[1].tau), vec![o, z.clone(), z]);
}

#[test]
fn independent_prior_conditioned_on_john() {
    let h = fig1();
    let sc = independent_count_scenario();
    let qs = scenario_queries(&sc, &h).unwrap();
    assert_eq!(qs.len(), 1);
    let p = Poly::param("p");
    let one = Poly::one();
    let two = Poly::constant(Rational::from(2));
    let q = &one - &p;
    let pi = qs[0].pi.weights();
    assert_eq!(pi[0], RatFn::from_poly(&q * &q));
    assert_eq!(pi[1], RatFn::from_poly((&p * &q).scale(&Rational::from(2))));
    assert_eq!(pi[2], RatFn::from_poly(&p * &p));
    let tau = qs[0].tau.weights();
    assert!(tau[0].is_zero());
    assert_eq!(tau[1], RatFn::new(&two - &p.scale(&Rational::from(2)), &two - &p).unwrap());
    assert_eq!(tau[2], RatFn::new(p.clone(), &two - &p).unwrap());
    assert_eq!(qs[0].side_conditions.len(), 1);
}

#[test]
fn table_one_zero_entries() {
    let sc = independent_count_scenario();
    let h = with_scenario_params(&fig1(), &sc);
    let qs = scenario_queries(&sc, &h).unwrap();
    let p = Poly::param("p");
    let seq = [h.obs_id("~0").unwrap()];
    let from_pi = sequence_probability(&h, &qs[0].pi, &seq).unwrap();
    let expect_pi = (&(&(&p * &p) - &p.scale(&Rational::from(4))) + &Poly::constant(Rational::from(4)))
        .scale(&Rational::frac(1, 6));
    assert_eq!(from_pi, RatFn::from_poly(expect_pi));
    let from_tau = sequence_probability(&h, &qs[0].tau, &seq).unwrap();
    let num = &Poly::constant(Rational::from(4)) - &p.scale(&Rational::from(3));
    let den = &Poly::constant(Rational::from(12)) - &p.scale(&Rational::from(6));
    assert_eq!(from_tau, RatFn::new(num, den).unwrap());
}

#[test]
fn full_support_secret_gives_prior() {
    let h = fig1();
    let sc = independent_count_scenario();
    let c = condition_prior(&sc.priors[0], sc.secret("any").unwrap(), &sc.state_of, &h).unwrap();
    assert!(c.side_condition.is_none());
    for (w, d) in c.state.weights().iter().zip(["0", "1", "2"]) {
        assert_eq!(*w, RatFn::from_poly(sc.priors[0].probs[d].clone()));
    }
}

#[test]
fn singleton_secret_gives_point_mass() {
    let h = fig1();
    let sc = contagious_pair_scenario();
    let s = Secret { name: "only".into(), datasets: ["11".to_string()].into_iter().collect() };
    let c = condition_prior(&sc.priors[0], &s, &sc.state_of, &h).unwrap();
    assert_eq!(c.state, InformationState::point_mass(3, 2));
}

#[test]
fn zero_probability_secret_is_rejected() {
    let h = fig1();
    let mut probs = BTreeMap::new();
    probs.insert("00".to_string(), Poly::one());
    let theta = DatasetPrior { name: "sure".into(), probs };
    let sc = contagious_pair_scenario();
    let err = condition_prior(&theta, sc.secret("c").unwrap(), &sc.state_of, &h).unwrap_err();
    assert!(matches!(err, ScenarioError::UndefinedConditional { .. }));
}

#[test]
fn empty_pairs_and_adjacency() {
    let h = fig1();
    let mut sc = contagious_pair_scenario();
    sc.pairs.clear();
    assert!(scenario_queries(&sc, &h).unwrap().is_empty());
    assert!(dp_neighbor_pairs(&h, &[]).unwrap().is_empty());
}

#[test]
fn counting_adjacency_pairs() {
    let h = fig1();
    let pairs = dp_neighbor_pairs(&h, h.dp_adjacency()).unwrap();
    assert_eq!(pairs.len(), 7);
    assert!(pairs.iter().any(|p| p.label == "0 vs 1"));
    assert!(!pairs.iter().any(|p| p.label == "0 vs 2"));
    assert!(dp_neighbor_pairs(&h, &[("0".into(), "9".into())]).is_err());
}

#[test]
fn entry_changes_match_coordinatewise_rule() {
    let generated: BTreeSet<(String, String)> = entry_change_adjacency(2, 3).into_iter().collect();
    let h = build_noisy_max_hmm(&NoisyMaxSpec::new(NoisyMaxVariant::Improved, 3)).unwrap();
    let rule: BTreeSet<(String, String)> = h.dp_adjacency().iter().cloned().collect();
    assert_eq!(generated, rule);
}

#[test]
fn contagious_disease_conditioning_drops_its_parameter() {
    let h = build_noisy_max_hmm(&NoisyMaxSpec::new(NoisyMaxVariant::Improved, 3)).unwrap();
    let sc = disease_scenario(Correlation::Contagious, 2);
    let qs = scenario_queries(&sc, &h).unwrap();
    let at = |pc: Rational| {
        let a = assignment([("pA", Rational::frac(1, 2)), ("pB", Rational::frac(1, 2)), ("pC", pc)]);
        (consts(&qs[0].pi.instantiate(&a).unwrap()), consts(&qs[1].pi.instantiate(&a).unwrap()))
    };
    let (has, not) = at(Rational::frac(1, 3));
    assert_eq!(at(Rational::frac(4, 5)), (has.clone(), not.clone()));
    assert_eq!(has[h.state_id("112").unwrap()], Rational::frac(1, 4));
    assert_eq!(not[h.state_id("110").unwrap()], Rational::frac(1, 4));
    assert!(has[h.state_id("111").unwrap()].is_zero());
    assert_eq!(has.iter().sum::<Rational>(), Rational::one());
}

#[test]
fn independent_disease_matches_count_conditioning() {
    let h = build_noisy_max_hmm(&NoisyMaxSpec::new(NoisyMaxVariant::Improved, 3)).unwrap();
    let sc = disease_scenario(Correlation::Independent, 0);
    let qs = scenario_queries(&sc, &h).unwrap();
    // Not-sick side, state 120: 2pA(1-pA)/((1-pA)^2 + 2pA(1-pA)) * pB^2 * (1-pC)^2.
    let a = assignment([("pA", Rational::frac(1, 3)), ("pB", Rational::frac(1, 5)), ("pC", Rational::frac(2, 7))]);
    let not_side = qs[1].pi.instantiate(&a).unwrap();
    let pa = Rational::frac(1, 3);
    let qa = &Rational::one() - &pa;
    let two = Rational::from(2);
    let num = &(&two * &pa) * &qa;
    let den = &(&qa * &qa) + &num;
    let expect = &(&(&num / &den) * &Rational::frac(1, 25)) * &Rational::frac(5, 7).pow(2);
    assert_eq!(consts(&not_side)[h.state_id("120").unwrap()], expect);
}

#[test]
fn scenario_json_round_trip() {
    let sc = disease_scenario(Correlation::Contagious, 2);
    let back = PufferfishScenario::from_json_str(&sc.to_json_string()).unwrap();
    assert_eq!(back, sc);
    let bad = r#"{"universe":["a"],"priors":[{"name":"t","probs":{"a":"1/2"}}],"secrets":[],"pairs":[],"state_of":{"a":"0"}}"#;
    assert!(matches!(PufferfishScenario::from_json_str(bad), Err(ScenarioError::PriorSum { .. })));
}

//! Independent oracles shared by the integration tests and the acceptance
//! harness. Nothing here calls the forward algorithm or the verifier.
#![allow(dead_code)]

use proptest::prelude::*;
use pufcheck::algebra::{Poly, Rational};
use pufcheck::hmm::{Feasibility, Hmm, HmmBuilder, InformationState};
use pufcheck::verifier::Direction;

/// Probability of `seq` as the sum over every state path of
/// `start(s0) O(s0,w0) P(s0,s1) O(s1,w1) ...`, walking the dense accessors.
pub fn path_sum(h: &Hmm, start: &[Rational], seq: &[usize]) -> Rational {
    fn walk(h: &Hmm, s: usize, weight: Rational, seq: &[usize], total: &mut Rational) {
        let e = h.o(s, seq[0]).as_constant().expect("concrete model");
        if e.is_zero() {
            return;
        }
        let weight = &weight * &e;
        if seq.len() == 1 {
            *total += &weight;
            return;
        }
        for t in 0..h.n_states() {
            let p = h.p(s, t).as_constant().expect("concrete model");
            if !p.is_zero() {
                walk(h, t, &weight * &p, &seq[1..], total);
            }
        }
    }
    let mut total = Rational::zero();
    if seq.is_empty() {
        return start.iter().sum();
    }
    for (s, w) in start.iter().enumerate() {
        if !w.is_zero() {
            walk(h, s, w.clone(), seq, &mut total);
        }
    }
    total
}

/// Every sequence of length `k` over `n` symbols, lexicographically.
pub fn all_sequences(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |w| {
                    let mut q = p.clone();
                    q.push(w);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn violates(p: &Rational, q: &Rational, c: &Rational, policy: Feasibility, direction: Direction) -> bool {
    let admitted = match policy {
        Feasibility::Any => !(p.is_zero() && q.is_zero()),
        Feasibility::Both => !p.is_zero() && !q.is_zero(),
    };
    if !admitted {
        return false;
    }
    let fwd = *p > c * q;
    let bwd = *q > c * p;
    match direction {
        Direction::Both => fwd || bwd,
        Direction::PiOverTau => fwd,
        Direction::TauOverPi => bwd,
    }
}

/// First violating length-`k` sequence in lexicographic order, by full
/// enumeration and path sums.
pub fn brute_force_first_violation(
    h: &Hmm,
    pi: &InformationState,
    tau: &InformationState,
    c: &Rational,
    k: usize,
    policy: Feasibility,
    direction: Direction,
) -> Option<(Vec<usize>, Rational, Rational)> {
    let a = pi.as_rationals().expect("concrete state");
    let b = tau.as_rationals().expect("concrete state");
    all_sequences(h.n_obs(), k).into_iter().find_map(|seq| {
        let p = path_sum(h, &a, &seq);
        let q = path_sum(h, &b, &seq);
        violates(&p, &q, c, policy, direction).then_some((seq, p, q))
    })
}

/// Largest ratio between the two path-sum probabilities over admitted
/// sequences; `None` if some sequence has one side zero.
pub fn brute_force_max_ratio(h: &Hmm, pi: &InformationState, tau: &InformationState, k: usize) -> Option<Rational> {
    let a = pi.as_rationals().expect("concrete state");
    let b = tau.as_rationals().expect("concrete state");
    let mut best = Rational::one();
    for seq in all_sequences(h.n_obs(), k) {
        let p = path_sum(h, &a, &seq);
        let q = path_sum(h, &b, &seq);
        match (p.is_zero(), q.is_zero()) {
            (true, true) => continue,
            (true, false) | (false, true) => return None,
            _ => {}
        }
        let r = if p > q { &p / &q } else { &q / &p };
        if r > best {
            best = r;
        }
    }
    Some(best)
}

/// Upper binomial tail `Pr[X >= c1]` for `X ~ Bin(n, q)`, summed term by
/// term in log space.
pub fn binomial_upper_tail(c1: u64, n: u64, q: f64) -> f64 {
    if c1 == 0 {
        return 1.0;
    }
    let mut lf = vec![0.0f64; n as usize + 1];
    for i in 1..=n as usize {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    let mut s = 0.0;
    for i in c1..=n {
        let ln_binom = lf[n as usize] - lf[i as usize] - lf[(n - i) as usize];
        s += (ln_binom + i as f64 * q.ln() + (n - i) as f64 * (1.0 - q).ln()).exp();
    }
    s.min(1.0)
}

pub fn r(n: i64, d: i64) -> Rational {
    Rational::frac(n, d)
}

/// Path-sum probabilities of every length-`k` sequence under both states.
pub fn path_table(h: &Hmm, pi: &InformationState, tau: &InformationState, k: usize) -> Vec<(Vec<usize>, Rational, Rational)> {
    let a = pi.as_rationals().expect("concrete state");
    let b = tau.as_rationals().expect("concrete state");
    all_sequences(h.n_obs(), k)
        .into_iter()
        .map(|seq| {
            let p = path_sum(h, &a, &seq);
            let q = path_sum(h, &b, &seq);
            (seq, p, q)
        })
        .collect()
}

pub struct Case {
    pub name: String,
    pub h: Hmm,
    pub pairs: Vec<(String, InformationState, InformationState)>,
}

/// Compares `check_pair_exact` with the path-sum oracle for every pair,
/// `k <= k_max`, bound, policy and direction. Returns the number of
/// comparisons and a description of each disagreement.
pub fn compare_with_oracle(cases: &[Case], k_max: usize, cs: &[Rational]) -> (usize, Vec<String>) {
    use pufcheck::verifier::{check_pair_exact, VerificationQuery};
    let mut checked = 0;
    let mut bad = Vec::new();
    for case in cases {
        for (label, pi, tau) in &case.pairs {
            for k in 1..=k_max {
                let table = path_table(&case.h, pi, tau, k);
                for c in cs {
                    for policy in [Feasibility::Any, Feasibility::Both] {
                        for direction in [Direction::Both, Direction::PiOverTau, Direction::TauOverPi] {
                            let expect = table.iter().find(|(_, p, q)| violates(p, q, c, policy, direction));
                            let q = VerificationQuery::new(&case.h, pi, tau, c.clone(), k)
                                .policy(policy)
                                .direction(direction);
                            let got = check_pair_exact(&q).expect("concrete query");
                            checked += 1;
                            let agree = match (expect, &got.counterexample) {
                                (None, None) => got.holds,
                                (Some((seq, p, q)), Some(cex)) => {
                                    !got.holds && &cex.indices == seq && &cex.p_pi == p && &cex.p_tau == q
                                }
                                _ => false,
                            };
                            if !agree {
                                bad.push(format!(
                                    "{} {} k={} c={} {:?} {:?}: oracle {:?}, checker {:?}",
                                    case.name,
                                    label,
                                    k,
                                    c,
                                    policy,
                                    direction,
                                    expect.map(|e| case.h.sequence_names(&e.0)),
                                    got.counterexample.as_ref().map(|x| x.sequence.clone())
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    (checked, bad)
}

fn dp_case(name: &str, h: Hmm, limit: usize) -> Case {
    use pufcheck::scenario::dp_neighbor_pairs;
    let pairs = dp_neighbor_pairs(&h, h.dp_adjacency())
        .expect("model adjacency")
        .into_iter()
        .take(limit)
        .map(|p| (p.label, p.pi, p.tau))
        .collect();
    Case { name: name.to_string(), h, pairs }
}

/// Models and pairs of the oracle test matrix. `wide` adds every neighbor
/// pair of the larger models.
pub fn oracle_cases(wide: bool) -> Vec<Case> {
    use pufcheck::mechanisms::*;
    use pufcheck::sat::{build_sat_hmm, Cnf};
    let limit = if wide { usize::MAX } else { 6 };
    let geo = build_geometric_hmm(&GeometricSpec::half()).unwrap();
    let mut fig1 = dp_case("geometric(1/2)", geo.clone(), usize::MAX);
    let mix = InformationState::from_rationals(vec![r(1, 2), r(1, 4), r(1, 4)]).unwrap();
    fig1.pairs.push(("0 vs 2".into(), geo.point_mass("0").unwrap(), geo.point_mass("2").unwrap()));
    fig1.pairs.push(("mix vs 1".into(), mix, geo.point_mass("1").unwrap()));
    let mut cases = vec![
        fig1,
        dp_case("geometric(1/4)", build_geometric_hmm(&GeometricSpec::quarter()).unwrap(), usize::MAX),
        dp_case(
            "naive noisy max",
            build_noisy_max_hmm(&NoisyMaxSpec::new(NoisyMaxVariant::Naive, 3)).unwrap(),
            limit,
        ),
        dp_case(
            "improved noisy max",
            build_noisy_max_hmm(&NoisyMaxSpec::new(NoisyMaxVariant::Improved, 3)).unwrap(),
            limit,
        ),
        dp_case("above threshold", build_above_threshold_hmm(&AboveThresholdSpec::default()).unwrap(), limit),
    ];
    let sat = build_sat_hmm(&Cnf::new(3, vec![vec![1, -2], vec![-1]]).unwrap()).unwrap();
    cases.push(Case { name: "sat reduction".into(), pairs: vec![("d1 vs d2".into(), sat.d1, sat.d2)], h: sat.h });
    cases
}

/// Neighboring stream pairs of length `len` over {0,1,2}: every coordinate
/// differs by at most one.
pub fn neighboring_streams(len: usize) -> Vec<(Vec<u32>, Vec<u32>)> {
    let streams: Vec<Vec<u32>> =
        all_sequences(3, len).into_iter().map(|s| s.into_iter().map(|v| v as u32).collect()).collect();
    let mut out = Vec::new();
    for a in &streams {
        for b in &streams {
            if a.iter().zip(b).all(|(x, y)| x.abs_diff(*y) <= 1) {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    out
}

/// For streams of length `n + 1`, compares the algorithm's probability of
/// `bot^n top` and `bot^(n+1)`, scaled by `(1/3)^(2n+1)`, with the model's
/// probability of the joint observation, on both copies and all thresholds.
/// Returns the number of comparisons and the disagreements.
pub fn lemma_scaling(n: usize, pairs: &[(Vec<u32>, Vec<u32>)]) -> (usize, Vec<String>) {
    use pufcheck::hmm::sequence_probability;
    use pufcheck::mechanisms::*;
    let spec = AboveThresholdSpec::default();
    let h = build_above_threshold_hmm(&spec).unwrap();
    let mspec = MechanismSpec::AboveThreshold(spec);
    let scale = r(1, 3).pow(2 * n as u32 + 1);
    let mut checked = 0;
    let mut bad = Vec::new();
    for (top, bottom) in pairs {
        for t in 0..=2u32 {
            let mut answers = vec![false; n + 1];
            for last in [true, false] {
                answers[n] = last;
                let obs = above_threshold_observation(top, bottom, &answers);
                let ids = h.parse_sequence(&obs).unwrap();
                let key: Vec<String> = answers.iter().map(|a| if *a { "top" } else { "bot" }.to_string()).collect();
                for (bottom_copy, values) in [(false, top), (true, bottom)] {
                    let alg = exact_output_distribution(&mspec, &MechanismInput::stream(t, values.clone()))
                        .unwrap()
                        .get(&key)
                        .cloned()
                        .unwrap_or_else(Rational::zero);
                    let start = h.point_mass(&AboveThresholdStates::initial(bottom_copy, t, values[0])).unwrap();
                    let model = sequence_probability(&h, &start, &ids).unwrap().as_constant().unwrap();
                    checked += 1;
                    if &alg * &scale != model {
                        bad.push(format!("t={} {:?}/{:?} {:?} copy {}: {} vs {}", t, top, bottom, key, bottom_copy, alg, model));
                    }
                }
            }
        }
    }
    (checked, bad)
}

/// Every clause over three variables with distinct variables, in a fixed
/// order: 6 unit, 12 binary and 8 ternary clauses.
pub fn all_clauses3() -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = Vec::new();
    for mask in 1u32..8 {
        let vars: Vec<i64> = (1..=3).filter(|v| mask & (1 << (v - 1)) != 0).collect();
        for signs in 0u32..(1 << vars.len()) {
            out.push(vars.iter().enumerate().map(|(i, v)| if signs & (1 << i) != 0 { -v } else { *v }).collect());
        }
    }
    out.sort_by_key(|c| c.len());
    out
}

/// All 3-variable formulas with one or two distinct clauses, then every
/// `stride`-th three-clause formula.
pub fn cnf_family(stride: usize) -> Vec<pufcheck::sat::Cnf> {
    use pufcheck::sat::Cnf;
    let cl = all_clauses3();
    let mut out = Vec::new();
    let mut triples = 0usize;
    for i in 0..cl.len() {
        out.push(Cnf::new(3, vec![cl[i].clone()]).unwrap());
        for j in i + 1..cl.len() {
            out.push(Cnf::new(3, vec![cl[i].clone(), cl[j].clone()]).unwrap());
            for k in j + 1..cl.len() {
                if triples % stride == 0 {
                    out.push(Cnf::new(3, vec![cl[i].clone(), cl[j].clone(), cl[k].clone()]).unwrap());
                }
                triples += 1;
            }
        }
    }
    out
}

/// Satisfiability by truth table.
pub fn truth_table_sat(f: &pufcheck::sat::Cnf) -> bool {
    (0u32..1 << f.n_vars).any(|m| {
        f.clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let v = m & (1 << (l.unsigned_abs() - 1)) != 0;
                if l > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    })
}

fn normalize(ws: &[u8]) -> Vec<Rational> {
    let total: i64 = ws.iter().map(|&w| w as i64).sum();
    if total == 0 {
        let mut v = vec![Rational::zero(); ws.len()];
        v[0] = Rational::one();
        return v;
    }
    ws.iter().map(|&w| r(w as i64, total)).collect()
}

/// Random concrete model: `n` states, `m` observations, weights in 0..4.
pub fn random_hmm() -> impl Strategy<Value = (Hmm, Vec<Rational>)> {
    (1usize..5, 1usize..4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..4, n), n),
            prop::collection::vec(prop::collection::vec(0u8..4, m), n),
            prop::collection::vec(0u8..4, n),
        )
            .prop_map(move |(trans, emit, start)| {
                let mut b = HmmBuilder::new();
                for s in 0..n {
                    b.state(&format!("s{}", s)).unwrap();
                }
                for o in 0..m {
                    b.observation(&format!("o{}", o)).unwrap();
                }
                for s in 0..n {
                    for (t, p) in normalize(&trans[s]).into_iter().enumerate() {
                        if !p.is_zero() {
                            b.transition(s, t, Poly::constant(p));
                        }
                    }
                    for (o, p) in normalize(&emit[s]).into_iter().enumerate() {
                        if !p.is_zero() {
                            b.emission(s, o, Poly::constant(p));
                        }
                    }
                }
                (b.build().unwrap(), normalize(&start))
            })
    })
}

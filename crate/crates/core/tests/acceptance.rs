//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Run with
//! `cargo test -p pufcheck-core --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{cnf_family, compare_with_oracle, lemma_scaling, neighboring_streams, oracle_cases, r, truth_table_sat};
use pufcheck::algebra::{assignment, Poly, RatFn, Rational};
use pufcheck::bound::{lower_bound, BoundRequest, BoundStatus};
use pufcheck::hmm::{grid_assignments, sequence_probability, Feasibility, Hmm, InformationState, ParamDomain};
use pufcheck::mechanisms::*;
use pufcheck::sat::{build_sat_hmm, max_gap};
use pufcheck::scenario::{
    disease_scenario, dp_neighbor_pairs, independent_count_scenario, scenario_queries, with_scenario_params,
    Correlation, LabeledPair,
};
use pufcheck::smt::SolverConfig;
use pufcheck::stat::{eps_grid, pvalue_curve, TestPlan};
use pufcheck::verifier::{
    certify_counterexample, check_pair_exact, verify, Backend, BackendUsed, Bound, VerdictKind, VerificationQuery,
    VerifyOptions,
};

/// Samples per input for the statistical curves.
const N_SELECT: u64 = 50_000;
const N_DETECT: u64 = 200_000;
const SEEDS: [u64; 3] = [1, 2, 3];
const SIGNIFICANCE: f64 = 0.05;
const CONFIDENT_PASS: f64 = 0.9;
/// Lower-bound bracket: eps_lo >= 1.232 - 0.001 and eps_hi <= 1.233 + 0.001.
const LB_LO: f64 = 1.231;
const LB_HI: f64 = 1.234;
const LB_WIDTH: f64 = 0.001;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fig1() -> Hmm {
    build_geometric_hmm(&GeometricSpec::half()).unwrap()
}

fn ratio(c: i64) -> VerifyOptions {
    VerifyOptions::ratio(Rational::from(c))
}

fn c1_emission_table() -> Check {
    let h = fig1();
    let want = [[r(2, 3), r(1, 6), r(1, 6)], [r(1, 3), r(1, 3), r(1, 3)], [r(1, 6), r(1, 6), r(2, 3)]];
    for (v, row) in want.iter().enumerate() {
        for (z, p) in row.iter().enumerate() {
            let got = h.o(h.state_id(&v.to_string()).unwrap(), h.obs_id(&tilde(z as u32)).unwrap());
            ensure(got == Poly::constant(p.clone()), format!("O({}, ~{}) = {}, want {}", v, z, got, p))?;
        }
    }
    Ok("9 entries exact".into())
}

fn c2_geometric_dp() -> Check {
    let h = fig1();
    let pairs = dp_neighbor_pairs(&h, h.dp_adjacency()).unwrap();
    let rep = verify(&h, &pairs, &ratio(2).k_range(1, 1)).unwrap();
    ensure(rep.verdict == VerdictKind::Holds, format!("verdict {:?}", rep.verdict))?;
    Ok(format!("{} neighbor pairs hold at c=2, k=1", pairs.len()))
}

fn c3_pufferfish_failure() -> Check {
    let h = fig1();
    let pi = InformationState::from_rationals(vec![r(1, 1), r(0, 1), r(0, 1)]).unwrap();
    let tau = InformationState::from_rationals(vec![r(0, 1), r(0, 1), r(1, 1)]).unwrap();
    let v = check_pair_exact(&VerificationQuery::new(&h, &pi, &tau, Rational::from(2), 1)).unwrap();
    let cex = v.counterexample.ok_or("no violation at c=2")?;
    ensure(["~0", "~2"].contains(&cex.sequence[0].as_str()), format!("witness {:?}", cex.sequence))?;
    let mut probs = [cex.p_pi.clone(), cex.p_tau.clone()];
    probs.sort();
    ensure(probs == [r(1, 6), r(2, 3)], format!("probabilities {} and {}", cex.p_pi, cex.p_tau))?;
    let v4 = check_pair_exact(&VerificationQuery::new(&h, &pi, &tau, Rational::from(4), 1)).unwrap();
    ensure(v4.holds, "violation at c=4")?;
    Ok(format!("witness {} with {} vs {}; holds at c=4", cex.unicode, cex.p_pi, cex.p_tau))
}

fn c4_symbolic_table() -> Check {
    let sc = independent_count_scenario();
    let h = with_scenario_params(&fig1(), &sc);
    let q = scenario_queries(&sc, &h).unwrap().remove(0);
    let p = Poly::param("p");
    let k = |n: i64| Poly::constant(Rational::from(n));
    let pp = &p * &p;
    let f = |num: Poly, den: Poly| RatFn::new(num, den).unwrap();
    let without = [
        f(&(&pp - &p.scale(&r(4, 1))) + &k(4), k(6)),
        f(&(&pp.scale(&r(-2, 1)) + &p.scale(&r(2, 1))) + &k(1), k(6)),
        f(&(&pp + &p.scale(&r(2, 1))) + &k(1), k(6)),
    ];
    let with = [
        f(&k(4) - &p.scale(&r(3, 1)), &k(12) - &p.scale(&r(6, 1))),
        f(&k(4) - &p.scale(&r(3, 1)), &k(12) - &p.scale(&r(6, 1))),
        f(k(2), &k(6) - &p.scale(&r(3, 1))),
    ];
    for z in 0..3u32 {
        let seq = [h.obs_id(&tilde(z)).unwrap()];
        let a = sequence_probability(&h, &q.pi, &seq).unwrap();
        let b = sequence_probability(&h, &q.tau, &seq).unwrap();
        ensure(a == without[z as usize], format!("~{} without John: {}", z, a))?;
        ensure(b == with[z as usize], format!("~{} with John: {}", z, b))?;
    }
    let domain = [ParamDomain::unit("p")];
    let tenths: Vec<Rational> = (1..=9).map(|i| r(i, 10)).collect();
    let points = grid_assignments(&domain, &tenths);
    for a in &points {
        let (hh, pi, tau) = (h.instantiate(a).unwrap(), q.pi.instantiate(a).unwrap(), q.tau.instantiate(a).unwrap());
        let v = check_pair_exact(&VerificationQuery::new(&hh, &pi, &tau, Rational::from(2), 1)).unwrap();
        ensure(v.holds, format!("c=2 fails at {:?}", a))?;
    }
    Ok(format!("6 identities; c=2 holds at {} grid points", points.len()))
}

fn c5_naive_noisy_max() -> Check {
    let h = build_noisy_max_hmm(&NoisyMaxSpec::new(NoisyMaxVariant::Naive, 3)).unwrap();
    let pairs = dp_neighbor_pairs(&h, h.dp_adjacency()).unwrap();
    let rep = verify(&h, &pairs, &ratio(2).k_range(2, 2)).unwrap();
    let witness = ["_".to_string(), tilde(1)];
    let mut hits = 0;
    let mut best = Rational::zero();
    for q in rep.queries.iter().filter(|q| q.verdict == VerdictKind::Violation) {
        let cex = q.counterexample.as_ref().unwrap();
        if cex.sequence != witness {
            continue;
        }
        let pair = pairs.iter().find(|p| p.label == q.query.pair).unwrap();
        let ids = h.parse_sequence(&cex.sequence).unwrap();
        let cert = certify_counterexample(&h, &pair.pi, &pair.tau, &Rational::from(2), &ids, None).unwrap();
        let ratio: Rational = cert.ratio.parse().map_err(|_| format!("ratio {}", cert.ratio))?;
        ensure(cert.valid && ratio > Rational::from(2), format!("certificate {:?}", cert))?;
        hits += 1;
        if ratio > best {
            best = ratio;
        }
    }
    ensure(hits > 0, "no pair violated with the blank, first-index witness")?;
    Ok(format!("{} pairs violate at (_, ~1); largest certified ratio {}", hits, best))
}

fn contagious_setup() -> (Hmm, Vec<LabeledPair>) {
    let sc = disease_scenario(Correlation::Contagious, 2);
    let base = build_noisy_max_hmm(&NoisyMaxSpec::new(NoisyMaxVariant::Improved, 3)).unwrap();
    let h = with_scenario_params(&base, &sc);
    let pairs = scenario_queries(&sc, &h).unwrap();
    (h, pairs)
}

fn c6_contagious_noisy_max() -> Check {
    let (h, pairs) = contagious_setup();
    let witness = h.parse_sequence(&["_".to_string(), tilde(3)]).unwrap();
    let half = assignment([("pA", r(1, 2)), ("pB", r(1, 2)), ("pC", r(1, 2))]);
    let certified_at = |a: &pufcheck::algebra::Assignment| -> bool {
        pairs.iter().any(|p| {
            certify_counterexample(&h, &p.pi, &p.tau, &Rational::from(2), &witness, Some(a)).map(|c| c.valid).unwrap_or(false)
        })
    };
    ensure(certified_at(&half), "(_, ~3) not a certified violation at pA=pB=pC=1/2")?;

    let mut notes = Vec::new();
    let solver = SolverConfig::default().with_timeout(Duration::from_secs(600));
    if solver.is_available() {
        let rep = verify(&h, &pairs, &ratio(2).k_range(2, 2).backend(Backend::Smt).solver(solver)).unwrap();
        let q = rep.first_violation().ok_or("solver path found no violation")?;
        ensure(q.backend == BackendUsed::Smt, format!("violation came from {:?}", q.backend))?;
        let cex = q.counterexample.as_ref().unwrap();
        let at: Vec<String> =
            cex.assignment.iter().flatten().map(|(k, v)| format!("{}={}", k, v)).collect();
        notes.push(format!("solver sat at {} [{}]", cex.unicode, at.join(", ")));
    } else {
        notes.push("no solver installed".into());
    }

    let missing = SolverConfig::from_template("pufcheck-no-such-solver {file}", Duration::from_secs(5)).unwrap();
    let rep = verify(&h, &pairs, &ratio(2).k_range(2, 2).backend(Backend::Smt).solver(missing)).unwrap();
    let q = rep.first_violation().ok_or("grid fallback found no violation")?;
    ensure(q.backend == BackendUsed::Grid, format!("fallback reported {:?}", q.backend))?;
    let domains: Vec<ParamDomain> = ["pA", "pB", "pC"].iter().map(|n| ParamDomain::unit(n)).collect();
    let grid = grid_assignments(&domains, &[r(1, 4), r(1, 2), r(3, 4)]);
    let violating: Vec<_> = grid.iter().filter(|a| certified_at(a)).collect();
    ensure(violating.contains(&&half), "1/2 point not among certified grid violations")?;
    notes.push(format!("grid fallback violation; (_, ~3) certified at {}/{} grid points incl. 1/2", violating.len(), grid.len()));
    Ok(notes.join("; "))
}

fn closed_forms(n: u32) -> (Rational, Rational) {
    let top = &(&r(3, 20) * &r(1, 3).pow(n)) * &r(5, 6) + &(&(&r(4, 5) * &r(2, 3).pow(n)) * &r(2, 3));
    let bottom = &(&r(3, 20) * &r(1, 6).pow(n)) * &r(2, 3) + &(&(&r(4, 5) * &r(1, 3).pow(n)) * &r(1, 3));
    (top, bottom)
}

/// Streams `1^n 2` and `2^n 1`, answers `bot^n top`.
fn at_witness(n: usize) -> (Vec<u32>, Vec<u32>, Vec<bool>) {
    let mut top = vec![1; n];
    top.push(2);
    let mut bottom = vec![2; n];
    bottom.push(1);
    let mut answers = vec![false; n];
    answers.push(true);
    (top, bottom, answers)
}

fn c7_above_threshold_closed_forms() -> Check {
    let spec = AboveThresholdSpec::default();
    let h = build_above_threshold_hmm(&spec).unwrap();
    let mspec = MechanismSpec::AboveThreshold(spec);
    for n in 1..=8u32 {
        let (top, bottom, answers) = at_witness(n as usize);
        let key: Vec<String> = answers.iter().map(|a| if *a { "top" } else { "bot" }.to_string()).collect();
        let (want_top, want_bottom) = closed_forms(n);
        let alg = |s: &Vec<u32>| exact_output_distribution(&mspec, &MechanismInput::stream(2, s.clone())).unwrap()[&key].clone();
        ensure(alg(&top) == want_top, format!("n={} algorithm, first stream", n))?;
        ensure(alg(&bottom) == want_bottom, format!("n={} algorithm, second stream", n))?;
        let ids = h.parse_sequence(&above_threshold_observation(&top, &bottom, &answers)).unwrap();
        let scale = r(1, 3).pow(2 * n + 1);
        let model = |bottom_copy: bool, v: u32| {
            let start = h.point_mass(&AboveThresholdStates::initial(bottom_copy, 2, v)).unwrap();
            sequence_probability(&h, &start, &ids).unwrap().as_constant().unwrap()
        };
        ensure(model(false, 1) == &want_top * &scale, format!("n={} model, first copy", n))?;
        ensure(model(true, 2) == &want_bottom * &scale, format!("n={} model, second copy", n))?;
        ensure(&want_top / &want_bottom > &r(16, 11) * &Rational::from(2).pow(n), format!("n={} ratio", n))?;
    }
    Ok("n = 1..8 on both sides, ratio above (16/11) 2^n".into())
}

fn c8_no_privacy() -> Check {
    let h = build_above_threshold_hmm(&AboveThresholdSpec::default()).unwrap();
    let pairs = dp_neighbor_pairs(&h, h.dp_adjacency()).unwrap();
    let rep = verify(&h, &pairs, &ratio(16).k_range(1, 11).policy(Feasibility::Both)).unwrap();
    let q = rep.first_violation().ok_or("no violation at c=16 within k <= 11")?;
    let mut notes = vec![format!("c=16: {} violates at k={}", q.query.pair, q.query.k)];
    let pair = vec![LabeledPair {
        label: "t2r1 vs ut2r2".into(),
        pi: h.point_mass(&AboveThresholdStates::initial(false, 2, 1)).unwrap(),
        tau: h.point_mass(&AboveThresholdStates::initial(true, 2, 2)).unwrap(),
        side_conditions: Vec::new(),
    }];
    for (c, log2c) in [(2i64, 1usize), (8, 3), (16, 4), (64, 6)] {
        let limit = 11 + log2c;
        let rep = verify(&h, &pair, &ratio(c).k_range(1, limit).policy(Feasibility::Both)).unwrap();
        let q = rep.first_violation().ok_or(format!("no violation at c={} within k <= {}", c, limit))?;
        let cex = q.counterexample.as_ref().unwrap();
        let ids = h.parse_sequence(&cex.sequence).unwrap();
        let cert = certify_counterexample(&h, &pair[0].pi, &pair[0].tau, &Rational::from(c), &ids, None).unwrap();
        ensure(cert.valid, format!("c={} certificate invalid", c))?;
        notes.push(format!("c={} at k={}", c, q.query.k));
    }
    Ok(notes.join("; "))
}

fn c9_lemma_scaling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut total = 0;
    for n in 1..=5usize {
        let mut pairs = neighboring_streams(n + 1);
        if n >= 4 {
            pairs.shuffle(&mut rng);
            pairs.truncate(50);
        }
        let (checked, bad) = lemma_scaling(n, &pairs);
        ensure(bad.is_empty(), format!("n={}: {}", n, bad.first().cloned().unwrap_or_default()))?;
        total += checked;
    }
    Ok(format!("{} exact comparisons", total))
}

fn c10_sat_reduction() -> Check {
    let family = cnf_family(2);
    ensure(family.len() >= 200, format!("family has {} formulas", family.len()))?;
    let mut n_sat = 0;
    for f in &family {
        let sat = truth_table_sat(f);
        let g = max_gap(&build_sat_hmm(f).unwrap()).unwrap();
        ensure(g.max_gap.is_zero() == sat, format!("{:?}: gap {} but sat={}", f.clauses, g.max_gap, sat))?;
        n_sat += sat as usize;
    }
    Ok(format!("{} formulas ({} satisfiable)", family.len(), n_sat))
}

fn c11_lower_bound() -> Check {
    let h = build_noisy_max_hmm(&NoisyMaxSpec::new(NoisyMaxVariant::Improved, 3)).unwrap();
    let pairs = dp_neighbor_pairs(&h, h.dp_adjacency()).unwrap();
    let req = BoundRequest::new(&h, &pairs, 2).interval(r(121, 100), r(128, 100)).precision(r(1, 1000));
    let res = lower_bound(&req).map_err(|e| e.to_string())?;
    ensure(res.status == BoundStatus::Converged, format!("status {:?}", res.status))?;
    let (lo, hi) = (res.eps_lo.to_f64(), res.eps_hi.to_f64());
    ensure(lo < hi && hi - lo <= LB_WIDTH + 1e-12, format!("bracket [{}, {}]", lo, hi))?;
    ensure(lo >= LB_LO && hi <= LB_HI, format!("bracket [{}, {}] outside [{}, {}]", lo, hi, LB_LO, LB_HI))?;
    Ok(format!("[{}, {}] after {} iterations ({})", res.eps_lo_decimal, res.eps_hi_decimal, res.iterations, res.label))
}

fn curve(spec: &MechanismSpec, d1: MechanismInput, d2: MechanismInput, eps: Vec<f64>, seed: u64) -> Vec<(f64, f64)> {
    let plan = TestPlan::new(spec.clone(), d1, d2).epsilons(eps).samples(N_SELECT, N_DETECT).seed(seed);
    pvalue_curve(&plan).unwrap().points.iter().map(|p| (p.eps, p.p)).collect()
}

fn two_of_three(name: &str, ok: [bool; 3]) -> Result<(), String> {
    ensure(ok.iter().filter(|b| **b).count() >= 2, format!("{}: seeds passing {:?}", name, ok))
}

fn c12_statistical_curves() -> Check {
    let naive = MechanismSpec::NoisyMax(NoisyMaxSpec::new(NoisyMaxVariant::Naive, 3));
    let improved = MechanismSpec::NoisyMax(NoisyMaxSpec::new(NoisyMaxVariant::Improved, 3));
    let at = MechanismSpec::AboveThreshold(AboveThresholdSpec::default());
    let grid = eps_grid(2.0, 0.1);
    let mut band_naive = [false; 3];
    let mut band_improved = [false; 3];
    let mut band_at = [false; 3];
    let mut at_p = Vec::new();
    for (i, &seed) in SEEDS.iter().enumerate() {
        let c = curve(&naive, MechanismInput::values(vec![1, 1, 1]), MechanismInput::values(vec![2, 2, 0]), grid.clone(), seed);
        band_naive[i] = c.iter().all(|(_, p)| *p < SIGNIFICANCE);
        let c = curve(&improved, MechanismInput::values(vec![1, 1, 1]), MechanismInput::values(vec![0, 2, 2]), grid.clone(), seed);
        band_improved[i] = c.iter().all(|(e, p)| {
            (*e > 1.1 + 1e-9 || *p < SIGNIFICANCE) && (*e < 1.8 - 1e-9 || *p > CONFIDENT_PASS)
        });
        let c = curve(&at, MechanismInput::stream(0, vec![1, 1, 1]), MechanismInput::stream(0, vec![2, 2, 0]), vec![3.0], seed);
        band_at[i] = c[0].1 > SIGNIFICANCE;
        at_p.push(format!("{:.3}", c[0].1));
    }
    two_of_three("naive noisy max", band_naive)?;
    two_of_three("improved noisy max", band_improved)?;
    two_of_three("above threshold false pass", band_at)?;

    // The pass at e^3 is spurious: the verifier finds a certified violation.
    let h = build_above_threshold_hmm(&AboveThresholdSpec::default()).unwrap();
    let (top, bottom, answers) = at_witness(4);
    let pi = h.point_mass(&AboveThresholdStates::initial(false, 2, top[0])).unwrap();
    let tau = h.point_mass(&AboveThresholdStates::initial(true, 2, bottom[0])).unwrap();
    let Bound::Epsilon(b) = Bound::epsilon(&Rational::from(3)).unwrap() else { unreachable!() };
    let q = VerificationQuery::new(&h, &pi, &tau, b.c_up.clone(), 11).policy(Feasibility::Both);
    let cex = check_pair_exact(&q).unwrap().counterexample.ok_or("verifier found no violation at e^3")?;
    // Any certified violating sequence shows the pass is spurious; the
    // bot^4 top run itself is certified below.
    let ids = h.parse_sequence(&cex.sequence).unwrap();
    let cert = certify_counterexample(&h, &pi, &tau, &b.c_up, &ids, None).unwrap();
    ensure(cert.valid, "certificate invalid")?;
    let expected = h.parse_sequence(&above_threshold_observation(&top, &bottom, &answers)).unwrap();
    let cert2 = certify_counterexample(&h, &pi, &tau, &b.c_up, &expected, None).unwrap();
    ensure(cert2.valid, "closed-form witness not certified")?;
    Ok(format!(
        "bands hold on >= 2/3 seeds (naive {:?}, improved {:?}); above threshold p at eps=3: {}; certified {} (ratio {:.2}) and bot^4 top (ratio {})",
        band_naive,
        band_improved,
        at_p.join(", "),
        cex.unicode,
        cert.ratio.parse::<Rational>().map(|x| x.to_f64()).unwrap_or(f64::INFINITY),
        cert2.ratio.parse::<Rational>().map(|x| format!("{:.2}", x.to_f64())).unwrap_or(cert2.ratio.clone())
    ))
}

fn c13_oracle_equivalence() -> Check {
    let cs = [Rational::one(), r(3, 2), r(2, 1), r(4, 1), r(8, 1)];
    let (checked, bad) = compare_with_oracle(&oracle_cases(true), 3, &cs);
    ensure(bad.is_empty(), format!("{} disagreements, first: {}", bad.len(), bad.first().cloned().unwrap_or_default()))?;
    Ok(format!("{} (model, pair, c, k, policy, direction) comparisons", checked))
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Check)> = vec![
        (1, "geometric emission table", c1_emission_table),
        (2, "geometric mechanism is ln 2-DP", c2_geometric_dp),
        (3, "Pufferfish failure of the extreme pair", c3_pufferfish_failure),
        (4, "symbolic observation probabilities", c4_symbolic_table),
        (5, "naive Noisy Max violation", c5_naive_noisy_max),
        (6, "improved Noisy Max under contagion", c6_contagious_noisy_max),
        (7, "Above Threshold closed forms", c7_above_threshold_closed_forms),
        (8, "Above Threshold has no finite budget", c8_no_privacy),
        (9, "model scaling of Above Threshold", c9_lemma_scaling),
        (10, "SAT reduction", c10_sat_reduction),
        (11, "lower bound for improved Noisy Max", c11_lower_bound),
        (12, "statistical curves", c12_statistical_curves),
        (13, "exact checker vs path sums", c13_oracle_equivalence),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let start = Instant::now();
    for (id, title, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS {:>2} {}: {} [{:.1}s]", id, title, detail, secs),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {}: {} [{:.1}s]", id, title, why, secs);
            }
        }
    }
    println!("acceptance: {} failed, total {:.1}s", failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}

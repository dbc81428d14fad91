//! Ready-made scenarios for the disease-survey examples.
//!
//! Where the examples reason about counts rather than individual records, the
//! universe consists of count values (or count tuples) and secrets are sets
//! of counts, e.g. "John has the disease" is "the count is at least 1".

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::Poly;
use crate::mechanisms::{noisy_max_state, tuple_name};

use super::{DatasetPrior, PufferfishScenario, Secret};

fn one_minus(p: &Poly) -> Poly {
    &Poly::one() - p
}

fn binomial2(p: &Poly) -> [Poly; 3] {
    let q = one_minus(p);
    [&q * &q, (&p.clone() * &q).scale(&crate::algebra::Rational::from(2)), p * p]
}

fn secret(name: &str, datasets: impl IntoIterator<Item = String>) -> Secret {
    Secret { name: name.to_string(), datasets: datasets.into_iter().collect() }
}

/// Two records with perfectly correlated disease status; secrets are whether
/// the first record (John) has the disease. States are the counts 0..2.
pub fn contagious_pair_scenario() -> PufferfishScenario {
    let p = Poly::param("p");
    let universe: Vec<String> = ["00", "01", "10", "11"].iter().map(|s| s.to_string()).collect();
    let mut probs = BTreeMap::new();
    probs.insert("00".to_string(), one_minus(&p));
    probs.insert("11".to_string(), p);
    let state_of = universe
        .iter()
        .map(|d| (d.clone(), d.chars().filter(|c| *c == '1').count().to_string()))
        .collect();
    PufferfishScenario {
        universe,
        priors: vec![DatasetPrior { name: "contagious".into(), probs }],
        secrets: vec![
            secret("c", ["10".to_string(), "11".to_string()]),
            secret("nc", ["00".to_string(), "01".to_string()]),
        ],
        pairs: vec![("nc".into(), "c".into()), ("c".into(), "nc".into())],
        state_of,
        params: Vec::new(),
    }
}

/// Two independent records, each sick with probability `p`; the universe is
/// the count of sick records. Pairs the unconditioned prior ("any") against
/// the prior given that John is sick (count at least 1).
pub fn independent_count_scenario() -> PufferfishScenario {
    let p = Poly::param("p");
    let universe: Vec<String> = (0..3).map(|c: u32| c.to_string()).collect();
    let probs = universe.iter().cloned().zip(binomial2(&p)).collect();
    PufferfishScenario {
        universe: universe.clone(),
        priors: vec![DatasetPrior { name: "independent".into(), probs }],
        secrets: vec![
            secret("any", universe.iter().cloned()),
            secret("john", ["1".to_string(), "2".to_string()]),
        ],
        pairs: vec![("any".into(), "john".into())],
        state_of: universe.iter().map(|d| (d.clone(), d.clone())).collect(),
        params: Vec::new(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Correlation {
    /// Every disease is independent across the two records.
    Independent,
    /// The secret disease is contagious: both records agree on it.
    Contagious,
}

pub const DISEASES: [&str; 3] = ["A", "B", "C"];

/// Survey of two records over three diseases, answered by counting queries
/// (one per disease) and fed to Noisy Max. Disease `k` has prevalence `p{k}`
/// (`pA`, `pB`, `pC`). The secret is whether John has disease
/// `DISEASES[secret_query]`; with [`Correlation::Contagious`] that disease is
/// shared by both records. Datasets are count tuples such as `"021"`, mapped
/// to the Noisy Max query-result states.
pub fn disease_scenario(correlation: Correlation, secret_query: usize) -> PufferfishScenario {
    assert!(secret_query < DISEASES.len(), "secret query index out of range");
    let weights: Vec<[Poly; 3]> = DISEASES
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let p = Poly::param(&format!("p{}", d));
            if i == secret_query && correlation == Correlation::Contagious {
                [one_minus(&p), Poly::zero(), p]
            } else {
                binomial2(&p)
            }
        })
        .collect();
    let mut universe = Vec::new();
    let mut probs = BTreeMap::new();
    let mut has = BTreeSet::new();
    let mut not = BTreeSet::new();
    for a in 0..3u32 {
        for b in 0..3u32 {
            for c in 0..3u32 {
                let t = [a, b, c];
                let name = tuple_name(&t);
                let w = &(&weights[0][a as usize] * &weights[1][b as usize]) * &weights[2][c as usize];
                if !w.is_zero() {
                    probs.insert(name.clone(), w);
                }
                if t[secret_query] >= 1 {
                    has.insert(name.clone());
                }
                if t[secret_query] <= 1 {
                    not.insert(name.clone());
                }
                universe.push(name);
            }
        }
    }
    let state_of = universe
        .iter()
        .map(|d| {
            let t: Vec<u32> = d.chars().map(|c| c.to_digit(10).expect("digit")).collect();
            (d.clone(), noisy_max_state(&t))
        })
        .collect();
    let label = match correlation {
        Correlation::Independent => "independent",
        Correlation::Contagious => "contagious",
    };
    PufferfishScenario {
        universe,
        priors: vec![DatasetPrior { name: label.into(), probs }],
        secrets: vec![
            Secret { name: "has".into(), datasets: has },
            Secret { name: "not".into(), datasets: not },
        ],
        pairs: vec![("has".into(), "not".into()), ("not".into(), "has".into())],
        state_of,
        params: Vec::new(),
    }
}

/// Neighboring count tuples induced by changing one record.
///
/// Records are attribute vectors in `{0,1}^n_queries`; a dataset holds
/// `n_entries` records and query `k` counts the records with attribute `k`.
/// Returns every ordered pair of count tuples (as state names) realized by
/// datasets differing in at most one record.
pub fn entry_change_adjacency(n_entries: usize, n_queries: usize) -> Vec<(String, String)> {
    let records: Vec<Vec<u32>> = (0..1u32 << n_queries)
        .map(|bits| (0..n_queries).map(|k| (bits >> k) & 1).collect())
        .collect();
    let counts = |ds: &[usize]| -> Vec<u32> {
        (0..n_queries).map(|k| ds.iter().map(|&r| records[r][k]).sum()).collect()
    };
    let mut datasets: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..n_entries {
        datasets = datasets
            .into_iter()
            .flat_map(|d| {
                (0..records.len()).map(move |r| {
                    let mut e = d.clone();
                    e.push(r);
                    e
                })
            })
            .collect();
    }
    let mut pairs = BTreeSet::new();
    for d in &datasets {
        let base = counts(d);
        for i in 0..n_entries {
            for r in 0..records.len() {
                let mut e = d.clone();
                e[i] = r;
                pairs.insert((noisy_max_state(&base), noisy_max_state(&counts(&e))));
            }
        }
    }
    pairs.into_iter().collect()
}

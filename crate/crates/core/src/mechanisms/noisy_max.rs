use crate::algebra::{Poly, Rational};
use crate::hmm::{Hmm, HmmBuilder};

use super::{geometric_row, tilde, MechanismError, NoisyMaxSpec, NoisyMaxVariant};

/// All tuples over `0..=n` of length `len`, in lexicographic order.
pub(crate) fn tuples(len: usize, n: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..=n).map(move |v| {
                    let mut u = t.clone();
                    u.push(v);
                    u
                })
            })
            .collect();
    }
    out
}

pub fn tuple_name(values: &[u32]) -> String {
    values.iter().map(|v| v.to_string()).collect()
}

/// Name of the top (query-result) state for `values`.
pub fn noisy_max_state(values: &[u32]) -> String {
    tuple_name(values)
}

fn noisy_name(values: &[u32]) -> String {
    format!("n{}", tuple_name(values))
}

/// Top states hold the true query results and emit the blank symbol; each
/// moves to a noisy tuple with the product of the per-query geometric
/// probabilities. Noisy tuples loop forever and emit the reported index.
pub fn build_noisy_max_hmm(spec: &NoisyMaxSpec) -> Result<Hmm, MechanismError> {
    spec.validate()?;
    let q = spec.n_queries;
    let n = spec.noise.n;
    let count = (n as u64 + 1).checked_pow(q as u32).unwrap_or(u64::MAX);
    if count > 20_000 {
        return Err(MechanismError::TooLarge(format!("{} value tuples", count)));
    }
    let all = tuples(q, n);
    let rows: Vec<Vec<Rational>> = (0..=n).map(|v| geometric_row(&spec.noise, v)).collect::<Result<_, _>>()?;

    let mut b = HmmBuilder::new();
    for t in &all {
        b.state(&noisy_max_state(t))?;
    }
    for t in &all {
        b.state(&noisy_name(t))?;
    }
    let blank = b.observation("_")?;
    for i in 1..=q {
        b.observation(&tilde(i as u32))?;
    }
    let m = all.len();
    for (i, v) in all.iter().enumerate() {
        b.emission(i, blank, Poly::one());
        for (j, w) in all.iter().enumerate() {
            let mut p = Rational::one();
            for (vi, wi) in v.iter().zip(w) {
                p *= &rows[*vi as usize][*wi as usize];
            }
            b.transition(i, m + j, Poly::constant(p));
        }
    }
    for (j, w) in all.iter().enumerate() {
        let s = m + j;
        b.transition(s, s, Poly::one());
        let max = *w.iter().max().expect("n_queries >= 2");
        let argmax: Vec<usize> = (0..q).filter(|&i| w[i] == max).collect();
        match spec.variant {
            NoisyMaxVariant::Naive => {
                b.emission(s, 1 + argmax[0], Poly::one());
            }
            NoisyMaxVariant::Improved => {
                let share = Rational::frac(1, argmax.len() as i64);
                for i in argmax {
                    b.emission(s, 1 + i, Poly::constant(share.clone()));
                }
            }
        }
    }
    let adjacency = all
        .iter()
        .flat_map(|a| {
            all.iter()
                .filter(move |c| a.iter().zip(c.iter()).all(|(x, y)| x.abs_diff(*y) <= 1))
                .map(move |c| (noisy_max_state(a), noisy_max_state(c)))
        })
        .collect();
    b.dp_adjacency(adjacency);
    Ok(b.build()?)
}

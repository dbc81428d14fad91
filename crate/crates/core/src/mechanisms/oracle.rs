use std::collections::BTreeMap;

use crate::algebra::Rational;

use super::{geometric_row, tilde, MechanismError, MechanismInput, MechanismSpec, NoisyMaxVariant};

const MAX_NOISY_MAX_QUERIES: usize = 8;
const MAX_STREAM: usize = 12;

fn add(dist: &mut BTreeMap<Vec<String>, Rational>, key: Vec<String>, p: Rational) {
    if p.is_zero() {
        return;
    }
    *dist.entry(key).or_insert_with(Rational::zero) += &p;
}

/// Exact output distribution, found by following the algorithm through every
/// combination of noise draws and internal coin flips.
pub fn exact_output_distribution(
    spec: &MechanismSpec,
    input: &MechanismInput,
) -> Result<BTreeMap<Vec<String>, Rational>, MechanismError> {
    spec.validate()?;
    input.check(spec)?;
    let mut dist = BTreeMap::new();
    match spec {
        MechanismSpec::Geometric(g) => {
            for (z, p) in geometric_row(g, input.values[0])?.into_iter().enumerate() {
                add(&mut dist, vec![tilde(z as u32)], p);
            }
        }
        MechanismSpec::NoisyMax(s) => {
            if input.values.len() > MAX_NOISY_MAX_QUERIES {
                return Err(MechanismError::TooLarge(format!("{} queries", input.values.len())));
            }
            let rows: Vec<Vec<Rational>> =
                input.values.iter().map(|&v| geometric_row(&s.noise, v)).collect::<Result<_, _>>()?;
            noisy_max_walk(&rows, s.variant, 0, -1, 0, 0, Rational::one(), &mut dist);
        }
        MechanismSpec::AboveThreshold(s) => {
            if input.values.len() > MAX_STREAM {
                return Err(MechanismError::TooLarge(format!("{} queries", input.values.len())));
            }
            let t = input.threshold.expect("checked input");
            for (noisy_t, pt) in geometric_row(&s.threshold_noise, t)?.into_iter().enumerate() {
                let mut prefix = Vec::new();
                let mut alive = pt;
                for &v in &input.values {
                    let row = geometric_row(&s.query_noise, v)?;
                    let above: Rational = row[noisy_t..].iter().sum();
                    let mut out = prefix.clone();
                    out.push("top".to_string());
                    add(&mut dist, out, &alive * &above);
                    alive = &alive * &(&Rational::one() - &above);
                    prefix.push("bot".to_string());
                }
                add(&mut dist, prefix, alive);
            }
        }
    }
    Ok(dist)
}

/// Follows Noisy Max literally. `ties` is the reservoir counter of the
/// improved variant; every reservoir coin is branched on explicitly.
#[allow(clippy::too_many_arguments)]
fn noisy_max_walk(
    rows: &[Vec<Rational>],
    variant: NoisyMaxVariant,
    i: usize,
    best: i64,
    r: usize,
    ties: i64,
    p: Rational,
    dist: &mut BTreeMap<Vec<String>, Rational>,
) {
    if p.is_zero() {
        return;
    }
    if i == rows.len() {
        add(dist, vec![tilde(r as u32 + 1)], p);
        return;
    }
    for (noisy, q) in rows[i].iter().enumerate() {
        let noisy = noisy as i64;
        let pq = &p * q;
        match variant {
            NoisyMaxVariant::Naive => {
                let (b, rr) = if best < noisy { (noisy, i) } else { (best, r) };
                noisy_max_walk(rows, variant, i + 1, b, rr, 0, pq, dist);
            }
            NoisyMaxVariant::Improved => {
                if best == noisy {
                    let c = ties + 1;
                    let take = Rational::frac(1, c);
                    let keep = &Rational::one() - &take;
                    noisy_max_walk(rows, variant, i + 1, best, i, c, &pq * &take, dist);
                    noisy_max_walk(rows, variant, i + 1, best, r, c, &pq * &keep, dist);
                } else if best < noisy {
                    noisy_max_walk(rows, variant, i + 1, noisy, i, 1, pq, dist);
                } else {
                    noisy_max_walk(rows, variant, i + 1, best, r, ties, pq, dist);
                }
            }
        }
    }
}

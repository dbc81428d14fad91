//! Two-copy model of Above Threshold on neighboring query streams.
//!
//! Each copy has three layers of states for threshold `i` and query value `j`:
//! `t{i}r{j}` (nothing noised yet), `t~{i}r{j}` (noisy threshold drawn) and
//! `t~{i}r~{l}` (noisy query drawn). The bottom copy uses the same names with
//! a `u` prefix. Pair symbols `jl` synchronize the query value `j` of the top
//! copy with the value `l` of the bottom copy.

use crate::algebra::{Poly, Rational};
use crate::hmm::{Hmm, HmmBuilder};

use super::{geometric_row, AboveThresholdSpec, MechanismError};

pub const OBSERVATIONS: [&str; 14] =
    ["_", "bot", "top", "00", "01", "10", "11", "12", "21", "22", "sA", "sB", "sC", "sD"];

/// State naming for the two copies.
pub struct AboveThresholdStates;

impl AboveThresholdStates {
    fn prefix(bottom: bool) -> &'static str {
        if bottom {
            "u"
        } else {
            ""
        }
    }

    pub fn initial(bottom: bool, t: u32, r: u32) -> String {
        format!("{}t{}r{}", Self::prefix(bottom), t, r)
    }

    pub fn sync(bottom: bool, t: u32, r: u32) -> String {
        format!("{}t~{}r{}", Self::prefix(bottom), t, r)
    }

    pub fn decided(bottom: bool, t: u32, r: u32) -> String {
        format!("{}t~{}r~{}", Self::prefix(bottom), t, r)
    }
}

pub fn above_threshold_pair_symbol(top: u32, bottom: u32) -> String {
    format!("{}{}", top, bottom)
}

/// Observation sequence of one joint run: the blank, then per query the pair
/// symbol followed by the answer (`true` for above).
pub fn above_threshold_observation(top: &[u32], bottom: &[u32], answers: &[bool]) -> Vec<String> {
    let mut out = vec!["_".to_string()];
    for ((j, l), a) in top.iter().zip(bottom).zip(answers) {
        out.push(above_threshold_pair_symbol(*j, *l));
        out.push(if *a { "top" } else { "bot" }.to_string());
    }
    out
}

pub fn build_above_threshold_hmm(spec: &AboveThresholdSpec) -> Result<Hmm, MechanismError> {
    spec.validate()?;
    if spec.range() != 2 {
        return Err(MechanismError::BadInput("the two-copy model is defined for values in {0,1,2}".into()));
    }
    let n = spec.range();
    let threshold_rows: Vec<Vec<Rational>> =
        (0..=n).map(|v| geometric_row(&spec.threshold_noise, v)).collect::<Result<_, _>>()?;
    let query_rows: Vec<Vec<Rational>> =
        (0..=n).map(|v| geometric_row(&spec.query_noise, v)).collect::<Result<_, _>>()?;
    let third = Poly::constant(Rational::frac(1, 3));

    let mut b = HmmBuilder::new();
    for bottom in [false, true] {
        for t in 0..=n {
            for r in 0..=n {
                b.state(&AboveThresholdStates::initial(bottom, t, r))?;
            }
        }
        for t in 0..=n {
            for r in 0..=n {
                b.state(&AboveThresholdStates::sync(bottom, t, r))?;
            }
        }
        for t in 0..=n {
            for r in 0..=n {
                b.state(&AboveThresholdStates::decided(bottom, t, r))?;
            }
        }
    }
    for o in OBSERVATIONS {
        b.observation(o)?;
    }

    for bottom in [false, true] {
        for t in 0..=n {
            for r in 0..=n {
                let init = AboveThresholdStates::initial(bottom, t, r);
                b.emission_named(&init, "_", Poly::one())?;
                for (t2, p) in threshold_rows[t as usize].iter().enumerate() {
                    let to = AboveThresholdStates::sync(bottom, t2 as u32, r);
                    b.transition_named(&init, &to, Poly::constant(p.clone()))?;
                }

                let sync = AboveThresholdStates::sync(bottom, t, r);
                for (l, p) in query_rows[r as usize].iter().enumerate() {
                    let to = AboveThresholdStates::decided(bottom, t, l as u32);
                    b.transition_named(&sync, &to, Poly::constant(p.clone()))?;
                }
                for other in 0..=n {
                    if other.abs_diff(r) <= 1 {
                        let sym = if bottom {
                            above_threshold_pair_symbol(other, r)
                        } else {
                            above_threshold_pair_symbol(r, other)
                        };
                        b.emission_named(&sync, &sym, third.clone())?;
                    }
                }
                let suit = match (bottom, r) {
                    (false, 0) => Some("sB"),
                    (false, 2) => Some("sA"),
                    (true, 0) => Some("sD"),
                    (true, 2) => Some("sC"),
                    _ => None,
                };
                if let Some(s) = suit {
                    b.emission_named(&sync, s, third.clone())?;
                }

                let decided = AboveThresholdStates::decided(bottom, t, r);
                let answer = if r >= t { "top" } else { "bot" };
                b.emission_named(&decided, answer, Poly::one())?;
                for j in 0..=n {
                    let to = AboveThresholdStates::sync(bottom, t, j);
                    b.transition_named(&decided, &to, third.clone())?;
                }
            }
        }
    }

    let mut adjacency = Vec::new();
    for t in 0..=n {
        for i in 0..=n {
            for j in 0..=n {
                if i.abs_diff(j) <= 1 {
                    adjacency.push((
                        AboveThresholdStates::initial(false, t, i),
                        AboveThresholdStates::initial(true, t, j),
                    ));
                }
            }
        }
    }
    b.dp_adjacency(adjacency);
    Ok(b.build()?)
}

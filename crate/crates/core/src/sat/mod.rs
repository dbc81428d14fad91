//! Compiles a CNF formula into an HMM and a pair of initial distributions
//! such that `Pr(w | d1) - 4 Pr(w | d2)` reaches 0 exactly when the formula
//! is satisfiable.
//!
//! For each clause `i` and variable `j` there are six states per group,
//! `A{i}_{j}`, `A'{i}_{j}`, `TA{i}_{j}`, `TA'{i}_{j}`, `FA{i}_{j}`,
//! `FA'{i}_{j}` (and the same with `B`), plus four final states per clause.
//! A primed path switches to the unprimed track as soon as the chosen value
//! of `x_j` satisfies the clause.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{Poly, RatFn, Rational};
use crate::hmm::{sequence_probability, Hmm, HmmBuilder, HmmError, InformationState};

#[derive(Debug, thiserror::Error)]
pub enum SatError {
    #[error("the reduction needs at least 3 variables, got {0}")]
    TooFewVariables(usize),
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("literal {lit} in clause {clause} is outside 1..={n}")]
    BadLiteral { clause: usize, lit: i64, n: usize },
    #[error("clause {0} has more literals than variables")]
    LongClause(usize),
    #[error("formula has no clauses")]
    NoClauses,
    #[error("DIMACS line {line}: {msg}")]
    Dimacs { line: usize, msg: String },
    #[error(transparent)]
    Hmm(#[from] HmmError),
}

/// Formula in conjunctive normal form; literals are signed 1-based indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cnf {
    pub n_vars: usize,
    pub clauses: Vec<Vec<i64>>,
}

impl Cnf {
    pub fn new(n_vars: usize, clauses: Vec<Vec<i64>>) -> Result<Self, SatError> {
        if n_vars < 3 {
            return Err(SatError::TooFewVariables(n_vars));
        }
        if clauses.is_empty() {
            return Err(SatError::NoClauses);
        }
        for (i, c) in clauses.iter().enumerate() {
            if c.is_empty() {
                return Err(SatError::EmptyClause(i + 1));
            }
            if c.len() > n_vars {
                return Err(SatError::LongClause(i + 1));
            }
            if let Some(&lit) = c.iter().find(|l| **l == 0 || l.unsigned_abs() as usize > n_vars) {
                return Err(SatError::BadLiteral { clause: i + 1, lit, n: n_vars });
            }
        }
        Ok(Cnf { n_vars, clauses })
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let v = assignment[l.unsigned_abs() as usize - 1];
                if l > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    }

    /// First satisfying assignment in truth-table order.
    pub fn brute_force(&self) -> Option<Vec<bool>> {
        (0..1u64 << self.n_vars).map(|m| assignment_of(m, self.n_vars)).find(|a| self.satisfied_by(a))
    }

    fn occurs(&self, clause: usize, var: usize, positive: bool) -> bool {
        let lit = if positive { var as i64 } else { -(var as i64) };
        self.clauses[clause].contains(&lit)
    }
}

/// Bit `j` of `mask` is the value of `x_{j+1}`.
fn assignment_of(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|j| mask >> j & 1 == 1).collect()
}

/// Parses DIMACS CNF text. Comment lines start with `c`; a `%` line ends
/// the clause list.
pub fn parse_dimacs(text: &str) -> Result<Cnf, SatError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line_no = no + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('c') {
            continue;
        }
        if t.starts_with('%') {
            break;
        }
        let err = |msg: String| SatError::Dimacs { line: line_no, msg };
        if t.starts_with('p') {
            let f: Vec<&str> = t.split_whitespace().collect();
            if header.is_some() || f.len() != 4 || f[1] != "cnf" {
                return Err(err("expected a single `p cnf <vars> <clauses>` header".into()));
            }
            let n = f[2].parse().map_err(|_| err(format!("bad variable count {}", f[2])))?;
            let m = f[3].parse().map_err(|_| err(format!("bad clause count {}", f[3])))?;
            header = Some((n, m));
            continue;
        }
        if header.is_none() {
            return Err(err("clause before header".into()));
        }
        for tok in t.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| err(format!("bad literal {}", tok)))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(lit);
            }
        }
    }
    let (n, m) = header.ok_or(SatError::Dimacs { line: 0, msg: "missing header".into() })?;
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != m {
        return Err(SatError::Dimacs { line: 0, msg: format!("header declares {} clauses, found {}", m, clauses.len()) });
    }
    Cnf::new(n, clauses)
}

/// The reduction's model with its two initial distributions and `c = 4`.
#[derive(Clone, Debug)]
pub struct ReductionInstance {
    pub cnf: Cnf,
    pub h: Hmm,
    pub d1: InformationState,
    pub d2: InformationState,
    pub c: Rational,
}

pub fn state_name(group: char, primed: bool, kind: Option<bool>, clause: usize, var: usize) -> String {
    let p = if primed { "'" } else { "" };
    match kind {
        None => format!("{}{}{}_{}", group, p, clause, var),
        Some(true) => format!("T{}{}{}_{}", group, p, clause, var),
        Some(false) => format!("F{}{}{}_{}", group, p, clause, var),
    }
}

pub fn build_sat_hmm(f: &Cnf) -> Result<ReductionInstance, SatError> {
    let (n, m) = (f.n_vars, f.clauses.len());
    let mut b = HmmBuilder::new();
    for j in 1..=n {
        b.observation(&format!("X{}", j))?;
    }
    for j in 1..=n {
        b.observation(&format!("T{}", j))?;
        b.observation(&format!("F{}", j))?;
    }
    b.observation("top")?;
    b.observation("bot")?;

    let half = Poly::constant(Rational::frac(1, 2));
    let one = Poly::one();
    for i in 1..=m {
        for g in ['A', 'B'] {
            for j in 1..=n {
                for primed in [false, true] {
                    b.state(&state_name(g, primed, None, i, j))?;
                    b.state(&state_name(g, primed, Some(true), i, j))?;
                    b.state(&state_name(g, primed, Some(false), i, j))?;
                }
            }
            for primed in [false, true] {
                b.state(&state_name(g, primed, None, i, n + 1))?;
            }
        }
    }
    for i in 1..=m {
        for g in ['A', 'B'] {
            for j in 1..=n {
                for primed in [false, true] {
                    let at = state_name(g, primed, None, i, j);
                    b.emission_named(&at, &format!("X{}", j), one.clone())?;
                    for value in [true, false] {
                        let branch = state_name(g, primed, Some(value), i, j);
                        b.transition_named(&at, &branch, half.clone())?;
                        let sym = format!("{}{}", if value { 'T' } else { 'F' }, j);
                        b.emission_named(&branch, &sym, one.clone())?;
                        let escapes = primed && f.occurs(i - 1, j, value);
                        let next = state_name(g, primed && !escapes, None, i, j + 1);
                        b.transition_named(&branch, &next, one.clone())?;
                    }
                }
            }
            let top = if g == 'A' { Rational::frac(4, 5) } else { Rational::frac(1, 5) };
            let fin = state_name(g, false, None, i, n + 1);
            b.emission_named(&fin, "top", Poly::constant(top.clone()))?;
            b.emission_named(&fin, "bot", Poly::constant(&Rational::one() - &top))?;
            b.transition_named(&fin, &fin, one.clone())?;
            let fin = state_name(g, true, None, i, n + 1);
            b.emission_named(&fin, "top", half.clone())?;
            b.emission_named(&fin, "bot", half.clone())?;
            b.transition_named(&fin, &fin, one.clone())?;
        }
    }

    let uniform = |b: &HmmBuilder, g: char| -> Result<Vec<RatFn>, SatError> {
        let mut w = vec![RatFn::zero(); b.n_states()];
        for i in 1..=m {
            w[b.state_id(&state_name(g, true, None, i, 1))?] = RatFn::constant(Rational::frac(1, m as i64));
        }
        Ok(w)
    };
    let (w1, w2) = (uniform(&b, 'A')?, uniform(&b, 'B')?);
    b.initial_distribution("d1", w1);
    b.initial_distribution("d2", w2);
    let h = b.build()?;
    let d1 = h.initial_distribution("d1")?.clone();
    let d2 = h.initial_distribution("d2")?.clone();
    Ok(ReductionInstance { cnf: f.clone(), h, d1, d2, c: Rational::from(4) })
}

/// `X1 A1 X2 ... An (top|bot)` for an assignment.
pub fn shaped_sequence(assignment: &[bool], top: bool) -> Vec<String> {
    let mut s = Vec::with_capacity(2 * assignment.len() + 1);
    for (j, v) in assignment.iter().enumerate() {
        s.push(format!("X{}", j + 1));
        s.push(format!("{}{}", if *v { 'T' } else { 'F' }, j + 1));
    }
    s.push(if top { "top" } else { "bot" }.to_string());
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GapReport {
    pub max_gap: Rational,
    pub sequence: Vec<String>,
    pub assignment: Vec<bool>,
    /// The maximum is 0 exactly for satisfiable formulas.
    pub satisfiable: bool,
}

/// `Pr(seq | d1) - c Pr(seq | d2)`.
pub fn gap(inst: &ReductionInstance, seq: &[String]) -> Result<Rational, SatError> {
    let ids = inst.h.parse_sequence(seq)?;
    let p = |d: &InformationState| -> Result<Rational, SatError> {
        Ok(sequence_probability(&inst.h, d, &ids)?.as_constant().expect("concrete model"))
    };
    Ok(&p(&inst.d1)? - &(&inst.c * &p(&inst.d2)?))
}

/// Maximum of the gap over the `2^(n+1)` shaped sequences. Ties keep the
/// first sequence in (assignment, top-before-bot) order.
pub fn max_gap(inst: &ReductionInstance) -> Result<GapReport, SatError> {
    let n = inst.cnf.n_vars;
    let all: Vec<(u64, bool)> = (0..1u64 << n).flat_map(|m| [(m, true), (m, false)]).collect();
    let gaps: Vec<Rational> = all
        .par_iter()
        .map(|&(m, top)| gap(inst, &shaped_sequence(&assignment_of(m, n), top)))
        .collect::<Result<_, _>>()?;
    let mut best = 0;
    for (i, g) in gaps.iter().enumerate() {
        if g > &gaps[best] {
            best = i;
        }
    }
    let (m, top) = all[best];
    let assignment = assignment_of(m, n);
    let max = gaps[best].clone();
    Ok(GapReport {
        satisfiable: max.is_zero(),
        sequence: shaped_sequence(&assignment, top),
        assignment,
        max_gap: max,
    })
}

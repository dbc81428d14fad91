//! Symbolic query whose satisfiability means "some length-k sequence breaks
//! the ratio bound". Forward vectors are spelled out step by step as named
//! definitions, with the observation at each step left as an integer
//! variable and emission rows selected by chained if-then-else.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{AlgebraError, Assignment, Poly, RatFn, Rational};
use crate::hmm::{Hmm, ParamDomain};

use super::{Direction, VerificationQuery, ViolationSide};

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Const(Rational),
    Param(String),
    /// Reference to an earlier definition.
    Ref(String),
    Add(Vec<Term>),
    Mul(Vec<Term>),
    Div(Box<Term>, Box<Term>),
    /// Value of `cases[j].1` when observation variable `var` equals
    /// `cases[j].0`, and 0 when no case matches.
    Select { var: usize, cases: Vec<(usize, Term)> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Gt(Term, Term),
    /// `0 <= w_var < size`.
    InRange { var: usize, size: usize },
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Definition {
    pub name: String,
    pub body: Term,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryAst {
    pub k: usize,
    pub observations: Vec<String>,
    pub params: Vec<ParamDomain>,
    pub definitions: Vec<Definition>,
    pub assertions: Vec<Formula>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("observation variable w{0} is unassigned or out of range")]
    Observation(usize),
    #[error("undefined reference `{0}`")]
    Reference(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

impl Term {
    fn is_literal(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Param(p) => {
                out.insert(p.clone());
            }
            Term::Add(v) | Term::Mul(v) => v.iter().for_each(|t| t.collect_params(out)),
            Term::Div(a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
            Term::Select { cases, .. } => cases.iter().for_each(|(_, t)| t.collect_params(out)),
            Term::Const(_) | Term::Ref(_) => {}
        }
    }

    /// True if the term multiplies or divides by something other than a
    /// literal.
    pub fn is_nonlinear(&self) -> bool {
        match self {
            Term::Const(_) | Term::Param(_) | Term::Ref(_) => false,
            Term::Add(v) => v.iter().any(Term::is_nonlinear),
            Term::Mul(v) => v.iter().filter(|t| !t.is_literal()).count() > 1 || v.iter().any(Term::is_nonlinear),
            Term::Div(a, b) => !b.is_literal() || a.is_nonlinear(),
            Term::Select { cases, .. } => cases.iter().any(|(_, t)| t.is_nonlinear()),
        }
    }

    pub fn eval(&self, env: &Env<'_>) -> Result<Rational, EvalError> {
        Ok(match self {
            Term::Const(c) => c.clone(),
            Term::Param(p) => env
                .assignment
                .get(p)
                .cloned()
                .ok_or_else(|| AlgebraError::MissingParameter(p.clone()))?,
            Term::Ref(r) => env.defs.get(r).cloned().ok_or_else(|| EvalError::Reference(r.clone()))?,
            Term::Add(v) => {
                let mut acc = Rational::zero();
                for t in v {
                    acc += &t.eval(env)?;
                }
                acc
            }
            Term::Mul(v) => {
                let mut acc = Rational::one();
                for t in v {
                    acc *= &t.eval(env)?;
                }
                acc
            }
            Term::Div(a, b) => a.eval(env)?.checked_div(&b.eval(env)?)?,
            Term::Select { var, cases } => {
                let w = *env.obs.get(*var).ok_or(EvalError::Observation(*var))?;
                match cases.iter().find(|(v, _)| *v == w) {
                    Some((_, t)) => t.eval(env)?,
                    None => Rational::zero(),
                }
            }
        })
    }
}

impl Formula {
    pub fn is_nonlinear(&self) -> bool {
        match self {
            Formula::Gt(a, b) => a.is_nonlinear() || b.is_nonlinear(),
            Formula::InRange { .. } => false,
            Formula::And(v) | Formula::Or(v) => v.iter().any(Formula::is_nonlinear),
        }
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Gt(a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
            Formula::InRange { .. } => {}
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|f| f.collect_params(out)),
        }
    }

    pub fn eval(&self, env: &Env<'_>) -> Result<bool, EvalError> {
        Ok(match self {
            Formula::Gt(a, b) => a.eval(env)? > b.eval(env)?,
            Formula::InRange { var, size } => {
                let w = *env.obs.get(*var).ok_or(EvalError::Observation(*var))?;
                w < *size
            }
            Formula::And(v) => {
                for f in v {
                    if !f.eval(env)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(v) => {
                for f in v {
                    if f.eval(env)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }
}

/// Evaluation environment: observation values, parameter values and the
/// values of definitions evaluated so far.
pub struct Env<'a> {
    pub obs: &'a [usize],
    pub assignment: &'a Assignment,
    pub defs: BTreeMap<String, Rational>,
}

impl QueryAst {
    pub fn is_nonlinear(&self) -> bool {
        self.definitions.iter().any(|d| d.body.is_nonlinear()) || self.assertions.iter().any(Formula::is_nonlinear)
    }

    /// Evaluates every assertion under concrete observations and parameter
    /// values.
    pub fn eval(&self, obs: &[usize], assignment: &Assignment) -> Result<bool, EvalError> {
        let mut env = Env { obs, assignment, defs: BTreeMap::new() };
        for d in &self.definitions {
            let v = d.body.eval(&env)?;
            env.defs.insert(d.name.clone(), v);
        }
        for f in &self.assertions {
            if !f.eval(&env)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn monomial_term(m: &crate::algebra::Monomial, coef: &Rational) -> Term {
    let mut factors = Vec::new();
    if !coef.is_one() {
        factors.push(Term::Const(coef.clone()));
    }
    for (p, e) in m.powers() {
        for _ in 0..*e {
            factors.push(Term::Param(p.clone()));
        }
    }
    match factors.len() {
        0 => Term::Const(Rational::one()),
        1 => factors.pop().expect("one factor"),
        _ => Term::Mul(factors),
    }
}

pub fn poly_term(p: &Poly) -> Term {
    let mut terms: Vec<Term> = p.terms().map(|(m, c)| monomial_term(m, c)).collect();
    match terms.len() {
        0 => Term::Const(Rational::zero()),
        1 => terms.pop().expect("one term"),
        _ => Term::Add(terms),
    }
}

pub fn ratfn_term(r: &RatFn) -> Term {
    match r.den.as_constant() {
        Some(d) if d.is_one() => poly_term(&r.num),
        _ => Term::Div(Box::new(poly_term(&r.num)), Box::new(poly_term(&r.den))),
    }
}

fn product(a: Term, b: Term) -> Term {
    match (&a, &b) {
        (Term::Const(x), _) if x.is_one() => b,
        (_, Term::Const(y)) if y.is_one() => a,
        _ => Term::Mul(vec![a, b]),
    }
}

fn sum(mut v: Vec<Term>) -> Term {
    match v.len() {
        0 => Term::Const(Rational::zero()),
        1 => v.pop().expect("one term"),
        _ => Term::Add(v),
    }
}

/// Emission row of state `s` as a select over observation variable `t`.
fn select(h: &Hmm, s: usize, t: usize) -> Option<Term> {
    let cases: Vec<(usize, Term)> = h.emissions_of(s).iter().map(|(w, o)| (*w, poly_term(o))).collect();
    if cases.is_empty() {
        None
    } else {
        Some(Term::Select { var: t, cases })
    }
}

/// Forward vector definitions for one initial state; returns the names of
/// the nonzero entries of the last vector.
fn forward_definitions(h: &Hmm, init: &[RatFn], k: usize, prefix: &str, defs: &mut Vec<Definition>) -> Vec<String> {
    let name = |t: usize, s: usize| format!("{}_{}_{}", prefix, t, s);
    let mut live: Vec<Option<String>> = vec![None; h.n_states()];
    for (s, w) in init.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        if let Some(sel) = select(h, s, 0) {
            defs.push(Definition { name: name(0, s), body: product(ratfn_term(w), sel) });
            live[s] = Some(name(0, s));
        }
    }
    for t in 1..k {
        let mut next = vec![None; h.n_states()];
        for (s2, slot) in next.iter_mut().enumerate() {
            let dot: Vec<Term> = h
                .chain()
                .predecessors(s2)
                .iter()
                .filter_map(|(s, p)| live[*s].as_ref().map(|r| product(Term::Ref(r.clone()), poly_term(p))))
                .collect();
            if dot.is_empty() {
                continue;
            }
            if let Some(sel) = select(h, s2, t) {
                defs.push(Definition { name: name(t, s2), body: product(sum(dot), sel) });
                *slot = Some(name(t, s2));
            }
        }
        live = next;
    }
    live.into_iter().flatten().collect()
}

fn refs(names: &[String]) -> Term {
    sum(names.iter().map(|n| Term::Ref(n.clone())).collect())
}

/// Builds the satisfiability query for `q`: it is satisfiable iff some
/// length-k observation sequence (and, for parametric inputs, some
/// parameter point inside the domains) violates the bound in the requested
/// direction.
pub fn build_smt_query(q: &VerificationQuery<'_>) -> QueryAst {
    let h = q.h;
    let mut definitions = Vec::new();
    let alpha = forward_definitions(h, q.pi.weights(), q.k, "alpha", &mut definitions);
    let beta = forward_definitions(h, q.tau.weights(), q.k, "beta", &mut definitions);
    let (sa, sb) = (refs(&alpha), refs(&beta));
    let c = Term::Const(q.c.clone());
    let gt = |side: ViolationSide| match side {
        ViolationSide::PiOverTau => Formula::Gt(sa.clone(), product(c.clone(), sb.clone())),
        ViolationSide::TauOverPi => Formula::Gt(sb.clone(), product(c.clone(), sa.clone())),
    };
    let mut assertions: Vec<Formula> = (0..q.k).map(|t| Formula::InRange { var: t, size: h.n_obs() }).collect();
    let zero = || Term::Const(Rational::zero());
    let mut body = Vec::new();
    for p in q.pi.denominators().iter().chain(q.tau.denominators().iter()).chain(q.side_conditions.iter()) {
        if !p.is_constant() {
            body.push(Formula::Gt(poly_term(p), zero()));
        }
    }
    match q.direction {
        Direction::Both => body.push(Formula::Or(vec![gt(ViolationSide::PiOverTau), gt(ViolationSide::TauOverPi)])),
        Direction::PiOverTau => body.push(gt(ViolationSide::PiOverTau)),
        Direction::TauOverPi => body.push(gt(ViolationSide::TauOverPi)),
    }
    if q.policy == crate::hmm::Feasibility::Both {
        body.push(Formula::Gt(sa.clone(), zero()));
        body.push(Formula::Gt(sb.clone(), zero()));
    }
    let mut used = BTreeSet::new();
    for d in &definitions {
        d.body.collect_params(&mut used);
    }
    for f in &body {
        f.collect_params(&mut used);
    }
    let mut params: Vec<ParamDomain> = h.params().iter().filter(|d| used.contains(&d.name)).cloned().collect();
    for p in &used {
        if !params.iter().any(|d| &d.name == p) {
            params.push(ParamDomain::unit(p));
        }
    }
    for d in &params {
        assertions.push(Formula::Gt(Term::Param(d.name.clone()), Term::Const(d.lo.clone())));
        assertions.push(Formula::Gt(Term::Const(d.hi.clone()), Term::Param(d.name.clone())));
    }
    assertions.extend(body);
    QueryAst { k: q.k, observations: h.observations().to_vec(), params, definitions, assertions }
}

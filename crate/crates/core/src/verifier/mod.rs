//! Deciding whether output-sequence probabilities from two initial states
//! stay within a factor `c` of each other.
//!
//! Concrete inputs are decided by exhaustive exact search
//! ([`check_pair_exact`]); parametric inputs go through a satisfiability
//! query ([`build_smt_query`]) sent to an external solver, with a grid of
//! parameter points as fallback. [`verify`] sweeps sequence lengths over a
//! list of pairs and produces a report.

mod epsilon;
mod exact;
mod query;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraError, Assignment, Poly, Rational};
use crate::hmm::{grid_assignments, quarter_fractions, sequence_probability, Feasibility, Hmm, HmmError, InformationState, ParamDomain};
use crate::hmm::symbols::render_sequence;
use crate::scenario::LabeledPair;
use crate::smt::{emit_script, interpret_model, run_solver, SolverConfig, SolverStatus};

pub use epsilon::{default_grid, epsilon_of, exp_bounds, EpsilonBounds, EpsilonError};
pub use query::{build_smt_query, poly_term, ratfn_term, Definition, Env, EvalError, Formula, QueryAst, Term};

#[derive(Debug, thiserror::Error)]
pub enum VerifierError {
    #[error("inputs have free parameters; exact checking needs a concrete model (use the SMT query instead)")]
    Parametric,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Epsilon(#[from] EpsilonError),
}

/// Which inequality is checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `p_pi <= c p_tau` and `p_tau <= c p_pi`.
    #[default]
    Both,
    /// Only `p_pi <= c p_tau`.
    PiOverTau,
    /// Only `p_tau <= c p_pi`.
    TauOverPi,
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "both" => Ok(Direction::Both),
            "pi_over_tau" | "pi" => Ok(Direction::PiOverTau),
            "tau_over_pi" | "tau" => Ok(Direction::TauOverPi),
            _ => Err(format!("unknown direction `{}`", s)),
        }
    }
}

/// The inequality a counterexample breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationSide {
    /// `p_pi > c p_tau`.
    PiOverTau,
    /// `p_tau > c p_pi`.
    TauOverPi,
}

#[derive(Clone, Debug)]
pub struct VerificationQuery<'a> {
    pub h: &'a Hmm,
    pub pi: &'a InformationState,
    pub tau: &'a InformationState,
    pub c: Rational,
    pub k: usize,
    pub policy: Feasibility,
    pub direction: Direction,
    /// Polynomials that must stay positive (secret probabilities).
    pub side_conditions: Vec<Poly>,
}

impl<'a> VerificationQuery<'a> {
    pub fn new(h: &'a Hmm, pi: &'a InformationState, tau: &'a InformationState, c: Rational, k: usize) -> Self {
        VerificationQuery {
            h,
            pi,
            tau,
            c,
            k,
            policy: Feasibility::Any,
            direction: Direction::Both,
            side_conditions: Vec::new(),
        }
    }

    pub fn policy(mut self, policy: Feasibility) -> Self {
        self.policy = policy;
        self
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn side_conditions(mut self, conds: Vec<Poly>) -> Self {
        self.side_conditions = conds;
        self
    }

    pub fn validate(&self) -> Result<(), VerifierError> {
        if self.c < Rational::one() {
            return Err(VerifierError::InvalidQuery(format!("c must be at least 1, got {}", self.c)));
        }
        if self.k == 0 {
            return Err(VerifierError::InvalidQuery("k must be positive".into()));
        }
        self.h.check_state(self.pi)?;
        self.h.check_state(self.tau)?;
        Ok(())
    }

    pub fn is_concrete(&self) -> bool {
        self.h.is_concrete() && self.pi.is_concrete() && self.tau.is_concrete()
    }
}

/// A violating sequence with its exact probabilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    #[serde(skip)]
    pub indices: Vec<usize>,
    pub sequence: Vec<String>,
    pub unicode: String,
    pub p_pi: Rational,
    pub p_tau: Rational,
    pub direction: ViolationSide,
    /// Violating probability over the other one, or "infinite".
    pub ratio: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Assignment>,
}

impl Counterexample {
    fn new(
        h: &Hmm,
        indices: Vec<usize>,
        p_pi: Rational,
        p_tau: Rational,
        direction: ViolationSide,
        assignment: Option<Assignment>,
    ) -> Self {
        let sequence = h.sequence_names(&indices);
        let (num, den) = match direction {
            ViolationSide::PiOverTau => (&p_pi, &p_tau),
            ViolationSide::TauOverPi => (&p_tau, &p_pi),
        };
        let ratio = if den.is_zero() { "infinite".to_string() } else { (num / den).to_string() };
        Counterexample { unicode: render_sequence(&sequence), indices, sequence, p_pi, p_tau, direction, ratio, assignment }
    }

    /// Violating probability over the other one; `None` when the other one
    /// is zero.
    pub fn ratio_value(&self) -> Option<Rational> {
        let (num, den) = match self.direction {
            ViolationSide::PiOverTau => (&self.p_pi, &self.p_tau),
            ViolationSide::TauOverPi => (&self.p_tau, &self.p_pi),
        };
        (!den.is_zero()).then(|| num / den)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
    /// Number of full-length feasible sequences examined.
    pub explored: u64,
}

fn exact_probabilities(
    h: &Hmm,
    pi: &InformationState,
    tau: &InformationState,
    seq: &[usize],
) -> Result<(Rational, Rational), VerifierError> {
    let p = sequence_probability(h, pi, seq)?.as_constant().ok_or(VerifierError::Parametric)?;
    let q = sequence_probability(h, tau, seq)?.as_constant().ok_or(VerifierError::Parametric)?;
    Ok((p, q))
}

/// Searches all feasible length-k sequences in lexicographic order and
/// returns the first one breaking the bound, if any.
pub fn check_pair_exact(q: &VerificationQuery<'_>) -> Result<Verdict, VerifierError> {
    q.validate()?;
    let model = exact::ScaledModel::new(q.h, q.pi, q.tau).ok_or(VerifierError::Parametric)?;
    let test = exact::Test::new(&q.c, q.policy, q.direction);
    let r = exact::search(&model, &test, q.k, true);
    let counterexample = match r.witness {
        None => None,
        Some((seq, side)) => {
            let (p_pi, p_tau) = exact_probabilities(q.h, q.pi, q.tau, &seq)?;
            Some(Counterexample::new(q.h, seq, p_pi, p_tau, side, None))
        }
    };
    Ok(Verdict { holds: counterexample.is_none(), counterexample, explored: r.explored })
}

/// Exact re-check of a claimed counterexample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub valid: bool,
    pub p_pi: Rational,
    pub p_tau: Rational,
    /// Direction of the larger probability (`pi_over_tau` on ties).
    pub ratio_direction: ViolationSide,
    /// Larger probability over the smaller one, or "infinite".
    pub ratio: String,
}

/// Recomputes both probabilities of `seq` exactly (after substituting
/// `assignment`, if given) and checks `max(p_pi - c p_tau, p_tau - c p_pi) > 0`.
pub fn certify_counterexample(
    h: &Hmm,
    pi: &InformationState,
    tau: &InformationState,
    c: &Rational,
    seq: &[usize],
    assignment: Option<&Assignment>,
) -> Result<Certificate, VerifierError> {
    let (h, pi, tau) = match assignment {
        Some(a) => (h.instantiate(a)?, pi.instantiate(a)?, tau.instantiate(a)?),
        None => (h.clone(), pi.clone(), tau.clone()),
    };
    let (p_pi, p_tau) = exact_probabilities(&h, &pi, &tau, seq)?;
    let valid = p_pi > c * &p_tau || p_tau > c * &p_pi;
    let ratio_direction = if p_pi >= p_tau { ViolationSide::PiOverTau } else { ViolationSide::TauOverPi };
    let (hi, lo) = if p_pi >= p_tau { (&p_pi, &p_tau) } else { (&p_tau, &p_pi) };
    let ratio = if lo.is_zero() {
        if hi.is_zero() { "undefined".to_string() } else { "infinite".to_string() }
    } else {
        (hi / lo).to_string()
    };
    Ok(Certificate { valid, p_pi, p_tau, ratio_direction, ratio })
}

/// Ratio bound given either directly or as `e^eps`.
#[derive(Clone, Debug, PartialEq)]
pub enum Bound {
    Ratio(Rational),
    Epsilon(EpsilonBounds),
}

impl Bound {
    pub fn epsilon(eps: &Rational) -> Result<Bound, VerifierError> {
        Ok(Bound::Epsilon(exp_bounds(eps, &default_grid())?))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Exact search for concrete inputs, SMT otherwise.
    #[default]
    Auto,
    Exact,
    Smt,
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Backend::Auto),
            "exact" => Ok(Backend::Exact),
            "smt" => Ok(Backend::Smt),
            _ => Err(format!("unknown backend `{}`", s)),
        }
    }
}

/// Backend that produced a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendUsed {
    Exact,
    Smt,
    /// Exact checks at grid points of the parameter domain.
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Holds,
    Violation,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub bound: Bound,
    pub k_min: usize,
    pub k_max: usize,
    pub policy: Feasibility,
    pub direction: Direction,
    pub backend: Backend,
    pub solver: SolverConfig,
    /// Fractions of each parameter interval used by the grid fallback.
    pub grid: Vec<Rational>,
}

impl VerifyOptions {
    pub fn new(bound: Bound) -> Self {
        VerifyOptions {
            bound,
            k_min: 1,
            k_max: 11,
            policy: Feasibility::Any,
            direction: Direction::Both,
            backend: Backend::Auto,
            solver: SolverConfig::default(),
            grid: quarter_fractions(),
        }
    }

    pub fn ratio(c: Rational) -> Self {
        Self::new(Bound::Ratio(c))
    }

    pub fn k_range(mut self, k_min: usize, k_max: usize) -> Self {
        self.k_min = k_min;
        self.k_max = k_max;
        self
    }

    pub fn policy(mut self, policy: Feasibility) -> Self {
        self.policy = policy;
        self
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuerySummary {
    pub pair: String,
    pub k: usize,
    /// Bound the verdict was decided at.
    pub c: Rational,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Rational>,
    pub policy: Feasibility,
    pub direction: Direction,
}

#[derive(Clone, Debug, Serialize)]
pub struct QueryReport {
    pub query: QuerySummary,
    pub verdict: VerdictKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    pub backend: BackendUsed,
    pub elapsed_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explored: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub verdict: VerdictKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonBounds>,
    pub policy: Feasibility,
    pub queries: Vec<QueryReport>,
}

impl VerifyReport {
    pub fn first_violation(&self) -> Option<&QueryReport> {
        self.queries.iter().find(|q| q.verdict == VerdictKind::Violation)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Outcome of one (pair, k, c) decision.
#[derive(Clone, Debug)]
struct Outcome {
    kind: VerdictKind,
    c: Rational,
    counterexample: Option<Counterexample>,
    backend: BackendUsed,
    reason: Option<String>,
    explored: Option<u64>,
}

impl Outcome {
    fn unknown(c: &Rational, backend: BackendUsed, reason: String) -> Self {
        Outcome { kind: VerdictKind::Unknown, c: c.clone(), counterexample: None, backend, reason: Some(reason), explored: None }
    }
}

fn exact_outcome(q: &VerificationQuery<'_>) -> Result<Outcome, VerifierError> {
    let v = check_pair_exact(q)?;
    Ok(Outcome {
        kind: if v.holds { VerdictKind::Holds } else { VerdictKind::Violation },
        c: q.c.clone(),
        counterexample: v.counterexample,
        backend: BackendUsed::Exact,
        reason: None,
        explored: Some(v.explored),
    })
}

/// Declared domains of every parameter appearing in the query.
fn query_params(q: &VerificationQuery<'_>) -> Vec<ParamDomain> {
    let mut names: std::collections::BTreeSet<String> = q.pi.params();
    names.extend(q.tau.params());
    let mut out: Vec<ParamDomain> = q.h.params().to_vec();
    for n in names {
        if !out.iter().any(|d| d.name == n) {
            out.push(ParamDomain::unit(&n));
        }
    }
    out
}

/// Exact checks at every grid point; can find violations but never proves
/// the bound.
fn grid_outcome(q: &VerificationQuery<'_>, fractions: &[Rational], why: &str) -> Result<Outcome, VerifierError> {
    let mut explored = 0;
    for a in grid_assignments(&query_params(q), fractions) {
        if q.side_conditions.iter().any(|p| p.eval(&a).map(|v| !v.is_positive()).unwrap_or(true)) {
            continue;
        }
        let (h, pi, tau) = (q.h.instantiate(&a)?, q.pi.instantiate(&a)?, q.tau.instantiate(&a)?);
        let mut inner = VerificationQuery::new(&h, &pi, &tau, q.c.clone(), q.k).policy(q.policy).direction(q.direction);
        inner.side_conditions.clear();
        let v = check_pair_exact(&inner)?;
        explored += v.explored;
        if let Some(mut cex) = v.counterexample {
            cex.assignment = Some(a);
            return Ok(Outcome {
                kind: VerdictKind::Violation,
                c: q.c.clone(),
                counterexample: Some(cex),
                backend: BackendUsed::Grid,
                reason: Some(why.to_string()),
                explored: Some(explored),
            });
        }
    }
    let mut o = Outcome::unknown(&q.c, BackendUsed::Grid, format!("{}; no violation at grid points", why));
    o.explored = Some(explored);
    Ok(o)
}

fn smt_outcome(q: &VerificationQuery<'_>, cfg: &SolverConfig, fractions: &[Rational]) -> Result<Outcome, VerifierError> {
    if !cfg.is_available() {
        return grid_outcome(q, fractions, "backend-unavailable");
    }
    let ast = build_smt_query(q);
    let script = emit_script(&ast);
    let fallback = |why: String| grid_outcome(q, fractions, &why);
    let res = match run_solver(&script, cfg) {
        Ok(r) => r,
        Err(e) => return fallback(format!("solver error: {}", e)),
    };
    match res.status {
        SolverStatus::Unsat => Ok(Outcome {
            kind: VerdictKind::Holds,
            c: q.c.clone(),
            counterexample: None,
            backend: BackendUsed::Smt,
            reason: None,
            explored: None,
        }),
        SolverStatus::Sat => {
            let values = res.model.unwrap_or_default();
            let m = match interpret_model(&ast, &values) {
                Ok(m) => m,
                Err(e) => return fallback(format!("solver model rejected: {}", e)),
            };
            let a = (!m.assignment.is_empty()).then_some(&m.assignment);
            let cert = certify_counterexample(q.h, q.pi, q.tau, &q.c, &m.indices, a)?;
            let side = if cert.p_pi > &q.c * &cert.p_tau { ViolationSide::PiOverTau } else { ViolationSide::TauOverPi };
            let allowed = match q.direction {
                Direction::Both => true,
                Direction::PiOverTau => side == ViolationSide::PiOverTau,
                Direction::TauOverPi => side == ViolationSide::TauOverPi,
            };
            if !cert.valid || !allowed {
                return fallback("solver model failed exact certification".into());
            }
            let cex = Counterexample::new(q.h, m.indices, cert.p_pi, cert.p_tau, side, a.cloned());
            Ok(Outcome {
                kind: VerdictKind::Violation,
                c: q.c.clone(),
                counterexample: Some(cex),
                backend: BackendUsed::Smt,
                reason: None,
                explored: None,
            })
        }
        SolverStatus::Unknown => fallback("solver returned unknown".into()),
        SolverStatus::Timeout => fallback("solver timed out".into()),
    }
}

/// Decides at `e^eps` by running at the rounded-down bound first (a pass
/// there proves the bound) and then at the rounded-up bound (a violation
/// there is a genuine violation).
fn decide(bound: &Bound, run: impl Fn(&Rational) -> Result<Outcome, VerifierError>) -> Result<Outcome, VerifierError> {
    match bound {
        Bound::Ratio(c) => run(c),
        Bound::Epsilon(b) => {
            let low = run(&b.c_down)?;
            if low.kind != VerdictKind::Violation || b.c_up == b.c_down {
                return Ok(low);
            }
            let high = run(&b.c_up)?;
            match high.kind {
                VerdictKind::Violation => Ok(high),
                _ => Ok(Outcome::unknown(
                    &b.c_up,
                    high.backend,
                    "largest ratio lies within the rounding interval of e^eps".into(),
                )),
            }
        }
    }
}

fn decide_pair(
    h: &Hmm,
    pair: &LabeledPair,
    k: usize,
    opts: &VerifyOptions,
) -> Result<Outcome, VerifierError> {
    let run = |c: &Rational| -> Result<Outcome, VerifierError> {
        let q = VerificationQuery::new(h, &pair.pi, &pair.tau, c.clone(), k)
            .policy(opts.policy)
            .direction(opts.direction)
            .side_conditions(pair.side_conditions.clone());
        q.validate()?;
        match (opts.backend, q.is_concrete()) {
            (Backend::Exact, false) => Err(VerifierError::Parametric),
            (Backend::Exact, true) | (Backend::Auto, true) => exact_outcome(&q),
            (Backend::Smt, _) | (Backend::Auto, false) => smt_outcome(&q, &opts.solver, &opts.grid),
        }
    };
    decide(&opts.bound, run)
}

/// Checks every pair for `k` in `k_min..=k_max`, stopping a pair's sweep at
/// its first violation. Pairs are processed in parallel; the report lists
/// queries by pair, then by `k`.
pub fn verify(h: &Hmm, pairs: &[LabeledPair], opts: &VerifyOptions) -> Result<VerifyReport, VerifierError> {
    let per_pair: Vec<Result<Vec<QueryReport>, VerifierError>> = pairs
        .par_iter()
        .map(|pair| {
            let mut out = Vec::new();
            for k in opts.k_min.max(1)..=opts.k_max {
                let start = Instant::now();
                let o = decide_pair(h, pair, k, opts)?;
                let stop = o.kind == VerdictKind::Violation;
                out.push(QueryReport {
                    query: QuerySummary {
                        pair: pair.label.clone(),
                        k,
                        c: o.c,
                        epsilon: match &opts.bound {
                            Bound::Epsilon(b) => Some(b.epsilon.clone()),
                            Bound::Ratio(_) => None,
                        },
                        policy: opts.policy,
                        direction: opts.direction,
                    },
                    verdict: o.kind,
                    reason: o.reason,
                    counterexample: o.counterexample,
                    backend: o.backend,
                    elapsed_ms: start.elapsed().as_millis() as u64,
                    explored: o.explored,
                });
                if stop {
                    break;
                }
            }
            Ok(out)
        })
        .collect();
    let mut queries = Vec::new();
    for r in per_pair {
        queries.extend(r?);
    }
    let verdict = if queries.iter().any(|q| q.verdict == VerdictKind::Violation) {
        VerdictKind::Violation
    } else if queries.iter().any(|q| q.verdict == VerdictKind::Unknown) {
        VerdictKind::Unknown
    } else {
        VerdictKind::Holds
    };
    let (c, epsilon) = match &opts.bound {
        Bound::Ratio(c) => (Some(c.clone()), None),
        Bound::Epsilon(b) => (None, Some(b.clone())),
    };
    Ok(VerifyReport { verdict, c, epsilon, policy: opts.policy, queries })
}

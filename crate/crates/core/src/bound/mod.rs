//! Privacy-budget lower bounds: a statistical pass proposes an interval of
//! epsilons, then binary search settles it with exact verdicts.
//!
//! Only exact verdicts move the bracket. The result is relative to the
//! horizon `k_max`: mechanisms whose leakage grows with the output length
//! have no finite bound, and a larger horizon gives a larger answer.

use serde::Serialize;

use crate::algebra::Rational;
use crate::hmm::{Feasibility, Hmm};
use crate::scenario::LabeledPair;
use crate::stat::{eps_grid, pvalue_curve, StatError, TestPlan};
use crate::verifier::{
    verify, Backend, Bound, Direction, EpsilonBounds, QueryReport, VerdictKind, VerifierError, VerifyOptions,
};

#[derive(Debug, thiserror::Error)]
pub enum BoundError {
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error("precision must be positive")]
    Precision,
    #[error("interval [{lo}, {hi}] is empty or negative")]
    Interval { lo: Rational, hi: Rational },
    #[error("testing found no interval (lower end {lo:?}, upper end {hi:?}); supply one with --interval")]
    NoInterval { lo: Option<f64>, hi: Option<f64> },
    #[error("no tester input and no interval given")]
    NoTester,
}

/// Inputs of a bound search.
#[derive(Clone, Debug)]
pub struct BoundRequest<'a> {
    pub h: &'a Hmm,
    pub pairs: &'a [LabeledPair],
    /// Used only when no interval is supplied; its epsilon list is replaced
    /// by the grid below.
    pub tester: Option<TestPlan>,
    pub interval: Option<(Rational, Rational)>,
    pub precision: Rational,
    pub k_max: usize,
    pub policy: Feasibility,
    pub direction: Direction,
    pub grid_step: f64,
    pub grid_max: f64,
}

impl<'a> BoundRequest<'a> {
    pub fn new(h: &'a Hmm, pairs: &'a [LabeledPair], k_max: usize) -> Self {
        BoundRequest {
            h,
            pairs,
            tester: None,
            interval: None,
            precision: Rational::frac(1, 1000),
            k_max,
            policy: Feasibility::Any,
            direction: Direction::Both,
            grid_step: 0.05,
            grid_max: 3.0,
        }
    }

    pub fn interval(mut self, lo: Rational, hi: Rational) -> Self {
        self.interval = Some((lo, hi));
        self
    }

    pub fn tester(mut self, plan: TestPlan) -> Self {
        self.tester = Some(plan);
        self
    }

    pub fn precision(mut self, p: Rational) -> Self {
        self.precision = p;
        self
    }

    pub fn policy(mut self, policy: Feasibility) -> Self {
        self.policy = policy;
        self
    }

    fn options(&self, eps: &Rational) -> Result<VerifyOptions, BoundError> {
        Ok(VerifyOptions::new(Bound::epsilon(eps)?)
            .k_range(1, self.k_max)
            .policy(self.policy)
            .direction(self.direction)
            .backend(Backend::Exact))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Converged,
    NoViolationInInterval,
    ViolationAtUpperEnd,
    /// A verdict came back unknown; the bracket so far is still valid.
    Halted,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundStep {
    pub eps: Rational,
    pub eps_decimal: f64,
    pub verdict: VerdictKind,
    pub bounds: EpsilonBounds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation_k: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundResult {
    pub status: BoundStatus,
    pub eps_lo: Rational,
    pub eps_hi: Rational,
    pub eps_lo_decimal: f64,
    pub eps_hi_decimal: f64,
    pub interval: (Rational, Rational),
    pub iterations: usize,
    pub steps: Vec<BoundStep>,
    /// The violation backing `eps_lo`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<QueryReport>,
    pub horizon: usize,
    pub label: String,
}

impl BoundResult {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("bound results serialize")
    }
}

fn decimal(e: f64) -> Rational {
    Rational::from_decimal_str(&format!("{:.6}", e)).expect("formatted decimal")
}

/// Runs the tester over an epsilon grid: the lower end is the largest grid
/// point with `p < 0.05`, the upper end the smallest later point with
/// `p >= 0.99`.
pub fn find_interval(req: &BoundRequest<'_>) -> Result<(Rational, Rational), BoundError> {
    if let Some((lo, hi)) = &req.interval {
        return Ok((lo.clone(), hi.clone()));
    }
    let plan = req.tester.clone().ok_or(BoundError::NoTester)?;
    let curve = pvalue_curve(&plan.epsilons(eps_grid(req.grid_max, req.grid_step)))?;
    let lo = curve.points.iter().filter(|p| p.p < 0.05).map(|p| p.eps).last();
    let hi = curve.points.iter().find(|p| p.p >= 0.99 && lo.is_some_and(|l| p.eps > l)).map(|p| p.eps);
    match (lo, hi) {
        (Some(l), Some(h)) => Ok((decimal(l), decimal(h))),
        _ => Err(BoundError::NoInterval { lo, hi }),
    }
}

/// Number of halvings that bring `width` down to `precision`, at least one.
pub fn iterations_needed(width: &Rational, precision: &Rational) -> usize {
    let mut n = 0;
    let mut w = width.clone();
    while &w > precision {
        w = &w / &Rational::from(2);
        n += 1;
    }
    n.max(1)
}

fn decide(
    req: &BoundRequest<'_>,
    eps: &Rational,
    steps: &mut Vec<BoundStep>,
) -> Result<(VerdictKind, Option<QueryReport>), BoundError> {
    let report = verify(req.h, req.pairs, &req.options(eps)?)?;
    let cex = report.first_violation().cloned();
    steps.push(BoundStep {
        eps: eps.clone(),
        eps_decimal: eps.to_f64(),
        verdict: report.verdict,
        bounds: report.epsilon.clone().expect("epsilon bound"),
        violation_k: cex.as_ref().map(|q| q.query.k),
    });
    Ok((report.verdict, cex))
}

pub fn binary_search_bound(req: &BoundRequest<'_>, interval: (Rational, Rational)) -> Result<BoundResult, BoundError> {
    if !req.precision.is_positive() {
        return Err(BoundError::Precision);
    }
    let (mut lo, mut hi) = interval.clone();
    if lo.is_negative() || lo >= hi {
        return Err(BoundError::Interval { lo, hi });
    }
    let mut steps = Vec::new();
    let finish = |status, lo: Rational, hi: Rational, iterations, steps, counterexample| BoundResult {
        status,
        eps_lo_decimal: lo.to_f64(),
        eps_hi_decimal: hi.to_f64(),
        eps_lo: lo,
        eps_hi: hi,
        interval: interval.clone(),
        iterations,
        steps,
        counterexample,
        horizon: req.k_max,
        label: format!("lower bound at horizon k_max = {}", req.k_max),
    };

    let (at_lo, mut cex) = decide(req, &lo, &mut steps)?;
    match at_lo {
        VerdictKind::Violation => {}
        VerdictKind::Holds => {
            return Ok(finish(BoundStatus::NoViolationInInterval, lo, hi, 0, steps, None));
        }
        VerdictKind::Unknown => return Ok(finish(BoundStatus::Halted, lo, hi, 0, steps, None)),
    }
    let (at_hi, hi_cex) = decide(req, &hi, &mut steps)?;
    match at_hi {
        VerdictKind::Holds => {}
        VerdictKind::Violation => {
            return Ok(finish(BoundStatus::ViolationAtUpperEnd, hi.clone(), hi, 0, steps, hi_cex));
        }
        VerdictKind::Unknown => return Ok(finish(BoundStatus::Halted, lo, hi, 0, steps, cex)),
    }

    let needed = iterations_needed(&(&hi - &lo), &req.precision);
    let two = Rational::from(2);
    for i in 0..needed {
        let mid = &(&lo + &hi) / &two;
        match decide(req, &mid, &mut steps)? {
            (VerdictKind::Violation, c) => {
                lo = mid;
                cex = c;
            }
            (VerdictKind::Holds, _) => hi = mid,
            (VerdictKind::Unknown, _) => return Ok(finish(BoundStatus::Halted, lo, hi, i + 1, steps, cex)),
        }
    }
    Ok(finish(BoundStatus::Converged, lo, hi, needed, steps, cex))
}

/// Interval from the request (or the tester), then binary search.
pub fn lower_bound(req: &BoundRequest<'_>) -> Result<BoundResult, BoundError> {
    let interval = find_interval(req)?;
    binary_search_bound(req, interval)
}

//! Exact search over observation sequences with integer-scaled forward
//! vectors.
//!
//! Every probability in a concrete model is rescaled to an integer: the
//! transition matrix by the lcm of its denominators, the emission matrix
//! likewise, and both initial states by one common lcm. Forward vectors then
//! stay integral, and comparing `cd * sum(alpha)` with `cn * sum(beta)` for
//! `c = cn/cd` decides the ratio test exactly because both sides carry the
//! same scale. Vectors are divided by their joint gcd when they grow large;
//! the test is invariant under joint positive scaling.
//!
//! The search first runs on `u128` with checked arithmetic and restarts on
//! `BigUint` if anything overflows.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::algebra::Rational;
use crate::hmm::{Feasibility, Hmm, InformationState};

use super::{Direction, ViolationSide};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Overflow;

pub(crate) trait ExactInt: Clone + Send + Sync + Ord + std::fmt::Debug {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn from_big(b: &BigUint) -> Option<Self>;
    fn to_big(&self) -> BigUint;
    fn checked_mul(&self, o: &Self) -> Result<Self, Overflow>;
    fn checked_add(&self, o: &Self) -> Result<Self, Overflow>;
    fn gcd(&self, o: &Self) -> Self;
    fn div_exact(&self, o: &Self) -> Self;
    fn bits(&self) -> u64;
    /// Size above which vectors get divided by their gcd.
    const NORMALIZE_BITS: u64;
}

impl ExactInt for u128 {
    const NORMALIZE_BITS: u64 = 64;
    fn zero() -> Self {
        0
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn from_big(b: &BigUint) -> Option<Self> {
        b.to_u128()
    }
    fn to_big(&self) -> BigUint {
        BigUint::from(*self)
    }
    fn checked_mul(&self, o: &Self) -> Result<Self, Overflow> {
        u128::checked_mul(*self, *o).ok_or(Overflow)
    }
    fn checked_add(&self, o: &Self) -> Result<Self, Overflow> {
        u128::checked_add(*self, *o).ok_or(Overflow)
    }
    fn gcd(&self, o: &Self) -> Self {
        Integer::gcd(self, o)
    }
    fn div_exact(&self, o: &Self) -> Self {
        self / o
    }
    fn bits(&self) -> u64 {
        (128 - self.leading_zeros()) as u64
    }
}

impl ExactInt for BigUint {
    const NORMALIZE_BITS: u64 = 256;
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_big(b: &BigUint) -> Option<Self> {
        Some(b.clone())
    }
    fn to_big(&self) -> BigUint {
        self.clone()
    }
    fn checked_mul(&self, o: &Self) -> Result<Self, Overflow> {
        Ok(self * o)
    }
    fn checked_add(&self, o: &Self) -> Result<Self, Overflow> {
        Ok(self + o)
    }
    fn gcd(&self, o: &Self) -> Self {
        Integer::gcd(self, o)
    }
    fn div_exact(&self, o: &Self) -> Self {
        self / o
    }
    fn bits(&self) -> u64 {
        BigUint::bits(self)
    }
}

/// Concrete model with all probabilities scaled to nonnegative integers.
#[derive(Clone, Debug)]
pub(crate) struct ScaledModel {
    n_states: usize,
    n_obs: usize,
    preds: Vec<Vec<(usize, BigUint)>>,
    emit: Vec<Vec<(usize, BigUint)>>,
    pi: Vec<BigUint>,
    tau: Vec<BigUint>,
}

fn lcm_of<'a>(it: impl Iterator<Item = &'a Rational>) -> BigUint {
    it.fold(BigUint::from(1u32), |acc, r| {
        acc.lcm(&r.denom().to_biguint().expect("positive denominator"))
    })
}

fn scale(r: &Rational, l: &BigUint) -> BigUint {
    let (n, d) = r.to_biguint_parts().expect("nonnegative probability");
    n * (l / d)
}

impl ScaledModel {
    /// Returns `None` if the model or the states are not concrete.
    pub(crate) fn new(h: &Hmm, pi: &InformationState, tau: &InformationState) -> Option<Self> {
        if !h.is_concrete() {
            return None;
        }
        let pi = pi.as_rationals()?;
        let tau = tau.as_rationals()?;
        let n = h.n_states();
        let m = h.n_obs();
        let trans: Vec<Vec<(usize, Rational)>> = (0..n)
            .map(|s| {
                h.chain()
                    .predecessors(s)
                    .iter()
                    .map(|(p, poly)| (*p, poly.as_constant().expect("concrete")))
                    .collect()
            })
            .collect();
        let emis: Vec<Vec<(usize, Rational)>> = (0..m)
            .map(|w| {
                h.emitters(w)
                    .iter()
                    .map(|(s, poly)| (*s, poly.as_constant().expect("concrete")))
                    .collect()
            })
            .collect();
        let lt = lcm_of(trans.iter().flatten().map(|(_, r)| r));
        let le = lcm_of(emis.iter().flatten().map(|(_, r)| r));
        let li = lcm_of(pi.iter().chain(tau.iter()));
        Some(ScaledModel {
            n_states: n,
            n_obs: m,
            preds: trans
                .iter()
                .map(|row| row.iter().map(|(s, r)| (*s, scale(r, &lt))).collect())
                .collect(),
            emit: emis
                .iter()
                .map(|row| row.iter().map(|(s, r)| (*s, scale(r, &le))).collect())
                .collect(),
            pi: pi.iter().map(|r| scale(r, &li)).collect(),
            tau: tau.iter().map(|r| scale(r, &li)).collect(),
        })
    }

    fn typed<T: ExactInt>(&self) -> Option<Typed<T>> {
        let conv = |v: &[BigUint]| v.iter().map(T::from_big).collect::<Option<Vec<T>>>();
        let conv_rows = |rows: &[Vec<(usize, BigUint)>]| -> Option<Vec<Vec<(usize, T)>>> {
            rows.iter()
                .map(|r| r.iter().map(|(s, b)| T::from_big(b).map(|t| (*s, t))).collect())
                .collect()
        };
        Some(Typed {
            n_states: self.n_states,
            n_obs: self.n_obs,
            preds: conv_rows(&self.preds)?,
            emit: conv_rows(&self.emit)?,
            pi: conv(&self.pi)?,
            tau: conv(&self.tau)?,
        })
    }
}

struct Typed<T> {
    n_states: usize,
    n_obs: usize,
    preds: Vec<Vec<(usize, T)>>,
    emit: Vec<Vec<(usize, T)>>,
    pi: Vec<T>,
    tau: Vec<T>,
}

#[derive(Clone)]
struct Node<T> {
    alpha: Vec<T>,
    beta: Vec<T>,
}

/// Ratio test parameters shared by all workers.
#[derive(Clone, Debug)]
pub(crate) struct Test {
    pub cn: BigUint,
    pub cd: BigUint,
    pub policy: Feasibility,
    pub direction: Direction,
}

impl Test {
    pub(crate) fn new(c: &Rational, policy: Feasibility, direction: Direction) -> Self {
        let (cn, cd) = c.to_biguint_parts().expect("c is nonnegative");
        Test { cn, cd, policy, direction }
    }
}

struct TypedTest<T> {
    cn: T,
    cd: T,
    policy: Feasibility,
    direction: Direction,
}

fn sum<T: ExactInt>(v: &[T]) -> Result<T, Overflow> {
    v.iter().try_fold(T::zero(), |acc, x| acc.checked_add(x))
}

fn all_zero<T: ExactInt>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_zero())
}

/// `a * b > c * d`, falling back to big integers on overflow.
fn gt_products<T: ExactInt>(a: &T, b: &T, c: &T, d: &T) -> bool {
    match (a.checked_mul(b), c.checked_mul(d)) {
        (Ok(l), Ok(r)) => l > r,
        _ => a.to_big() * b.to_big() > c.to_big() * d.to_big(),
    }
}

impl<T: ExactInt> Typed<T> {
    fn init(&self, w: usize) -> Result<Node<T>, Overflow> {
        let mut alpha = vec![T::zero(); self.n_states];
        let mut beta = vec![T::zero(); self.n_states];
        for (s, e) in &self.emit[w] {
            if !self.pi[*s].is_zero() {
                alpha[*s] = self.pi[*s].checked_mul(e)?;
            }
            if !self.tau[*s].is_zero() {
                beta[*s] = self.tau[*s].checked_mul(e)?;
            }
        }
        Ok(Node { alpha, beta })
    }

    fn step_vec(&self, v: &[T], w: usize) -> Result<Vec<T>, Overflow> {
        let mut out = vec![T::zero(); self.n_states];
        for (s2, e) in &self.emit[w] {
            let mut acc = T::zero();
            for (s, p) in &self.preds[*s2] {
                if !v[*s].is_zero() {
                    acc = acc.checked_add(&v[*s].checked_mul(p)?)?;
                }
            }
            if !acc.is_zero() {
                out[*s2] = acc.checked_mul(e)?;
            }
        }
        Ok(out)
    }

    fn step(&self, n: &Node<T>, w: usize) -> Result<Node<T>, Overflow> {
        let alpha = if all_zero(&n.alpha) { vec![T::zero(); self.n_states] } else { self.step_vec(&n.alpha, w)? };
        let beta = if all_zero(&n.beta) { vec![T::zero(); self.n_states] } else { self.step_vec(&n.beta, w)? };
        Ok(Node { alpha, beta })
    }

    fn child(&self, parent: Option<&Node<T>>, w: usize) -> Result<Node<T>, Overflow> {
        match parent {
            None => self.init(w),
            Some(p) => self.step(p, w),
        }
    }
}

fn feasible<T: ExactInt>(n: &Node<T>, policy: Feasibility) -> bool {
    policy.admits(all_zero(&n.alpha), all_zero(&n.beta))
}

fn normalize<T: ExactInt>(n: &mut Node<T>) {
    let big = n.alpha.iter().chain(n.beta.iter()).any(|x| x.bits() > T::NORMALIZE_BITS);
    if !big {
        return;
    }
    let mut g = T::zero();
    for x in n.alpha.iter().chain(n.beta.iter()) {
        if !x.is_zero() {
            g = if g.is_zero() { x.clone() } else { g.gcd(x) };
        }
    }
    if g.is_zero() || g.bits() <= 1 {
        return;
    }
    for x in n.alpha.iter_mut().chain(n.beta.iter_mut()) {
        if !x.is_zero() {
            *x = x.div_exact(&g);
        }
    }
}

fn violation<T: ExactInt>(n: &Node<T>, t: &TypedTest<T>) -> Result<Option<ViolationSide>, Overflow> {
    let a = sum(&n.alpha)?;
    let b = sum(&n.beta)?;
    if matches!(t.direction, Direction::Both | Direction::PiOverTau) && gt_products(&a, &t.cd, &b, &t.cn) {
        return Ok(Some(ViolationSide::PiOverTau));
    }
    if matches!(t.direction, Direction::Both | Direction::TauOverPi) && gt_products(&b, &t.cd, &a, &t.cn) {
        return Ok(Some(ViolationSide::TauOverPi));
    }
    Ok(None)
}

/// Result of a fixed-length search.
#[derive(Clone, Debug)]
pub(crate) struct SearchResult {
    pub witness: Option<(Vec<usize>, ViolationSide)>,
    pub explored: u64,
}

struct Shared {
    best: AtomicUsize,
    explored: AtomicU64,
}

fn dfs<T: ExactInt>(
    m: &Typed<T>,
    t: &TypedTest<T>,
    k: usize,
    node: &Node<T>,
    prefix: &mut Vec<usize>,
    task: usize,
    shared: &Shared,
    counter: &mut u64,
) -> Result<Option<ViolationSide>, Overflow> {
    for w in 0..m.n_obs {
        if shared.best.load(Ordering::Relaxed) < task {
            return Ok(None);
        }
        let mut child = m.step(node, w)?;
        if !feasible(&child, t.policy) {
            continue;
        }
        prefix.push(w);
        if prefix.len() == k {
            *counter += 1;
            if let Some(side) = violation(&child, t)? {
                return Ok(Some(side));
            }
        } else {
            normalize(&mut child);
            if let Some(side) = dfs(m, t, k, &child, prefix, task, shared, counter)? {
                return Ok(Some(side));
            }
        }
        prefix.pop();
    }
    Ok(None)
}

/// Feasible prefixes of length `depth` with their forward vectors, in
/// lexicographic order.
fn frontier<T: ExactInt>(m: &Typed<T>, policy: Feasibility, depth: usize) -> Result<Vec<(Vec<usize>, Node<T>)>, Overflow> {
    let mut level: Vec<(Vec<usize>, Option<Node<T>>)> = vec![(Vec::new(), None)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (prefix, node) in &level {
            for w in 0..m.n_obs {
                let mut child = m.child(node.as_ref(), w)?;
                if feasible(&child, policy) {
                    normalize(&mut child);
                    let mut p = prefix.clone();
                    p.push(w);
                    next.push((p, Some(child)));
                }
            }
        }
        level = next;
    }
    Ok(level.into_iter().map(|(p, n)| (p, n.expect("depth >= 1"))).collect())
}

fn search_typed<T: ExactInt>(m: &Typed<T>, test: &Test, k: usize, parallel: bool) -> Result<SearchResult, Overflow> {
    let t = TypedTest {
        cn: T::from_big(&test.cn).ok_or(Overflow)?,
        cd: T::from_big(&test.cd).ok_or(Overflow)?,
        policy: test.policy,
        direction: test.direction,
    };
    // Leaves at depth 1 are checked directly; deeper searches are split on
    // prefixes so workers can run independently.
    let split = if k <= 2 || !parallel { 1 } else { 2.min(k - 1) };
    let shared = Shared { best: AtomicUsize::new(usize::MAX), explored: AtomicU64::new(0) };
    let tasks = frontier(m, t.policy, split)?;
    if split == k {
        for (prefix, node) in &tasks {
            shared.explored.fetch_add(1, Ordering::Relaxed);
            if let Some(side) = violation(node, &t)? {
                return Ok(SearchResult { witness: Some((prefix.clone(), side)), explored: shared.explored.into_inner() });
            }
        }
        return Ok(SearchResult { witness: None, explored: shared.explored.into_inner() });
    }
    let run = |(i, (prefix, node)): (usize, &(Vec<usize>, Node<T>))| -> Result<Option<(usize, Vec<usize>, ViolationSide)>, Overflow> {
        if shared.best.load(Ordering::Relaxed) < i {
            return Ok(None);
        }
        let mut p = prefix.clone();
        let mut counter = 0u64;
        let r = dfs(m, &t, k, node, &mut p, i, &shared, &mut counter);
        shared.explored.fetch_add(counter, Ordering::Relaxed);
        match r? {
            Some(side) => {
                shared.best.fetch_min(i, Ordering::Relaxed);
                Ok(Some((i, p, side)))
            }
            None => Ok(None),
        }
    };
    let results: Vec<_> = if parallel {
        tasks.par_iter().enumerate().map(run).collect()
    } else {
        tasks.iter().enumerate().map(run).collect()
    };
    let mut best: Option<(usize, Vec<usize>, ViolationSide)> = None;
    for r in results {
        if let Some((i, p, side)) = r? {
            if best.as_ref().is_none_or(|b| i < b.0) {
                best = Some((i, p, side));
            }
        }
    }
    Ok(SearchResult { witness: best.map(|(_, p, s)| (p, s)), explored: shared.explored.into_inner() })
}

/// Lexicographically first violating feasible sequence of length `k`.
pub(crate) fn search(m: &ScaledModel, test: &Test, k: usize, parallel: bool) -> SearchResult {
    if k == 0 {
        return SearchResult { witness: None, explored: 0 };
    }
    if let Some(small) = m.typed::<u128>() {
        if let Ok(r) = search_typed(&small, test, k, parallel) {
            return r;
        }
    }
    let big = m.typed::<BigUint>().expect("big integers always convert");
    search_typed(&big, test, k, parallel).expect("big integers do not overflow")
}

/// Same search forced onto big integers; used to cross-check the fast path.
#[cfg(test)]
pub(crate) fn search_big(m: &ScaledModel, test: &Test, k: usize) -> SearchResult {
    let big = m.typed::<BigUint>().expect("convert");
    search_typed(&big, test, k, false).expect("no overflow")
}

//! Hidden Markov models with polynomial entries and the forward algorithm.

mod enumerate;
mod forward;
mod json;
pub mod symbols;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraError, Assignment, Poly, RatFn, Rational};

pub use enumerate::{enumerate_sequences, Feasibility, SequenceEnumerator};
pub use forward::{forward_init, forward_step, sequence_probability, ForwardState};
pub use json::{HmmFile, ParamFile};

#[derive(Debug, thiserror::Error)]
pub enum HmmError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown observation `{0}`")]
    UnknownObservation(String),
    #[error("observation index {0} out of range")]
    ObservationIndex(usize),
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("{kind} row of state `{state}` sums to {sum}, expected 1")]
    RowSum { kind: &'static str, state: String, sum: String },
    #[error("{what} evaluates to {value} outside [0,1] at {at}")]
    OutOfRange { what: String, value: Rational, at: String },
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("parameter `{0}` is used but not declared")]
    UndeclaredParameter(String),
    #[error("parameter `{name}` has empty domain ({lo}, {hi})")]
    EmptyDomain { name: String, lo: Rational, hi: Rational },
    #[error("information state weights sum to {0}, expected 1")]
    NotADistribution(String),
    #[error("observation sequence is empty")]
    EmptySequence,
    #[error("unknown initial distribution `{0}`")]
    UnknownDistribution(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("invalid model JSON: {0}")]
    Json(String),
}

/// Open interval domain of a named parameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDomain {
    pub name: String,
    pub lo: Rational,
    pub hi: Rational,
}

impl ParamDomain {
    pub fn unit(name: &str) -> Self {
        ParamDomain { name: name.to_string(), lo: Rational::zero(), hi: Rational::one() }
    }

    /// Points `lo + (hi-lo)*f` for each fraction `f` in `fractions`.
    pub fn interior_points(&self, fractions: &[Rational]) -> Vec<Rational> {
        let width = &self.hi - &self.lo;
        fractions.iter().map(|f| &self.lo + &(&width * f)).collect()
    }

    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo < v && v < &self.hi
    }
}

/// Cartesian product of per-parameter point lists, in declaration order.
pub fn grid_assignments(params: &[ParamDomain], fractions: &[Rational]) -> Vec<Assignment> {
    let mut out = vec![Assignment::new()];
    for d in params {
        let pts = d.interior_points(fractions);
        let mut next = Vec::with_capacity(out.len() * pts.len());
        for a in &out {
            for v in &pts {
                let mut b = a.clone();
                b.insert(d.name.clone(), v.clone());
                next.push(b);
            }
        }
        out = next;
    }
    out
}

pub fn quarter_fractions() -> Vec<Rational> {
    vec![Rational::frac(1, 4), Rational::frac(1, 2), Rational::frac(3, 4)]
}

/// Sparse transition structure over named states.
#[derive(Clone, Debug)]
pub struct MarkovChain {
    states: Vec<String>,
    out: Vec<Vec<(usize, Poly)>>,
    inc: Vec<Vec<(usize, Poly)>>,
}

impl MarkovChain {
    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn successors(&self, s: usize) -> &[(usize, Poly)] {
        &self.out[s]
    }

    pub fn predecessors(&self, s: usize) -> &[(usize, Poly)] {
        &self.inc[s]
    }

    pub fn p(&self, s: usize, t: usize) -> Poly {
        self.out[s]
            .iter()
            .find(|(u, _)| *u == t)
            .map(|(_, p)| p.clone())
            .unwrap_or_default()
    }
}

/// Distribution over model states; weights may be rational functions of the
/// model parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InformationState {
    weights: Vec<RatFn>,
}

impl InformationState {
    /// Checks that the weights sum to one as a rational-function identity and
    /// that constant weights lie in [0,1].
    pub fn new(weights: Vec<RatFn>) -> Result<Self, HmmError> {
        let sum = weights.iter().fold(RatFn::zero(), |acc, w| acc.add(w));
        if sum != RatFn::one() {
            return Err(HmmError::NotADistribution(sum.to_string()));
        }
        for (i, w) in weights.iter().enumerate() {
            if let Some(c) = w.as_constant() {
                if c.is_negative() || c > Rational::one() {
                    return Err(HmmError::OutOfRange {
                        what: format!("initial weight {}", i),
                        value: c,
                        at: "constant".into(),
                    });
                }
            }
        }
        Ok(InformationState { weights })
    }

    pub fn from_rationals(weights: Vec<Rational>) -> Result<Self, HmmError> {
        InformationState::new(weights.into_iter().map(RatFn::constant).collect())
    }

    pub fn point_mass(n_states: usize, at: usize) -> Self {
        let mut weights = vec![RatFn::zero(); n_states];
        weights[at] = RatFn::one();
        InformationState { weights }
    }

    pub fn weights(&self) -> &[RatFn] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_concrete(&self) -> bool {
        self.weights.iter().all(|w| w.as_constant().is_some())
    }

    pub fn as_rationals(&self) -> Option<Vec<Rational>> {
        self.weights.iter().map(RatFn::as_constant).collect()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| !self.weights[i].is_zero()).collect()
    }

    /// Non-constant denominators; the encoding asserts them positive.
    pub fn denominators(&self) -> Vec<Poly> {
        let mut out: Vec<Poly> = Vec::new();
        for w in &self.weights {
            if !w.den.is_constant() && !out.contains(&w.den) {
                out.push(w.den.clone());
            }
        }
        out
    }

    pub fn instantiate(&self, a: &Assignment) -> Result<InformationState, HmmError> {
        let weights = self
            .weights
            .iter()
            .map(|w| w.eval(a).map(RatFn::constant))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(InformationState { weights })
    }

    pub fn params(&self) -> std::collections::BTreeSet<String> {
        self.weights.iter().flat_map(|w| w.params()).collect()
    }
}

/// Hidden Markov model: a Markov chain plus an emission matrix, both sparse.
#[derive(Clone, Debug)]
pub struct Hmm {
    chain: MarkovChain,
    observations: Vec<String>,
    emissions: Vec<Vec<(usize, Poly)>>,
    emitters: Vec<Vec<(usize, Poly)>>,
    params: Vec<ParamDomain>,
    state_index: HashMap<String, usize>,
    obs_index: HashMap<String, usize>,
    initial_distributions: BTreeMap<String, InformationState>,
    dp_adjacency: Vec<(String, String)>,
}

/// Incremental constructor for [`Hmm`]. Repeated entries for the same cell add up.
#[derive(Clone, Debug, Default)]
pub struct HmmBuilder {
    states: Vec<String>,
    observations: Vec<String>,
    transitions: Vec<(usize, usize, Poly)>,
    emissions: Vec<(usize, usize, Poly)>,
    params: Vec<ParamDomain>,
    state_index: HashMap<String, usize>,
    obs_index: HashMap<String, usize>,
    initial: Vec<(String, Vec<RatFn>)>,
    dp_adjacency: Vec<(String, String)>,
}

impl HmmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&mut self, name: &str) -> Result<usize, HmmError> {
        if self.state_index.contains_key(name) {
            return Err(HmmError::Duplicate { kind: "state", name: name.to_string() });
        }
        let i = self.states.len();
        self.states.push(name.to_string());
        self.state_index.insert(name.to_string(), i);
        Ok(i)
    }

    pub fn observation(&mut self, name: &str) -> Result<usize, HmmError> {
        if self.obs_index.contains_key(name) {
            return Err(HmmError::Duplicate { kind: "observation", name: name.to_string() });
        }
        let i = self.observations.len();
        self.observations.push(name.to_string());
        self.obs_index.insert(name.to_string(), i);
        Ok(i)
    }

    pub fn state_id(&self, name: &str) -> Result<usize, HmmError> {
        self.state_index.get(name).copied().ok_or_else(|| HmmError::UnknownState(name.to_string()))
    }

    pub fn obs_id(&self, name: &str) -> Result<usize, HmmError> {
        self.obs_index
            .get(name)
            .copied()
            .ok_or_else(|| HmmError::UnknownObservation(name.to_string()))
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn transition(&mut self, from: usize, to: usize, p: Poly) -> &mut Self {
        self.transitions.push((from, to, p));
        self
    }

    pub fn emission(&mut self, state: usize, obs: usize, p: Poly) -> &mut Self {
        self.emissions.push((state, obs, p));
        self
    }

    pub fn transition_named(&mut self, from: &str, to: &str, p: Poly) -> Result<&mut Self, HmmError> {
        let (f, t) = (self.state_id(from)?, self.state_id(to)?);
        Ok(self.transition(f, t, p))
    }

    pub fn emission_named(&mut self, state: &str, obs: &str, p: Poly) -> Result<&mut Self, HmmError> {
        let (s, o) = (self.state_id(state)?, self.obs_id(obs)?);
        Ok(self.emission(s, o, p))
    }

    pub fn param(&mut self, d: ParamDomain) -> &mut Self {
        self.params.push(d);
        self
    }

    pub fn initial_distribution(&mut self, name: &str, weights: Vec<RatFn>) -> &mut Self {
        self.initial.push((name.to_string(), weights));
        self
    }

    pub fn dp_adjacency(&mut self, pairs: Vec<(String, String)>) -> &mut Self {
        self.dp_adjacency = pairs;
        self
    }

    pub fn build(self) -> Result<Hmm, HmmError> {
        let n = self.states.len();
        let m = self.observations.len();
        let mut out: Vec<BTreeMap<usize, Poly>> = vec![BTreeMap::new(); n];
        for (f, t, p) in self.transitions {
            if f >= n || t >= n {
                return Err(HmmError::UnknownState(format!("#{}", f.max(t))));
            }
            let e = out[f].entry(t).or_default();
            *e = &*e + &p;
        }
        let mut em: Vec<BTreeMap<usize, Poly>> = vec![BTreeMap::new(); n];
        for (s, o, p) in self.emissions {
            if s >= n {
                return Err(HmmError::UnknownState(format!("#{}", s)));
            }
            if o >= m {
                return Err(HmmError::ObservationIndex(o));
            }
            let e = em[s].entry(o).or_default();
            *e = &*e + &p;
        }
        let strip = |rows: Vec<BTreeMap<usize, Poly>>| -> Vec<Vec<(usize, Poly)>> {
            rows.into_iter()
                .map(|r| r.into_iter().filter(|(_, p)| !p.is_zero()).collect())
                .collect()
        };
        let out = strip(out);
        let emissions = strip(em);
        let mut inc: Vec<Vec<(usize, Poly)>> = vec![Vec::new(); n];
        for (s, row) in out.iter().enumerate() {
            for (t, p) in row {
                inc[*t].push((s, p.clone()));
            }
        }
        let mut emitters: Vec<Vec<(usize, Poly)>> = vec![Vec::new(); m];
        for (s, row) in emissions.iter().enumerate() {
            for (o, p) in row {
                emitters[*o].push((s, p.clone()));
            }
        }
        for d in &self.params {
            if d.lo >= d.hi {
                return Err(HmmError::EmptyDomain { name: d.name.clone(), lo: d.lo.clone(), hi: d.hi.clone() });
            }
        }
        let mut hmm = Hmm {
            chain: MarkovChain { states: self.states, out, inc },
            observations: self.observations,
            emissions,
            emitters,
            params: self.params,
            state_index: self.state_index,
            obs_index: self.obs_index,
            initial_distributions: BTreeMap::new(),
            dp_adjacency: Vec::new(),
        };
        hmm.validate()?;
        for (name, w) in self.initial {
            let is = hmm.information_state(w)?;
            hmm.initial_distributions.insert(name, is);
        }
        for (a, b) in &self.dp_adjacency {
            hmm.state_id(a)?;
            hmm.state_id(b)?;
        }
        hmm.dp_adjacency = self.dp_adjacency;
        Ok(hmm)
    }
}

impl Hmm {
    pub fn states(&self) -> &[String] {
        &self.chain.states
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn n_states(&self) -> usize {
        self.chain.states.len()
    }

    pub fn n_obs(&self) -> usize {
        self.observations.len()
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn params(&self) -> &[ParamDomain] {
        &self.params
    }

    pub fn state_id(&self, name: &str) -> Result<usize, HmmError> {
        self.state_index.get(name).copied().ok_or_else(|| HmmError::UnknownState(name.to_string()))
    }

    /// Looks up an observation by ASCII name or by its Unicode rendering.
    pub fn obs_id(&self, name: &str) -> Result<usize, HmmError> {
        if let Some(&i) = self.obs_index.get(name) {
            return Ok(i);
        }
        self.obs_index
            .get(&symbols::from_unicode(name))
            .copied()
            .ok_or_else(|| HmmError::UnknownObservation(name.to_string()))
    }

    pub fn parse_sequence<S: AsRef<str>>(&self, seq: &[S]) -> Result<Vec<usize>, HmmError> {
        seq.iter().map(|s| self.obs_id(s.as_ref())).collect()
    }

    pub fn sequence_names(&self, seq: &[usize]) -> Vec<String> {
        seq.iter().map(|&i| self.observations[i].clone()).collect()
    }

    pub fn emissions_of(&self, s: usize) -> &[(usize, Poly)] {
        &self.emissions[s]
    }

    /// States able to emit observation `w`, with their emission probabilities.
    pub fn emitters(&self, w: usize) -> &[(usize, Poly)] {
        &self.emitters[w]
    }

    pub fn o(&self, s: usize, w: usize) -> Poly {
        self.emissions[s]
            .iter()
            .find(|(o, _)| *o == w)
            .map(|(_, p)| p.clone())
            .unwrap_or_default()
    }

    pub fn p(&self, s: usize, t: usize) -> Poly {
        self.chain.p(s, t)
    }

    pub fn initial_distributions(&self) -> &BTreeMap<String, InformationState> {
        &self.initial_distributions
    }

    pub fn initial_distribution(&self, name: &str) -> Result<&InformationState, HmmError> {
        self.initial_distributions
            .get(name)
            .ok_or_else(|| HmmError::UnknownDistribution(name.to_string()))
    }

    pub fn add_initial_distribution(&mut self, name: &str, is: InformationState) -> Result<(), HmmError> {
        self.check_state(&is)?;
        self.initial_distributions.insert(name.to_string(), is);
        Ok(())
    }

    /// Adds domains for parameters not yet declared; existing ones are kept.
    pub fn declare_params(&mut self, params: Vec<ParamDomain>) {
        for d in params {
            if !self.params.iter().any(|e| e.name == d.name) {
                self.params.push(d);
            }
        }
    }

    pub fn dp_adjacency(&self) -> &[(String, String)] {
        &self.dp_adjacency
    }

    pub fn set_dp_adjacency(&mut self, pairs: Vec<(String, String)>) -> Result<(), HmmError> {
        for (a, b) in &pairs {
            self.state_id(a)?;
            self.state_id(b)?;
        }
        self.dp_adjacency = pairs;
        Ok(())
    }

    pub fn point_mass(&self, state: &str) -> Result<InformationState, HmmError> {
        Ok(InformationState::point_mass(self.n_states(), self.state_id(state)?))
    }

    /// Builds and validates an information state for this model.
    pub fn information_state(&self, weights: Vec<RatFn>) -> Result<InformationState, HmmError> {
        let is = InformationState::new(weights)?;
        self.check_state(&is)?;
        Ok(is)
    }

    pub fn check_state(&self, is: &InformationState) -> Result<(), HmmError> {
        if is.len() != self.n_states() {
            return Err(HmmError::Dimension { expected: self.n_states(), got: is.len() });
        }
        for p in is.params() {
            if !self.params.iter().any(|d| d.name == p) {
                return Err(HmmError::UndeclaredParameter(p));
            }
        }
        Ok(())
    }

    /// True when no transition or emission depends on a parameter.
    pub fn is_concrete(&self) -> bool {
        self.chain.out.iter().flatten().chain(self.emissions.iter().flatten()).all(|(_, p)| p.is_constant())
    }

    /// Substitutes parameter values everywhere, dropping the bound parameters.
    pub fn instantiate(&self, a: &Assignment) -> Result<Hmm, HmmError> {
        let sub = |rows: &Vec<Vec<(usize, Poly)>>| -> Vec<Vec<(usize, Poly)>> {
            rows.iter()
                .map(|r| {
                    r.iter()
                        .map(|(i, p)| (*i, p.partial_eval(a)))
                        .filter(|(_, p)| !p.is_zero())
                        .collect()
                })
                .collect()
        };
        let mut h = self.clone();
        h.chain.out = sub(&self.chain.out);
        h.chain.inc = sub(&self.chain.inc);
        h.emissions = sub(&self.emissions);
        h.emitters = sub(&self.emitters);
        h.params.retain(|d| !a.contains_key(&d.name));
        let mut dists = BTreeMap::new();
        for (k, v) in &self.initial_distributions {
            let w = v
                .weights()
                .iter()
                .map(|w| w.partial_eval(a))
                .collect::<Result<Vec<_>, _>>()?;
            dists.insert(k.clone(), InformationState { weights: w });
        }
        h.initial_distributions = dists;
        Ok(h)
    }

    fn validate(&self) -> Result<(), HmmError> {
        for p in self.used_params() {
            if !self.params.iter().any(|d| d.name == p) {
                return Err(HmmError::UndeclaredParameter(p));
            }
        }
        for (s, row) in self.chain.out.iter().enumerate() {
            let sum = row.iter().fold(Poly::zero(), |acc, (_, p)| &acc + p);
            if !sum.is_one() {
                return Err(HmmError::RowSum {
                    kind: "transition",
                    state: self.chain.states[s].clone(),
                    sum: sum.to_string(),
                });
            }
        }
        for (s, row) in self.emissions.iter().enumerate() {
            let sum = row.iter().fold(Poly::zero(), |acc, (_, p)| &acc + p);
            if !sum.is_one() {
                return Err(HmmError::RowSum {
                    kind: "emission",
                    state: self.chain.states[s].clone(),
                    sum: sum.to_string(),
                });
            }
        }
        self.check_ranges()
    }

    fn used_params(&self) -> std::collections::BTreeSet<String> {
        self.chain
            .out
            .iter()
            .flatten()
            .chain(self.emissions.iter().flatten())
            .flat_map(|(_, p)| p.params())
            .collect()
    }

    /// Range check of every entry on a grid over the parameter domain.
    fn check_ranges(&self) -> Result<(), HmmError> {
        let fractions = if self.params.len() <= 4 { quarter_fractions() } else { vec![Rational::frac(1, 2)] };
        let grid = grid_assignments(&self.params, &fractions);
        let zero = Rational::zero();
        let one = Rational::one();
        let entries = self
            .chain
            .out
            .iter()
            .enumerate()
            .flat_map(|(s, r)| r.iter().map(move |(t, p)| (true, s, *t, p)))
            .chain(
                self.emissions
                    .iter()
                    .enumerate()
                    .flat_map(|(s, r)| r.iter().map(move |(o, p)| (false, s, *o, p))),
            );
        for (is_t, s, x, p) in entries {
            let points: &[Assignment] = if p.is_constant() { &grid[..1] } else { &grid };
            for a in points {
                let v = p.eval(a)?;
                if v < zero || v > one {
                    let what = if is_t {
                        format!("p({}, {})", self.chain.states[s], self.chain.states[x])
                    } else {
                        format!("o({}, {})", self.chain.states[s], self.observations[x])
                    };
                    return Err(HmmError::OutOfRange { what, value: v, at: format!("{:?}", a) });
                }
            }
        }
        Ok(())
    }
}

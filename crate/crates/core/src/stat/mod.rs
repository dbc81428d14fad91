//! Sampling-based privacy audit.
//!
//! Both inputs are run many times; an event (an output pattern) is chosen on
//! one batch of samples and then tested on an independent batch. The test is
//! conditional: given `c1 + c2` hits, the number attributed to the first
//! input is binomial with success probability `e^eps / (1 + e^eps)` when the
//! two event probabilities differ by exactly the factor `e^eps`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::hmm::symbols::to_unicode;
use crate::mechanisms::{CompiledMechanism, MechanismError, MechanismInput, MechanismSpec};

/// Samples drawn per seeded stream. Work is split on these boundaries, so the
/// counts do not depend on the number of worker threads.
const CHUNK: u64 = 4096;

#[derive(Debug, thiserror::Error)]
pub enum StatError {
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error("sample sizes must be positive")]
    NoSamples,
    #[error("epsilon must be finite and nonnegative, got {0}")]
    BadEpsilon(f64),
    #[error("counts ({c1}, {c2}) exceed the sample size {n}")]
    BadCounts { c1: u64, c2: u64, n: u64 },
    #[error("no event observed on either input")]
    NoEvents,
    #[error("parametric priors cannot be sampled; use the verifier for scenario {0}")]
    Parametric(String),
}

/// Output pattern over one mechanism run.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "outputs", rename_all = "snake_case")]
pub enum Event {
    Exact(Vec<String>),
    Prefix(Vec<String>),
    OneOf(Vec<Vec<String>>),
}

impl Event {
    pub fn matches(&self, run: &[String]) -> bool {
        match self {
            Event::Exact(s) => s.as_slice() == run,
            Event::Prefix(s) => run.starts_with(s),
            Event::OneOf(set) => set.iter().any(|s| s.as_slice() == run),
        }
    }

    fn render_with(&self, f: impl Fn(&str) -> String) -> String {
        let seq = |s: &[String]| s.iter().map(|x| f(x)).collect::<Vec<_>>().join(",");
        match self {
            Event::Exact(s) => format!("[{}]", seq(s)),
            Event::Prefix(s) => format!("[{},...]", seq(s)),
            Event::OneOf(set) => {
                format!("{{{}}}", set.iter().map(|s| format!("[{}]", seq(s))).collect::<Vec<_>>().join(" "))
            }
        }
    }

    pub fn unicode(&self) -> String {
        self.render_with(to_unicode)
    }

    pub fn ascii(&self) -> String {
        self.render_with(|s| s.to_string())
    }
}

/// Which input is expected to make the event more likely.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    FirstOverSecond,
    SecondOverFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestPlan {
    pub mechanism: MechanismSpec,
    pub d1: MechanismInput,
    pub d2: MechanismInput,
    pub epsilons: Vec<f64>,
    pub n_select: u64,
    pub n_detect: u64,
    pub seed: u64,
}

impl TestPlan {
    pub fn new(mechanism: MechanismSpec, d1: MechanismInput, d2: MechanismInput) -> Self {
        TestPlan { mechanism, d1, d2, epsilons: Vec::new(), n_select: 50_000, n_detect: 200_000, seed: 0 }
    }

    pub fn epsilons(mut self, epsilons: Vec<f64>) -> Self {
        self.epsilons = epsilons;
        self
    }

    pub fn samples(mut self, n_select: u64, n_detect: u64) -> Self {
        self.n_select = n_select;
        self.n_detect = n_detect;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), StatError> {
        self.mechanism.validate()?;
        self.d1.check(&self.mechanism)?;
        self.d2.check(&self.mechanism)?;
        if self.n_select == 0 || self.n_detect == 0 {
            return Err(StatError::NoSamples);
        }
        for &e in &self.epsilons {
            check_eps(e)?;
        }
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<(), StatError> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(StatError::BadEpsilon(eps))
    }
}

/// `Pr[X >= c1]` for `X ~ Binomial(c1 + c2, e^eps / (1 + e^eps))`.
pub fn hypothesis_test(c1: u64, c2: u64, n: u64, eps: f64) -> Result<f64, StatError> {
    check_eps(eps)?;
    if c1 > n || c2 > n {
        return Err(StatError::BadCounts { c1, c2, n });
    }
    if c1 == 0 {
        return Ok(1.0);
    }
    let q = 1.0 / (1.0 + (-eps).exp());
    let b = Binomial::new(q, c1 + c2).expect("q is a probability");
    Ok(b.sf(c1 - 1).clamp(0.0, 1.0))
}

/// Run counts for one input, keyed by the full output sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub n: u64,
    pub counts: BTreeMap<Vec<String>, u64>,
}

impl OutcomeCounts {
    pub fn count(&self, e: &Event) -> u64 {
        self.counts.iter().filter(|(k, _)| e.matches(k)).map(|(_, c)| c).sum()
    }
}

#[derive(Clone, Copy)]
enum Phase {
    Select = 0,
    Detect = 1,
}

/// Draws `n` runs on one input. Chunk `i` of phase `ph` and side `side` uses
/// its own ChaCha stream, so selection and detection never share randomness.
fn sample_counts(
    m: &CompiledMechanism,
    input: &MechanismInput,
    n: u64,
    seed: u64,
    ph: Phase,
    side: u64,
) -> OutcomeCounts {
    let chunks = n.div_ceil(CHUNK);
    let codes = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((ph as u64) << 48) | (side << 40) | i);
            let len = CHUNK.min(n - i * CHUNK);
            let mut local: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
            let mut buf = Vec::new();
            for _ in 0..len {
                m.sample_into(input, &mut rng, &mut buf);
                *local.entry(buf.clone()).or_insert(0) += 1;
            }
            local
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    let counts = codes.into_iter().map(|(k, v)| (m.symbols(&k), v)).collect();
    OutcomeCounts { n, counts }
}

/// Samples for both inputs in one phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplePair {
    pub first: OutcomeCounts,
    pub second: OutcomeCounts,
}

impl SamplePair {
    fn draw(plan: &TestPlan, n: u64, ph: Phase) -> Result<Self, StatError> {
        let m = CompiledMechanism::new(&plan.mechanism)?;
        Ok(SamplePair {
            first: sample_counts(&m, &plan.d1, n, plan.seed, ph, 0),
            second: sample_counts(&m, &plan.d2, n, plan.seed, ph, 1),
        })
    }

    /// Exact outputs seen on either side plus all their nonempty prefixes.
    pub fn candidates(&self) -> Vec<Event> {
        let mut out = std::collections::BTreeSet::new();
        for k in self.first.counts.keys().chain(self.second.counts.keys()) {
            if k.is_empty() {
                continue;
            }
            out.insert(Event::Exact(k.clone()));
            for l in 1..k.len() {
                out.insert(Event::Prefix(k[..l].to_vec()));
            }
        }
        out.into_iter().collect()
    }

    pub fn p_value(&self, e: &Event, order: Order, eps: f64) -> Result<f64, StatError> {
        let (a, b) = (self.first.count(e), self.second.count(e));
        let n = self.first.n.max(self.second.n);
        match order {
            Order::FirstOverSecond => hypothesis_test(a, b, n, eps),
            Order::SecondOverFirst => hypothesis_test(b, a, n, eps),
        }
    }

    fn counts(&self, e: &Event, order: Order) -> (u64, u64) {
        let (a, b) = (self.first.count(e), self.second.count(e));
        match order {
            Order::FirstOverSecond => (a, b),
            Order::SecondOverFirst => (b, a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectedEvent {
    pub event: Event,
    pub order: Order,
    pub p_select: f64,
}

/// The candidate and order with the smallest p-value on the selection
/// samples. Ties keep the first candidate in sorted order.
pub fn select_from(samples: &SamplePair, eps: f64) -> Result<SelectedEvent, StatError> {
    let mut best: Option<SelectedEvent> = None;
    for e in samples.candidates() {
        for order in [Order::FirstOverSecond, Order::SecondOverFirst] {
            let p = samples.p_value(&e, order, eps)?;
            if best.as_ref().is_none_or(|b| p < b.p_select) {
                best = Some(SelectedEvent { event: e.clone(), order, p_select: p });
            }
        }
    }
    best.ok_or(StatError::NoEvents)
}

pub fn select_event(plan: &TestPlan, eps: f64) -> Result<SelectedEvent, StatError> {
    plan.validate()?;
    check_eps(eps)?;
    select_from(&SamplePair::draw(plan, plan.n_select, Phase::Select)?, eps)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub eps: f64,
    pub p: f64,
    pub event: String,
    pub event_ascii: String,
    pub order: Order,
    pub p_select: f64,
    /// Detection counts in the tested order.
    pub c1: u64,
    pub c2: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveReport {
    pub mechanism: MechanismSpec,
    pub d1: MechanismInput,
    pub d2: MechanismInput,
    pub n_select: u64,
    pub n_detect: u64,
    pub seed: u64,
    pub workers: usize,
    pub points: Vec<CurvePoint>,
}

impl CurveReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,p,event\n");
        for p in &self.points {
            s.push_str(&format!("{},{},\"{}\"\n", p.eps, p.p, p.event_ascii));
        }
        s
    }
}

/// For every epsilon: select on the selection samples, then test the chosen
/// event on the detection samples.
pub fn pvalue_curve(plan: &TestPlan) -> Result<CurveReport, StatError> {
    plan.validate()?;
    let select = SamplePair::draw(plan, plan.n_select, Phase::Select)?;
    let detect = SamplePair::draw(plan, plan.n_detect, Phase::Detect)?;
    let mut points = Vec::with_capacity(plan.epsilons.len());
    for &eps in &plan.epsilons {
        let s = select_from(&select, eps)?;
        let (c1, c2) = detect.counts(&s.event, s.order);
        let p = hypothesis_test(c1, c2, plan.n_detect, eps)?;
        points.push(CurvePoint {
            eps,
            p,
            event: s.event.unicode(),
            event_ascii: s.event.ascii(),
            order: s.order,
            p_select: s.p_select,
            c1,
            c2,
        });
    }
    Ok(CurveReport {
        mechanism: plan.mechanism.clone(),
        d1: plan.d1.clone(),
        d2: plan.d2.clone(),
        n_select: plan.n_select,
        n_detect: plan.n_detect,
        seed: plan.seed,
        workers: rayon::current_num_threads(),
        points,
    })
}

/// `0, step, 2*step, ..., hi`, computed from integer multiples to avoid drift.
pub fn eps_grid(hi: f64, step: f64) -> Vec<f64> {
    let n = (hi / step + 1e-9).floor() as u64;
    (0..=n).map(|i| ((i as f64 * step) * 1e9).round() / 1e9).collect()
}

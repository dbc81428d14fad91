use crate::algebra::RatFn;

use super::{Hmm, HmmError, InformationState};

/// Forward vector after `t + 1` observations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardState {
    pub alpha: Vec<RatFn>,
    pub t: usize,
}

impl ForwardState {
    pub fn total(&self) -> RatFn {
        self.alpha.iter().fold(RatFn::zero(), |acc, a| acc.add(a))
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().all(RatFn::is_zero)
    }
}

fn check_obs(h: &Hmm, w: usize) -> Result<(), HmmError> {
    if w >= h.n_obs() {
        return Err(HmmError::ObservationIndex(w));
    }
    Ok(())
}

/// `alpha_0(s) = pi(s) * o(s, w0)`.
pub fn forward_init(h: &Hmm, pi: &InformationState, w0: usize) -> Result<ForwardState, HmmError> {
    check_obs(h, w0)?;
    h.check_state(pi)?;
    let mut alpha = vec![RatFn::zero(); h.n_states()];
    for (s, o) in h.emitters(w0) {
        alpha[*s] = pi.weights()[*s].mul_poly(o);
    }
    Ok(ForwardState { alpha, t: 0 })
}

/// `alpha_{t+1}(s') = [sum_s alpha_t(s) p(s, s')] * o(s', w)`.
pub fn forward_step(h: &Hmm, fs: &ForwardState, w: usize) -> Result<ForwardState, HmmError> {
    check_obs(h, w)?;
    if fs.alpha.len() != h.n_states() {
        return Err(HmmError::Dimension { expected: h.n_states(), got: fs.alpha.len() });
    }
    let mut alpha = vec![RatFn::zero(); h.n_states()];
    for (s2, o) in h.emitters(w) {
        let mut acc = RatFn::zero();
        for (s, p) in h.chain().predecessors(*s2) {
            if !fs.alpha[*s].is_zero() {
                acc = acc.add(&fs.alpha[*s].mul_poly(p));
            }
        }
        alpha[*s2] = acc.mul_poly(o);
    }
    Ok(ForwardState { alpha, t: fs.t + 1 })
}

/// Probability of observing `seq` from initial state `pi`.
pub fn sequence_probability(h: &Hmm, pi: &InformationState, seq: &[usize]) -> Result<RatFn, HmmError> {
    let (first, rest) = seq.split_first().ok_or(HmmError::EmptySequence)?;
    let mut fs = forward_init(h, pi, *first)?;
    for &w in rest {
        if fs.is_zero() {
            check_obs(h, w)?;
            continue;
        }
        fs = forward_step(h, &fs, w)?;
    }
    Ok(fs.total())
}

use serde::{Deserialize, Serialize};

use super::{forward_init, forward_step, ForwardState, Hmm, HmmError, InformationState};

/// Which sequences count as outputs of a pair of initial states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Feasibility {
    /// Nonzero probability under at least one of the two states.
    #[default]
    Any,
    /// Nonzero probability under both states.
    Both,
}

impl Feasibility {
    pub fn admits(self, pi_zero: bool, tau_zero: bool) -> bool {
        match self {
            Feasibility::Any => !(pi_zero && tau_zero),
            Feasibility::Both => !pi_zero && !tau_zero,
        }
    }
}

impl std::str::FromStr for Feasibility {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "any" => Ok(Feasibility::Any),
            "both" => Ok(Feasibility::Both),
            other => Err(format!("unknown feasibility policy `{}`", other)),
        }
    }
}

struct Frame {
    states: Option<(ForwardState, ForwardState)>,
    next: usize,
}

/// Depth-first, lexicographic stream of feasible length-`k` sequences.
/// Prefixes whose forward vectors rule out every extension are pruned.
pub struct SequenceEnumerator<'a> {
    h: &'a Hmm,
    pi: &'a InformationState,
    tau: &'a InformationState,
    k: usize,
    policy: Feasibility,
    stack: Vec<Frame>,
    prefix: Vec<usize>,
}

impl<'a> Iterator for SequenceEnumerator<'a> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        loop {
            let depth = self.stack.len();
            let top = self.stack.last_mut()?;
            if top.next >= self.h.n_obs() {
                self.stack.pop();
                if depth > 1 {
                    self.prefix.pop();
                }
                continue;
            }
            let w = top.next;
            top.next += 1;
            let (a, b) = match &top.states {
                None => (
                    forward_init(self.h, self.pi, w).expect("validated"),
                    forward_init(self.h, self.tau, w).expect("validated"),
                ),
                Some((a, b)) => (
                    forward_step(self.h, a, w).expect("validated"),
                    forward_step(self.h, b, w).expect("validated"),
                ),
            };
            if !self.policy.admits(a.is_zero(), b.is_zero()) {
                continue;
            }
            if depth == self.k {
                let mut seq = self.prefix.clone();
                seq.push(w);
                return Some(seq);
            }
            self.prefix.push(w);
            self.stack.push(Frame { states: Some((a, b)), next: 0 });
        }
    }
}

pub fn enumerate_sequences<'a>(
    h: &'a Hmm,
    pi: &'a InformationState,
    tau: &'a InformationState,
    k: usize,
    policy: Feasibility,
) -> Result<SequenceEnumerator<'a>, HmmError> {
    h.check_state(pi)?;
    h.check_state(tau)?;
    let stack = if k == 0 { Vec::new() } else { vec![Frame { states: None, next: 0 }] };
    Ok(SequenceEnumerator { h, pi, tau, k, policy, stack, prefix: Vec::new() })
}

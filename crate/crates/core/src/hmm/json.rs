use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::{Expr, Rational};

use super::{Hmm, HmmBuilder, HmmError, ParamDomain};

fn zero() -> Rational {
    Rational::zero()
}

fn one() -> Rational {
    Rational::one()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub name: String,
    #[serde(default = "zero")]
    pub lo: Rational,
    #[serde(default = "one")]
    pub hi: Rational,
}

/// On-disk model format. Omitted matrix entries are zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmmFile {
    pub states: Vec<String>,
    pub observations: Vec<String>,
    pub transitions: Vec<(String, String, Expr)>,
    pub emissions: Vec<(String, String, Expr)>,
    #[serde(default)]
    pub params: Vec<ParamFile>,
    #[serde(default)]
    pub initial_distributions: BTreeMap<String, Vec<Expr>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dp_adjacency: Vec<(String, String)>,
}

impl HmmFile {
    pub fn into_hmm(self) -> Result<Hmm, HmmError> {
        let mut b = HmmBuilder::new();
        for s in &self.states {
            b.state(s)?;
        }
        for o in &self.observations {
            b.observation(o)?;
        }
        for p in self.params {
            b.param(ParamDomain { name: p.name, lo: p.lo, hi: p.hi });
        }
        for (f, t, e) in &self.transitions {
            b.transition_named(f, t, e.to_poly()?)?;
        }
        for (s, o, e) in &self.emissions {
            b.emission_named(s, o, e.to_poly()?)?;
        }
        for (name, ws) in &self.initial_distributions {
            let w = ws.iter().map(Expr::to_ratfn).collect::<Result<Vec<_>, _>>()?;
            b.initial_distribution(name, w);
        }
        b.dp_adjacency(self.dp_adjacency);
        b.build()
    }

    pub fn from_hmm(h: &Hmm) -> HmmFile {
        let states = h.states().to_vec();
        let observations = h.observations().to_vec();
        let mut transitions = Vec::new();
        let mut emissions = Vec::new();
        for (s, name) in states.iter().enumerate() {
            for (t, p) in h.chain().successors(s) {
                transitions.push((name.clone(), states[*t].clone(), Expr::from_poly(p)));
            }
            for (o, p) in h.emissions_of(s) {
                emissions.push((name.clone(), observations[*o].clone(), Expr::from_poly(p)));
            }
        }
        let params = h
            .params()
            .iter()
            .map(|d| ParamFile { name: d.name.clone(), lo: d.lo.clone(), hi: d.hi.clone() })
            .collect();
        let initial_distributions = h
            .initial_distributions()
            .iter()
            .map(|(k, v)| (k.clone(), v.weights().iter().map(Expr::from_ratfn).collect()))
            .collect();
        HmmFile {
            states,
            observations,
            transitions,
            emissions,
            params,
            initial_distributions,
            dp_adjacency: h.dp_adjacency().to_vec(),
        }
    }
}

impl Hmm {
    pub fn from_json_str(s: &str) -> Result<Hmm, HmmError> {
        let f: HmmFile = serde_json::from_str(s).map_err(|e| HmmError::Json(e.to_string()))?;
        f.into_hmm()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&HmmFile::from_hmm(self)).expect("model serializes")
    }
}

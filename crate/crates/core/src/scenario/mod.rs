//! Pufferfish scenarios: dataset priors, extensional secrets, secret pairs,
//! and the Bayesian conditioning that turns them into initial information
//! states. Differential privacy is the special case of point-mass pairs over
//! neighboring datasets.

mod presets;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraError, Expr, Poly, RatFn};
use crate::hmm::{grid_assignments, quarter_fractions, Hmm, HmmError, InformationState, ParamDomain};

pub use presets::{
    contagious_pair_scenario, disease_scenario, entry_change_adjacency, independent_count_scenario, Correlation,
};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("conditional on secret `{secret}` is undefined under prior `{prior}` (the secret has probability 0)")]
    UndefinedConditional { prior: String, secret: String },
    #[error("prior `{prior}` sums to {sum}, expected 1")]
    PriorSum { prior: String, sum: String },
    #[error("prior `{prior}` is negative at dataset `{dataset}`")]
    NegativePrior { prior: String, dataset: String },
    #[error("dataset `{0}` is not in the universe")]
    UnknownDataset(String),
    #[error("unknown secret `{0}`")]
    UnknownSecret(String),
    #[error("dataset `{0}` has no state mapping")]
    Unmapped(String),
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("invalid scenario JSON: {0}")]
    Json(String),
}

/// Distribution over datasets; datasets absent from `probs` have probability 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetPrior {
    pub name: String,
    pub probs: BTreeMap<String, Poly>,
}

impl DatasetPrior {
    pub fn support(&self) -> Vec<&String> {
        self.probs.iter().filter(|(_, p)| !p.is_zero()).map(|(d, _)| d).collect()
    }

    pub fn params(&self) -> BTreeSet<String> {
        self.probs.values().flat_map(Poly::params).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Secret {
    pub name: String,
    pub datasets: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PufferfishScenario {
    pub universe: Vec<String>,
    pub priors: Vec<DatasetPrior>,
    pub secrets: Vec<Secret>,
    pub pairs: Vec<(String, String)>,
    pub state_of: BTreeMap<String, String>,
    pub params: Vec<ParamDomain>,
}

/// Conditioned information state plus the nonvanishing condition on the
/// secret's probability when it is symbolic.
#[derive(Clone, Debug)]
pub struct Conditioned {
    pub state: InformationState,
    pub side_condition: Option<Poly>,
}

/// Initial-state pair produced by a scenario or a neighbor relation.
#[derive(Clone, Debug)]
pub struct LabeledPair {
    pub label: String,
    pub pi: InformationState,
    pub tau: InformationState,
    /// Polynomials that must be nonzero for the pair to be defined.
    pub side_conditions: Vec<Poly>,
}

impl PufferfishScenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let universe: BTreeSet<&String> = self.universe.iter().collect();
        for prior in &self.priors {
            for d in prior.probs.keys() {
                if !universe.contains(d) {
                    return Err(ScenarioError::UnknownDataset(d.clone()));
                }
            }
            let sum = prior.probs.values().fold(Poly::zero(), |acc, p| &acc + p);
            if !sum.is_one() {
                return Err(ScenarioError::PriorSum { prior: prior.name.clone(), sum: sum.to_string() });
            }
            let params = self.all_params(prior);
            let grid = grid_assignments(&params, &quarter_fractions());
            for (d, p) in &prior.probs {
                for a in &grid {
                    if p.eval(a)?.is_negative() {
                        return Err(ScenarioError::NegativePrior { prior: prior.name.clone(), dataset: d.clone() });
                    }
                }
            }
            for d in prior.support() {
                if !self.state_of.contains_key(d) {
                    return Err(ScenarioError::Unmapped(d.clone()));
                }
            }
        }
        for s in &self.secrets {
            for d in &s.datasets {
                if !universe.contains(d) {
                    return Err(ScenarioError::UnknownDataset(d.clone()));
                }
            }
        }
        for (a, b) in &self.pairs {
            self.secret(a)?;
            self.secret(b)?;
        }
        Ok(())
    }

    pub fn secret(&self, name: &str) -> Result<&Secret, ScenarioError> {
        self.secrets
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| ScenarioError::UnknownSecret(name.to_string()))
    }

    /// Declared domains, plus the default (0,1) for any undeclared parameter
    /// used by `prior`.
    fn all_params(&self, prior: &DatasetPrior) -> Vec<ParamDomain> {
        let mut out = self.params.clone();
        for p in prior.params() {
            if !out.iter().any(|d| d.name == p) {
                out.push(ParamDomain::unit(&p));
            }
        }
        out
    }

    /// Parameter domains for every parameter any prior uses.
    pub fn param_domains(&self) -> Vec<ParamDomain> {
        let mut out = self.params.clone();
        for prior in &self.priors {
            for d in self.all_params(prior) {
                if !out.iter().any(|e| e.name == d.name) {
                    out.push(d);
                }
            }
        }
        out
    }

    pub fn from_json_str(s: &str) -> Result<Self, ScenarioError> {
        let f: ScenarioFile = serde_json::from_str(s).map_err(|e| ScenarioError::Json(e.to_string()))?;
        f.into_scenario()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from_scenario(self)).expect("scenario serializes")
    }
}

/// `weight(q) = sum_{d in s, state_of(d) = q} theta(d) / sum_{d in s} theta(d)`.
pub fn condition_prior(
    theta: &DatasetPrior,
    s: &Secret,
    state_of: &BTreeMap<String, String>,
    h: &Hmm,
) -> Result<Conditioned, ScenarioError> {
    let mut mass = vec![Poly::zero(); h.n_states()];
    let mut z = Poly::zero();
    for d in &s.datasets {
        let Some(p) = theta.probs.get(d) else { continue };
        if p.is_zero() {
            continue;
        }
        let state = state_of.get(d).ok_or_else(|| ScenarioError::Unmapped(d.clone()))?;
        let q = h.state_id(state)?;
        mass[q] = &mass[q] + p;
        z = &z + p;
    }
    let undefined = || ScenarioError::UndefinedConditional { prior: theta.name.clone(), secret: s.name.clone() };
    if z.is_zero() {
        return Err(undefined());
    }
    let side_condition = if z.is_constant() { None } else { Some(z.clone()) };
    let weights = mass
        .into_iter()
        .map(|m| RatFn::new(m, z.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let state = InformationState::new(weights)?;
    Ok(Conditioned { state, side_condition })
}

/// Point-mass pairs for each adjacent pair of states, in both orders.
pub fn dp_neighbor_pairs(h: &Hmm, adjacency: &[(String, String)]) -> Result<Vec<LabeledPair>, ScenarioError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (a, b) in adjacency {
        let (ia, ib) = (h.state_id(a)?, h.state_id(b)?);
        for (x, y, nx, ny) in [(ia, ib, a, b), (ib, ia, b, a)] {
            if seen.insert((x, y)) {
                out.push(LabeledPair {
                    label: format!("{} vs {}", nx, ny),
                    pi: InformationState::point_mass(h.n_states(), x),
                    tau: InformationState::point_mass(h.n_states(), y),
                    side_conditions: Vec::new(),
                });
            }
        }
    }
    Ok(out)
}

/// One initial-state pair per prior and ordered secret pair.
pub fn scenario_queries(sc: &PufferfishScenario, h: &Hmm) -> Result<Vec<LabeledPair>, ScenarioError> {
    sc.validate()?;
    let mut out = Vec::new();
    for theta in &sc.priors {
        for (si, sj) in &sc.pairs {
            let a = condition_prior(theta, sc.secret(si)?, &sc.state_of, h)?;
            let b = condition_prior(theta, sc.secret(sj)?, &sc.state_of, h)?;
            let side_conditions = a.side_condition.into_iter().chain(b.side_condition).collect();
            out.push(LabeledPair {
                label: format!("{}: {} vs {}", theta.name, si, sj),
                pi: a.state,
                tau: b.state,
                side_conditions,
            });
        }
    }
    Ok(out)
}

/// Copy of `h` that also declares the scenario's parameters.
pub fn with_scenario_params(h: &Hmm, sc: &PufferfishScenario) -> Hmm {
    let mut out = h.clone();
    out.declare_params(sc.param_domains());
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorFile {
    pub name: String,
    pub probs: BTreeMap<String, Expr>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecretFile {
    pub name: String,
    pub datasets: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub universe: Vec<String>,
    pub priors: Vec<PriorFile>,
    pub secrets: Vec<SecretFile>,
    pub pairs: Vec<(String, String)>,
    pub state_of: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<crate::hmm::ParamFile>,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<PufferfishScenario, ScenarioError> {
        let priors = self
            .priors
            .into_iter()
            .map(|p| {
                let probs = p
                    .probs
                    .iter()
                    .map(|(d, e)| Ok((d.clone(), e.to_poly()?)))
                    .collect::<Result<BTreeMap<_, _>, AlgebraError>>()?;
                Ok(DatasetPrior { name: p.name, probs })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let sc = PufferfishScenario {
            universe: self.universe,
            priors,
            secrets: self
                .secrets
                .into_iter()
                .map(|s| Secret { name: s.name, datasets: s.datasets.into_iter().collect() })
                .collect(),
            pairs: self.pairs,
            state_of: self.state_of,
            params: self
                .params
                .into_iter()
                .map(|p| ParamDomain { name: p.name, lo: p.lo, hi: p.hi })
                .collect(),
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_scenario(sc: &PufferfishScenario) -> ScenarioFile {
        ScenarioFile {
            universe: sc.universe.clone(),
            priors: sc
                .priors
                .iter()
                .map(|p| PriorFile {
                    name: p.name.clone(),
                    probs: p.probs.iter().map(|(d, e)| (d.clone(), Expr::from_poly(e))).collect(),
                })
                .collect(),
            secrets: sc
                .secrets
                .iter()
                .map(|s| SecretFile { name: s.name.clone(), datasets: s.datasets.iter().cloned().collect() })
                .collect(),
            pairs: sc.pairs.clone(),
            state_of: sc.state_of.clone(),
            params: sc
                .params
                .iter()
                .map(|d| crate::hmm::ParamFile { name: d.name.clone(), lo: d.lo.clone(), hi: d.hi.clone() })
                .collect(),
        }
    }
}

/// Probability of the secret under the prior, for reporting.
pub fn secret_probability(theta: &DatasetPrior, s: &Secret) -> Poly {
    s.datasets
        .iter()
        .filter_map(|d| theta.probs.get(d))
        .fold(Poly::zero(), |acc, p| &acc + p)
}

#[cfg(test)]
mod tests;

//! The mechanisms studied by the toolkit, each available in three forms: an
//! HMM builder, a seeded sampler that runs the algorithm literally, and an
//! exact output-distribution oracle that enumerates every noise outcome.

mod above_threshold;
mod geometric;
mod noisy_max;
mod oracle;
mod sampler;

use serde::{Deserialize, Serialize};

use crate::algebra::Rational;
use crate::hmm::HmmError;

pub use above_threshold::{
    above_threshold_observation, above_threshold_pair_symbol, build_above_threshold_hmm, AboveThresholdStates,
};
pub use geometric::{build_geometric_hmm, geometric_row};
pub use noisy_max::{build_noisy_max_hmm, noisy_max_state, tuple_name};
pub use oracle::exact_output_distribution;
pub use sampler::{run_mechanism, CompiledMechanism, MechanismRun};

#[derive(Debug, thiserror::Error)]
pub enum MechanismError {
    #[error("geometric parameter alpha must lie in (0,1), got {0}")]
    BadAlpha(Rational),
    #[error("range bound n must be at least 1")]
    BadRange,
    #[error("value {value} outside 0..={max}")]
    ValueOutOfRange { value: u32, max: u32 },
    #[error("noisy max needs at least 2 queries, got {0}")]
    TooFewQueries(usize),
    #[error("instance too large for exact enumeration: {0}")]
    TooLarge(String),
    #[error("input does not match mechanism: {0}")]
    BadInput(String),
    #[error(transparent)]
    Hmm(#[from] HmmError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometricSpec {
    pub alpha: Rational,
    pub n: u32,
}

impl GeometricSpec {
    pub fn new(alpha: Rational, n: u32) -> Result<Self, MechanismError> {
        let s = GeometricSpec { alpha, n };
        s.validate()?;
        Ok(s)
    }

    pub fn half() -> Self {
        GeometricSpec { alpha: Rational::frac(1, 2), n: 2 }
    }

    pub fn quarter() -> Self {
        GeometricSpec { alpha: Rational::frac(1, 4), n: 2 }
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        if !self.alpha.is_positive() || self.alpha >= Rational::one() {
            return Err(MechanismError::BadAlpha(self.alpha.clone()));
        }
        if self.n < 1 {
            return Err(MechanismError::BadRange);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisyMaxVariant {
    /// Reports the first index attaining the noisy maximum.
    Naive,
    /// Breaks ties uniformly with a running reservoir.
    Improved,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisyMaxSpec {
    pub variant: NoisyMaxVariant,
    pub n_queries: usize,
    #[serde(default = "GeometricSpec::half")]
    pub noise: GeometricSpec,
}

impl NoisyMaxSpec {
    pub fn new(variant: NoisyMaxVariant, n_queries: usize) -> Self {
        NoisyMaxSpec { variant, n_queries, noise: GeometricSpec::half() }
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        self.noise.validate()?;
        if self.n_queries < 2 {
            return Err(MechanismError::TooFewQueries(self.n_queries));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AboveThresholdSpec {
    #[serde(default = "GeometricSpec::quarter")]
    pub threshold_noise: GeometricSpec,
    #[serde(default = "GeometricSpec::half")]
    pub query_noise: GeometricSpec,
}

impl Default for AboveThresholdSpec {
    fn default() -> Self {
        AboveThresholdSpec { threshold_noise: GeometricSpec::quarter(), query_noise: GeometricSpec::half() }
    }
}

impl AboveThresholdSpec {
    pub fn validate(&self) -> Result<(), MechanismError> {
        self.threshold_noise.validate()?;
        self.query_noise.validate()?;
        if self.threshold_noise.n != self.query_noise.n {
            return Err(MechanismError::BadInput("threshold and query ranges differ".into()));
        }
        Ok(())
    }

    pub fn range(&self) -> u32 {
        self.query_noise.n
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismSpec {
    Geometric(GeometricSpec),
    NoisyMax(NoisyMaxSpec),
    AboveThreshold(AboveThresholdSpec),
}

impl MechanismSpec {
    pub fn validate(&self) -> Result<(), MechanismError> {
        match self {
            MechanismSpec::Geometric(g) => g.validate(),
            MechanismSpec::NoisyMax(s) => s.validate(),
            MechanismSpec::AboveThreshold(s) => s.validate(),
        }
    }
}

/// Query results fed to a mechanism. Above Threshold also needs a threshold.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MechanismInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u32>,
    pub values: Vec<u32>,
}

impl MechanismInput {
    pub fn values(values: Vec<u32>) -> Self {
        MechanismInput { threshold: None, values }
    }

    pub fn stream(threshold: u32, values: Vec<u32>) -> Self {
        MechanismInput { threshold: Some(threshold), values }
    }

    pub fn check(&self, spec: &MechanismSpec) -> Result<(), MechanismError> {
        let max = match spec {
            MechanismSpec::Geometric(g) => {
                if self.values.len() != 1 {
                    return Err(MechanismError::BadInput("geometric mechanism takes one value".into()));
                }
                g.n
            }
            MechanismSpec::NoisyMax(s) => {
                if self.values.len() != s.n_queries {
                    return Err(MechanismError::BadInput(format!(
                        "expected {} query results, got {}",
                        s.n_queries,
                        self.values.len()
                    )));
                }
                s.noise.n
            }
            MechanismSpec::AboveThreshold(s) => {
                let t = self
                    .threshold
                    .ok_or_else(|| MechanismError::BadInput("above threshold needs a threshold".into()))?;
                if t > s.range() {
                    return Err(MechanismError::ValueOutOfRange { value: t, max: s.range() });
                }
                s.range()
            }
        };
        for &v in &self.values {
            if v > max {
                return Err(MechanismError::ValueOutOfRange { value: v, max });
            }
        }
        Ok(())
    }
}

/// Mechanism-level output symbol for a noisy value or a 1-based index.
pub fn tilde(i: u32) -> String {
    format!("~{}", i)
}

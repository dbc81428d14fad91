use serde_json::json;

use pufcheck::bound::BoundError;
use pufcheck::hmm::HmmError;
use pufcheck::mechanisms::MechanismError;
use pufcheck::sat::SatError;
use pufcheck::scenario::ScenarioError;
use pufcheck::smt::SmtError;
use pufcheck::stat::StatError;
use pufcheck::verifier::VerifierError;

/// Failures before or during a command. Usage and input problems exit with
/// 2, backend problems with 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Backend(_) => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Backend(_) => "backend",
        };
        json!({ "error": { "kind": kind, "message": self.to_string() } })
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        })*
    };
}

input_error!(HmmError, ScenarioError, MechanismError, SatError, VerifierError, serde_json::Error);

impl From<SmtError> for CliError {
    fn from(e: SmtError) -> Self {
        match e {
            SmtError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<StatError> for CliError {
    fn from(e: StatError) -> Self {
        match e {
            StatError::NoEvents => CliError::Backend(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        match e {
            BoundError::Stat(s) => s.into(),
            BoundError::NoInterval { .. } => CliError::Backend(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {}", path.display(), e))
}

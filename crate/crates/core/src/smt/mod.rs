//! SMT-LIB 2 backend: script emission, an external solver process, and
//! model parsing.

mod emit;
mod model;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::algebra::Rational;

pub use emit::{emit_script, logic, obs_var, param_symbol, real_literal};
pub use model::{interpret_model, parse_model, QueryModel};

#[derive(Debug, thiserror::Error)]
pub enum SmtError {
    #[error("could not start solver `{command}`: {reason}")]
    Spawn { command: String, reason: String },
    #[error("solver output not understood: {raw}")]
    Unparseable { raw: String },
    #[error("unsupported model form: {0}")]
    UnsupportedModel(String),
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("i/o error talking to solver: {0}")]
    Io(#[from] std::io::Error),
}

/// External solver invocation. `{file}` in the command is replaced by the
/// path of the script; without a placeholder the path is appended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub command: Vec<String>,
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: vec!["z3".into(), "-smt2".into(), "{file}".into()],
            timeout: Duration::from_secs(20 * 60),
        }
    }
}

impl SolverConfig {
    pub fn from_template(template: &str, timeout: Duration) -> Result<Self, SmtError> {
        let command: Vec<String> = template.split_whitespace().map(str::to_string).collect();
        if command.is_empty() {
            return Err(SmtError::Config("empty solver command".into()));
        }
        if timeout.is_zero() {
            return Err(SmtError::Config("timeout must be positive".into()));
        }
        Ok(SolverConfig { command, timeout })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Whether the solver executable can be found.
    pub fn is_available(&self) -> bool {
        find_executable(&self.command[0]).is_some()
    }

    fn argv(&self, file: &str) -> Vec<String> {
        let mut out: Vec<String> = self.command.iter().map(|a| a.replace("{file}", file)).collect();
        if !self.command.iter().any(|a| a.contains("{file}")) {
            out.push(file.to_string());
        }
        out
    }
}

/// Resolves a command name against `PATH`; paths containing a separator are
/// checked directly.
pub fn find_executable(name: &str) -> Option<PathBuf> {
    if name.contains(std::path::MAIN_SEPARATOR) {
        let p = PathBuf::from(name);
        return p.is_file().then_some(p);
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|d| d.join(name)).find(|p| p.is_file())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverStatus {
    Sat,
    Unsat,
    Unknown,
    Timeout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    pub status: SolverStatus,
    /// Present iff the status is sat.
    pub model: Option<BTreeMap<String, Rational>>,
    pub raw: String,
}

/// Runs the solver on `script` and classifies its answer.
pub fn run_solver(script: &str, cfg: &SolverConfig) -> Result<SolverResult, SmtError> {
    let mut file = tempfile::Builder::new().suffix(".smt2").tempfile()?;
    file.write_all(script.as_bytes())?;
    file.flush()?;
    let path = file.path().to_string_lossy().into_owned();
    let argv = cfg.argv(&path);
    let spawn_err = |e: std::io::Error| SmtError::Spawn { command: argv.join(" "), reason: e.to_string() };
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(spawn_err)?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let start = Instant::now();
    let mut timed_out = false;
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        if start.elapsed() >= cfg.timeout {
            let _ = child.kill();
            let _ = child.wait();
            timed_out = true;
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let out = out_reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    if timed_out {
        return Ok(SolverResult { status: SolverStatus::Timeout, model: None, raw: out });
    }
    parse_response(&out).map_err(|e| match e {
        SmtError::Unparseable { raw } if !err.is_empty() => SmtError::Unparseable { raw: format!("{}{}", raw, err) },
        e => e,
    })
}

/// Classifies solver output whose first line is the `check-sat` answer.
pub fn parse_response(out: &str) -> Result<SolverResult, SmtError> {
    let trimmed = out.trim_start();
    let (first, rest) = trimmed.split_once('\n').unwrap_or((trimmed, ""));
    let status = match first.trim() {
        "sat" => SolverStatus::Sat,
        "unsat" => SolverStatus::Unsat,
        "unknown" => SolverStatus::Unknown,
        "timeout" => SolverStatus::Timeout,
        _ => return Err(SmtError::Unparseable { raw: out.to_string() }),
    };
    let model = match status {
        SolverStatus::Sat => Some(parse_model(rest)?),
        _ => None,
    };
    Ok(SolverResult { status, model, raw: out.to_string() })
}

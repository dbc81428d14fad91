//! `pufcheck`: batch front end for the privacy verifier.
//!
//! Every command prints one JSON document. Exit codes: 0 holds or success,
//! 1 violation found, 2 usage or input error, 3 backend unavailable or
//! verdict unknown.

mod commands;
mod error;
mod inputs;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "pufcheck", version, about = "Exact Pufferfish and differential privacy checks for HMM models")]
pub struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the JSON report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a built-in model or scenario as JSON
    BuildModel(commands::BuildModelArgs),
    /// Check pairs of initial states against a ratio bound
    Verify(commands::VerifyArgs),
    /// Check differential privacy over the model's neighbor relation
    DpCheck(commands::VerifyArgs),
    /// Recompute a counterexample exactly
    Certify(commands::CertifyArgs),
    /// Statistical p-value curve from sampled runs
    Test(commands::TestArgs),
    /// Privacy-budget lower bound by testing and binary search
    LowerBound(commands::LowerBoundArgs),
    /// Compile a DIMACS CNF formula into the reduction model
    SatReduce(commands::SatReduceArgs),
    /// Run a list of commands from a JSON job file
    Run(commands::RunArgs),
}

/// Result of one command: the JSON document and the exit code.
pub struct Outcome {
    pub json: serde_json::Value,
    pub code: i32,
}

fn dispatch(cli: &Cli, nested: bool) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::BuildModel(a) => commands::build_model(a),
        Command::Verify(a) => commands::verify(a, false),
        Command::DpCheck(a) => commands::verify(a, true),
        Command::Certify(a) => commands::certify(a),
        Command::Test(a) => commands::test(a),
        Command::LowerBound(a) => commands::lower_bound(a),
        Command::SatReduce(a) => commands::sat_reduce(a),
        Command::Run(a) if !nested => commands::run(a),
        Command::Run(_) => Err(CliError::Usage("job files cannot contain `run`".into())),
    }
}

fn emit(cli: &Cli, o: &Outcome) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&o.json)? + "\n";
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| error::io_error(p, e)),
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

/// Parses and runs one argument vector; used for the top level and for job
/// files.
pub fn execute<I, T>(args: I, nested: bool) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return Outcome { json: serde_json::Value::Null, code: 0 };
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            return Outcome { json: err.to_json(), code: err.exit_code() };
        }
    };
    if !nested {
        if let Some(n) = cli.jobs {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                let err = CliError::Usage(format!("--jobs: {}", e));
                return Outcome { json: err.to_json(), code: err.exit_code() };
            }
        }
    }
    let result = dispatch(&cli, nested).and_then(|o| {
        if !nested || cli.out.is_some() {
            emit(&cli, &o)?;
        }
        Ok(o)
    });
    match result {
        Ok(o) => o,
        Err(e) => Outcome { json: e.to_json(), code: e.exit_code() },
    }
}

fn main() {
    let o = execute(std::env::args_os(), false);
    if o.json.get("error").is_some() {
        eprintln!("{}", o.json);
    }
    std::process::exit(o.code);
}

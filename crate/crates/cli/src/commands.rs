use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::Args;
use serde_json::{json, Value};

use pufcheck::algebra::{Assignment, Expr, Rational};
use pufcheck::bound::{lower_bound as find_lower_bound, BoundRequest, BoundStatus};
use pufcheck::hmm::{Feasibility, Hmm, HmmFile, InformationState};
use pufcheck::mechanisms::{
    build_above_threshold_hmm, build_geometric_hmm, build_noisy_max_hmm, AboveThresholdSpec, GeometricSpec,
    NoisyMaxSpec, NoisyMaxVariant,
};
use pufcheck::sat::{build_sat_hmm, max_gap, parse_dimacs};
use pufcheck::scenario::{
    contagious_pair_scenario, disease_scenario, independent_count_scenario, Correlation, LabeledPair,
    PufferfishScenario, ScenarioFile,
};
use pufcheck::stat::{pvalue_curve, StatError};
use pufcheck::verifier::{certify_counterexample, Bound, Direction, VerdictKind};

use crate::error::{io_error, CliError};
use crate::inputs::{
    parse_assignment, parse_eps_list, parse_rational, parse_state, read_text, BoundArgs, ModelArgs, SearchArgs,
    TesterArgs,
};
use crate::{execute, Outcome};

fn verdict_code(v: VerdictKind) -> i32 {
    match v {
        VerdictKind::Holds => 0,
        VerdictKind::Violation => 1,
        VerdictKind::Unknown => 3,
    }
}

fn state_exprs(s: &InformationState) -> Vec<Expr> {
    s.weights().iter().map(Expr::from_ratfn).collect()
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Geometric,
    NaiveNoisyMax,
    ImprovedNoisyMax,
    AboveThreshold,
    /// Scenario: two independent records, count universe
    IndependentCount,
    /// Scenario: two records with perfectly correlated status
    ContagiousPair,
    /// Scenario: three diseases, all independent
    DiseaseIndependent,
    /// Scenario: three diseases, the secret one contagious
    DiseaseContagious,
}

#[derive(Args, Debug)]
pub struct BuildModelArgs {
    #[arg(value_enum)]
    kind: ModelKind,
    /// Geometric noise parameter alpha
    #[arg(long, default_value = "1/2")]
    alpha: String,
    /// Query results range over 0..=range
    #[arg(long, default_value_t = 2)]
    range: u32,
    /// Number of Noisy Max queries
    #[arg(long, default_value_t = 3)]
    queries: usize,
    /// Disease scenarios: 1-based index of the secret query
    #[arg(long, default_value_t = 3)]
    secret_query: usize,
}

pub fn build_model(a: &BuildModelArgs) -> Result<Outcome, CliError> {
    let noise = GeometricSpec::new(parse_rational(&a.alpha)?, a.range)?;
    let model = |h: Hmm| -> Result<Outcome, CliError> {
        Ok(Outcome { json: serde_json::to_value(HmmFile::from_hmm(&h))?, code: 0 })
    };
    let scenario = |sc: PufferfishScenario| -> Result<Outcome, CliError> {
        Ok(Outcome { json: serde_json::to_value(ScenarioFile::from_scenario(&sc))?, code: 0 })
    };
    let secret = || -> Result<usize, CliError> {
        if (1..=3).contains(&a.secret_query) {
            Ok(a.secret_query - 1)
        } else {
            Err(CliError::Usage("--secret-query must be 1, 2 or 3".into()))
        }
    };
    let noisy_max = |variant| NoisyMaxSpec { variant, n_queries: a.queries, noise: noise.clone() };
    match a.kind {
        ModelKind::Geometric => model(build_geometric_hmm(&noise)?),
        ModelKind::NaiveNoisyMax => model(build_noisy_max_hmm(&noisy_max(NoisyMaxVariant::Naive))?),
        ModelKind::ImprovedNoisyMax => model(build_noisy_max_hmm(&noisy_max(NoisyMaxVariant::Improved))?),
        ModelKind::AboveThreshold => model(build_above_threshold_hmm(&AboveThresholdSpec::default())?),
        ModelKind::IndependentCount => scenario(independent_count_scenario()),
        ModelKind::ContagiousPair => scenario(contagious_pair_scenario()),
        ModelKind::DiseaseIndependent => scenario(disease_scenario(Correlation::Independent, secret()?)),
        ModelKind::DiseaseContagious => scenario(disease_scenario(Correlation::Contagious, secret()?)),
    }
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    bound: BoundArgs,
    #[command(flatten)]
    search: SearchArgs,
}

fn pair_json(p: &LabeledPair) -> Value {
    json!({
        "label": p.label,
        "pi": state_exprs(&p.pi),
        "tau": state_exprs(&p.tau),
        "side_conditions": p.side_conditions.iter().map(Expr::from_poly).collect::<Vec<_>>(),
    })
}

pub fn verify(a: &VerifyArgs, dp: bool) -> Result<Outcome, CliError> {
    let (h, pairs) = a.model.load(dp)?;
    let opts = a.search.options(a.bound.bound()?)?;
    let report = pufcheck::verifier::verify(&h, &pairs, &opts)?;
    let violated: BTreeSet<&str> =
        report.queries.iter().filter(|q| q.counterexample.is_some()).map(|q| q.query.pair.as_str()).collect();
    let embedded: Vec<Value> = pairs.iter().filter(|p| violated.contains(p.label.as_str())).map(pair_json).collect();
    let code = verdict_code(report.verdict);
    let json = json!({
        "command": if dp { "dp-check" } else { "verify" },
        "verdict": report.verdict,
        "report": report,
        "pairs": embedded,
        "model": HmmFile::from_hmm(&h),
    });
    Ok(Outcome { json, code })
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// Report produced by verify or dp-check; certifies every counterexample in it
    #[arg(long, conflicts_with_all = ["model", "sequence"])]
    report: Option<PathBuf>,
    /// Model file, when certifying a single sequence
    #[arg(long, requires_all = ["pi", "tau", "sequence"])]
    model: Option<PathBuf>,
    #[arg(long)]
    pi: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// Comma-separated observation names
    #[arg(long)]
    sequence: Option<String>,
    #[command(flatten)]
    bound: BoundArgs,
    /// Parameter values, `p=1/2,q=1/4`
    #[arg(long)]
    assign: Option<String>,
}

struct Claim {
    pair: String,
    k: usize,
    c: Rational,
    sequence: Vec<String>,
    assignment: Option<Assignment>,
}

fn certify_one(h: &Hmm, pi: &InformationState, tau: &InformationState, claim: &Claim) -> Result<Value, CliError> {
    let ids = h.parse_sequence(&claim.sequence)?;
    let cert = certify_counterexample(h, pi, tau, &claim.c, &ids, claim.assignment.as_ref())?;
    Ok(json!({
        "pair": claim.pair,
        "k": claim.k,
        "c": claim.c,
        "sequence": claim.sequence,
        "assignment": claim.assignment,
        "certificate": cert,
    }))
}

fn field<'a>(v: &'a Value, path: &[&str]) -> Result<&'a Value, CliError> {
    let mut cur = v;
    for p in path {
        cur = cur.get(p).ok_or_else(|| CliError::Input(format!("report lacks field `{}`", path.join("."))))?;
    }
    Ok(cur)
}

fn as_str(v: &Value) -> Result<&str, CliError> {
    v.as_str().ok_or_else(|| CliError::Input(format!("expected a string, got {}", v)))
}

fn exprs_state(h: &Hmm, v: &Value) -> Result<InformationState, CliError> {
    let exprs: Vec<Expr> = serde_json::from_value(v.clone())?;
    let w = exprs.iter().map(Expr::to_ratfn).collect::<Result<Vec<_>, _>>().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(h.information_state(w)?)
}

pub fn certify(a: &CertifyArgs) -> Result<Outcome, CliError> {
    let mut certs = Vec::new();
    if let Some(path) = &a.report {
        let v: Value = serde_json::from_str(&read_text(path)?)?;
        let file: HmmFile = serde_json::from_value(field(&v, &["model"])?.clone())?;
        let h = file.into_hmm()?;
        let mut pairs = BTreeMap::new();
        for p in field(&v, &["pairs"])?.as_array().into_iter().flatten() {
            let label = as_str(field(p, &["label"])?)?.to_string();
            pairs.insert(label, (exprs_state(&h, field(p, &["pi"])?)?, exprs_state(&h, field(p, &["tau"])?)?));
        }
        for q in field(&v, &["report", "queries"])?.as_array().into_iter().flatten() {
            let Some(cex) = q.get("counterexample") else { continue };
            let pair = as_str(field(q, &["query", "pair"])?)?.to_string();
            let (pi, tau) =
                pairs.get(&pair).ok_or_else(|| CliError::Input(format!("report does not embed pair `{}`", pair)))?;
            let assignment = match cex.get("assignment") {
                Some(m) => Some(serde_json::from_value::<Assignment>(m.clone())?),
                None => None,
            };
            let claim = Claim {
                k: field(q, &["query", "k"])?.as_u64().unwrap_or(0) as usize,
                c: parse_rational(as_str(field(q, &["query", "c"])?)?)?,
                sequence: serde_json::from_value(field(cex, &["sequence"])?.clone())?,
                assignment,
                pair,
            };
            certs.push(certify_one(&h, pi, tau, &claim)?);
        }
    } else {
        let (Some(model), Some(pi), Some(tau), Some(seq)) = (&a.model, &a.pi, &a.tau, &a.sequence) else {
            return Err(CliError::Usage("give --report, or --model with --pi, --tau and --sequence".into()));
        };
        let h = crate::inputs::load_model(model)?;
        let c = match a.bound.bound()? {
            Bound::Ratio(c) => c,
            // A violation of the upper enclosure is a violation of e^eps.
            Bound::Epsilon(b) => b.c_up,
        };
        let sequence: Vec<String> = seq.split(',').map(|s| s.trim().to_string()).collect();
        let claim = Claim {
            pair: format!("{} vs {}", pi, tau),
            k: sequence.len(),
            c,
            sequence,
            assignment: a.assign.as_deref().map(parse_assignment).transpose()?,
        };
        certs.push(certify_one(&h, &parse_state(&h, pi)?, &parse_state(&h, tau)?, &claim)?);
    }
    let any_valid = certs.iter().any(|c| c["certificate"]["valid"] == Value::Bool(true));
    let verdict = if any_valid { VerdictKind::Violation } else { VerdictKind::Holds };
    Ok(Outcome { json: json!({ "command": "certify", "verdict": verdict, "certificates": certs }), code: verdict_code(verdict) })
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    tester: TesterArgs,
    /// Epsilons: `lo:hi:step` or a comma-separated list
    #[arg(long, default_value = "0:2:0.1")]
    eps: String,
    /// Also write the curve as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Scenario file; only accepted to explain why it cannot be sampled
    #[arg(long)]
    scenario: Option<PathBuf>,
}

pub fn test(a: &TestArgs) -> Result<Outcome, CliError> {
    if let Some(p) = &a.scenario {
        let sc = PufferfishScenario::from_json_str(&read_text(p)?)?;
        let name = p.display().to_string();
        if !sc.param_domains().is_empty() {
            return Err(StatError::Parametric(name).into());
        }
        return Err(CliError::Usage(format!("scenario {} cannot be sampled; use verify", name)));
    }
    let plan = a.tester.plan()?.ok_or_else(|| CliError::Usage("give --mechanism or --mechanism-file".into()))?;
    let report = pvalue_curve(&plan.epsilons(parse_eps_list(&a.eps)?))?;
    if let Some(p) = &a.csv {
        std::fs::write(p, report.to_csv()).map_err(|e| io_error(p, e))?;
    }
    Ok(Outcome { json: json!({ "command": "test", "report": report }), code: 0 })
}

#[derive(Args, Debug)]
pub struct LowerBoundArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    tester: TesterArgs,
    /// Sequence-length horizon of every exact check
    #[arg(long, default_value_t = 1)]
    kmax: usize,
    /// Search interval `lo,hi`; skips the statistical pass
    #[arg(long)]
    interval: Option<String>,
    /// Width of the final bracket
    #[arg(long, default_value = "0.001")]
    precision: String,
    /// Epsilon grid step of the statistical pass
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    /// Largest epsilon of the statistical pass
    #[arg(long, default_value_t = 3.0)]
    grid_max: f64,
    #[arg(long, default_value = "any")]
    feasibility: Feasibility,
    #[arg(long, default_value = "both")]
    direction: Direction,
}

pub fn lower_bound(a: &LowerBoundArgs) -> Result<Outcome, CliError> {
    let (h, pairs) = a.model.load(true)?;
    let mut req = BoundRequest::new(&h, &pairs, a.kmax).precision(parse_rational(&a.precision)?).policy(a.feasibility);
    req.direction = a.direction;
    req.grid_step = a.grid_step;
    req.grid_max = a.grid_max;
    if let Some(iv) = &a.interval {
        let (lo, hi) =
            iv.split_once(',').ok_or_else(|| CliError::Usage(format!("--interval expects lo,hi, got `{}`", iv)))?;
        req = req.interval(parse_rational(lo)?, parse_rational(hi)?);
    } else if let Some(plan) = a.tester.plan()? {
        req = req.tester(plan);
    } else {
        return Err(CliError::Usage("give --interval or a mechanism to test".into()));
    }
    let res = find_lower_bound(&req)?;
    let code = if res.status == BoundStatus::Halted { 3 } else { 0 };
    Ok(Outcome { json: json!({ "command": "lower-bound", "result": res }), code })
}

#[derive(Args, Debug)]
pub struct SatReduceArgs {
    /// DIMACS CNF file, or `-` for stdin
    #[arg(long)]
    cnf: PathBuf,
    /// Write the model here instead of embedding it in the report
    #[arg(long)]
    hmm_out: Option<PathBuf>,
}

pub fn sat_reduce(a: &SatReduceArgs) -> Result<Outcome, CliError> {
    let cnf = parse_dimacs(&read_text(&a.cnf)?)?;
    let inst = build_sat_hmm(&cnf)?;
    let gap = max_gap(&inst)?;
    let model = HmmFile::from_hmm(&inst.h);
    let mut json = json!({
        "command": "sat-reduce",
        "cnf": cnf,
        "n_states": inst.h.n_states(),
        "c": inst.c,
        "pair": ["d1", "d2"],
        "gap": gap,
    });
    match &a.hmm_out {
        Some(p) => {
            std::fs::write(p, serde_json::to_string_pretty(&model)? + "\n").map_err(|e| io_error(p, e))?;
            json["model_file"] = json!(p.display().to_string());
        }
        None => json["model"] = serde_json::to_value(model)?,
    }
    Ok(Outcome { json, code: 0 })
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// JSON array of argument lists, e.g. [["verify", "--model", "m.json", "--pairs", "dp", "--c", "2"]]
    job: PathBuf,
}

pub fn run(a: &RunArgs) -> Result<Outcome, CliError> {
    let jobs: Vec<Vec<String>> = serde_json::from_str(&read_text(&a.job)?)?;
    let mut steps = Vec::new();
    let mut worst = 0;
    for args in jobs {
        let argv = std::iter::once("pufcheck".to_string()).chain(args.iter().cloned());
        let o = execute(argv, true);
        worst = worst.max(o.code);
        steps.push(json!({ "args": args, "exit_code": o.code, "output": o.json }));
    }
    Ok(Outcome { json: json!({ "command": "run", "exit_code": worst, "steps": steps }), code: worst })
}

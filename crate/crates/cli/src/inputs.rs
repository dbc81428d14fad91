use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;

use pufcheck::algebra::{Assignment, Expr, RatFn, Rational};
use pufcheck::hmm::{Feasibility, Hmm, InformationState};
use pufcheck::mechanisms::{
    AboveThresholdSpec, GeometricSpec, MechanismInput, MechanismSpec, NoisyMaxSpec, NoisyMaxVariant,
};
use pufcheck::scenario::{dp_neighbor_pairs, scenario_queries, with_scenario_params, LabeledPair, PufferfishScenario};
use pufcheck::smt::SolverConfig;
use pufcheck::verifier::{Backend, Bound, Direction, VerifyOptions};

use crate::error::{io_error, CliError};

pub fn read_text(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(|e| io_error(path, e))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn load_model(path: &Path) -> Result<Hmm, CliError> {
    Ok(Hmm::from_json_str(&read_text(path)?)?)
}

pub fn parse_rational(s: &str) -> Result<Rational, CliError> {
    let t = s.trim();
    Rational::from_decimal_str(t)
        .or_else(|_| t.parse::<Rational>())
        .map_err(|_| CliError::Usage(format!("cannot parse `{}` as a rational number", s)))
}

pub fn parse_u32_list(s: &str) -> Result<Vec<u32>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| CliError::Usage(format!("bad value `{}` in `{}`", t, s))))
        .collect()
}

/// `p=1/2,q=0.25`
pub fn parse_assignment(s: &str) -> Result<Assignment, CliError> {
    let mut a = Assignment::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected name=value, got `{}`", part)))?;
        a.insert(k.trim().to_string(), parse_rational(v)?);
    }
    Ok(a)
}

/// An initial state written as a JSON array of expressions, the name of an
/// initial distribution or state of the model, or comma-separated weights.
pub fn parse_state(h: &Hmm, s: &str) -> Result<InformationState, CliError> {
    let t = s.trim();
    if t.starts_with('[') {
        let exprs: Vec<Expr> = serde_json::from_str(t)?;
        let w = exprs.iter().map(Expr::to_ratfn).collect::<Result<Vec<_>, _>>().map_err(|e| CliError::Input(e.to_string()))?;
        return Ok(h.information_state(w)?);
    }
    if let Some(d) = h.initial_distributions().get(t) {
        return Ok(d.clone());
    }
    if h.state_id(t).is_ok() {
        return Ok(h.point_mass(t)?);
    }
    let w = t.split(',').map(|x| parse_rational(x).map(RatFn::constant)).collect::<Result<Vec<_>, _>>()?;
    Ok(h.information_state(w)?)
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model file (JSON)
    #[arg(long)]
    pub model: PathBuf,
    /// `dp` for the model's neighbor relation, or a JSON file of state-name pairs
    #[arg(long, conflicts_with_all = ["scenario", "pi"])]
    pub pairs: Option<String>,
    /// Pufferfish scenario file (JSON)
    #[arg(long, conflicts_with = "pi")]
    pub scenario: Option<PathBuf>,
    /// First initial state: weights `1,0,0`, a state or distribution name, or a JSON array
    #[arg(long, requires = "tau")]
    pub pi: Option<String>,
    /// Second initial state, same forms as --pi
    #[arg(long, requires = "pi")]
    pub tau: Option<String>,
}

impl ModelArgs {
    /// The model (with scenario parameters declared) and the pairs to check.
    pub fn load(&self, default_dp: bool) -> Result<(Hmm, Vec<LabeledPair>), CliError> {
        let h = load_model(&self.model)?;
        if let Some(path) = &self.scenario {
            let sc = PufferfishScenario::from_json_str(&read_text(path)?)?;
            let h = with_scenario_params(&h, &sc);
            let pairs = scenario_queries(&sc, &h)?;
            return Ok((h, pairs));
        }
        if let (Some(pi), Some(tau)) = (&self.pi, &self.tau) {
            let pair = LabeledPair {
                label: format!("{} vs {}", pi, tau),
                pi: parse_state(&h, pi)?,
                tau: parse_state(&h, tau)?,
                side_conditions: Vec::new(),
            };
            return Ok((h, vec![pair]));
        }
        let spec = match (&self.pairs, default_dp) {
            (Some(p), _) => p.clone(),
            (None, true) => "dp".to_string(),
            (None, false) => return Err(CliError::Usage("give --pairs, --scenario, or --pi and --tau".into())),
        };
        let adjacency = if spec == "dp" {
            if h.dp_adjacency().is_empty() {
                return Err(CliError::Input("model declares no dp_adjacency; pass a pairs file".into()));
            }
            h.dp_adjacency().to_vec()
        } else {
            let p = PathBuf::from(&spec);
            serde_json::from_str::<Vec<(String, String)>>(&read_text(&p)?)?
        };
        let pairs = dp_neighbor_pairs(&h, &adjacency)?;
        Ok((h, pairs))
    }
}

#[derive(Args, Debug, Clone)]
pub struct BoundArgs {
    /// Ratio bound c
    #[arg(long, conflicts_with = "eps")]
    pub c: Option<String>,
    /// Privacy budget; c = e^eps is enclosed by rationals on a 1e-6 grid
    #[arg(long)]
    pub eps: Option<String>,
}

impl BoundArgs {
    pub fn bound(&self) -> Result<Bound, CliError> {
        match (&self.c, &self.eps) {
            (Some(c), None) => Ok(Bound::Ratio(parse_rational(c)?)),
            (None, Some(e)) => Ok(Bound::epsilon(&parse_rational(e)?)?),
            _ => Err(CliError::Usage("give exactly one of --c and --eps".into())),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    /// Shortest sequence length checked
    #[arg(long, default_value_t = 1)]
    pub kmin: usize,
    /// Longest sequence length checked
    #[arg(long, default_value_t = 1)]
    pub kmax: usize,
    /// Which sequences count: nonzero under `any` or `both` states
    #[arg(long, default_value = "any")]
    pub feasibility: Feasibility,
    /// `both`, `pi_over_tau` or `tau_over_pi`
    #[arg(long, default_value = "both")]
    pub direction: Direction,
    /// `auto`, `exact` or `smt`
    #[arg(long, default_value = "auto")]
    pub backend: Backend,
    /// Solver command; `{file}` is replaced by the script path
    #[arg(long, default_value = "z3 -smt2 {file}")]
    pub solver_cmd: String,
    /// Solver timeout in seconds
    #[arg(long, default_value_t = 1200)]
    pub smt_timeout: u64,
}

impl SearchArgs {
    pub fn options(&self, bound: Bound) -> Result<VerifyOptions, CliError> {
        let solver = SolverConfig::from_template(&self.solver_cmd, Duration::from_secs(self.smt_timeout))?;
        Ok(VerifyOptions::new(bound)
            .k_range(self.kmin, self.kmax)
            .policy(self.feasibility)
            .direction(self.direction)
            .backend(self.backend)
            .solver(solver))
    }
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismKind {
    Geometric,
    NaiveNoisyMax,
    ImprovedNoisyMax,
    AboveThreshold,
}

#[derive(Args, Debug, Clone)]
pub struct MechanismArgs {
    /// Built-in mechanism
    #[arg(long, value_enum, conflicts_with = "mechanism_file")]
    pub mechanism: Option<MechanismKind>,
    /// Mechanism specification file (JSON)
    #[arg(long)]
    pub mechanism_file: Option<PathBuf>,
    /// Number of queries for Noisy Max
    #[arg(long, default_value_t = 3)]
    pub queries: usize,
}

impl MechanismArgs {
    pub fn spec(&self) -> Result<Option<MechanismSpec>, CliError> {
        if let Some(p) = &self.mechanism_file {
            return Ok(Some(serde_json::from_str(&read_text(p)?)?));
        }
        Ok(self.mechanism.map(|k| match k {
            MechanismKind::Geometric => MechanismSpec::Geometric(GeometricSpec::half()),
            MechanismKind::NaiveNoisyMax => MechanismSpec::NoisyMax(NoisyMaxSpec::new(NoisyMaxVariant::Naive, self.queries)),
            MechanismKind::ImprovedNoisyMax => {
                MechanismSpec::NoisyMax(NoisyMaxSpec::new(NoisyMaxVariant::Improved, self.queries))
            }
            MechanismKind::AboveThreshold => MechanismSpec::AboveThreshold(AboveThresholdSpec::default()),
        }))
    }
}

#[derive(Args, Debug, Clone)]
pub struct TesterArgs {
    #[command(flatten)]
    pub mechanism: MechanismArgs,
    /// First input, comma-separated query results
    #[arg(long)]
    pub d1: Option<String>,
    /// Second input
    #[arg(long)]
    pub d2: Option<String>,
    /// Threshold for Above Threshold (shared by both inputs)
    #[arg(long)]
    pub threshold: Option<u32>,
    /// Samples per input for event selection
    #[arg(long, default_value_t = 50_000)]
    pub n_select: u64,
    /// Samples per input for detection
    #[arg(long, default_value_t = 200_000)]
    pub n_detect: u64,
    /// Sampling seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TesterArgs {
    pub fn plan(&self) -> Result<Option<pufcheck::stat::TestPlan>, CliError> {
        let Some(spec) = self.mechanism.spec()? else { return Ok(None) };
        let input = |s: &Option<String>, name: &str| -> Result<MechanismInput, CliError> {
            let s = s.as_ref().ok_or_else(|| CliError::Usage(format!("--{} is required with a mechanism", name)))?;
            let values = parse_u32_list(s)?;
            Ok(match self.threshold {
                Some(t) => MechanismInput::stream(t, values),
                None => MechanismInput::values(values),
            })
        };
        let plan = pufcheck::stat::TestPlan::new(spec, input(&self.d1, "d1")?, input(&self.d2, "d2")?)
            .samples(self.n_select, self.n_detect)
            .seed(self.seed);
        Ok(Some(plan))
    }
}

/// `lo:hi:step` or a comma-separated list.
pub fn parse_eps_list(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("bad epsilon list `{}`", s));
    if let [lo, hi, step] = s.split(':').collect::<Vec<_>>()[..] {
        let (lo, hi, step): (f64, f64, f64) =
            (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?, step.parse().map_err(|_| bad())?);
        if step <= 0.0 || lo < 0.0 || hi < lo {
            return Err(bad());
        }
        return Ok(pufcheck::stat::eps_grid(hi - lo, step).into_iter().map(|e| ((lo + e) * 1e9).round() / 1e9).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

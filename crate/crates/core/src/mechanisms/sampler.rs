use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::Rational;

use super::{geometric_row, tilde, GeometricSpec, MechanismError, MechanismInput, MechanismSpec, NoisyMaxVariant};

/// One sampled execution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismRun {
    pub seed: u64,
    pub input: MechanismInput,
    pub outputs: Vec<String>,
}

/// Exact sampler for a finite rational distribution: draws an integer below
/// the common denominator and looks up its bucket.
#[derive(Clone, Debug)]
struct IntegerRow {
    cumulative: Vec<u64>,
    total: u64,
}

impl IntegerRow {
    fn new(row: &[Rational]) -> Result<Self, MechanismError> {
        let lcm = row
            .iter()
            .fold(num_bigint::BigInt::from(1), |acc, r| acc.lcm(r.denom()));
        let total = lcm
            .to_u64()
            .ok_or_else(|| MechanismError::TooLarge("sampling denominator exceeds 64 bits".into()))?;
        let mut acc = 0u64;
        let mut cumulative = Vec::with_capacity(row.len());
        for r in row {
            let w = (r.numer() * (&lcm / r.denom())).to_u64().expect("bounded by total");
            acc += w;
            cumulative.push(acc);
        }
        debug_assert_eq!(acc, total);
        Ok(IntegerRow { cumulative, total })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let x = rng.gen_range(0..self.total);
        self.cumulative.partition_point(|&c| c <= x) as u32
    }
}

fn compile_rows(g: &GeometricSpec) -> Result<Vec<IntegerRow>, MechanismError> {
    (0..=g.n).map(|v| IntegerRow::new(&geometric_row(g, v)?)).collect()
}

/// Precomputed samplers for repeated runs of one mechanism.
#[derive(Clone, Debug)]
pub struct CompiledMechanism {
    spec: MechanismSpec,
    noise: Vec<IntegerRow>,
    threshold_noise: Vec<IntegerRow>,
}

impl CompiledMechanism {
    pub fn new(spec: &MechanismSpec) -> Result<Self, MechanismError> {
        spec.validate()?;
        let (noise, threshold_noise) = match spec {
            MechanismSpec::Geometric(g) => (compile_rows(g)?, Vec::new()),
            MechanismSpec::NoisyMax(s) => (compile_rows(&s.noise)?, Vec::new()),
            MechanismSpec::AboveThreshold(s) => (compile_rows(&s.query_noise)?, compile_rows(&s.threshold_noise)?),
        };
        Ok(CompiledMechanism { spec: spec.clone(), noise, threshold_noise })
    }

    pub fn spec(&self) -> &MechanismSpec {
        &self.spec
    }

    /// Runs the algorithm once, writing output codes into `out`. Inputs must
    /// have been validated with [`MechanismInput::check`].
    pub fn sample_into<R: Rng + ?Sized>(&self, input: &MechanismInput, rng: &mut R, out: &mut Vec<u8>) {
        out.clear();
        match &self.spec {
            MechanismSpec::Geometric(_) => {
                out.push(self.noise[input.values[0] as usize].sample(rng) as u8);
            }
            MechanismSpec::NoisyMax(s) => {
                let mut best: i64 = -1;
                let mut r = 0usize;
                let mut ties = 0u64;
                for (i, &v) in input.values.iter().enumerate() {
                    let noisy = self.noise[v as usize].sample(rng) as i64;
                    match s.variant {
                        NoisyMaxVariant::Naive => {
                            if best < noisy {
                                best = noisy;
                                r = i;
                            }
                        }
                        NoisyMaxVariant::Improved => {
                            if best == noisy {
                                ties += 1;
                                if rng.gen_range(0..ties) == 0 {
                                    r = i;
                                }
                            }
                            if best < noisy {
                                best = noisy;
                                r = i;
                                ties = 1;
                            }
                        }
                    }
                }
                out.push((r + 1) as u8);
            }
            MechanismSpec::AboveThreshold(_) => {
                let t = input.threshold.expect("checked input");
                let noisy_t = self.threshold_noise[t as usize].sample(rng);
                for &v in &input.values {
                    let noisy = self.noise[v as usize].sample(rng);
                    if noisy >= noisy_t {
                        out.push(1);
                        return;
                    }
                    out.push(0);
                }
            }
        }
    }

    pub fn symbol(&self, code: u8) -> String {
        match &self.spec {
            MechanismSpec::Geometric(_) | MechanismSpec::NoisyMax(_) => tilde(code as u32),
            MechanismSpec::AboveThreshold(_) => if code == 1 { "top" } else { "bot" }.to_string(),
        }
    }

    pub fn symbols(&self, codes: &[u8]) -> Vec<String> {
        codes.iter().map(|&c| self.symbol(c)).collect()
    }
}

/// One seeded run; identical arguments give identical runs.
pub fn run_mechanism(spec: &MechanismSpec, input: &MechanismInput, seed: u64) -> Result<MechanismRun, MechanismError> {
    input.check(spec)?;
    let m = CompiledMechanism::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut codes = Vec::new();
    m.sample_into(input, &mut rng, &mut codes);
    Ok(MechanismRun { seed, input: input.clone(), outputs: m.symbols(&codes) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{AboveThresholdSpec, NoisyMaxSpec};

    #[test]
    fn deterministic_per_seed() {
        let spec = MechanismSpec::NoisyMax(NoisyMaxSpec::new(NoisyMaxVariant::Improved, 3));
        let input = MechanismInput::values(vec![1, 1, 1]);
        let a: Vec<_> = (0..20).map(|s| run_mechanism(&spec, &input, s).unwrap().outputs).collect();
        let b: Vec<_> = (0..20).map(|s| run_mechanism(&spec, &input, s).unwrap().outputs).collect();
        assert_eq!(a, b);
        assert!(a.iter().any(|o| o != &a[0]));
    }

    #[test]
    fn above_threshold_runs_have_shape() {
        let spec = MechanismSpec::AboveThreshold(AboveThresholdSpec::default());
        let input = MechanismInput::stream(2, vec![0, 0, 0, 0]);
        for seed in 0..200 {
            let out = run_mechanism(&spec, &input, seed).unwrap().outputs;
            let tops = out.iter().filter(|s| *s == "top").count();
            assert!(tops <= 1);
            if tops == 1 {
                assert_eq!(out.last().unwrap(), "top");
            } else {
                assert_eq!(out.len(), 4);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_input() {
        let spec = MechanismSpec::NoisyMax(NoisyMaxSpec::new(NoisyMaxVariant::Naive, 3));
        assert!(run_mechanism(&spec, &MechanismInput::values(vec![0, 3, 1]), 0).is_err());
        assert!(run_mechanism(&spec, &MechanismInput::values(vec![0, 1]), 0).is_err());
        let at = MechanismSpec::AboveThreshold(AboveThresholdSpec::default());
        assert!(run_mechanism(&at, &MechanismInput::values(vec![0, 1]), 0).is_err());
    }
}

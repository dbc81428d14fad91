use crate::algebra::{Poly, Rational};
use crate::hmm::{Hmm, HmmBuilder};

use super::{tilde, GeometricSpec, MechanismError};

/// Output distribution of the truncated alpha-geometric mechanism on `true_value`.
///
/// Output z gets `(1-a)/(1+a) * a^|z-x|` in the interior and `a^|z-x|/(1+a)`
/// at the two clamped ends.
pub fn geometric_row(spec: &GeometricSpec, true_value: u32) -> Result<Vec<Rational>, MechanismError> {
    spec.validate()?;
    if true_value > spec.n {
        return Err(MechanismError::ValueOutOfRange { value: true_value, max: spec.n });
    }
    let a = &spec.alpha;
    let one = Rational::one();
    let end = (&one + a).recip().expect("1 + alpha > 0");
    let mid = &(&one - a) * &end;
    Ok((0..=spec.n)
        .map(|z| {
            let w = a.pow(z.abs_diff(true_value));
            if z == 0 || z == spec.n {
                &w * &end
            } else {
                &w * &mid
            }
        })
        .collect())
}

/// One state per true value, each looping on itself and emitting the noisy value.
pub fn build_geometric_hmm(spec: &GeometricSpec) -> Result<Hmm, MechanismError> {
    spec.validate()?;
    let mut b = HmmBuilder::new();
    for x in 0..=spec.n {
        b.state(&x.to_string())?;
    }
    for z in 0..=spec.n {
        b.observation(&tilde(z))?;
    }
    for x in 0..=spec.n {
        let s = x as usize;
        b.transition(s, s, Poly::one());
        for (z, p) in geometric_row(spec, x)?.into_iter().enumerate() {
            b.emission(s, z, Poly::constant(p));
        }
    }
    let adjacency = (0..=spec.n)
        .flat_map(|i| (0..=spec.n).filter(move |j| i.abs_diff(*j) <= 1).map(move |j| (i.to_string(), j.to_string())))
        .collect();
    b.dp_adjacency(adjacency);
    Ok(b.build()?)
}

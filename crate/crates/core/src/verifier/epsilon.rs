//! Rational enclosures of `e^eps`.

use num_bigint::BigInt;
use serde::Serialize;

use crate::algebra::Rational;

/// Grid of `10^-6` used when rounding `e^eps`.
pub fn default_grid() -> BigInt {
    BigInt::from(1_000_000u32)
}

/// `c_down <= e^eps <= c_up`, both on the grid `1/grid`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EpsilonBounds {
    pub epsilon: Rational,
    pub c_down: Rational,
    pub c_up: Rational,
}

#[derive(Debug, thiserror::Error)]
pub enum EpsilonError {
    #[error("epsilon must be nonnegative, got {0}")]
    Negative(Rational),
    #[error("grid must be positive")]
    Grid,
}

/// Encloses `e^eps` by a truncated Taylor series plus a geometric bound on
/// the remainder, then rounds outward to the grid.
pub fn exp_bounds(eps: &Rational, grid: &BigInt) -> Result<EpsilonBounds, EpsilonError> {
    if eps.is_negative() {
        return Err(EpsilonError::Negative(eps.clone()));
    }
    if grid <= &BigInt::from(0) {
        return Err(EpsilonError::Grid);
    }
    let tol = Rational::new(BigInt::from(1), grid * BigInt::from(16)).expect("positive grid");
    let mut partial = Rational::one();
    let mut term = Rational::one();
    let mut i: i64 = 0;
    loop {
        i += 1;
        term = &(&term * eps) / &Rational::from(i);
        partial += &term;
        // Remainder after the degree-i term is at most
        // term * eps/(i+1) / (1 - eps/(i+2)) once i+2 > eps.
        let ratio = eps / &Rational::from(i + 2);
        if ratio < Rational::one() {
            let next = &(&term * eps) / &Rational::from(i + 1);
            let tail = &next / &(&Rational::one() - &ratio);
            if tail < tol {
                let c_down = partial.floor_to_grid(grid);
                let c_up = (&partial + &tail).ceil_to_grid(grid);
                return Ok(EpsilonBounds { epsilon: eps.clone(), c_down, c_up });
            }
        }
    }
}

/// `ln c` as a float, for reporting.
pub fn epsilon_of(c: &Rational) -> f64 {
    c.to_f64().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_is_exactly_one() {
        let b = exp_bounds(&Rational::zero(), &default_grid()).unwrap();
        assert_eq!(b.c_down, Rational::one());
        assert_eq!(b.c_up, Rational::one());
    }

    #[test]
    fn brackets_known_values() {
        for eps in ["1", "0.693147", "2.7725887", "0.000001"] {
            let e = Rational::from_decimal_str(eps).unwrap();
            let b = exp_bounds(&e, &default_grid()).unwrap();
            let truth = e.to_f64().exp();
            assert!(b.c_down.to_f64() <= truth + 1e-12 && truth - 1e-12 <= b.c_up.to_f64(), "{}", eps);
            assert!((b.c_up.to_f64() - b.c_down.to_f64()) <= 2.1e-6);
        }
    }

    #[test]
    fn large_epsilon_terminates() {
        let b = exp_bounds(&Rational::from(12), &default_grid()).unwrap();
        let truth = 12f64.exp();
        assert!(b.c_down.to_f64() <= truth && truth <= b.c_up.to_f64());
    }

    #[test]
    fn negative_is_rejected() {
        assert!(exp_bounds(&Rational::frac(-1, 2), &default_grid()).is_err());
    }
}

use std::fmt;

use super::{AlgebraError, Assignment, Poly, Rational};

/// Quotient of two polynomials. Equality is decided by cross-multiplication,
/// which is sound whenever the denominators stay positive on the parameter
/// domain.
#[derive(Clone, Hash)]
pub struct RatFn {
    pub num: Poly,
    pub den: Poly,
}

impl RatFn {
    /// Constant denominators are folded into the numerator.
    pub fn new(num: Poly, den: Poly) -> Result<Self, AlgebraError> {
        if den.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(RatFn { num, den }.cancelled().normalized())
    }

    pub fn zero() -> Self {
        RatFn { num: Poly::zero(), den: Poly::one() }
    }

    pub fn one() -> Self {
        RatFn { num: Poly::one(), den: Poly::one() }
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFn { num: p, den: Poly::one() }
    }

    pub fn constant(c: Rational) -> Self {
        RatFn::from_poly(Poly::constant(c))
    }

    /// Removes common monomial factors and folds exact quotients; this is
    /// not a full gcd.
    fn cancelled(self) -> Self {
        if self.num.is_zero() || self.den.is_constant() {
            return self;
        }
        if let Some(q) = self.num.div_exact(&self.den) {
            return RatFn { num: q, den: Poly::one() };
        }
        let common = self.num.monomial_content();
        let shared: Vec<(String, u32)> = self
            .den
            .monomial_content()
            .powers()
            .iter()
            .filter_map(|(n, e)| {
                common.powers().iter().find(|(m, _)| m == n).map(|(_, f)| (n.clone(), (*e).min(*f)))
            })
            .collect();
        let g = super::Monomial::from_powers(shared);
        if g.is_one() {
            return self;
        }
        let num = self.num.div_monomial(&g).expect("content divides");
        let den = self.den.div_monomial(&g).expect("content divides");
        RatFn { num, den }
    }

    fn normalized(self) -> Self {
        if self.num.is_zero() {
            return RatFn::zero();
        }
        if let Some(d) = self.den.as_constant() {
            if !d.is_one() {
                let inv = d.recip().expect("nonzero constant denominator");
                return RatFn { num: self.num.scale(&inv), den: Poly::one() };
            }
        }
        if self.num == self.den {
            return RatFn::one();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn params(&self) -> std::collections::BTreeSet<String> {
        let mut s = self.num.params();
        s.extend(self.den.params());
        s
    }

    pub fn eval(&self, assignment: &Assignment) -> Result<Rational, AlgebraError> {
        let n = self.num.eval(assignment)?;
        let d = self.den.eval(assignment)?;
        n.checked_div(&d)
    }

    pub fn partial_eval(&self, assignment: &Assignment) -> Result<RatFn, AlgebraError> {
        RatFn::new(self.num.partial_eval(assignment), self.den.partial_eval(assignment))
    }

    /// Identity test by cross-multiplication.
    pub fn identical(&self, other: &RatFn) -> bool {
        if self.den == other.den {
            return self.num == other.num;
        }
        &self.num * &other.den == &other.num * &self.den
    }

    pub fn add(&self, other: &RatFn) -> RatFn {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den == other.den {
            return RatFn { num: &self.num + &other.num, den: self.den.clone() }.normalized();
        }
        RatFn {
            num: &(&self.num * &other.den) + &(&other.num * &self.den),
            den: &self.den * &other.den,
        }
        .normalized()
    }

    pub fn sub(&self, other: &RatFn) -> RatFn {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RatFn {
        RatFn { num: -&self.num, den: self.den.clone() }
    }

    pub fn mul(&self, other: &RatFn) -> RatFn {
        if self.is_zero() || other.is_zero() {
            return RatFn::zero();
        }
        let den = if self.den.is_one() {
            other.den.clone()
        } else if other.den.is_one() {
            self.den.clone()
        } else {
            &self.den * &other.den
        };
        RatFn { num: &self.num * &other.num, den }.normalized()
    }

    pub fn mul_poly(&self, p: &Poly) -> RatFn {
        if self.is_zero() || p.is_zero() {
            return RatFn::zero();
        }
        RatFn { num: &self.num * p, den: self.den.clone() }.normalized()
    }
}

impl PartialEq for RatFn {
    fn eq(&self, other: &Self) -> bool {
        self.identical(other)
    }
}

impl Eq for RatFn {}

impl From<Poly> for RatFn {
    fn from(p: Poly) -> Self {
        RatFn::from_poly(p)
    }
}

impl From<Rational> for RatFn {
    fn from(c: Rational) -> Self {
        RatFn::constant(c)
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

impl fmt::Debug for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RatFn({})", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Poly {
        Poly::param("p")
    }

    fn k(n: i64) -> Poly {
        Poly::constant(Rational::from(n))
    }

    #[test]
    fn cross_multiplied_equality() {
        // (2-2p)/(2-p) == (4-4p)/(4-2p)
        let a = RatFn::new(k(2) - p().scale(&Rational::from(2)), k(2) - p()).unwrap();
        let b = RatFn::new(k(4) - p().scale(&Rational::from(4)), k(4) - p().scale(&Rational::from(2))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conditioned_weights_sum_to_one() {
        let den = k(2) - p();
        let a = RatFn::new(k(2) - p().scale(&Rational::from(2)), den.clone()).unwrap();
        let b = RatFn::new(p(), den).unwrap();
        assert_eq!(a.add(&b), RatFn::one());
        assert!(a.add(&b).as_constant().is_some_and(|c| c.is_one()));
    }

    #[test]
    fn constant_denominator_folds() {
        let r = RatFn::new(p(), k(4)).unwrap();
        assert!(r.is_polynomial());
        assert_eq!(r.num, p().scale(&Rational::frac(1, 4)));
    }

    #[test]
    fn eval_reports_zero_denominator() {
        let r = RatFn::new(k(1), p()).unwrap();
        let mut a = Assignment::new();
        a.insert("p".into(), Rational::zero());
        assert_eq!(r.eval(&a).unwrap_err(), AlgebraError::DivisionByZero);
    }
}

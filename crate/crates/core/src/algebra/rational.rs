use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::AlgebraError;

/// Exact rational number in lowest terms with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Result<Self, AlgebraError> {
        let d: BigInt = denom.into();
        if d.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(Rational(BigRational::new(numer.into(), d)))
    }

    /// Panics on a zero denominator; intended for literals.
    pub fn frac(numer: i64, denom: i64) -> Self {
        Rational::new(numer, denom).expect("nonzero denominator")
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Result<Self, AlgebraError> {
        if self.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(Rational(self.0.recip()))
    }

    pub fn checked_div(&self, other: &Rational) -> Result<Self, AlgebraError> {
        if other.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(Rational(&self.0 / &other.0))
    }

    pub fn pow(&self, exp: u32) -> Self {
        Rational(num_traits::pow(self.0.clone(), exp as usize))
    }

    pub fn to_f64(&self) -> f64 {
        if let Some(v) = self.0.to_f64() {
            if v.is_finite() {
                return v;
            }
        }
        // Very large numerator and denominator: shift both down first.
        let n = self.numer();
        let d = self.denom();
        let shift = n.bits().max(d.bits()).saturating_sub(900);
        let ns = (n.abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
        let ds = (d >> shift).to_f64().unwrap_or(f64::INFINITY);
        let v = ns / ds;
        if n.is_negative() {
            -v
        } else {
            v
        }
    }

    /// Nonnegative numerator and denominator as unsigned integers.
    pub fn to_biguint_parts(&self) -> Option<(BigUint, BigUint)> {
        if self.is_negative() {
            return None;
        }
        Some((
            self.numer().to_biguint().unwrap_or_default(),
            self.denom().to_biguint().unwrap_or_default(),
        ))
    }

    /// Parses a decimal such as "1.232" or "-0.5" exactly.
    pub fn from_decimal_str(s: &str) -> Result<Self, AlgebraError> {
        let bad = || AlgebraError::Parse(s.to_string());
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((a, b)) => (a, b),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{}{}", int_part, frac_part);
        let numer = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
        let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
        let r = Rational(BigRational::new(numer, denom));
        Ok(if neg { -r } else { r })
    }

    /// Smallest multiple of `1/grid` that is >= self.
    pub fn ceil_to_grid(&self, grid: &BigInt) -> Rational {
        let scaled = &self.0 * BigRational::from_integer(grid.clone());
        Rational(BigRational::new(scaled.ceil().to_integer(), grid.clone()))
    }

    /// Largest multiple of `1/grid` that is <= self.
    pub fn floor_to_grid(&self, grid: &BigInt) -> Rational {
        let scaled = &self.0 * BigRational::from_integer(grid.clone());
        Rational(BigRational::new(scaled.floor().to_integer(), grid.clone()))
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }

    pub fn from_big(r: BigRational) -> Self {
        Rational(r)
    }

    pub fn sign(&self) -> Sign {
        self.numer().sign()
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = AlgebraError;

    /// Accepts "n", "n/d" and finite decimals.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n = BigInt::from_str(n.trim()).map_err(|_| AlgebraError::Parse(s.to_string()))?;
            let d = BigInt::from_str(d.trim()).map_err(|_| AlgebraError::Parse(s.to_string()))?;
            return Rational::new(n, d);
        }
        if t.contains('.') {
            return Rational::from_decimal_str(t);
        }
        BigInt::from_str(t)
            .map(Rational::from_integer)
            .map_err(|_| AlgebraError::Parse(s.to_string()))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::from_integer(v)
    }
}

impl From<BigInt> for Rational {
    fn from(v: BigInt) -> Self {
        Rational::from_integer(v)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0 $op rhs.0)
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0 $op &rhs.0)
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(&self.0 $op rhs.0)
            }
        }
        impl<'a, 'b> $trait<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                Rational(&self.0 $op &rhs.0)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);
forward_binop!(Mul, mul, *);

/// Panics on division by zero, like the primitive types. Use `checked_div`
/// when the divisor may vanish.
impl Div<&Rational> for &Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        self.checked_div(rhs).expect("division by zero")
    }
}

impl Div<Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        &self / &rhs
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0.clone())
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&Rational> for Rational {
    fn mul_assign(&mut self, rhs: &Rational) {
        self.0 *= &rhs.0;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::{AlgebraError, Assignment, Rational};

/// Product of named parameters raised to positive powers, sorted by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(name: &str) -> Self {
        Monomial(vec![(name.to_string(), 1)])
    }

    pub fn from_powers<I: IntoIterator<Item = (String, u32)>>(it: I) -> Self {
        let mut m: BTreeMap<String, u32> = BTreeMap::new();
        for (n, e) in it {
            if e > 0 {
                *m.entry(n).or_insert(0) += e;
            }
        }
        Monomial(m.into_iter().collect())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn powers(&self) -> &[(String, u32)] {
        &self.0
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (&self.0[i], &other.0[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => {
                    out.push(a.clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b.clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a.0.clone(), a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// `self / other` if `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let own: BTreeMap<&String, u32> = self.0.iter().map(|(n, e)| (n, *e)).collect();
        let mut out: BTreeMap<String, u32> = self.0.iter().cloned().collect();
        for (n, e) in &other.0 {
            if own.get(n).copied().unwrap_or(0) < *e {
                return None;
            }
            *out.get_mut(n).expect("present") -= e;
        }
        Some(Monomial::from_powers(out))
    }

    /// Lexicographic order on exponent vectors, variables taken by name.
    pub fn lex_cmp(&self, other: &Monomial) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(a), Some(b)) => match a.0.cmp(&b.0) {
                    // `self` has a variable `other` lacks.
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match a.1.cmp(&b.1) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        o => return o,
                    },
                },
            }
        }
    }

    fn eval(&self, assignment: &Assignment) -> Result<Rational, AlgebraError> {
        let mut acc = Rational::one();
        for (name, e) in &self.0 {
            let v = assignment
                .get(name)
                .ok_or_else(|| AlgebraError::MissingParameter(name.clone()))?;
            acc *= &v.pow(*e);
        }
        Ok(acc)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{}", n)?;
            } else {
                write!(f, "{}^{}", n, e)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyOp {
    Add,
    Sub,
    Mul,
}

/// Multivariate polynomial with exact rational coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Poly { terms }
    }

    pub fn param(name: &str) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(name), Rational::one());
        Poly { terms }
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(it: I) -> Self {
        let mut p = Poly::zero();
        for (m, c) in it {
            p.add_term(m, &c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: &Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    /// The value if the polynomial has no parameters.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn params(&self) -> BTreeSet<String> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(n, _)| n.clone()))
            .collect()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, assignment: &Assignment) -> Result<Rational, AlgebraError> {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            acc += &(c * &m.eval(assignment)?);
        }
        Ok(acc)
    }

    /// Substitutes the parameters present in `assignment`, leaving the rest symbolic.
    pub fn partial_eval(&self, assignment: &Assignment) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut coeff = c.clone();
            let mut rest = Vec::new();
            for (n, e) in &m.0 {
                match assignment.get(n) {
                    Some(v) => coeff *= &v.pow(*e),
                    None => rest.push((n.clone(), *e)),
                }
            }
            out.add_term(Monomial(rest), &coeff);
        }
        out
    }

    pub fn scale(&self, k: &Rational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn apply(&self, other: &Poly, op: PolyOp) -> Poly {
        match op {
            PolyOp::Add => self + other,
            PolyOp::Sub => self - other,
            PolyOp::Mul => self * other,
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Largest term under the lexicographic monomial order.
    fn leading(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().max_by(|a, b| a.0.lex_cmp(b.0))
    }

    /// Quotient `self / d` if `d` divides `self` exactly.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        let (dm, dc) = d.leading()?;
        let (dm, dc) = (dm.clone(), dc.clone());
        let mut r = self.clone();
        let mut q = Poly::zero();
        while let Some((lm, lc)) = r.leading() {
            let m = lm.div(&dm)?;
            let c = lc / &dc;
            let step = Poly::from_terms([(m, c)]);
            r = &r - &(&step * d);
            q = &q + &step;
        }
        Some(q)
    }

    /// Greatest monomial dividing every term; one for the zero polynomial.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else { return Monomial::one() };
        let mut g: BTreeMap<String, u32> = first.0.iter().cloned().collect();
        for m in it {
            let own: BTreeMap<&String, u32> = m.0.iter().map(|(n, e)| (n, *e)).collect();
            g.retain(|n, e| match own.get(n) {
                Some(x) => {
                    *e = (*e).min(*x);
                    true
                }
                None => false,
            });
        }
        Monomial(g.into_iter().collect())
    }

    /// Divides every term by `m`, which must divide each of them.
    pub fn div_monomial(&self, m: &Monomial) -> Option<Poly> {
        let mut out = Poly::zero();
        for (t, c) in &self.terms {
            out.add_term(t.div(m)?, c);
        }
        Some(out)
    }
}

impl Add<&Poly> for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl Sub<&Poly> for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), &-c);
        }
        out
    }
}

impl Mul<&Poly> for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), &(c1 * c2));
            }
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&-Rational::one())
    }
}

macro_rules! owned_poly_op {
    ($trait:ident, $method:ident) => {
        impl $trait<Poly> for Poly {
            type Output = Poly;
            fn $method(self, rhs: Poly) -> Poly {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Poly> for Poly {
            type Output = Poly;
            fn $method(self, rhs: &Poly) -> Poly {
                (&self).$method(rhs)
            }
        }
    };
}

owned_poly_op!(Add, add);
owned_poly_op!(Sub, sub);
owned_poly_op!(Mul, mul);

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        -&self
    }
}

impl From<Rational> for Poly {
    fn from(c: Rational) -> Self {
        Poly::constant(c)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // Highest degree first reads more naturally.
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|a, b| b.0.degree().cmp(&a.0.degree()).then(a.0.cmp(b.0)));
        for (i, (m, c)) in terms.into_iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            if m.is_one() {
                write!(f, "{}", mag)?;
            } else if mag.is_one() {
                write!(f, "{}", m)?;
            } else {
                write!(f, "{}*{}", mag, m)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({})", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Poly {
        Poly::param("p")
    }

    fn c(n: i64, d: i64) -> Poly {
        Poly::constant(Rational::frac(n, d))
    }

    fn at(name: &str, v: Rational) -> Assignment {
        let mut a = Assignment::new();
        a.insert(name.to_string(), v);
        a
    }

    #[test]
    fn ring_examples() {
        assert_eq!(&p() + &(c(1, 1) - p()), Poly::one());
        let sq = &p() * &p();
        assert_eq!(sq.to_string(), "p^2");
        let lhs = (c(1, 1) - p()).pow(2);
        let rhs = c(1, 1) - p().scale(&Rational::frac(2, 1)) + sq;
        assert!(lhs.apply(&rhs, PolyOp::Sub).is_zero());
    }

    #[test]
    fn eval_examples() {
        let q = Poly::param("q");
        let e = (c(1, 1) - q).pow(2);
        assert_eq!(e.eval(&at("q", Rational::frac(1, 2))).unwrap(), Rational::frac(1, 4));

        let t = (&p() * &p() - p().scale(&Rational::frac(4, 1)) + c(4, 1)).scale(&Rational::frac(1, 6));
        assert_eq!(t.eval(&at("p", Rational::zero())).unwrap(), Rational::frac(2, 3));

        let num = c(2, 1) - p().scale(&Rational::frac(2, 1));
        let den = c(2, 1) - p();
        let half = at("p", Rational::frac(1, 2));
        let v = num.eval(&half).unwrap().checked_div(&den.eval(&half).unwrap()).unwrap();
        assert_eq!(v, Rational::frac(2, 3));
    }

    #[test]
    fn missing_parameter_is_named() {
        let e = &p() * &Poly::param("zeta");
        let err = e.eval(&at("p", Rational::one())).unwrap_err();
        assert_eq!(err, AlgebraError::MissingParameter("zeta".into()));
    }

    #[test]
    fn partial_eval_keeps_free_params() {
        let e = &p() * &Poly::param("q") + Poly::param("q");
        let r = e.partial_eval(&at("p", Rational::frac(1, 2)));
        assert_eq!(r, Poly::param("q").scale(&Rational::frac(3, 2)));
    }

    #[test]
    fn display_orders_by_degree() {
        let e = c(4, 1) - p().scale(&Rational::frac(4, 1)) + &p() * &p();
        assert_eq!(e.to_string(), "p^2 - 4*p + 4");
        assert_eq!(Poly::zero().to_string(), "0");
    }
}

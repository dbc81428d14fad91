//! JSON expression trees for polynomials and rational functions.
//!
//! An expression is either a rational literal string (`"2/3"`) or one of the
//! node objects `{"const": "1/2"}`, `{"param": "p"}`, `{"add": [..]}`,
//! `{"mul": [..]}`, `{"sub": [a, b, ..]}`. Rational functions add the
//! `{"num": expr, "den": expr}` form.

use serde::{Deserialize, Serialize};

use super::{AlgebraError, Poly, RatFn, Rational};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expr {
    Lit(Rational),
    Node(ExprNode),
    Frac(FracNode),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ExprNode {
    Const(Rational),
    Param(String),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Sub(Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FracNode {
    pub num: Box<Expr>,
    pub den: Box<Expr>,
}

impl Expr {
    pub fn to_poly(&self) -> Result<Poly, AlgebraError> {
        match self {
            Expr::Lit(r) => Ok(Poly::constant(r.clone())),
            Expr::Node(ExprNode::Const(r)) => Ok(Poly::constant(r.clone())),
            Expr::Node(ExprNode::Param(n)) => {
                if n.is_empty() {
                    return Err(AlgebraError::Parse("empty parameter name".into()));
                }
                Ok(Poly::param(n))
            }
            Expr::Node(ExprNode::Add(xs)) => {
                xs.iter().try_fold(Poly::zero(), |acc, x| Ok(&acc + &x.to_poly()?))
            }
            Expr::Node(ExprNode::Mul(xs)) => {
                xs.iter().try_fold(Poly::one(), |acc, x| Ok(&acc * &x.to_poly()?))
            }
            Expr::Node(ExprNode::Sub(xs)) => {
                let (first, rest) = xs
                    .split_first()
                    .ok_or_else(|| AlgebraError::Parse("\"sub\" needs at least one operand".into()))?;
                if rest.is_empty() {
                    return Ok(-first.to_poly()?);
                }
                rest.iter().try_fold(first.to_poly()?, |acc, x| Ok(&acc - &x.to_poly()?))
            }
            Expr::Frac(_) => Err(AlgebraError::NotPolynomial),
        }
    }

    pub fn to_ratfn(&self) -> Result<RatFn, AlgebraError> {
        match self {
            Expr::Frac(f) => RatFn::new(f.num.to_poly()?, f.den.to_poly()?),
            other => Ok(RatFn::from_poly(other.to_poly()?)),
        }
    }

    /// Canonical tree: a literal for constants, otherwise a sum of products.
    pub fn from_poly(p: &Poly) -> Expr {
        if let Some(c) = p.as_constant() {
            return Expr::Lit(c);
        }
        let mut terms: Vec<Expr> = p
            .terms()
            .map(|(m, c)| {
                let mut factors = Vec::new();
                if !c.is_one() {
                    factors.push(Expr::Lit(c.clone()));
                }
                for (name, e) in m.powers() {
                    for _ in 0..*e {
                        factors.push(Expr::Node(ExprNode::Param(name.clone())));
                    }
                }
                if factors.len() == 1 {
                    factors.pop().unwrap()
                } else {
                    Expr::Node(ExprNode::Mul(factors))
                }
            })
            .collect();
        if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Node(ExprNode::Add(terms))
        }
    }

    pub fn from_ratfn(r: &RatFn) -> Expr {
        if r.is_polynomial() {
            Expr::from_poly(&r.num)
        } else {
            Expr::Frac(FracNode {
                num: Box::new(Expr::from_poly(&r.num)),
                den: Box::new(Expr::from_poly(&r.den)),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_literal_and_tree() {
        let e: Expr = serde_json::from_str("\"2/3\"").unwrap();
        assert_eq!(e.to_poly().unwrap(), Poly::constant(Rational::frac(2, 3)));

        let t: Expr = serde_json::from_str(r#"{"mul":[{"sub":["1",{"param":"p"}]},{"sub":["1",{"param":"p"}]}]}"#).unwrap();
        let one_minus_p = &Poly::one() - &Poly::param("p");
        assert_eq!(t.to_poly().unwrap(), &one_minus_p * &one_minus_p);

        let c: Expr = serde_json::from_str(r#"{"const":"1/4"}"#).unwrap();
        assert_eq!(c.to_poly().unwrap(), Poly::constant(Rational::frac(1, 4)));
    }

    #[test]
    fn fraction_form() {
        let e: Expr = serde_json::from_str(r#"{"num":{"param":"p"},"den":{"sub":["2",{"param":"p"}]}}"#).unwrap();
        assert_eq!(e.to_poly().unwrap_err(), AlgebraError::NotPolynomial);
        let r = e.to_ratfn().unwrap();
        assert_eq!(r.den, &Poly::constant(Rational::from(2)) - &Poly::param("p"));
    }

    #[test]
    fn round_trips_through_canonical_tree() {
        let p = Poly::param("p");
        let q = Poly::param("q");
        let poly = &(&(&p * &p) * &q).scale(&Rational::frac(-3, 2)) + &Poly::constant(Rational::frac(1, 7));
        let json = serde_json::to_string(&Expr::from_poly(&poly)).unwrap();
        let back: Expr = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_poly().unwrap(), poly);
    }

    #[test]
    fn rejects_unknown_node() {
        assert!(serde_json::from_str::<Expr>(r#"{"div":["1","2"]}"#).is_err());
        assert!(serde_json::from_str::<Expr>("\"x/y\"").is_err());
    }
}

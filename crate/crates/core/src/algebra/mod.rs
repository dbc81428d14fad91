//! Exact arithmetic: big rationals, multivariate polynomials over named
//! parameters, and polynomial quotients.

mod expr;
mod poly;
mod ratfn;
mod rational;

use std::collections::BTreeMap;

pub use expr::{Expr, ExprNode, FracNode};
pub use poly::{Monomial, Poly, PolyOp};
pub use ratfn::RatFn;
pub use rational::Rational;

/// Parameter values keyed by parameter name.
pub type Assignment = BTreeMap<String, Rational>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlgebraError {
    #[error("missing value for parameter `{0}`")]
    MissingParameter(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse `{0}` as a rational")]
    Parse(String),
    #[error("expression is a quotient where a polynomial is required")]
    NotPolynomial,
}

/// Evaluates `p` at `assignment`.
pub fn poly_eval(p: &Poly, assignment: &Assignment) -> Result<Rational, AlgebraError> {
    p.eval(assignment)
}

pub fn poly_arith(a: &Poly, b: &Poly, op: PolyOp) -> Poly {
    a.apply(b, op)
}

/// Convenience for building assignments in code and tests.
pub fn assignment<'a, I: IntoIterator<Item = (&'a str, Rational)>>(it: I) -> Assignment {
    it.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

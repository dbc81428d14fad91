use std::fmt::Write;

use crate::algebra::Rational;
use crate::verifier::{Formula, QueryAst, Term};

pub fn obs_var(t: usize) -> String {
    format!("w!{}", t)
}

fn is_simple_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Parameter names are kept verbatim when they are plain identifiers and
/// quoted otherwise.
pub fn param_symbol(name: &str) -> String {
    if is_simple_symbol(name) {
        name.to_string()
    } else {
        format!("|{}|", name.replace(['|', '\\'], "_"))
    }
}

fn def_symbol(name: &str) -> String {
    name.replace('_', "!")
}

fn integer_literal(n: &num_bigint::BigInt) -> String {
    if n.sign() == num_bigint::Sign::Minus {
        format!("(- {}.0)", -n)
    } else {
        format!("{}.0", n)
    }
}

pub fn real_literal(r: &Rational) -> String {
    if r.denom() == &num_bigint::BigInt::from(1) {
        integer_literal(r.numer())
    } else {
        format!("(/ {} {}.0)", integer_literal(r.numer()), r.denom())
    }
}

fn term(t: &Term, out: &mut String) {
    match t {
        Term::Const(c) => out.push_str(&real_literal(c)),
        Term::Param(p) => out.push_str(&param_symbol(p)),
        Term::Ref(r) => out.push_str(&def_symbol(r)),
        Term::Add(v) | Term::Mul(v) => {
            out.push_str(if matches!(t, Term::Add(_)) { "(+" } else { "(*" });
            for x in v {
                out.push(' ');
                term(x, out);
            }
            out.push(')');
        }
        Term::Div(a, b) => {
            out.push_str("(/ ");
            term(a, out);
            out.push(' ');
            term(b, out);
            out.push(')');
        }
        Term::Select { var, cases } => {
            for (w, x) in cases {
                let _ = write!(out, "(ite (= {} {}) ", obs_var(*var), w);
                term(x, out);
                out.push(' ');
            }
            out.push_str("0.0");
            for _ in cases {
                out.push(')');
            }
        }
    }
}

fn formula(f: &Formula, out: &mut String) {
    match f {
        Formula::Gt(a, b) => {
            out.push_str("(> ");
            term(a, out);
            out.push(' ');
            term(b, out);
            out.push(')');
        }
        Formula::InRange { var, size } => {
            let _ = write!(out, "(and (<= 0 {v}) (< {v} {n}))", v = obs_var(*var), n = size);
        }
        Formula::And(v) | Formula::Or(v) => {
            out.push_str(if matches!(f, Formula::And(_)) { "(and" } else { "(or" });
            for x in v {
                out.push(' ');
                formula(x, out);
            }
            out.push(')');
        }
    }
}

/// Logic name matching the query's arithmetic.
pub fn logic(ast: &QueryAst) -> &'static str {
    if ast.is_nonlinear() {
        "QF_NIRA"
    } else {
        "QF_LIRA"
    }
}

/// Renders the query as an SMT-LIB 2 script ending in `check-sat` and
/// `get-model`. Output depends only on the query.
pub fn emit_script(ast: &QueryAst) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(set-logic {})", logic(ast));
    for t in 0..ast.k {
        let _ = writeln!(out, "(declare-const {} Int)", obs_var(t));
    }
    for p in &ast.params {
        let _ = writeln!(out, "(declare-const {} Real)", param_symbol(&p.name));
    }
    for d in &ast.definitions {
        let _ = write!(out, "(define-fun {} () Real ", def_symbol(&d.name));
        term(&d.body, &mut out);
        out.push_str(")\n");
    }
    for f in &ast.assertions {
        out.push_str("(assert ");
        formula(f, &mut out);
        out.push_str(")\n");
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

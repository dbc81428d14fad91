use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::algebra::{Assignment, Rational};
use crate::verifier::QueryAst;

use super::emit::{obs_var, param_symbol};
use super::SmtError;

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Result<Vec<String>, SmtError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                out.push(c.to_string());
                chars.next();
            }
            ';' => {
                while let Some(c) = chars.next() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some(c) => s.push(c),
                        None => return Err(SmtError::Malformed("unterminated quoted symbol".into())),
                    }
                }
                out.push(s);
            }
            '"' => {
                chars.next();
                let mut s = String::from("\"");
                loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            s.push('"');
                        }
                        Some('"') => break,
                        Some(c) => s.push(c),
                        None => return Err(SmtError::Malformed("unterminated string".into())),
                    }
                }
                out.push(s);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn parse_all(tokens: &[String]) -> Result<Vec<Sexp>, SmtError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop().expect("stack is never empty");
                stack
                    .last_mut()
                    .ok_or_else(|| SmtError::Malformed("unbalanced `)`".into()))?
                    .push(Sexp::List(done));
            }
            _ => stack.last_mut().expect("stack is never empty").push(Sexp::Atom(t.clone())),
        }
    }
    if stack.len() != 1 {
        return Err(SmtError::Malformed("unbalanced `(`".into()));
    }
    Ok(stack.pop().expect("one frame"))
}

enum Value {
    Number(Rational),
    Unsupported(String),
    Other,
}

fn value(s: &Sexp) -> Value {
    match s {
        Sexp::Atom(a) => match Rational::from_decimal_str(a) {
            Ok(r) => Value::Number(r),
            Err(_) => Value::Other,
        },
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => match value(x) {
                Value::Number(r) => Value::Number(-r),
                v => v,
            },
            [Sexp::Atom(op), a, b] if op == "/" => match (value(a), value(b)) {
                (Value::Number(x), Value::Number(y)) if !y.is_zero() => Value::Number(&x / &y),
                (Value::Unsupported(u), _) | (_, Value::Unsupported(u)) => Value::Unsupported(u),
                _ => Value::Other,
            },
            [Sexp::Atom(op), ..] if op == "root-obj" => Value::Unsupported("root-obj".into()),
            _ => Value::Other,
        },
    }
}

/// Reads a `get-model` response into name -> value for every constant whose
/// value is a numeric literal (integers, decimals, `(/ a b)`, `(- x)`).
/// Entries defined by other expressions are skipped; algebraic numbers are
/// rejected.
pub fn parse_model(text: &str) -> Result<BTreeMap<String, Rational>, SmtError> {
    let top = parse_all(&tokenize(text)?)?;
    let mut entries = Vec::new();
    for s in top {
        match s {
            Sexp::List(items) => {
                let body = match items.first() {
                    Some(Sexp::Atom(a)) if a == "model" => &items[1..],
                    Some(Sexp::Atom(a)) if a == "define-fun" => {
                        entries.push(Sexp::List(items.clone()));
                        continue;
                    }
                    _ => &items[..],
                };
                entries.extend(body.iter().cloned());
            }
            Sexp::Atom(a) => return Err(SmtError::Malformed(format!("unexpected atom `{}` in model", a))),
        }
    }
    let mut out = BTreeMap::new();
    for e in entries {
        let Sexp::List(items) = e else {
            return Err(SmtError::Malformed("model entry is not a list".into()));
        };
        match items.as_slice() {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), _sort, body] if kw == "define-fun" => {
                if !args.is_empty() {
                    continue;
                }
                match value(body) {
                    Value::Number(r) => {
                        out.insert(name.clone(), r);
                    }
                    Value::Unsupported(what) => {
                        return Err(SmtError::UnsupportedModel(format!("{} = {}", name, what)));
                    }
                    Value::Other => {}
                }
            }
            _ => return Err(SmtError::Malformed("expected `(define-fun name () Sort value)`".into())),
        }
    }
    Ok(out)
}

/// Observation sequence and parameter point extracted from a model.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryModel {
    pub indices: Vec<usize>,
    pub observations: Vec<String>,
    pub assignment: Assignment,
}

/// Maps model values back onto the query's observation alphabet and
/// parameters.
pub fn interpret_model(ast: &QueryAst, values: &BTreeMap<String, Rational>) -> Result<QueryModel, SmtError> {
    let mut indices = Vec::with_capacity(ast.k);
    for t in 0..ast.k {
        let name = obs_var(t);
        let v = values.get(&name).ok_or_else(|| SmtError::Malformed(format!("model lacks `{}`", name)))?;
        let idx = (v.denom() == &BigInt::from(1))
            .then(|| usize::try_from(v.numer().clone()).ok())
            .flatten()
            .filter(|i| *i < ast.observations.len())
            .ok_or_else(|| SmtError::Malformed(format!("`{}` = {} is not an observation index", name, v)))?;
        indices.push(idx);
    }
    let mut assignment = Assignment::new();
    for d in &ast.params {
        let sym = param_symbol(&d.name);
        let key = sym.trim_matches('|');
        let v = values
            .get(key)
            .cloned()
            // Unconstrained parameters may be left out of the model.
            .unwrap_or_else(|| &(&d.lo + &d.hi) / &Rational::from(2));
        assignment.insert(d.name.clone(), v);
    }
    Ok(QueryModel {
        observations: indices.iter().map(|i| ast.observations[*i].clone()).collect(),
        indices,
        assignment,
    })
}

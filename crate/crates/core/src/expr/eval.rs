use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{BinaryOp, Expression, Node, UnaryOp};
use super::jet::Jet2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound constant '{0}'")]
    UnboundConstant(String),
    #[error("domain violation in '{subexpr}': {reason}")]
    Domain { subexpr: String, reason: String },
}

/// An expression with its named constants resolved, ready for repeated
/// evaluation. Integer powers are detected here once.
#[derive(Debug, Clone)]
pub struct BoundExpression {
    root: Bound,
}

#[derive(Debug, Clone)]
enum Bound {
    Lit(f64),
    X,
    U,
    Neg(Box<Bound>),
    Call(UnaryOp, Box<Bound>, String),
    Add(Box<Bound>, Box<Bound>),
    Sub(Box<Bound>, Box<Bound>),
    Mul(Box<Bound>, Box<Bound>),
    Div(Box<Bound>, Box<Bound>, String),
    PowInt(Box<Bound>, i32, String),
    PowReal(Box<Bound>, f64, String),
    Pow(Box<Bound>, Box<Bound>, String),
}

fn domain(subexpr: &str, reason: impl Into<String>) -> EvalError {
    EvalError::Domain { subexpr: subexpr.to_owned(), reason: reason.into() }
}

impl BoundExpression {
    pub fn new(expr: &Expression, constants: &BTreeMap<String, f64>) -> Result<Self, EvalError> {
        Ok(BoundExpression { root: bind(expr.root(), constants)? })
    }

    pub fn eval(&self, x: f64, u: f64) -> Result<Jet2, EvalError> {
        eval(&self.root, Jet2::var_x(x), Jet2::var_u(u))
    }

    /// Value only, skipping derivative propagation.
    pub fn value(&self, x: f64, u: f64) -> Result<f64, EvalError> {
        self.eval(x, u).map(|j| j.v)
    }
}

fn bind(node: &Node, constants: &BTreeMap<String, f64>) -> Result<Bound, EvalError> {
    let b = |n: &Node| bind(n, constants).map(Box::new);
    Ok(match node {
        Node::Literal(v) => Bound::Lit(*v),
        Node::Constant(name) => Bound::Lit(
            *constants.get(name).ok_or_else(|| EvalError::UnboundConstant(name.clone()))?,
        ),
        Node::X => Bound::X,
        Node::U => Bound::U,
        Node::Unary(UnaryOp::Neg, a) => Bound::Neg(b(a)?),
        Node::Unary(op, a) => Bound::Call(*op, b(a)?, node.to_string()),
        Node::Binary(op, lhs, rhs) => match op {
            BinaryOp::Add => Bound::Add(b(lhs)?, b(rhs)?),
            BinaryOp::Sub => Bound::Sub(b(lhs)?, b(rhs)?),
            BinaryOp::Mul => Bound::Mul(b(lhs)?, b(rhs)?),
            BinaryOp::Div => Bound::Div(b(lhs)?, b(rhs)?, node.to_string()),
            BinaryOp::Pow => {
                let base = b(lhs)?;
                let exponent = bind(rhs, constants)?;
                if rhs.is_state_free() {
                    let p = eval(&exponent, Jet2::constant(0.0), Jet2::constant(0.0))?.v;
                    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
                        Bound::PowInt(base, p as i32, node.to_string())
                    } else {
                        Bound::PowReal(base, p, node.to_string())
                    }
                } else {
                    Bound::Pow(base, Box::new(exponent), node.to_string())
                }
            }
        },
    })
}

fn eval(node: &Bound, x: Jet2, u: Jet2) -> Result<Jet2, EvalError> {
    Ok(match node {
        Bound::Lit(v) => Jet2::constant(*v),
        Bound::X => x,
        Bound::U => u,
        Bound::Neg(a) => -eval(a, x, u)?,
        Bound::Add(a, b) => eval(a, x, u)? + eval(b, x, u)?,
        Bound::Sub(a, b) => eval(a, x, u)? - eval(b, x, u)?,
        Bound::Mul(a, b) => eval(a, x, u)? * eval(b, x, u)?,
        Bound::Div(a, b, text) => {
            let den = eval(b, x, u)?;
            if den.v == 0.0 {
                return Err(domain(text, "division by zero"));
            }
            eval(a, x, u)? / den
        }
        Bound::Call(op, a, text) => {
            let arg = eval(a, x, u)?;
            match op {
                UnaryOp::Exp => arg.exp(),
                UnaryOp::Log if arg.v <= 0.0 => {
                    return Err(domain(text, format!("log of non-positive value {}", arg.v)))
                }
                UnaryOp::Log => arg.ln(),
                UnaryOp::Sqrt if arg.v <= 0.0 => {
                    return Err(domain(text, format!("sqrt of non-positive value {}", arg.v)))
                }
                UnaryOp::Sqrt => arg.sqrt(),
                UnaryOp::Sin => arg.sin(),
                UnaryOp::Cos => arg.cos(),
                UnaryOp::Tanh => arg.tanh(),
                UnaryOp::Neg => -arg,
            }
        }
        Bound::PowInt(a, n, text) => {
            let base = eval(a, x, u)?;
            if *n < 0 && base.v == 0.0 {
                return Err(domain(text, "zero raised to a negative power"));
            }
            base.powi(*n)
        }
        Bound::PowReal(a, p, text) => {
            let base = eval(a, x, u)?;
            if base.v <= 0.0 {
                return Err(domain(text, format!("non-integer power of non-positive base {}", base.v)));
            }
            base.powf(*p)
        }
        Bound::Pow(a, e, text) => {
            let base = eval(a, x, u)?;
            if base.v <= 0.0 {
                return Err(domain(text, format!("variable power of non-positive base {}", base.v)));
            }
            base.pow(eval(e, x, u)?)
        }
    })
}

/// Evaluates `f` and its five partials at `(x, u)`.
pub fn eval_jet2(
    f: &Expression,
    x: f64,
    u: f64,
    constants: &BTreeMap<String, f64>,
) -> Result<Jet2, EvalError> {
    BoundExpression::new(f, constants)?.eval(x, u)
}

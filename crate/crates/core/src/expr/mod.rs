//! Integrand expressions in `x`, `u` and named constants.
//!
//! Expressions are parsed once and evaluated with [`eval_jet2`], which
//! returns the value together with every first and second partial derivative
//! in `(x, u)`. Named constants are bound at evaluation time so a single
//! parsed integrand can serve parameter sweeps.

mod ast;
mod eval;
mod jet;
mod parser;

pub use ast::{BinaryOp, Expression, Node, UnaryOp};
pub use eval::{eval_jet2, BoundExpression, EvalError};
pub use jet::Jet2;
pub use parser::{parse_expression, ParseError, ParseErrorKind};

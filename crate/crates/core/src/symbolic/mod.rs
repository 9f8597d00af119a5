//! A small computer-algebra layer: rational expressions in `z1, z2` and
//! their conjugates, Wirtinger derivatives, and dense polynomial forms.

mod expr;
mod parse;
mod poly;

pub use expr::{DerivCache, Node, SymExpr, Var, DIVISION_EPS};
pub use parse::parse_expr;
pub use poly::{taylor_in_chart, AffineSubst, Poly, PolyInW, Powers};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("non-integer exponent at position {pos}")]
    NonIntegerExponent { pos: usize },
    #[error("division by near-zero value {modulus:e} in `{subexpr}`")]
    DivisionByZero { subexpr: String, modulus: f64 },
    #[error("unsupported input: {0}")]
    Unsupported(String),
}

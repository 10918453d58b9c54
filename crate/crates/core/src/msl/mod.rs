//! The model-specification language (MSL).
//!
//! A program declares its free-parameter count, optionally binds named
//! intermediate values, and ends with a single `model` expression giving the
//! probability of choosing option B on every trial:
//!
//! ```text
//! params 1;
//! let validities = [0.9, 0.8, 0.7, 0.6];
//! model = logistic(p[0] * (dot(B, validities) - dot(A, validities)));
//! ```
//!
//! The language has no loops, recursion, user functions or I/O, so every
//! program terminates and evaluation is pure. See `docs/msl.md` for the grammar.

mod ast;
mod baselines;
mod eval;
mod lexer;
mod parser;
mod printer;
mod typecheck;

pub use ast::{BinOp, Binding, Builtin, Expr, Input, ModelProgram};
pub use baselines::{adaptive_validity, baselines, eqw, ttb, wadd, Baselines};
pub use eval::{evaluate, EvalError, EvalOutput, FeatureMatrix, PROB_EPSILON};
pub use parser::{parse, MAX_DEPTH, MAX_SOURCE_LEN};
pub use printer::print;
pub use typecheck::{typecheck, MslType, TypeError, TypedProgram};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MslError {
    #[error("parse error at {line}:{column}: found {found}, expected one of {}", expected.join(", "))]
    Parse {
        line: usize,
        column: usize,
        found: String,
        expected: Vec<String>,
    },
    #[error("header error: {0}")]
    Header(String),
    #[error("parameter p[{index}] out of range for params {declared}")]
    ParamIndex { index: usize, declared: usize },
    #[error("program is {len} characters, limit is {MAX_SOURCE_LEN}")]
    TooLarge { len: usize },
    #[error("expression nesting exceeds depth {MAX_DEPTH}")]
    TooDeep,
    #[error("name error: {0}")]
    Name(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Parses and typechecks in one step.
pub fn compile(source: &str, num_features: usize) -> Result<TypedProgram, MslError> {
    let prog = parse(source)?;
    Ok(typecheck(&prog, num_features)?)
}

//! The three starting strategies and the adaptive-validity model.

use super::ast::ModelProgram;
use super::parse;

pub const WADD_SOURCE: &str = "\
# weighted additive strategy
params 1;
# feature validity weights (importance of each feature)
let validities = [0.9, 0.8, 0.7, 0.6];
let value_a = dot(A, validities);
let value_b = dot(B, validities);
model = clip(logistic(p[0] * (value_b - value_a)), 0.00001, 1 - 0.00001);
";

pub const TTB_SOURCE: &str = "\
# take-the-best heuristic
params 1;
# halving weights: each expert outweighs all lower-validity experts combined
let validities = [1.0, 0.5, 0.25, 0.125];
let value_a = dot(A, validities);
let value_b = dot(B, validities);
model = clip(logistic(p[0] * (value_b - value_a)), 0.00001, 1 - 0.00001);
";

pub const EQW_SOURCE: &str = "\
# equal weighting heuristic
params 1;
let value_a = sum(A);
let value_b = sum(B);
model = clip(logistic(p[0] * (value_b - value_a)), 0.00001, 1 - 0.00001);
";

/// Weighted additive with a free weight on the most valid expert; interpolates
/// between take-the-best and weighted additive.
pub const ADAPTIVE_VALIDITY_SOURCE: &str = "\
# weighted additive with adaptive top-expert validity
params 2;
let validities = [p[0] * 0.9, 0.8, 0.7, 0.6];
let value_a = dot(A, validities);
let value_b = dot(B, validities);
model = logistic(p[1] * (value_b - value_a));
";

fn builtin(src: &str) -> ModelProgram {
    parse(src).expect("built-in program parses")
}

pub fn wadd() -> ModelProgram {
    builtin(WADD_SOURCE)
}

pub fn ttb() -> ModelProgram {
    builtin(TTB_SOURCE)
}

pub fn eqw() -> ModelProgram {
    builtin(EQW_SOURCE)
}

pub fn adaptive_validity() -> ModelProgram {
    builtin(ADAPTIVE_VALIDITY_SOURCE)
}

#[derive(Debug, Clone)]
pub struct Baselines {
    pub wadd: ModelProgram,
    pub ttb: ModelProgram,
    pub eqw: ModelProgram,
}

pub fn baselines() -> Baselines {
    Baselines {
        wadd: wadd(),
        ttb: ttb(),
        eqw: eqw(),
    }
}

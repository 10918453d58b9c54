use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{BinOp, Builtin, Input};
use super::typecheck::{MslType, Node, TypedExpr, TypedProgram};
use crate::Scalar;

/// Output probabilities are clipped to `[PROB_EPSILON, 1 - PROB_EPSILON]`.
pub const PROB_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("program declares {expected} parameter(s), got {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("input shape error: {0}")]
    Shape(String),
    #[error("model output is NaN on trial {trial}")]
    NonFinite { trial: usize },
}

/// Row-major `num_trials x num_features` matrix of option ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, EvalError> {
        if data.len() != rows * cols {
            return Err(EvalError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    /// Builds a matrix from binary rating rows. All rows must share a length.
    pub fn from_ratings<'a, I>(rows: I, cols: usize) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = &'a [u8]>,
    {
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            if row.len() != cols {
                return Err(EvalError::Shape(format!(
                    "row {n} has {} features, expected {cols}",
                    row.len()
                )));
            }
            data.extend(row.iter().map(|&v| T::of(f64::from(v))));
            n += 1;
        }
        Ok(FeatureMatrix {
            rows: n,
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput<T> {
    /// Probability of choosing option B on each trial, clipped.
    pub probs_b: Vec<T>,
}

#[derive(Clone)]
struct Value<T> {
    ty: MslType,
    /// Scalars hold one element; matrices are row-major.
    data: Vec<T>,
}

impl<T: Scalar> Value<T> {
    fn scalar(x: T) -> Self {
        Value {
            ty: MslType::Scalar,
            data: vec![x],
        }
    }

    fn at(&self, i: usize) -> T {
        if self.ty == MslType::Scalar {
            self.data[0]
        } else {
            self.data[i]
        }
    }
}

struct Context<'a, T> {
    params: &'a [T],
    a: &'a FeatureMatrix<T>,
    b: &'a FeatureMatrix<T>,
    slots: Vec<Value<T>>,
    trials: usize,
    features: usize,
}

fn bool_to<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

pub(crate) fn logistic<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Evaluates `prog` and returns clipped per-trial probabilities of choosing B.
/// Pure and deterministic: identical inputs give bit-identical outputs.
pub fn evaluate<T: Scalar>(
    prog: &TypedProgram,
    params: &[T],
    option_a: &FeatureMatrix<T>,
    option_b: &FeatureMatrix<T>,
) -> Result<EvalOutput<T>, EvalError> {
    if params.len() != prog.num_parameters() {
        return Err(EvalError::ParamCount {
            expected: prog.num_parameters(),
            found: params.len(),
        });
    }
    let features = prog.num_features();
    if option_a.rows != option_b.rows || option_a.cols != features || option_b.cols != features {
        return Err(EvalError::Shape(format!(
            "option A is {}x{}, option B is {}x{}, program expects {features} features",
            option_a.rows, option_a.cols, option_b.rows, option_b.cols
        )));
    }
    let mut ctx = Context {
        params,
        a: option_a,
        b: option_b,
        slots: Vec::with_capacity(prog.slots.len()),
        trials: option_a.rows,
        features,
    };
    for slot in &prog.slots {
        let v = ctx.eval(slot);
        ctx.slots.push(v);
    }
    let out = ctx.eval(&prog.body);
    debug_assert_eq!(out.ty, MslType::TrialVector);

    if let Some(trial) = out.data.iter().position(|x| x.is_nan()) {
        return Err(EvalError::NonFinite { trial });
    }
    let lo = T::of(PROB_EPSILON);
    let hi = T::one() - lo;
    let probs_b = out.data.into_iter().map(|x| x.max(lo).min(hi)).collect();
    Ok(EvalOutput { probs_b })
}

impl<T: Scalar> Context<'_, T> {
    fn len_of(&self, ty: MslType) -> usize {
        match ty {
            MslType::Scalar => 1,
            MslType::FeatVector => self.features,
            MslType::TrialVector => self.trials,
            MslType::FeatMatrix => self.trials * self.features,
        }
    }

    fn eval(&self, e: &TypedExpr) -> Value<T> {
        match &e.node {
            Node::Num(x) => Value::scalar(T::of(*x)),
            Node::Param(i) => Value::scalar(self.params[*i]),
            Node::Input(Input::A) => Value {
                ty: MslType::FeatMatrix,
                data: self.a.data.clone(),
            },
            Node::Input(Input::B) => Value {
                ty: MslType::FeatMatrix,
                data: self.b.data.clone(),
            },
            Node::Slot(i) => self.slots[*i].clone(),
            Node::Vector(items) => Value {
                ty: MslType::FeatVector,
                data: items.iter().map(|i| self.eval(i).data[0]).collect(),
            },
            Node::Neg(inner) => {
                let mut v = self.eval(inner);
                v.data.iter_mut().for_each(|x| *x = -*x);
                v
            }
            Node::Binary { op, lhs, rhs } => {
                let l = self.eval(lhs);
                let r = self.eval(rhs);
                let f: fn(T, T) -> T = match op {
                    BinOp::Add => |x, y| x + y,
                    BinOp::Sub => |x, y| x - y,
                    BinOp::Mul => |x, y| x * y,
                    BinOp::Div => |x, y| x / y,
                    BinOp::Lt => |x, y| bool_to(x < y),
                    BinOp::Le => |x, y| bool_to(x <= y),
                    BinOp::Gt => |x, y| bool_to(x > y),
                    BinOp::Ge => |x, y| bool_to(x >= y),
                    BinOp::Eq => |x, y| bool_to(x == y),
                    BinOp::Ne => |x, y| bool_to(x != y),
                };
                let n = self.len_of(e.ty);
                Value {
                    ty: e.ty,
                    data: (0..n).map(|i| f(l.at(i), r.at(i))).collect(),
                }
            }
            Node::Call { func, args } => {
                let vals: Vec<Value<T>> = args.iter().map(|a| self.eval(a)).collect();
                self.call(*func, e.ty, vals)
            }
        }
    }

    fn call(&self, func: Builtin, ty: MslType, mut vals: Vec<Value<T>>) -> Value<T> {
        let n = self.len_of(ty);
        let map1 = |mut v: Value<T>, f: fn(T) -> T| {
            v.data.iter_mut().for_each(|x| *x = f(*x));
            v
        };
        let data = match func {
            Builtin::Logistic => return map1(vals.pop().unwrap(), logistic),
            Builtin::Exp => return map1(vals.pop().unwrap(), T::exp),
            Builtin::Log => return map1(vals.pop().unwrap(), T::ln),
            Builtin::Abs => return map1(vals.pop().unwrap(), T::abs),
            Builtin::Min => (0..n).map(|i| vals[0].at(i).min(vals[1].at(i))).collect(),
            Builtin::Max => (0..n).map(|i| vals[0].at(i).max(vals[1].at(i))).collect(),
            Builtin::Clip => (0..n)
                .map(|i| {
                    let (x, lo, hi) = (vals[0].at(i), vals[1].at(i), vals[2].at(i));
                    // NaN passes through so the final output check can see it
                    if x < lo {
                        lo
                    } else if x > hi {
                        hi
                    } else {
                        x
                    }
                })
                .collect(),
            Builtin::Where => (0..n)
                .map(|i| {
                    if vals[0].at(i) != T::zero() {
                        vals[1].at(i)
                    } else {
                        vals[2].at(i)
                    }
                })
                .collect(),
            Builtin::Sum => {
                let v = &vals[0];
                if v.ty == MslType::FeatMatrix {
                    v.data
                        .chunks(self.features)
                        .map(|row| row.iter().fold(T::zero(), |acc, &x| acc + x))
                        .collect()
                } else {
                    vec![v.data.iter().fold(T::zero(), |acc, &x| acc + x)]
                }
            }
            Builtin::Dot => {
                let (x, y) = (&vals[0], &vals[1]);
                let dot =
                    |u: &[T], w: &[T]| u.iter().zip(w).fold(T::zero(), |acc, (&p, &q)| acc + p * q);
                match (x.ty, y.ty) {
                    (MslType::FeatMatrix, MslType::FeatVector) => x
                        .data
                        .chunks(self.features)
                        .map(|row| dot(row, &y.data))
                        .collect(),
                    (MslType::FeatVector, MslType::FeatMatrix) => y
                        .data
                        .chunks(self.features)
                        .map(|row| dot(&x.data, row))
                        .collect(),
                    (MslType::FeatMatrix, MslType::FeatMatrix) => x
                        .data
                        .chunks(self.features)
                        .zip(y.data.chunks(self.features))
                        .map(|(r, s)| dot(r, s))
                        .collect(),
                    _ => vec![dot(&x.data, &y.data)],
                }
            }
        };
        Value { ty, data }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{compile, wadd};
    use super::*;

    fn mats(a: &[[u8; 4]], b: &[[u8; 4]]) -> (FeatureMatrix<f64>, FeatureMatrix<f64>) {
        (
            FeatureMatrix::from_ratings(a.iter().map(|r| &r[..]), 4).unwrap(),
            FeatureMatrix::from_ratings(b.iter().map(|r| &r[..]), 4).unwrap(),
        )
    }

    #[test]
    fn nan_output_is_an_error_but_infinity_clips() {
        let (a, b) = mats(&[[1, 0, 0, 0], [0, 0, 0, 0]], &[[0, 1, 1, 1], [0, 0, 0, 0]]);
        let nan = compile("params 0; model = sum(A) / sum(B);", 4).unwrap();
        // trial 1 is 0/0
        assert_eq!(
            evaluate(&nan, &[], &a, &b),
            Err(EvalError::NonFinite { trial: 1 })
        );
        let inf = compile("params 0; model = 1 / (sum(B) - sum(B)) + sum(A) * 0;", 4).unwrap();
        let out = evaluate(&inf, &[], &a, &b).unwrap();
        assert_eq!(out.probs_b, vec![1.0 - PROB_EPSILON; 2]);
        let neg = compile("params 0; model = exp(sum(A)) * -1;", 4).unwrap();
        assert_eq!(
            evaluate(&neg, &[], &a, &b).unwrap().probs_b,
            vec![PROB_EPSILON; 2]
        );
    }

    #[test]
    fn checks_param_count_and_shapes() {
        let prog = compile(&wadd().source, 4).unwrap();
        let (a, b) = mats(&[[1, 0, 0, 0]], &[[0, 1, 1, 1]]);
        assert_eq!(
            evaluate(&prog, &[], &a, &b),
            Err(EvalError::ParamCount {
                expected: 1,
                found: 0
            })
        );
        let (_, b2) = mats(&[], &[[0, 1, 1, 1], [0, 0, 0, 1]]);
        assert!(matches!(
            evaluate(&prog, &[1.0], &a, &b2),
            Err(EvalError::Shape(_))
        ));
    }

    #[test]
    fn builtins() {
        let (a, b) = mats(&[[1, 0, 0, 0], [1, 1, 1, 1]], &[[0, 1, 1, 1], [0, 0, 0, 0]]);
        let run = |src: &str| {
            evaluate(&compile(src, 4).unwrap(), &[], &a, &b)
                .unwrap()
                .probs_b
        };
        assert_eq!(run("params 0; model = sum(A) / 10;"), vec![0.1, 0.4]);
        assert_eq!(
            run("params 0; model = dot(A, B) * 0.5 + 0.25;"),
            vec![0.25, 0.25]
        );
        assert_eq!(
            run("params 0; model = where(sum(A) > 1, 0.9, 0.2);"),
            vec![0.2, 0.9]
        );
        assert_eq!(
            run("params 0; model = clip(sum(B), 0.3, 0.6);"),
            vec![0.6, 0.3]
        );
        assert_eq!(
            run("params 0; model = min(sum(A), 0.5) * max(sum(B), 0.5);"),
            [0.5 * 3.0, 0.5 * 0.5]
                .iter()
                .map(|x: &f64| x.min(1.0 - PROB_EPSILON))
                .collect::<Vec<_>>()
        );
        assert_eq!(
            run("params 0; model = abs(sum(B) - sum(A)) / 4;"),
            vec![0.5, 1.0 - PROB_EPSILON]
        );
        assert_eq!(
            run("params 0; model = (sum(A) == 1) * 0.7 + (sum(A) != 1) * 0.1;"),
            vec![0.7, 0.1]
        );
        let l = run("params 0; model = logistic(log(exp(sum(A))));");
        assert!((l[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(
            run("params 0; let v = [1, 2, 3, 4]; model = dot(v, v) / 100 + sum(A) * 0;"),
            vec![0.3, 0.3]
        );
    }

    #[test]
    fn generic_over_f32() {
        let prog = compile(&wadd().source, 4).unwrap();
        let a = FeatureMatrix::<f32>::from_ratings([&[1u8, 0, 0, 0][..]], 4).unwrap();
        let b = FeatureMatrix::<f32>::from_ratings([&[0u8, 1, 1, 1][..]], 4).unwrap();
        let p = evaluate(&prog, &[1.0f32], &a, &b).unwrap().probs_b[0];
        assert!((p - 0.768_524_8).abs() < 1e-5);
    }
}

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{BinOp, Builtin, Expr, Input, ModelProgram};
use super::printer::expr_to_string;

/// Shape of an MSL value. Vector and matrix lengths are fixed by the number
/// of features (known at typecheck time) and the number of trials (known at
/// evaluation time).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MslType {
    Scalar,
    FeatVector,
    TrialVector,
    FeatMatrix,
}

impl fmt::Display for MslType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MslType::Scalar => "scalar",
            MslType::FeatVector => "feature vector",
            MslType::TrialVector => "trial vector",
            MslType::FeatMatrix => "feature matrix",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("type error in `{node}`: {message}")]
pub struct TypeError {
    pub node: String,
    pub message: String,
    pub operands: Vec<MslType>,
}

impl TypeError {
    fn new(node: &Expr, message: impl Into<String>, operands: Vec<MslType>) -> Self {
        TypeError {
            node: expr_to_string(node),
            message: message.into(),
            operands,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TypedExpr {
    pub ty: MslType,
    pub node: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Num(f64),
    Param(usize),
    Input(Input),
    Slot(usize),
    Vector(Vec<TypedExpr>),
    Neg(Box<TypedExpr>),
    Binary {
        op: BinOp,
        lhs: Box<TypedExpr>,
        rhs: Box<TypedExpr>,
    },
    Call {
        func: Builtin,
        args: Vec<TypedExpr>,
    },
}

/// A program whose every node carries an [`MslType`] and whose result is a
/// trial vector. Immutable and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedProgram {
    program: ModelProgram,
    num_features: usize,
    pub(crate) slots: Vec<TypedExpr>,
    pub(crate) body: TypedExpr,
}

impl TypedProgram {
    pub fn program(&self) -> &ModelProgram {
        &self.program
    }

    pub fn num_parameters(&self) -> usize {
        self.program.num_parameters
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn result_type(&self) -> MslType {
        self.body.ty
    }

    pub fn binding_types(&self) -> Vec<(&str, MslType)> {
        self.program
            .bindings
            .iter()
            .zip(&self.slots)
            .map(|(b, t)| (b.name.as_str(), t.ty))
            .collect()
    }

    /// Types of all nodes, bindings first, each tree in pre-order.
    pub fn node_types(&self) -> Vec<MslType> {
        fn walk(e: &TypedExpr, out: &mut Vec<MslType>) {
            out.push(e.ty);
            match &e.node {
                Node::Num(_) | Node::Param(_) | Node::Input(_) | Node::Slot(_) => {}
                Node::Neg(inner) => walk(inner, out),
                Node::Binary { lhs, rhs, .. } => {
                    walk(lhs, out);
                    walk(rhs, out);
                }
                Node::Vector(items) | Node::Call { args: items, .. } => {
                    items.iter().for_each(|i| walk(i, out))
                }
            }
        }
        let mut out = Vec::new();
        for slot in &self.slots {
            walk(slot, &mut out);
        }
        walk(&self.body, &mut out);
        out
    }
}

pub fn typecheck(prog: &ModelProgram, num_features: usize) -> Result<TypedProgram, TypeError> {
    let mut checker = Checker {
        num_features,
        names: HashMap::new(),
        slot_types: Vec::new(),
    };
    let mut slots = Vec::with_capacity(prog.bindings.len());
    for binding in &prog.bindings {
        let typed = checker.check(&binding.value)?;
        checker.names.insert(binding.name.as_str(), slots.len());
        checker.slot_types.push(typed.ty);
        slots.push(typed);
    }
    let body = checker.check(&prog.body)?;
    if body.ty != MslType::TrialVector {
        return Err(TypeError::new(
            &prog.body,
            format!(
                "model must produce a trial vector of probabilities, found {}",
                body.ty
            ),
            vec![body.ty],
        ));
    }
    Ok(TypedProgram {
        program: prog.clone(),
        num_features,
        slots,
        body,
    })
}

struct Checker<'a> {
    num_features: usize,
    names: HashMap<&'a str, usize>,
    slot_types: Vec<MslType>,
}

/// Common shape of elementwise operands: scalars broadcast, everything else must match.
fn broadcast(types: &[MslType]) -> Option<MslType> {
    let mut shape = MslType::Scalar;
    for &t in types {
        match (shape, t) {
            (_, MslType::Scalar) => {}
            (MslType::Scalar, t) => shape = t,
            (s, t) if s == t => {}
            _ => return None,
        }
    }
    Some(shape)
}

fn list_types(types: &[MslType]) -> String {
    types
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

impl Checker<'_> {
    fn check(&self, e: &Expr) -> Result<TypedExpr, TypeError> {
        let typed = |ty, node| Ok(TypedExpr { ty, node });
        match e {
            Expr::Num(x) => typed(MslType::Scalar, Node::Num(*x)),
            Expr::Param(i) => typed(MslType::Scalar, Node::Param(*i)),
            Expr::Input(which) => typed(MslType::FeatMatrix, Node::Input(*which)),
            Expr::Var(name) => match self.names.get(name.as_str()) {
                Some(&slot) => typed(self.slot_types[slot], Node::Slot(slot)),
                None => Err(TypeError::new(e, format!("unbound name `{name}`"), vec![])),
            },
            Expr::Vector(items) => {
                let items = items
                    .iter()
                    .map(|i| self.check(i))
                    .collect::<Result<Vec<_>, _>>()?;
                let types: Vec<MslType> = items.iter().map(|i| i.ty).collect();
                if let Some(bad) = types.iter().find(|t| **t != MslType::Scalar) {
                    return Err(TypeError::new(
                        e,
                        format!("vector elements must be scalars, found {bad}"),
                        types,
                    ));
                }
                if items.len() != self.num_features {
                    return Err(TypeError::new(
                        e,
                        format!(
                            "vector literal has {} elements, expected {}",
                            items.len(),
                            self.num_features
                        ),
                        types,
                    ));
                }
                typed(MslType::FeatVector, Node::Vector(items))
            }
            Expr::Neg(inner) => {
                let inner = self.check(inner)?;
                typed(inner.ty, Node::Neg(Box::new(inner)))
            }
            Expr::Binary { op, lhs, rhs } => {
                let lhs = self.check(lhs)?;
                let rhs = self.check(rhs)?;
                let Some(ty) = broadcast(&[lhs.ty, rhs.ty]) else {
                    let hint = if matches!(op, BinOp::Mul) {
                        "; use dot() for matrix-vector products"
                    } else {
                        ""
                    };
                    return Err(TypeError::new(
                        e,
                        format!(
                            "`{}` cannot combine {} with {}{hint}",
                            op.symbol(),
                            lhs.ty,
                            rhs.ty
                        ),
                        vec![lhs.ty, rhs.ty],
                    ));
                };
                typed(
                    ty,
                    Node::Binary {
                        op: *op,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    },
                )
            }
            Expr::Call { func, args } => {
                if args.len() != func.arity() {
                    return Err(TypeError::new(
                        e,
                        format!(
                            "{}() takes {} argument(s), got {}",
                            func.name(),
                            func.arity(),
                            args.len()
                        ),
                        vec![],
                    ));
                }
                let args = args
                    .iter()
                    .map(|a| self.check(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let types: Vec<MslType> = args.iter().map(|a| a.ty).collect();
                let ty = self.call_type(e, *func, &types)?;
                typed(ty, Node::Call { func: *func, args })
            }
        }
    }

    fn call_type(&self, e: &Expr, func: Builtin, types: &[MslType]) -> Result<MslType, TypeError> {
        use MslType::*;
        let bad = |what: &str| {
            Err(TypeError::new(
                e,
                format!("{}() {what}, got ({})", func.name(), list_types(types)),
                types.to_vec(),
            ))
        };
        match func {
            Builtin::Dot => match (types[0], types[1]) {
                (FeatMatrix, FeatVector) | (FeatVector, FeatMatrix) | (FeatMatrix, FeatMatrix) => {
                    Ok(TrialVector)
                }
                (FeatVector, FeatVector) | (TrialVector, TrialVector) => Ok(Scalar),
                _ => {
                    bad("needs a feature matrix with a feature vector, or two equal-shaped vectors")
                }
            },
            Builtin::Sum => Ok(match types[0] {
                FeatMatrix => TrialVector,
                _ => Scalar,
            }),
            Builtin::Logistic | Builtin::Exp | Builtin::Log | Builtin::Abs => Ok(types[0]),
            Builtin::Min | Builtin::Max | Builtin::Clip | Builtin::Where => {
                match broadcast(types) {
                    Some(t) => Ok(t),
                    None => bad("needs arguments of equal shape or scalars"),
                }
            }
        }
    }
}

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Input {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }

    /// Binding strength; higher binds tighter.
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul | BinOp::Div => 3,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 1
    }

    pub const ALL: [BinOp; 10] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Dot,
    Sum,
    Logistic,
    Exp,
    Log,
    Abs,
    Min,
    Max,
    Clip,
    Where,
}

impl Builtin {
    pub const ALL: [Builtin; 10] = [
        Builtin::Dot,
        Builtin::Sum,
        Builtin::Logistic,
        Builtin::Exp,
        Builtin::Log,
        Builtin::Abs,
        Builtin::Min,
        Builtin::Max,
        Builtin::Clip,
        Builtin::Where,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Dot => "dot",
            Builtin::Sum => "sum",
            Builtin::Logistic => "logistic",
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Abs => "abs",
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Clip => "clip",
            Builtin::Where => "where",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Sum | Builtin::Logistic | Builtin::Exp | Builtin::Log | Builtin::Abs => 1,
            Builtin::Dot | Builtin::Min | Builtin::Max => 2,
            Builtin::Clip | Builtin::Where => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Param(usize),
    Input(Input),
    Var(String),
    Vector(Vec<Expr>),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: Builtin,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn call(func: Builtin, args: Vec<Expr>) -> Self {
        Expr::Call { func, args }
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        1 + match self {
            Expr::Num(_) | Expr::Param(_) | Expr::Input(_) | Expr::Var(_) => 0,
            Expr::Neg(e) => e.depth(),
            Expr::Binary { lhs, rhs, .. } => lhs.depth().max(rhs.depth()),
            Expr::Vector(items) | Expr::Call { args: items, .. } => {
                items.iter().map(Expr::depth).max().unwrap_or(0)
            }
        }
    }

    pub(crate) fn visit_params(&self, f: &mut impl FnMut(usize)) {
        match self {
            Expr::Param(i) => f(*i),
            Expr::Num(_) | Expr::Input(_) | Expr::Var(_) => {}
            Expr::Neg(e) => e.visit_params(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit_params(f);
                rhs.visit_params(f);
            }
            Expr::Vector(items) | Expr::Call { args: items, .. } => {
                items.iter().for_each(|e| e.visit_params(f))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub name: String,
    pub value: Expr,
}

/// A parsed model. Equality is structural: the original source text (and
/// therefore comments and formatting) is ignored.
#[derive(Debug, Clone)]
pub struct ModelProgram {
    pub source: String,
    pub num_parameters: usize,
    pub bindings: Vec<Binding>,
    pub body: Expr,
}

impl PartialEq for ModelProgram {
    fn eq(&self, other: &Self) -> bool {
        self.num_parameters == other.num_parameters
            && self.bindings == other.bindings
            && self.body == other.body
    }
}

impl ModelProgram {
    pub fn depth(&self) -> usize {
        self.bindings
            .iter()
            .map(|b| b.value.depth())
            .chain(std::iter::once(self.body.depth()))
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for ModelProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::print(self))
    }
}

// Programs travel through logs and configs as their source text.
impl Serialize for ModelProgram {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for ModelProgram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let source = String::deserialize(deserializer)?;
        super::parse(&source).map_err(serde::de::Error::custom)
    }
}

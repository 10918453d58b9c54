use std::collections::HashSet;

use super::ast::{BinOp, Binding, Builtin, Expr, Input, ModelProgram};
use super::lexer::{tokenize, Spanned, Tok};
use super::MslError;

/// Longest accepted program, in characters.
pub const MAX_SOURCE_LEN: usize = 10_000;
/// Deepest accepted expression tree.
pub const MAX_DEPTH: usize = 64;

const RESERVED: [&str; 6] = ["params", "let", "model", "p", "A", "B"];

pub fn parse(source: &str) -> Result<ModelProgram, MslError> {
    let len = source.chars().count();
    if len > MAX_SOURCE_LEN {
        return Err(MslError::TooLarge { len });
    }
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        depth: 0,
        bound: HashSet::new(),
    };
    let num_parameters = parser.header()?;

    let mut bindings = Vec::new();
    while parser.peek_ident("let") {
        bindings.push(parser.binding()?);
    }
    parser.expect_ident("model", &["let", "model"])?;
    parser.expect(Tok::Assign)?;
    let body = parser.expr()?;
    parser.expect(Tok::Semi)?;
    if parser.peek() != &Tok::Eof {
        return Err(parser.unexpected(&["end of input"]));
    }

    let program = ModelProgram {
        source: source.to_owned(),
        num_parameters,
        bindings,
        body,
    };
    if program.depth() > MAX_DEPTH {
        return Err(MslError::TooDeep);
    }
    let mut bad = None;
    for expr in program
        .bindings
        .iter()
        .map(|b| &b.value)
        .chain(std::iter::once(&program.body))
    {
        expr.visit_params(&mut |i| {
            if i >= num_parameters && bad.is_none() {
                bad = Some(i);
            }
        });
    }
    if let Some(index) = bad {
        return Err(MslError::ParamIndex {
            index,
            declared: num_parameters,
        });
    }
    Ok(program)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    depth: usize,
    bound: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn advance(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &[&str]) -> MslError {
        let t = &self.tokens[self.pos];
        MslError::Parse {
            line: t.line,
            column: t.column,
            found: t.tok.describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), MslError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("`{}`", tok.symbol())]))
        }
    }

    fn expect_ident(&mut self, word: &str, expected: &[&str]) -> Result<(), MslError> {
        if self.peek_ident(word) {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn header(&mut self) -> Result<usize, MslError> {
        if !self.peek_ident("params") {
            return Err(MslError::Header(
                "program must start with a `params <k>;` header".into(),
            ));
        }
        self.advance();
        let count = match self.advance() {
            Tok::Num(x) if x.fract() == 0.0 && x >= 0.0 && x <= u32::MAX as f64 => x as usize,
            Tok::Minus => {
                return Err(MslError::Header(
                    "parameter count must not be negative".into(),
                ));
            }
            other => {
                return Err(MslError::Header(format!(
                    "parameter count must be a nonnegative integer, found {}",
                    other.describe()
                )));
            }
        };
        self.expect(Tok::Semi)?;
        Ok(count)
    }

    fn binding(&mut self) -> Result<Binding, MslError> {
        self.advance(); // let
        let name = match self.peek().clone() {
            Tok::Ident(name) => name,
            _ => return Err(self.unexpected(&["identifier"])),
        };
        if RESERVED.contains(&name.as_str()) || Builtin::from_name(&name).is_some() {
            return Err(MslError::Name(format!("`{name}` is reserved")));
        }
        if self.bound.contains(&name) {
            return Err(MslError::Name(format!("`{name}` is already bound")));
        }
        self.advance();
        self.expect(Tok::Assign)?;
        let value = self.expr()?;
        self.expect(Tok::Semi)?;
        self.bound.insert(name.clone());
        Ok(Binding { name, value })
    }

    fn enter(&mut self) -> Result<(), MslError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(MslError::TooDeep)
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Expr, MslError> {
        self.enter()?;
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Lt => Some(BinOp::Lt),
            Tok::Le => Some(BinOp::Le),
            Tok::Gt => Some(BinOp::Gt),
            Tok::Ge => Some(BinOp::Ge),
            Tok::EqEq => Some(BinOp::Eq),
            Tok::Ne => Some(BinOp::Ne),
            _ => None,
        };
        let out = match op {
            Some(op) => {
                self.advance();
                let rhs = self.additive()?;
                Expr::binary(op, lhs, rhs)
            }
            None => lhs,
        };
        self.depth -= 1;
        Ok(out)
    }

    fn additive(&mut self) -> Result<Expr, MslError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, MslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, MslError> {
        if *self.peek() != Tok::Minus {
            return self.primary();
        }
        self.advance();
        // A minus directly before a literal is part of the literal.
        if let Tok::Num(x) = *self.peek() {
            self.advance();
            return Ok(Expr::Num(-x));
        }
        self.enter()?;
        let inner = self.unary()?;
        self.depth -= 1;
        Ok(Expr::Neg(Box::new(inner)))
    }

    fn primary(&mut self) -> Result<Expr, MslError> {
        const EXPECTED: &[&str] = &["number", "identifier", "`(`", "`[`", "`-`"];
        match self.peek().clone() {
            Tok::Num(x) => {
                self.advance();
                Ok(Expr::Num(x))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => {
                self.advance();
                let items = self.list(Tok::RBracket)?;
                Ok(Expr::Vector(items))
            }
            Tok::Ident(name) => {
                self.advance();
                match name.as_str() {
                    "A" => Ok(Expr::Input(Input::A)),
                    "B" => Ok(Expr::Input(Input::B)),
                    "p" => {
                        self.expect(Tok::LBracket)?;
                        let index = match *self.peek() {
                            Tok::Num(x) if x.fract() == 0.0 && x >= 0.0 && x <= u32::MAX as f64 => {
                                x as usize
                            }
                            _ => return Err(self.unexpected(&["parameter index"])),
                        };
                        self.advance();
                        self.expect(Tok::RBracket)?;
                        Ok(Expr::Param(index))
                    }
                    _ => {
                        if let Some(func) = Builtin::from_name(&name) {
                            self.expect(Tok::LParen)?;
                            let args = self.list(Tok::RParen)?;
                            Ok(Expr::Call { func, args })
                        } else if self.bound.contains(&name) {
                            Ok(Expr::Var(name))
                        } else {
                            Err(MslError::Name(format!("unknown name `{name}`")))
                        }
                    }
                }
            }
            _ => Err(self.unexpected(EXPECTED)),
        }
    }

    /// Comma-separated expressions up to and including `close`; at least one item.
    fn list(&mut self, close: Tok) -> Result<Vec<Expr>, MslError> {
        let mut items = vec![self.expr()?];
        loop {
            if *self.peek() == close {
                self.advance();
                return Ok(items);
            }
            if *self.peek() != Tok::Comma {
                return Err(self.unexpected(&["`,`", &format!("`{}`", close.symbol())]));
            }
            self.advance();
            items.push(self.expr()?);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_mandatory() {
        assert!(matches!(parse("model = sum(A);"), Err(MslError::Header(_))));
        assert!(matches!(
            parse("params -1; model = sum(A);"),
            Err(MslError::Header(_))
        ));
        assert!(matches!(
            parse("params 1.5; model = sum(A);"),
            Err(MslError::Header(_))
        ));
    }

    #[test]
    fn param_index_bound() {
        let err = parse("params 1; model = p[1] * sum(A);").unwrap_err();
        assert_eq!(
            err,
            MslError::ParamIndex {
                index: 1,
                declared: 1
            }
        );
    }

    #[test]
    fn parse_error_reports_position_and_expected() {
        match parse("params 1;\nmodel = p[0] * ;").unwrap_err() {
            MslError::Parse {
                line,
                column,
                expected,
                ..
            } => {
                assert_eq!((line, column), (2, 16));
                assert!(expected.iter().any(|e| e == "number"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence_and_literal_folding() {
        let p = parse("params 0; model = 1 + 2 * -3 < 4;").unwrap();
        let expected = Expr::binary(
            BinOp::Lt,
            Expr::binary(
                BinOp::Add,
                Expr::Num(1.0),
                Expr::binary(BinOp::Mul, Expr::Num(2.0), Expr::Num(-3.0)),
            ),
            Expr::Num(4.0),
        );
        assert_eq!(p.body, expected);
        // comparisons do not chain
        assert!(parse("params 0; model = 1 < 2 < 3;").is_err());
    }

    #[test]
    fn names_must_be_bound_before_use() {
        assert!(matches!(
            parse("params 0; model = w;"),
            Err(MslError::Name(_))
        ));
        assert!(matches!(
            parse("params 0; let x = y; let y = 1; model = x;"),
            Err(MslError::Name(_))
        ));
        assert!(matches!(
            parse("params 0; let x = 1; let x = 2; model = x;"),
            Err(MslError::Name(_))
        ));
        assert!(matches!(
            parse("params 0; let sum = 1; model = A;"),
            Err(MslError::Name(_))
        ));
        assert!(parse("params 0; let x = 1; let y = x; model = y;").is_ok());
    }

    #[test]
    fn size_and_depth_limits() {
        let big = format!("params 0; model = {};", "1+".repeat(6000) + "1");
        assert!(matches!(parse(&big), Err(MslError::TooLarge { .. })));
        let deep = format!("params 0; model = {}1{};", "(".repeat(70), ")".repeat(70));
        assert_eq!(parse(&deep).unwrap_err(), MslError::TooDeep);
        let chain = format!("params 0; model = {};", vec!["1"; 70].join(" + "));
        assert_eq!(parse(&chain).unwrap_err(), MslError::TooDeep);
        let ok = format!("params 0; model = {};", vec!["1"; 60].join(" + "));
        assert!(parse(&ok).is_ok());
    }

    #[test]
    fn trailing_input_rejected() {
        assert!(parse("params 0; model = A; model = B;").is_err());
    }
}

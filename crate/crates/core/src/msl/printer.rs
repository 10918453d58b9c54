use std::fmt::Write;

use super::ast::{Expr, Input, ModelProgram};

/// Canonical text of a program: one statement per line, minimal parentheses,
/// comments dropped. `parse(&print(p))` is structurally equal to `p`.
pub fn print(prog: &ModelProgram) -> String {
    let mut out = format!("params {};\n", prog.num_parameters);
    for b in &prog.bindings {
        let _ = writeln!(out, "let {} = {};", b.name, expr_to_string(&b.value));
    }
    let _ = writeln!(out, "model = {};", expr_to_string(&prog.body));
    out
}

pub(crate) fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn number(x: f64) -> String {
    // Debug formatting is the shortest text that reparses to the same f64.
    format!("{x:?}")
}

// Atoms and calls bind tighter than any operator.
const ATOM: u8 = 5;
const UNARY: u8 = 4;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        Expr::Neg(_) => UNARY,
        // a negative literal prints with a leading minus
        Expr::Num(x) if x.is_sign_negative() => UNARY,
        _ => ATOM,
    }
}

fn write_wrapped(out: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Num(x) => out.push_str(&number(*x)),
        Expr::Param(i) => {
            let _ = write!(out, "p[{i}]");
        }
        Expr::Input(Input::A) => out.push('A'),
        Expr::Input(Input::B) => out.push('B'),
        Expr::Var(name) => out.push_str(name),
        Expr::Vector(items) => {
            out.push('[');
            write_list(out, items);
            out.push(']');
        }
        Expr::Call { func, args } => {
            out.push_str(func.name());
            out.push('(');
            write_list(out, args);
            out.push(')');
        }
        Expr::Neg(inner) => {
            out.push('-');
            // `-1.5` would reparse as a literal, and `--1.5` as Neg(literal).
            let wrap = precedence(inner) < UNARY
                || matches!(**inner, Expr::Num(x) if !x.is_sign_negative());
            write_wrapped(out, inner, wrap);
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let comparison = op.is_comparison();
            let lwrap = precedence(lhs) < p || (comparison && precedence(lhs) == p);
            let rwrap = precedence(rhs) <= p;
            write_wrapped(out, lhs, lwrap);
            let _ = write!(out, " {} ", op.symbol());
            write_wrapped(out, rhs, rwrap);
        }
    }
}

fn write_list(out: &mut String, items: &[Expr]) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, item);
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn roundtrip(src: &str) -> String {
        let p = parse(src).unwrap();
        let text = print(&p);
        assert_eq!(parse(&text).unwrap(), p, "{text}");
        text
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(
            roundtrip("params 1; model = (p[0] * ((B - A)));"),
            "params 1;\nmodel = p[0] * (B - A);\n"
        );
        assert_eq!(
            roundtrip("params 0; model = (1 - 2) - (3 - 4);"),
            "params 0;\nmodel = 1.0 - 2.0 - (3.0 - 4.0);\n"
        );
    }

    #[test]
    fn negation_forms() {
        let text = roundtrip("params 0; model = -(1.5) + --2 - -(A * 2);");
        assert!(text.contains("-(1.5)"), "{text}");
        assert!(text.contains("--2.0"), "{text}");
        assert!(text.contains("-(A * 2.0)"), "{text}");
    }

    #[test]
    fn exponent_literals() {
        let text = roundtrip("params 0; model = clip(sum(A), 0.00001, 1 - 0.00001);");
        assert!(text.contains("1e-5"), "{text}");
    }
}

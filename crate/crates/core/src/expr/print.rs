use core::fmt;

use super::{BinaryOp, Expr, UnaryOp};

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Const(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => NEG,
        Expr::Const(_) | Expr::Var(_) => ATOM,
        Expr::Unary(UnaryOp::Neg, _) => NEG,
        Expr::Unary(_, _) => ATOM,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => ADD,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => MUL,
        Expr::Binary(BinaryOp::Pow, _, _) => POW,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        f.write_str("(")?;
        write_expr(f, e)?;
        f.write_str(")")
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Const(v) => {
            if v.is_sign_negative() {
                write!(f, "-{}", -v)
            } else {
                write!(f, "{}", v)
            }
        }
        Expr::Var(n) => f.write_str(n),
        Expr::Unary(UnaryOp::Neg, a) => {
            f.write_str("-")?;
            write_child(f, a, prec(a) < POW)
        }
        Expr::Unary(op, a) => {
            f.write_str(op.name().unwrap_or(""))?;
            write_child(f, a, true)
        }
        Expr::Binary(op, a, b) => {
            let (lhs_min, rhs_min, sym) = match op {
                BinaryOp::Add => (ADD, MUL, " + "),
                BinaryOp::Sub => (ADD, MUL, " - "),
                BinaryOp::Mul => (MUL, POW, "*"),
                BinaryOp::Div => (MUL, POW, "/"),
                BinaryOp::Pow => (ATOM, POW, "^"),
            };
            write_child(f, a, prec(a) < lhs_min)?;
            f.write_str(sym)?;
            write_child(f, b, prec(b) < rhs_min)
        }
    }
}

/// Canonical text: parses back to the same tree (negative constants become
/// negations of positive ones, which evaluate identically).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

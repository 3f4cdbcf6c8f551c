use alloc::format;
use alloc::string::ToString;

use super::{Assignment, BinaryOp, Expr, ExprError, UnaryOp};
use crate::math;

fn domain(msg: &str, x: f64) -> ExprError {
    ExprError::Domain(format!("{msg} (argument {x})"))
}

fn finite(v: f64) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Domain("non-finite result".to_string()))
    }
}

pub(crate) fn apply_unary(op: UnaryOp, x: f64) -> Result<f64, ExprError> {
    let v = match op {
        UnaryOp::Neg => -x,
        UnaryOp::Sin => math::sin(x),
        UnaryOp::Cos => math::cos(x),
        UnaryOp::Tan => math::tan(x),
        UnaryOp::Atan => math::atan(x),
        UnaryOp::Exp => math::exp(x),
        UnaryOp::Log => {
            if x <= 0.0 {
                return Err(domain("log of non-positive value", x));
            }
            math::ln(x)
        }
        UnaryOp::Sqrt => {
            if x < 0.0 {
                return Err(domain("sqrt of negative value", x));
            }
            math::sqrt(x)
        }
        UnaryOp::Tanh => math::tanh(x),
    };
    finite(v)
}

fn is_integer(y: f64) -> bool {
    math::trunc(y) == y && y.abs() <= 1e9
}

pub(crate) fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, ExprError> {
    let v = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err(domain("division by zero", a));
            }
            a / b
        }
        BinaryOp::Pow => {
            if a == 0.0 && b < 0.0 {
                return Err(domain("zero raised to a negative power", b));
            }
            if is_integer(b) {
                math::powi(a, b as i64)
            } else if a < 0.0 {
                return Err(domain("negative base with non-integer exponent", a));
            } else {
                math::pow(a, b)
            }
        }
    };
    finite(v)
}

impl Expr {
    /// Evaluates with every variable looked up in `a`.
    pub fn eval(&self, a: &Assignment) -> Result<f64, ExprError> {
        self.eval_with(&|name| a.get(name))
    }

    /// Evaluates with a caller-supplied variable lookup.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, ExprError> {
        match self {
            Expr::Const(v) => Ok(*v),
            Expr::Var(n) => lookup(n).ok_or_else(|| ExprError::UnboundVariable(n.to_string())),
            Expr::Unary(op, x) => apply_unary(*op, x.eval_with(lookup)?),
            Expr::Binary(op, x, y) => {
                let a = x.eval_with(lookup)?;
                let b = y.eval_with(lookup)?;
                apply_binary(*op, a, b)
            }
        }
    }
}

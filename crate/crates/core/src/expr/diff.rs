use alloc::sync::Arc;

use super::eval::{apply_binary, apply_unary};
use super::{BinaryOp, Expr, UnaryOp};

#[allow(clippy::should_implement_trait)]
impl Expr {
    /// Unary node with constant folding and double-negation removal.
    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        if let Expr::Const(c) = a {
            if let Ok(v) = apply_unary(op, c) {
                return Expr::Const(v);
            }
        }
        if op == UnaryOp::Neg {
            if let Expr::Unary(UnaryOp::Neg, inner) = &a {
                return (**inner).clone();
            }
        }
        Expr::Unary(op, Arc::new(a))
    }

    /// Binary node with constant folding and the 0/1 identities.
    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let Ok(v) = apply_binary(op, x, y) {
                return Expr::Const(v);
            }
        }
        match op {
            BinaryOp::Add => {
                if a.is_zero() {
                    return b;
                }
                if b.is_zero() {
                    return a;
                }
            }
            BinaryOp::Sub => {
                if b.is_zero() {
                    return a;
                }
                if a.is_zero() {
                    return Expr::unary(UnaryOp::Neg, b);
                }
                if a == b {
                    return Expr::zero();
                }
            }
            BinaryOp::Mul => return Expr::mul_folded(a, b),
            BinaryOp::Div => {
                if b.is_one() {
                    return a;
                }
                if a.is_zero() && b.as_const().is_some_and(|c| c != 0.0) {
                    return Expr::zero();
                }
            }
            BinaryOp::Pow => {
                if b.is_zero() {
                    return Expr::one();
                }
                if b.is_one() || a.is_one() {
                    return if b.is_one() { a } else { Expr::one() };
                }
            }
        }
        Expr::Binary(op, Arc::new(a), Arc::new(b))
    }

    fn mul_folded(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        match (&a, &b) {
            (Expr::Unary(UnaryOp::Neg, x), Expr::Unary(UnaryOp::Neg, y)) => {
                return Expr::mul_folded((**x).clone(), (**y).clone());
            }
            (Expr::Const(c), Expr::Unary(UnaryOp::Neg, y)) => {
                return Expr::mul_folded(Expr::Const(-c), (**y).clone());
            }
            (Expr::Const(c), Expr::Binary(BinaryOp::Mul, x, y)) => {
                if let Some(d) = x.as_const().filter(|d| (c * d).is_finite()) {
                    return Expr::mul_folded(Expr::Const(c * d), (**y).clone());
                }
            }
            (Expr::Binary(BinaryOp::Mul, x, y), Expr::Const(c)) => {
                if let Some(d) = x.as_const().filter(|d| (c * d).is_finite()) {
                    return Expr::mul_folded(Expr::Const(c * d), (**y).clone());
                }
            }
            (x, Expr::Const(_)) if x.as_const().is_none() => return Expr::mul_folded(b, a),
            _ => {}
        }
        if a.as_const() == Some(-1.0) {
            return Expr::unary(UnaryOp::Neg, b);
        }
        Expr::Binary(BinaryOp::Mul, Arc::new(a), Arc::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, a, b)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Neg, a)
    }

    /// Sum of the given terms, folded left to right.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), Expr::add)
    }

    /// Exact symbolic partial derivative with respect to `var`.
    pub fn diff(&self, var: &str) -> Expr {
        if !self.depends_on(var) {
            return Expr::zero();
        }
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(_) => Expr::one(),
            Expr::Unary(op, u) => {
                let du = u.diff(var);
                let u = (**u).clone();
                let outer = match op {
                    UnaryOp::Neg => return Expr::neg(du),
                    UnaryOp::Sin => Expr::unary(UnaryOp::Cos, u),
                    UnaryOp::Cos => Expr::neg(Expr::unary(UnaryOp::Sin, u)),
                    UnaryOp::Tan => {
                        let c = Expr::unary(UnaryOp::Cos, u);
                        return Expr::div(du, Expr::pow(c, Expr::Const(2.0)));
                    }
                    UnaryOp::Atan => {
                        let d = Expr::add(Expr::one(), Expr::pow(u, Expr::Const(2.0)));
                        return Expr::div(du, d);
                    }
                    UnaryOp::Exp => Expr::unary(UnaryOp::Exp, u),
                    UnaryOp::Log => return Expr::div(du, u),
                    UnaryOp::Sqrt => {
                        let d = Expr::mul(Expr::Const(2.0), Expr::unary(UnaryOp::Sqrt, u));
                        return Expr::div(du, d);
                    }
                    UnaryOp::Tanh => {
                        let t = Expr::unary(UnaryOp::Tanh, u);
                        Expr::sub(Expr::one(), Expr::pow(t, Expr::Const(2.0)))
                    }
                };
                Expr::mul(outer, du)
            }
            Expr::Binary(op, u, v) => {
                let (du, dv) = (u.diff(var), v.diff(var));
                let (u, v) = ((**u).clone(), (**v).clone());
                match op {
                    BinaryOp::Add => Expr::add(du, dv),
                    BinaryOp::Sub => Expr::sub(du, dv),
                    BinaryOp::Mul => Expr::add(Expr::mul(du, v.clone()), Expr::mul(u, dv)),
                    BinaryOp::Div => {
                        if !v.depends_on(var) {
                            return Expr::div(du, v);
                        }
                        let num = Expr::sub(Expr::mul(du, v.clone()), Expr::mul(u, dv));
                        Expr::div(num, Expr::pow(v, Expr::Const(2.0)))
                    }
                    BinaryOp::Pow => {
                        if !v.depends_on(var) {
                            let lowered = match v.as_const() {
                                Some(c) => Expr::Const(c - 1.0),
                                None => Expr::sub(v.clone(), Expr::one()),
                            };
                            let scale = Expr::mul(v, Expr::pow(u, lowered));
                            return Expr::mul(scale, du);
                        }
                        let p = self.clone();
                        if !u.depends_on(var) {
                            let log_u = Expr::unary(UnaryOp::Log, u);
                            return Expr::mul(Expr::mul(p, log_u), dv);
                        }
                        let log_u = Expr::unary(UnaryOp::Log, u.clone());
                        let inner = Expr::add(Expr::mul(dv, log_u), Expr::div(Expr::mul(v, du), u));
                        Expr::mul(p, inner)
                    }
                }
            }
        }
    }
}

use alloc::boxed::Box;
use alloc::string::ToString;

use super::eval::{apply_binary, apply_unary};
use super::{BinaryOp, Expr, ExprError, UnaryOp};

#[derive(Clone, Debug)]
enum Node {
    Const(f64),
    Slot(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

/// An expression with variables resolved to positions in a value slice.
///
/// Evaluation semantics, including domain errors, match [`Expr::eval`].
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    root: Node,
}

fn lower(e: &Expr, slots: &[&str]) -> Result<Node, ExprError> {
    Ok(match e {
        Expr::Const(v) => Node::Const(*v),
        Expr::Var(n) => {
            let idx =
                slots.iter().position(|s| *s == n.as_ref()).ok_or_else(|| ExprError::UnboundVariable(n.to_string()))?;
            Node::Slot(idx)
        }
        Expr::Unary(op, a) => Node::Unary(*op, Box::new(lower(a, slots)?)),
        Expr::Binary(op, a, b) => Node::Binary(*op, Box::new(lower(a, slots)?), Box::new(lower(b, slots)?)),
    })
}

fn run(n: &Node, x: &[f64]) -> Result<f64, ExprError> {
    match n {
        Node::Const(v) => Ok(*v),
        Node::Slot(i) => Ok(x[*i]),
        Node::Unary(op, a) => apply_unary(*op, run(a, x)?),
        Node::Binary(op, a, b) => apply_binary(*op, run(a, x)?, run(b, x)?),
    }
}

impl CompiledExpr {
    /// Resolves every variable of `e` against `slots`.
    pub fn new(e: &Expr, slots: &[&str]) -> Result<Self, ExprError> {
        Ok(CompiledExpr { root: lower(e, slots)? })
    }

    /// Evaluates at `x`, which must be at least as long as the slot list.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        run(&self.root, x)
    }
}

impl Expr {
    pub fn compile(&self, slots: &[&str]) -> Result<CompiledExpr, ExprError> {
        CompiledExpr::new(self, slots)
    }
}

// Sampling helpers shared by the pointwise checkers.

use alloc::vec::Vec;

use crate::expr::{CompiledExpr, Expr, ExprError};
use crate::model::{KVectorField, SystemDef};
use crate::sampling::SampleBox;

/// Maximum of the absolute values of `exprs` over the points where every
/// expression evaluates; also returns the number of such points.
pub(crate) fn max_abs(s: &SystemDef, exprs: &[Expr], points: &[Vec<f64>]) -> Result<(f64, usize), ExprError> {
    let compiled: Vec<CompiledExpr> = exprs.iter().map(|e| s.compile(e)).collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    let mut used = 0;
    'points: for p in points {
        let slots = s.slot_values(p);
        let mut local: f64 = 0.0;
        for c in &compiled {
            match c.eval(&slots) {
                Ok(v) => local = local.max(v.abs()),
                Err(_) => continue 'points,
            }
        }
        worst = worst.max(local);
        used += 1;
    }
    if used == 0 {
        worst = f64::NAN;
    }
    Ok((worst, used))
}

pub(crate) fn default_box(s: &SystemDef) -> SampleBox {
    SampleBox::cube(s.phase_dim(), -1.0, 1.0)
}

/// Components of all pairwise brackets `[X_α, X_β]`, `α < β`.
pub(crate) fn commutators(x: &KVectorField, coords: &[&str]) -> Vec<Expr> {
    let k = x.k();
    let comps: Vec<Vec<Expr>> = (0..k).map(|a| x.components(a)).collect();
    let grads: Vec<Vec<Vec<Expr>>> =
        comps.iter().map(|row| row.iter().map(|e| coords.iter().map(|c| e.diff(c)).collect()).collect()).collect();
    let mut out = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            for comp in 0..coords.len() {
                let terms = (0..coords.len()).flat_map(|c| {
                    [
                        Expr::mul(comps[a][c].clone(), grads[b][comp][c].clone()),
                        Expr::neg(Expr::mul(comps[b][c].clone(), grads[a][comp][c].clone())),
                    ]
                });
                out.push(Expr::sum(terms));
            }
        }
    }
    out
}

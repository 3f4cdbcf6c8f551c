//! Hamilton–De Donder–Weyl equations for k-symplectic Hamiltonian systems.
//!
//! A k-vector field `X` solves the geometric equation exactly when
//!
//! ```text
//! (X_α)^i = ∂H/∂p^α_i,        Σ_β (X_β)^β_i = −∂H/∂q^i.
//! ```
//!
//! The fiber components are otherwise free: any `Y` with `Y^i_β = 0` and
//! `Σ_α (Y_α)^α_i = 0` can be added.

use alloc::vec::Vec;

use crate::expr::{Expr, ExprError};
use crate::model::{Formalism, KVectorField, ModelError, SystemDef, SystemKind};
use crate::probe;
use crate::sampling::{SampleBox, DEFAULT_SAMPLES};
use crate::POINT_TOL;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HamiltonianError {
    #[error("expected a Hamiltonian system")]
    NotHamiltonian,
    #[error("expected a k-symplectic system")]
    NotKSymplectic,
    #[error("sample box has dimension {got}, expected {expected}")]
    BoxDimension { got: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Right-hand sides of the HDW equations.
#[derive(Clone, Debug, PartialEq)]
pub struct HdwSystem {
    /// `V[α][i] = ∂H/∂p^α_i`.
    pub velocities: Vec<Vec<Expr>>,
    /// `T[i] = −∂H/∂q^i`.
    pub trace: Vec<Expr>,
}

pub(crate) fn hdw_rhs(s: &SystemDef) -> HdwSystem {
    let f = &s.frame;
    let h = &s.expression;
    HdwSystem {
        velocities: (0..s.k()).map(|a| (0..s.n()).map(|i| h.diff(f.momentum(a, i))).collect()).collect(),
        trace: (0..s.n()).map(|i| Expr::neg(h.diff(f.config(i)))).collect(),
    }
}

fn require_hamiltonian(s: &SystemDef) -> Result<(), HamiltonianError> {
    if s.kind != SystemKind::Hamiltonian {
        return Err(HamiltonianError::NotHamiltonian);
    }
    if s.formalism != Formalism::KSymplectic {
        return Err(HamiltonianError::NotKSymplectic);
    }
    Ok(())
}

pub fn derive_hdw(s: &SystemDef) -> Result<HdwSystem, HamiltonianError> {
    require_hamiltonian(s)?;
    Ok(hdw_rhs(s))
}

/// Fills config and fiber components of the gauge solution into `x`:
/// all of `−∂H/∂q^i` is placed on `(X_1)^1_i`.
pub(crate) fn fill_gauge(x: &mut KVectorField, hdw: &HdwSystem) {
    x.config = hdw.velocities.clone();
    x.fiber[0][0] = hdw.trace.clone();
}

/// The explicit global solution with the whole trace loaded on `α = 1`.
pub fn gauge_solution(s: &SystemDef) -> Result<KVectorField, HamiltonianError> {
    require_hamiltonian(s)?;
    let mut x = KVectorField::zero(s.k(), s.n(), false);
    fill_gauge(&mut x, &hdw_rhs(s));
    Ok(x)
}

/// Where and how densely a pointwise check samples.
#[derive(Clone, Debug)]
pub struct CheckOptions {
    /// Box in phase coordinates; `[−1, 1]^d` when absent.
    pub sample_box: Option<SampleBox>,
    pub samples: usize,
    pub tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { sample_box: None, samples: DEFAULT_SAMPLES, tol: POINT_TOL }
    }
}

impl CheckOptions {
    pub(crate) fn points(&self, s: &SystemDef) -> Result<Vec<Vec<f64>>, HamiltonianError> {
        let b = self.sample_box.clone().unwrap_or_else(|| probe::default_box(s));
        if b.dim() != s.phase_dim() {
            return Err(HamiltonianError::BoxDimension { got: b.dim(), expected: s.phase_dim() });
        }
        Ok(b.halton(self.samples))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SolutionReport {
    pub is_solution: bool,
    pub max_defect: f64,
    pub kernel_member: bool,
    pub kernel_defect: f64,
    pub integrability_defect: f64,
    pub samples: usize,
}

/// Defect expressions of the HDW equations for `x`.
pub(crate) fn solution_defects(x: &KVectorField, hdw: &HdwSystem) -> Vec<Expr> {
    let (k, n) = (hdw.velocities.len(), hdw.trace.len());
    let mut out = Vec::new();
    for a in 0..k {
        for i in 0..n {
            out.push(Expr::sub(x.config[a][i].clone(), hdw.velocities[a][i].clone()));
        }
    }
    for i in 0..n {
        let trace = Expr::sum((0..k).map(|b| x.fiber[b][b][i].clone()));
        out.push(Expr::sub(trace, hdw.trace[i].clone()));
    }
    out
}

/// Expressions that vanish exactly when `y` lies in the kernel of the
/// k-symplectic map: `Y^i_β = 0` and `Σ_α (Y_α)^α_i = 0`.
pub(crate) fn kernel_conditions(y: &KVectorField) -> Vec<Expr> {
    let (k, n) = (y.k(), y.n());
    let mut out = Vec::new();
    for a in 0..k {
        out.extend(y.config[a].iter().cloned());
    }
    for i in 0..n {
        out.push(Expr::sum((0..k).map(|a| y.fiber[a][a][i].clone())));
    }
    out
}

pub(crate) fn report(
    s: &SystemDef,
    x: &KVectorField,
    defects: &[Expr],
    kernel: &[Expr],
    opts: &CheckOptions,
) -> Result<SolutionReport, HamiltonianError> {
    let pts = opts.points(s)?;
    let (max_defect, samples) = probe::max_abs(s, defects, &pts)?;
    let (kernel_defect, _) = probe::max_abs(s, kernel, &pts)?;
    let brackets = probe::commutators(x, &s.phase_coords());
    let (integrability_defect, _) = probe::max_abs(s, &brackets, &pts)?;
    Ok(SolutionReport {
        is_solution: max_defect <= opts.tol,
        max_defect,
        kernel_member: kernel_defect <= opts.tol,
        kernel_defect,
        integrability_defect,
        samples,
    })
}

pub fn check_solution(x: &KVectorField, s: &SystemDef) -> Result<SolutionReport, HamiltonianError> {
    check_solution_with(x, s, &CheckOptions::default())
}

pub fn check_solution_with(
    x: &KVectorField,
    s: &SystemDef,
    opts: &CheckOptions,
) -> Result<SolutionReport, HamiltonianError> {
    require_hamiltonian(s)?;
    s.validate_field(x)?;
    let hdw = hdw_rhs(s);
    report(s, x, &solution_defects(x, &hdw), &kernel_conditions(x), opts)
}

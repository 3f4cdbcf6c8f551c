//! Grid sections and finite-difference solvers.
//!
//! A [`Grid`] discretizes a box in the base space `R^k`; a [`GridSection`]
//! stores the field values `ψ^i` on it together with optional momentum or
//! velocity fields. Arrays are flat and row-major: the last axis varies
//! fastest.
//!
//! All stencils are second-order central differences. Values on the outer
//! layer of the grid are never part of a residual norm.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{CompiledExpr, ExprError};
use crate::linalg::{self, Matrix};
use crate::math;
use crate::model::{SystemDef, SystemKind};

/// Largest accepted Courant number `c·Δt/h` in [`evolve_hyperbolic`].
pub const CFL_LIMIT: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldsError {
    #[error("axis {axis} has {count} points; central stencils need at least 3")]
    GridTooSmall { axis: usize, count: usize },
    #[error("axis {axis} has an empty or non-finite range")]
    BadAxis { axis: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("section is missing its {0} fields")]
    MissingField(&'static str),
    #[error("Courant number {courant} exceeds {limit}")]
    CflViolation { courant: f64, limit: f64 },
    #[error("non-finite value at time level {step}")]
    NonFinite { step: usize },
    #[error("no convergence after {iterations} sweeps (max residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("{0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Axis { min, max, count }
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        self.min + j as f64 * self.spacing()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self, FieldsError> {
        if axes.is_empty() {
            return Err(FieldsError::Shape("grid needs at least one axis".into()));
        }
        for (a, ax) in axes.iter().enumerate() {
            if ax.count < 3 {
                return Err(FieldsError::GridTooSmall { axis: a, count: ax.count });
            }
            if !(ax.min.is_finite() && ax.max.is_finite() && ax.max > ax.min) {
                return Err(FieldsError::BadAxis { axis: a });
            }
        }
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len() - 1).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].count;
        }
        let len = strides[0] * axes[0].count;
        Ok(Grid { axes, strides, len })
    }

    /// `k` identical axes.
    pub fn uniform(k: usize, min: f64, max: f64, count: usize) -> Result<Self, FieldsError> {
        Grid::new(vec![Axis::new(min, max, count); k])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a].spacing()
    }

    pub fn stride(&self, a: usize) -> usize {
        self.strides[a]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn index_on(&self, flat: usize, a: usize) -> usize {
        (flat / self.strides[a]) % self.axes[a].count
    }

    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.index_on(flat, a)).collect()
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.axes[a].coord(self.index_on(flat, a))).collect()
    }

    pub fn is_interior(&self, flat: usize) -> bool {
        (0..self.dim()).all(|a| {
            let j = self.index_on(flat, a);
            j > 0 && j + 1 < self.axes[a].count
        })
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&p| self.is_interior(p))
    }

    /// Halves every spacing.
    pub fn refined(&self) -> Grid {
        let axes = self.axes.iter().map(|a| Axis::new(a.min, a.max, 2 * (a.count - 1) + 1)).collect();
        Grid::new(axes).expect("refining a valid grid")
    }

    /// Evaluates `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len).map(|p| f(&self.coords(p))).collect()
    }
}

/// Field values on a grid, with optional first-order data.
///
/// `momenta[α][i]` holds `ψ^α_i`; `velocities[i][α]` holds `ψ^i_α`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSection {
    pub grid: Grid,
    pub values: Vec<Vec<f64>>,
    pub momenta: Option<Vec<Vec<Vec<f64>>>>,
    pub velocities: Option<Vec<Vec<Vec<f64>>>>,
}

fn check_array(grid: &Grid, a: &[f64], what: &str) -> Result<(), FieldsError> {
    if a.len() != grid.len() {
        return Err(FieldsError::Shape(format!("{what}: {} values for {} nodes", a.len(), grid.len())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(FieldsError::Shape(format!("{what}: non-finite value")));
    }
    Ok(())
}

impl GridSection {
    pub fn new(grid: Grid, values: Vec<Vec<f64>>) -> Result<Self, FieldsError> {
        if values.is_empty() {
            return Err(FieldsError::Shape("section needs at least one field".into()));
        }
        for (i, v) in values.iter().enumerate() {
            check_array(&grid, v, &format!("psi_{}", i + 1))?;
        }
        Ok(GridSection { grid, values, momenta: None, velocities: None })
    }

    /// Samples `f(x, out)` with `out.len() == n` at every node.
    pub fn from_fn(grid: Grid, n: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<Self, FieldsError> {
        let mut values = vec![vec![0.0; grid.len()]; n];
        let mut out = vec![0.0; n];
        for p in 0..grid.len() {
            f(&grid.coords(p), &mut out);
            for i in 0..n {
                values[i][p] = out[i];
            }
        }
        GridSection::new(grid, values)
    }

    pub fn with_momenta(mut self, momenta: Vec<Vec<Vec<f64>>>) -> Result<Self, FieldsError> {
        if momenta.len() != self.grid.dim() || momenta.iter().any(|m| m.len() != self.n()) {
            return Err(FieldsError::Shape("momenta must be k×n arrays".into()));
        }
        for (a, row) in momenta.iter().enumerate() {
            for (i, m) in row.iter().enumerate() {
                check_array(&self.grid, m, &format!("p_{}_{}", a + 1, i + 1))?;
            }
        }
        self.momenta = Some(momenta);
        Ok(self)
    }

    pub fn with_velocities(mut self, velocities: Vec<Vec<Vec<f64>>>) -> Result<Self, FieldsError> {
        if velocities.len() != self.n() || velocities.iter().any(|v| v.len() != self.grid.dim()) {
            return Err(FieldsError::Shape("velocities must be n×k arrays".into()));
        }
        for (i, row) in velocities.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                check_array(&self.grid, v, &format!("v_{}_{}", i + 1, a + 1))?;
            }
        }
        self.velocities = Some(velocities);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn k(&self) -> usize {
        self.grid.dim()
    }

    /// Largest `|ψ^i − exact|` over all nodes, or interior nodes only.
    pub fn max_error(&self, i: usize, exact: impl Fn(&[f64]) -> f64, interior_only: bool) -> f64 {
        (0..self.grid.len())
            .filter(|&p| !interior_only || self.grid.is_interior(p))
            .map(|p| (self.values[i][p] - exact(&self.grid.coords(p))).abs())
            .fold(0.0, f64::max)
    }
}

/// Central-difference partial of `values` along `axis`; `NaN` on the
/// outer layer of the grid.
pub fn fd_partial(grid: &Grid, values: &[f64], axis: usize, order: u8) -> Result<Vec<f64>, FieldsError> {
    if values.len() != grid.len() {
        return Err(FieldsError::Shape(format!("{} values for {} nodes", values.len(), grid.len())));
    }
    if axis >= grid.dim() || !(order == 1 || order == 2) {
        return Err(FieldsError::Shape(format!("axis {axis}, order {order}")));
    }
    let (s, h) = (grid.stride(axis), grid.spacing(axis));
    Ok((0..grid.len())
        .map(|p| {
            if !grid.is_interior(p) {
                return f64::NAN;
            }
            match order {
                1 => (values[p + s] - values[p - s]) / (2.0 * h),
                _ => (values[p + s] - 2.0 * values[p] + values[p - s]) / (h * h),
            }
        })
        .collect())
}

/// Mixed second partial by nested central differences; `NaN` on the outer layer.
pub fn fd_mixed(grid: &Grid, values: &[f64], a: usize, b: usize) -> Result<Vec<f64>, FieldsError> {
    if a == b {
        return fd_partial(grid, values, a, 2);
    }
    if values.len() != grid.len() || a >= grid.dim() || b >= grid.dim() {
        return Err(FieldsError::Shape(format!("mixed partial on axes {a}, {b}")));
    }
    let (sa, sb) = (grid.stride(a), grid.stride(b));
    let scale = 4.0 * grid.spacing(a) * grid.spacing(b);
    Ok((0..grid.len())
        .map(|p| {
            if !grid.is_interior(p) {
                return f64::NAN;
            }
            (values[p + sa + sb] - values[p + sa - sb] - values[p - sa + sb] + values[p - sa - sb]) / scale
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FamilyResidual {
    pub family: &'static str,
    pub max: f64,
    /// Root mean square over all equations and interior nodes.
    pub rms: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GridResidual {
    pub families: Vec<FamilyResidual>,
}

impl GridResidual {
    pub fn max(&self) -> f64 {
        self.families.iter().map(|f| f.max).fold(0.0, f64::max)
    }

    pub fn family(&self, name: &str) -> Option<&FamilyResidual> {
        self.families.iter().find(|f| f.family == name)
    }
}

struct Acc {
    family: &'static str,
    max: f64,
    sumsq: f64,
    count: usize,
    points: usize,
}

impl Acc {
    fn new(family: &'static str) -> Self {
        Acc { family, max: 0.0, sumsq: 0.0, count: 0, points: 0 }
    }

    fn push(&mut self, r: f64) {
        self.max = self.max.max(r.abs());
        self.sumsq += r * r;
        self.count += 1;
    }

    fn finish(self) -> FamilyResidual {
        let rms = if self.count == 0 { 0.0 } else { math::sqrt(self.sumsq / self.count as f64) };
        FamilyResidual { family: self.family, max: self.max, rms, points: self.points }
    }
}

// Compiled expressions sharing one slot buffer: phase coordinates, then constants.
struct Evaluator {
    exprs: Vec<CompiledExpr>,
    buf: Vec<f64>,
}

impl Evaluator {
    fn new(s: &SystemDef, exprs: Vec<crate::expr::Expr>) -> Result<Self, ExprError> {
        let compiled = exprs.iter().map(|e| s.compile(e)).collect::<Result<_, _>>()?;
        Ok(Evaluator { exprs: compiled, buf: s.slot_values(&vec![0.0; s.phase_dim()]) })
    }

    fn eval(&self, j: usize) -> Result<f64, ExprError> {
        self.exprs[j].eval(&self.buf)
    }
}

fn require_shape(sec: &GridSection, s: &SystemDef) -> Result<(), FieldsError> {
    if sec.k() != s.k() || sec.n() != s.n() {
        return Err(FieldsError::Shape(format!(
            "section is k={}, n={} but system is k={}, n={}",
            sec.k(),
            sec.n(),
            s.k(),
            s.n()
        )));
    }
    Ok(())
}

/// Residuals of the field equations of `s` evaluated on `sec`.
///
/// Hamiltonian systems report the `velocity` and `trace` families and need
/// momenta. Lagrangian systems report `euler_lagrange` in conservative flux
/// form, plus `prolongation` when the section carries velocities.
pub fn residual_on_grid(sec: &GridSection, s: &SystemDef) -> Result<GridResidual, FieldsError> {
    require_shape(sec, s)?;
    match s.kind {
        SystemKind::Hamiltonian => hdw_residual(sec, s),
        SystemKind::Lagrangian => el_residual(sec, s),
    }
}

fn hdw_residual(sec: &GridSection, s: &SystemDef) -> Result<GridResidual, FieldsError> {
    let momenta = sec.momenta.as_ref().ok_or(FieldsError::MissingField("momentum"))?;
    let (k, n, cos) = (s.k(), s.n(), s.is_cosymplectic());
    let f = &s.frame;
    let mut exprs = Vec::new();
    for a in 0..k {
        for i in 0..n {
            exprs.push(s.expression.diff(f.momentum(a, i)));
        }
    }
    for i in 0..n {
        exprs.push(s.expression.diff(f.config(i)));
    }
    let mut ev = Evaluator::new(s, exprs)?;
    let g = &sec.grid;
    let dpsi: Vec<Vec<Vec<f64>>> =
        sec.values.iter().map(|v| (0..k).map(|a| fd_partial(g, v, a, 1)).collect()).collect::<Result<_, _>>()?;
    let dmom: Vec<Vec<Vec<f64>>> =
        (0..k).map(|a| (0..n).map(|i| fd_partial(g, &momenta[a][i], a, 1)).collect()).collect::<Result<_, _>>()?;
    let (mut vel, mut tr) = (Acc::new("velocity"), Acc::new("trace"));
    let off = if cos { k } else { 0 };
    for p in g.interior() {
        if cos {
            ev.buf[..k].copy_from_slice(&g.coords(p));
        }
        for i in 0..n {
            ev.buf[off + i] = sec.values[i][p];
        }
        for a in 0..k {
            for i in 0..n {
                ev.buf[off + n + a * n + i] = momenta[a][i][p];
            }
        }
        for a in 0..k {
            for i in 0..n {
                vel.push(dpsi[i][a][p] - ev.eval(a * n + i)?);
            }
        }
        for i in 0..n {
            let div: f64 = (0..k).map(|a| dmom[a][i][p]).sum();
            tr.push(div + ev.eval(k * n + i)?);
        }
        vel.points += 1;
        tr.points += 1;
    }
    Ok(GridResidual { families: vec![vel.finish(), tr.finish()] })
}

/// Discrete Euler–Lagrange operator in conservative form:
/// `Σ_α (F^α_i(p+½e_α) − F^α_i(p−½e_α))/h_α − ∂L/∂q^i(p)` with
/// `F^α_i = ∂L/∂v^i_α` evaluated at half nodes.
struct ElOperator<'g> {
    grid: &'g Grid,
    k: usize,
    n: usize,
    cos: bool,
    flux: Evaluator,
    source: Evaluator,
    coords: Vec<Vec<f64>>,
}

impl<'g> ElOperator<'g> {
    fn new(s: &SystemDef, grid: &'g Grid) -> Result<Self, FieldsError> {
        if s.kind != SystemKind::Lagrangian {
            return Err(FieldsError::Unsupported("the Euler–Lagrange operator needs a Lagrangian system"));
        }
        let (k, n) = (s.k(), s.n());
        let f = &s.frame;
        let mut flux = Vec::new();
        for a in 0..k {
            for i in 0..n {
                flux.push(s.expression.diff(f.velocity(i, a)));
            }
        }
        let source = (0..n).map(|i| s.expression.diff(f.config(i))).collect();
        Ok(ElOperator {
            grid,
            k,
            n,
            cos: s.is_cosymplectic(),
            flux: Evaluator::new(s, flux)?,
            source: Evaluator::new(s, source)?,
            coords: (0..grid.len()).map(|p| grid.coords(p)).collect(),
        })
    }

    fn central(&self, v: &[f64], p: usize, b: usize) -> f64 {
        let s = self.grid.stride(b);
        (v[p + s] - v[p - s]) / (2.0 * self.grid.spacing(b))
    }

    fn residual_at(&mut self, values: &[Vec<f64>], p: usize, out: &mut [f64]) -> Result<(), ExprError> {
        let (k, n) = (self.k, self.n);
        let off = if self.cos { k } else { 0 };
        let voff = off + n;
        out.iter_mut().for_each(|o| *o = 0.0);
        for a in 0..k {
            let (sa, ha) = (self.grid.stride(a), self.grid.spacing(a));
            for (nb, sign) in [(p + sa, 1.0), (p - sa, -1.0)] {
                let buf = &mut self.flux.buf;
                if self.cos {
                    buf[..k].copy_from_slice(&self.coords[p]);
                    buf[a] += sign * 0.5 * ha;
                }
                for j in 0..n {
                    let v = &values[j];
                    buf[off + j] = 0.5 * (v[p] + v[nb]);
                    for b in 0..k {
                        buf[voff + b * n + j] = if b == a {
                            sign * (v[nb] - v[p]) / ha
                        } else {
                            let sb = self.grid.stride(b);
                            let hb = self.grid.spacing(b);
                            ((v[p + sb] - v[p - sb]) + (v[nb + sb] - v[nb - sb])) / (4.0 * hb)
                        };
                    }
                }
                for (i, o) in out.iter_mut().enumerate() {
                    *o += sign * self.flux.eval(a * n + i)? / ha;
                }
            }
        }
        if self.cos {
            self.source.buf[..k].copy_from_slice(&self.coords[p]);
        }
        for j in 0..n {
            self.source.buf[off + j] = values[j][p];
            for b in 0..k {
                self.source.buf[voff + b * n + j] = self.central(&values[j], p, b);
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o -= self.source.eval(i)?;
        }
        Ok(())
    }
}

fn el_residual(sec: &GridSection, s: &SystemDef) -> Result<GridResidual, FieldsError> {
    let mut op = ElOperator::new(s, &sec.grid)?;
    let mut el = Acc::new("euler_lagrange");
    let mut out = vec![0.0; s.n()];
    let interior: Vec<usize> = sec.grid.interior().collect();
    for &p in &interior {
        op.residual_at(&sec.values, p, &mut out)?;
        out.iter().for_each(|r| el.push(*r));
        el.points += 1;
    }
    let mut families = vec![el.finish()];
    if let Some(vel) = &sec.velocities {
        let mut pr = Acc::new("prolongation");
        for &p in &interior {
            for i in 0..s.n() {
                for a in 0..s.k() {
                    pr.push(vel[i][a][p] - op.central(&sec.values[i], p, a));
                }
            }
            pr.points += 1;
        }
        families.push(pr.finish());
    }
    Ok(GridResidual { families })
}

/// Local data handed to a hyperbolic right-hand side.
///
/// `d1` and `d2` are indexed `field * k + axis`; entries for the time axis are zero.
pub struct PointState<'a> {
    pub coords: &'a [f64],
    pub psi: &'a [f64],
    pub d1: &'a [f64],
    pub d2: &'a [f64],
    pub k: usize,
}

impl PointState<'_> {
    pub fn d1(&self, field: usize, axis: usize) -> f64 {
        self.d1[field * self.k + axis]
    }

    pub fn d2(&self, field: usize, axis: usize) -> f64 {
        self.d2[field * self.k + axis]
    }
}

pub enum Boundary<'a> {
    /// The last node of every spatial axis is identified with the first.
    Periodic,
    /// Outer spatial nodes are set from a function of the node coordinates.
    Dirichlet(&'a dyn Fn(&[f64], &mut [f64])),
}

/// A second-order system `∂²ψ/∂t² = F(x, ψ, ∂ψ, ∂²ψ)` in one grid axis.
pub struct Hyperbolic<'a> {
    pub n: usize,
    pub time_axis: usize,
    /// Largest characteristic speed, used for the CFL check.
    pub speed: f64,
    pub boundary: Boundary<'a>,
    pub rhs: &'a dyn Fn(&PointState, &mut [f64]),
}

/// Leapfrog integration over the time axis of `grid`.
///
/// Level 0 comes from `psi0`; level 1 from a Taylor step with `dpsi0`; every
/// later level from `ψ⁺ = 2ψ − ψ⁻ + Δt² F(ψ)`.
pub fn evolve_hyperbolic(
    problem: &Hyperbolic,
    grid: &Grid,
    psi0: &dyn Fn(&[f64], &mut [f64]),
    dpsi0: &dyn Fn(&[f64], &mut [f64]),
) -> Result<GridSection, FieldsError> {
    let (k, n, t) = (grid.dim(), problem.n, problem.time_axis);
    if t >= k || n == 0 {
        return Err(FieldsError::Shape(format!("time axis {t} on a {k}-axis grid")));
    }
    let dt = grid.spacing(t);
    let hmin = (0..k).filter(|&a| a != t).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
    let courant = problem.speed.abs() * dt / hmin;
    if courant > CFL_LIMIT {
        return Err(FieldsError::CflViolation { courant, limit: CFL_LIMIT });
    }
    let st = grid.stride(t);
    let spatial: Vec<usize> = (0..grid.len()).filter(|&p| grid.index_on(p, t) == 0).collect();
    let periodic = matches!(problem.boundary, Boundary::Periodic);
    let on_edge = |p: usize| {
        (0..k).any(|a| {
            let j = grid.index_on(p, a);
            a != t && (j == 0 || j + 1 == grid.axis(a).count)
        })
    };
    let neighbor = |p: usize, a: usize, up: bool| -> usize {
        let j = grid.index_on(p, a);
        let c = grid.axis(a).count;
        let s = grid.stride(a);
        match (up, periodic) {
            (true, true) if j + 1 == c => p - (c - 2) * s,
            (false, true) if j == 0 => p + (c - 2) * s,
            (true, _) => p + s,
            (false, _) => p - s,
        }
    };

    let mut values = vec![vec![0.0; grid.len()]; n];
    let mut buf = vec![0.0; n];
    let mut rates = vec![vec![0.0; spatial.len()]; n];
    for (m, &p) in spatial.iter().enumerate() {
        let x = grid.coords(p);
        psi0(&x, &mut buf);
        for i in 0..n {
            values[i][p] = buf[i];
        }
        dpsi0(&x, &mut buf);
        for i in 0..n {
            rates[i][m] = buf[i];
        }
    }

    let mut psi = vec![0.0; n];
    let mut d1 = vec![0.0; n * k];
    let mut d2 = vec![0.0; n * k];
    let mut force = vec![vec![0.0; spatial.len()]; n];
    let levels = grid.axis(t).count;
    for level in 0..levels - 1 {
        let base = level * st;
        for (m, &o) in spatial.iter().enumerate() {
            let p = base + o;
            if !periodic && on_edge(p) {
                continue;
            }
            for i in 0..n {
                let v = &values[i];
                psi[i] = v[p];
                for a in 0..k {
                    if a == t {
                        d1[i * k + a] = 0.0;
                        d2[i * k + a] = 0.0;
                        continue;
                    }
                    let h = grid.spacing(a);
                    let (up, dn) = (v[neighbor(p, a, true)], v[neighbor(p, a, false)]);
                    d1[i * k + a] = (up - dn) / (2.0 * h);
                    d2[i * k + a] = (up - 2.0 * v[p] + dn) / (h * h);
                }
            }
            let coords = grid.coords(p);
            let state = PointState { coords: &coords, psi: &psi, d1: &d1, d2: &d2, k };
            (problem.rhs)(&state, &mut buf);
            for i in 0..n {
                force[i][m] = buf[i];
            }
        }
        let next = base + st;
        for (m, &o) in spatial.iter().enumerate() {
            let p = next + o;
            if !periodic && on_edge(p) {
                if let Boundary::Dirichlet(g) = problem.boundary {
                    g(&grid.coords(p), &mut buf);
                    for i in 0..n {
                        values[i][p] = buf[i];
                    }
                }
                continue;
            }
            for i in 0..n {
                let cur = values[i][base + o];
                let f = force[i][m];
                values[i][p] = if level == 0 {
                    cur + dt * rates[i][m] + 0.5 * dt * dt * f
                } else {
                    2.0 * cur - values[i][base + o - st] + dt * dt * f
                };
                if !values[i][p].is_finite() {
                    return Err(FieldsError::NonFinite { step: level + 1 });
                }
            }
        }
    }
    GridSection::new(grid.clone(), values)
}

/// Staggered energy of the linear wave `ψ_tt = c²Δψ` between time levels
/// `level` and `level + 1`; leapfrog conserves it exactly up to rounding.
pub fn wave_energy(sec: &GridSection, time_axis: usize, level: usize, speed: f64) -> f64 {
    let g = &sec.grid;
    let (k, t) = (g.dim(), time_axis);
    let (st, dt) = (g.stride(t), g.spacing(t));
    let cell: f64 = (0..k).filter(|&a| a != t).map(|a| g.spacing(a)).product();
    let mut e = 0.0;
    for p in 0..g.len() {
        if g.index_on(p, t) != level {
            continue;
        }
        // one node per periodic cell
        if (0..k).any(|a| a != t && g.index_on(p, a) + 1 == g.axis(a).count) {
            continue;
        }
        for v in &sec.values {
            let rate = (v[p + st] - v[p]) / dt;
            e += 0.5 * rate * rate * cell;
            for a in (0..k).filter(|&a| a != t) {
                let (s, h) = (g.stride(a), g.spacing(a));
                let now = (v[p + s] - v[p]) / h;
                let later = (v[p + st + s] - v[p + st]) / h;
                e += 0.5 * speed * speed * now * later * cell;
            }
        }
    }
    e
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relaxed {
    pub section: GridSection,
    pub sweeps: usize,
    pub residual: f64,
}

const NEWTON_STEP: f64 = 1e-6;

/// Gauss–Seidel relaxation of the discrete Euler–Lagrange equations of `s`.
///
/// Boundary nodes of `initial` are Dirichlet data and its interior is the
/// starting guess. Nodes are visited in flat (lexicographic) order and each
/// gets one Newton step on its own `n` unknowns.
pub fn relax_elliptic(
    s: &SystemDef,
    initial: &GridSection,
    tol: f64,
    max_iters: usize,
) -> Result<Relaxed, FieldsError> {
    require_shape(initial, s)?;
    let grid = &initial.grid;
    let mut op = ElOperator::new(s, grid)?;
    let n = s.n();
    let mut values = initial.values.clone();
    let interior: Vec<usize> = grid.interior().collect();
    let (mut r0, mut rp, mut rm) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);

    let mut max_residual = |op: &mut ElOperator, values: &[Vec<f64>]| -> Result<f64, FieldsError> {
        let mut worst: f64 = 0.0;
        for &p in &interior {
            op.residual_at(values, p, &mut r0)?;
            worst = r0.iter().fold(worst, |w, r| w.max(r.abs()));
        }
        Ok(worst)
    };
    let mut residual = max_residual(&mut op, &values)?;
    let mut sweeps = 0;
    let mut r = vec![0.0; n];
    while residual > tol {
        if sweeps == max_iters {
            return Err(FieldsError::NoConvergence { iterations: sweeps, residual });
        }
        for &p in &interior {
            op.residual_at(&values, p, &mut r)?;
            let mut jac = Matrix::zeros(n, n);
            for j in 0..n {
                let keep = values[j][p];
                let d = NEWTON_STEP * (1.0 + keep.abs());
                values[j][p] = keep + d;
                op.residual_at(&values, p, &mut rp)?;
                values[j][p] = keep - d;
                op.residual_at(&values, p, &mut rm)?;
                values[j][p] = keep;
                for i in 0..n {
                    jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * d);
                }
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            if let Some(step) = linalg::solve(&jac, &rhs) {
                for j in 0..n {
                    values[j][p] += step[j];
                }
            }
        }
        sweeps += 1;
        residual = max_residual(&mut op, &values)?;
        if !residual.is_finite() {
            return Err(FieldsError::NonFinite { step: sweeps });
        }
    }
    let section = GridSection { grid: grid.clone(), values, momenta: None, velocities: None };
    Ok(Relaxed { section, sweeps, residual })
}

/// Observed order `log₂(e_coarse / e_fine)` for a halved spacing.
pub fn convergence_order(coarse: f64, fine: f64) -> f64 {
    math::log2(coarse / fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Formalism;

    fn sys(kind: SystemKind, k: usize, n: usize, text: &str, params: &[(&str, f64)]) -> SystemDef {
        SystemDef::parse("t", k, n, kind, Formalism::KSymplectic, text, params).unwrap()
    }

    fn interior_max(g: &Grid, a: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
        g.interior().map(|p| (a[p] - f(&g.coords(p))).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_layout_is_row_major() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 3), Axis::new(0.0, 2.0, 5)]).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.unravel(7), [1, 2]);
        assert_eq!(g.ravel(&[2, 4]), 14);
        assert_eq!(g.coords(7), [0.5, 1.0]);
        assert_eq!(g.interior().count(), 3);
        assert_eq!(Grid::uniform(1, 0.0, 1.0, 2).unwrap_err(), FieldsError::GridTooSmall { axis: 0, count: 2 });
        assert!(Grid::uniform(1, 1.0, 1.0, 4).is_err());
        assert_eq!(g.refined().shape(), [5, 9]);
    }

    #[test]
    fn stencils() {
        let g = Grid::uniform(2, -1.0, 1.0, 21).unwrap();
        let sq = g.sample(|x| x[0] * x[0]);
        let d2 = fd_partial(&g, &sq, 0, 2).unwrap();
        assert!(interior_max(&g, &d2, |_| 2.0) < 1e-12);
        assert!(d2[0].is_nan());
        let c = g.sample(|_| 3.5);
        for a in 0..2 {
            assert!(interior_max(&g, &fd_partial(&g, &c, a, 1).unwrap(), |_| 0.0) == 0.0);
            assert!(interior_max(&g, &fd_partial(&g, &c, a, 2).unwrap(), |_| 0.0) == 0.0);
        }
        let xy = g.sample(|x| x[0] * x[1]);
        assert!(interior_max(&g, &fd_mixed(&g, &xy, 0, 1).unwrap(), |_| 1.0) < 1e-12);

        let g = Grid::new(vec![Axis::new(0.0, 1.0, 101)]).unwrap();
        let d = fd_partial(&g, &g.sample(|x| math::sin(x[0])), 0, 1).unwrap();
        assert!(interior_max(&g, &d, |x| math::cos(x[0])) <= 2e-5);
    }

    #[test]
    fn laplace_quadratic_hdw_residual() {
        let s = sys(SystemKind::Hamiltonian, 2, 1, "0.5*(p1^2 + p2^2)", &[]);
        let g = Grid::uniform(2, -1.0, 1.0, 17).unwrap();
        let sec = GridSection::new(g.clone(), vec![g.sample(|x| x[0] * x[0] - x[1] * x[1])])
            .unwrap()
            .with_momenta(vec![vec![g.sample(|x| 2.0 * x[0])], vec![g.sample(|x| -2.0 * x[1])]])
            .unwrap();
        let r = residual_on_grid(&sec, &s).unwrap();
        assert!(r.max() <= 1e-12, "{r:?}");
        assert_eq!(r.family("trace").unwrap().points, 225);
    }

    #[test]
    fn missing_momenta() {
        let s = sys(SystemKind::Hamiltonian, 2, 1, "0.5*(p1^2 + p2^2)", &[]);
        let g = Grid::uniform(2, 0.0, 1.0, 5).unwrap();
        let sec = GridSection::new(g.clone(), vec![g.sample(|_| 0.0)]).unwrap();
        assert_eq!(residual_on_grid(&sec, &s).unwrap_err(), FieldsError::MissingField("momentum"));
    }

    fn string_residual(count: usize) -> f64 {
        let s = sys(SystemKind::Hamiltonian, 2, 1, "0.5*(p1^2 - p2^2)", &[]);
        let g = Grid::uniform(2, 0.0, 1.0, count).unwrap();
        let psi = g.sample(|x| math::exp(x[0] - x[1]));
        let sec =
            GridSection::new(g, vec![psi.clone()]).unwrap().with_momenta(vec![vec![psi.clone()], vec![psi]]).unwrap();
        residual_on_grid(&sec, &s).unwrap().max()
    }

    #[test]
    fn vibrating_string_residual_is_second_order() {
        let (a, b) = (string_residual(17), string_residual(33));
        let order = convergence_order(a, b);
        assert!((1.9..2.1).contains(&order), "{order}");
    }

    #[test]
    fn minimal_surface_plane() {
        let s = sys(SystemKind::Lagrangian, 2, 1, "sqrt(1 + v1^2 + v2^2)", &[]);
        let g = Grid::uniform(2, 0.0, 1.0, 11).unwrap();
        let plane = |x: &[f64]| 0.3 * x[0] + 0.7 * x[1];
        let sec = GridSection::new(g.clone(), vec![g.sample(plane)])
            .unwrap()
            .with_velocities(vec![vec![g.sample(|_| 0.3), g.sample(|_| 0.7)]])
            .unwrap();
        let r = residual_on_grid(&sec, &s).unwrap();
        assert!(r.max() <= 1e-10, "{r:?}");
        assert_eq!(r.families.len(), 2);
    }

    #[test]
    fn el_flux_form_is_exact_on_quadratics() {
        let s = sys(SystemKind::Lagrangian, 2, 1, "0.5*(v1^2 + v2^2)", &[]);
        let g = Grid::uniform(2, -1.0, 1.0, 9).unwrap();
        let sec =
            GridSection::new(g.clone(), vec![g.sample(|x| x[0] * x[0] - x[1] * x[1] + 0.5 * x[0] * x[1])]).unwrap();
        assert!(residual_on_grid(&sec, &s).unwrap().max() <= 1e-12);
        let bad = GridSection::new(g.clone(), vec![g.sample(|x| x[0] * x[0])]).unwrap();
        assert!((residual_on_grid(&bad, &s).unwrap().max() - 2.0).abs() < 1e-12);
    }

    fn wave_run(count: usize, cfl: f64, periods: f64) -> (GridSection, f64) {
        let two_pi = 2.0 * core::f64::consts::PI;
        let h = two_pi / (count - 1) as f64;
        let steps = libm::round(periods * two_pi / (cfl * h)) as usize;
        let tmax = steps as f64 * cfl * h;
        let g = Grid::new(vec![Axis::new(0.0, tmax, steps + 1), Axis::new(0.0, two_pi, count)]).unwrap();
        let rhs = |st: &PointState, out: &mut [f64]| out[0] = st.d2(0, 1);
        let p = Hyperbolic { n: 1, time_axis: 0, speed: 1.0, boundary: Boundary::Periodic, rhs: &rhs };
        let sec = evolve_hyperbolic(&p, &g, &|x, o| o[0] = math::sin(x[1]), &|x, o| o[0] = -math::cos(x[1])).unwrap();
        let err = sec.max_error(0, |x| math::sin(x[1] - x[0]), false);
        (sec, err)
    }

    #[test]
    fn leapfrog_wave_matches_dalembert() {
        let (_, e1) = wave_run(33, 0.5, 0.5);
        let (_, e2) = wave_run(65, 0.5, 0.5);
        let order = convergence_order(e1, e2);
        assert!((1.7..2.3).contains(&order), "{e1} {e2} {order}");
    }

    #[test]
    fn leapfrog_energy_is_conserved() {
        let (sec, _) = wave_run(65, 0.5, 8.0);
        let levels = sec.grid.axis(0).count;
        assert!(levels > 1000);
        let e0 = wave_energy(&sec, 0, 0, 1.0);
        let e1 = wave_energy(&sec, 0, levels - 2, 1.0);
        assert!(((e1 - e0) / e0).abs() <= 1e-6, "{e0} {e1}");
    }

    #[test]
    fn zero_force_keeps_constants() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 11), Axis::new(0.0, 1.0, 21)]).unwrap();
        let rhs = |_: &PointState, out: &mut [f64]| out[0] = 0.0;
        let fix = |_: &[f64], o: &mut [f64]| o[0] = 2.5;
        let p = Hyperbolic { n: 1, time_axis: 1, speed: 1.0, boundary: Boundary::Dirichlet(&fix), rhs: &rhs };
        let sec = evolve_hyperbolic(&p, &g, &fix, &|_, o| o[0] = 0.0).unwrap();
        assert!(sec.values[0].iter().all(|v| *v == 2.5));
    }

    #[test]
    fn cfl_is_enforced() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 11), Axis::new(0.0, 1.0, 11)]).unwrap();
        let rhs = |_: &PointState, out: &mut [f64]| out[0] = 0.0;
        let p = Hyperbolic { n: 1, time_axis: 0, speed: 1.0, boundary: Boundary::Periodic, rhs: &rhs };
        let z = |_: &[f64], o: &mut [f64]| o[0] = 0.0;
        assert_eq!(
            evolve_hyperbolic(&p, &g, &z, &z).unwrap_err(),
            FieldsError::CflViolation { courant: 1.0, limit: CFL_LIMIT }
        );
    }

    fn dirichlet_start(g: &Grid, n: usize, exact: impl Fn(&[f64], &mut [f64])) -> GridSection {
        GridSection::from_fn(g.clone(), n, |x, out| {
            let on_edge = x.iter().enumerate().any(|(a, v)| *v == g.axis(a).min || *v == g.axis(a).max);
            if on_edge {
                exact(x, out);
            } else {
                out.iter_mut().for_each(|o| *o = 0.0);
            }
        })
        .unwrap()
    }

    #[test]
    fn relax_laplace_recovers_quadratic() {
        let s = sys(SystemKind::Lagrangian, 2, 1, "0.5*(v1^2 + v2^2)", &[]);
        let g = Grid::uniform(2, 0.0, 1.0, 33).unwrap();
        let exact = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
        let start = dirichlet_start(&g, 1, |x, o| o[0] = exact(x));
        let out = relax_elliptic(&s, &start, 1e-10, 20_000).unwrap();
        assert!(out.section.max_error(0, exact, false) <= 1e-8);
        assert!(residual_on_grid(&out.section, &s).unwrap().max() <= 1e-9);
        let again = relax_elliptic(&s, &start, 1e-10, 20_000).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn relax_navier_linear_field() {
        let s = sys(
            SystemKind::Lagrangian,
            2,
            2,
            "0.5*mu*(v11^2 + v12^2 + v21^2 + v22^2) + 0.5*(lam + mu)*(v11 + v22)^2",
            &[("lam", 1.0), ("mu", 1.0)],
        );
        let g = Grid::uniform(2, 0.0, 1.0, 9).unwrap();
        let start = dirichlet_start(&g, 2, |x, o| {
            o[0] = x[0];
            o[1] = -x[1];
        });
        let out = relax_elliptic(&s, &start, 1e-10, 5_000).unwrap();
        assert!(out.section.max_error(0, |x| x[0], false) <= 1e-9);
        assert!(out.section.max_error(1, |x| -x[1], false) <= 1e-9);
    }

    #[test]
    fn relax_minimal_surface_plane() {
        let s = sys(SystemKind::Lagrangian, 2, 1, "sqrt(1 + v1^2 + v2^2)", &[]);
        let g = Grid::uniform(2, 0.0, 1.0, 9).unwrap();
        let plane = |x: &[f64]| 0.3 * x[0] + 0.7 * x[1];
        let out = relax_elliptic(&s, &dirichlet_start(&g, 1, |x, o| o[0] = plane(x)), 1e-10, 5_000).unwrap();
        assert!(out.section.max_error(0, plane, false) <= 1e-9);
    }

    #[test]
    fn relax_reports_non_convergence() {
        let s = sys(SystemKind::Lagrangian, 2, 1, "0.5*(v1^2 + v2^2)", &[]);
        let g = Grid::uniform(2, 0.0, 1.0, 9).unwrap();
        let start = dirichlet_start(&g, 1, |x, o| o[0] = x[0]);
        assert!(matches!(relax_elliptic(&s, &start, 1e-14, 2), Err(FieldsError::NoConvergence { iterations: 2, .. })));
        let h = sys(SystemKind::Hamiltonian, 2, 1, "p1", &[]);
        assert!(matches!(relax_elliptic(&h, &start, 1e-10, 2), Err(FieldsError::Unsupported(_))));
    }
}

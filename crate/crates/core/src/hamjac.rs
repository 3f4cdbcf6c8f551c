//! Hamilton–Jacobi machinery.
//!
//! A section `γ` is given by its components `γ^α_i(q)` (or `γ^α_i(x, q)` in
//! the k-cosymplectic case). It solves the Hamilton–Jacobi problem when each
//! `γ^α` is closed and
//!
//! ```text
//! ∂/∂q^i [H(x, q, γ(x, q))] + Σ_α ∂γ^α_i/∂x^α = 0,
//! ```
//!
//! the second term being present only with explicit base dependence. The
//! projected k-vector field `Z^γ_α = ∂H/∂p^α_i∘γ ∂/∂q^i` is integrated on a
//! grid and lifted back through `γ`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{Assignment, CompiledExpr, Expr, ExprError};
use crate::fields::{self, FieldsError, Grid, GridResidual, GridSection};
use crate::model::{ModelError, SystemDef, SystemKind};
use crate::sampling::{SampleBox, DEFAULT_SAMPLES};

/// Agreement required between stored `γ` and `∂W/∂q`.
pub const POTENTIAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HamJacError {
    #[error("Hamilton–Jacobi checks need a Hamiltonian system")]
    NotHamiltonian,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("gamma^{alpha} differs from the gradient of its potential by {defect:e}")]
    PotentialMismatch { alpha: usize, defect: f64 },
    #[error("integration along axis {axis} produced a non-finite state")]
    StepFailure { axis: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Fields(#[from] FieldsError),
}

/// Components `γ^α_i` of a section, with optional potentials `W^α`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedSectionSpec {
    pub gamma: Vec<Vec<Expr>>,
    pub potentials: Option<Vec<Expr>>,
}

impl ClosedSectionSpec {
    pub fn new(gamma: Vec<Vec<Expr>>) -> Self {
        ClosedSectionSpec { gamma, potentials: None }
    }

    /// `γ^α_i = ∂W^α/∂q^i`.
    pub fn from_potentials(s: &SystemDef, w: Vec<Expr>) -> Self {
        let gamma = w.iter().map(|wa| s.frame.config_names().iter().map(|q| wa.diff(q)).collect()).collect();
        ClosedSectionSpec { gamma, potentials: Some(w) }
    }

    /// Attaches potentials after checking them against the stored components.
    pub fn with_potentials(mut self, s: &SystemDef, w: Vec<Expr>) -> Result<Self, HamJacError> {
        self.validate(s)?;
        let derived = ClosedSectionSpec::from_potentials(s, w.clone());
        derived.validate(s)?;
        let ctx = BaseContext::new(s);
        for a in 0..s.k() {
            let diffs: Vec<Expr> =
                (0..s.n()).map(|i| Expr::sub(self.gamma[a][i].clone(), derived.gamma[a][i].clone())).collect();
            let defect = ctx.max_abs(&diffs)?;
            if defect > POTENTIAL_TOL {
                return Err(HamJacError::PotentialMismatch { alpha: a, defect });
            }
        }
        self.potentials = Some(w);
        Ok(self)
    }

    /// Parses one component string per `(α, i)`, α-major.
    pub fn parse(s: &SystemDef, texts: &[&str]) -> Result<Self, HamJacError> {
        let (k, n) = (s.k(), s.n());
        if texts.len() != k * n {
            return Err(HamJacError::ShapeMismatch(format!("expected {} components, got {}", k * n, texts.len())));
        }
        let mut gamma = Vec::with_capacity(k);
        for a in 0..k {
            let row = (0..n).map(|i| crate::expr::parse(texts[a * n + i])).collect::<Result<_, _>>()?;
            gamma.push(row);
        }
        let spec = ClosedSectionSpec::new(gamma);
        spec.validate(s)?;
        Ok(spec)
    }

    pub fn validate(&self, s: &SystemDef) -> Result<(), HamJacError> {
        if s.kind != SystemKind::Hamiltonian {
            return Err(HamJacError::NotHamiltonian);
        }
        let (k, n) = (s.k(), s.n());
        if self.gamma.len() != k || self.gamma.iter().any(|r| r.len() != n) {
            return Err(HamJacError::ShapeMismatch(format!("gamma must be {k}×{n}")));
        }
        if let Some(w) = &self.potentials {
            if w.len() != k {
                return Err(HamJacError::ShapeMismatch(format!("expected {k} potentials, got {}", w.len())));
            }
        }
        let slots = base_slots(s);
        let all = self.gamma.iter().flatten().chain(self.potentials.iter().flatten());
        for e in all {
            if let Some(v) = e.free_vars().into_iter().find(|v| !slots.contains(v)) {
                return Err(ModelError::FreeVariable { name: v, context: "section".into() }.into());
            }
        }
        Ok(())
    }

    /// Substitution `p^α_i ← γ^α_i`.
    pub fn substitution(&self, s: &SystemDef) -> BTreeMap<String, Expr> {
        let mut map = BTreeMap::new();
        for (a, row) in self.gamma.iter().enumerate() {
            for (i, g) in row.iter().enumerate() {
                map.insert(s.frame.momentum(a, i).into(), g.clone());
            }
        }
        map
    }
}

// Names a section may depend on: x (cosymplectic only), q, then constants.
fn base_slots(s: &SystemDef) -> Vec<String> {
    let mut out = Vec::new();
    if s.is_cosymplectic() {
        out.extend(s.frame.base_names().iter().cloned());
    }
    out.extend(s.frame.config_names().iter().cloned());
    out.extend(s.constants().iter().map(|(k, _)| k.into()));
    out
}

fn base_dim(s: &SystemDef) -> usize {
    if s.is_cosymplectic() {
        s.k() + s.n()
    } else {
        s.n()
    }
}

struct BaseContext {
    slots: Vec<String>,
    consts: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl BaseContext {
    fn new(s: &SystemDef) -> Self {
        Self::with_points(s, SampleBox::cube(base_dim(s), -1.0, 1.0).halton(DEFAULT_SAMPLES))
    }

    fn with_points(s: &SystemDef, points: Vec<Vec<f64>>) -> Self {
        BaseContext { slots: base_slots(s), consts: s.constants().iter().map(|(_, v)| v).collect(), points }
    }

    fn compile(&self, e: &Expr) -> Result<CompiledExpr, ExprError> {
        let refs: Vec<&str> = self.slots.iter().map(String::as_str).collect();
        e.compile(&refs)
    }

    // Skips points where any expression fails to evaluate.
    fn max_abs(&self, exprs: &[Expr]) -> Result<f64, ExprError> {
        let compiled: Vec<CompiledExpr> = exprs.iter().map(|e| self.compile(e)).collect::<Result<_, _>>()?;
        let mut worst: f64 = 0.0;
        let mut buf = Vec::new();
        'points: for p in &self.points {
            buf.clear();
            buf.extend_from_slice(p);
            buf.extend_from_slice(&self.consts);
            let mut local: f64 = 0.0;
            for c in &compiled {
                match c.eval(&buf) {
                    Ok(v) => local = local.max(v.abs()),
                    Err(_) => continue 'points,
                }
            }
            worst = worst.max(local);
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HjDefect {
    pub closedness: f64,
    pub hj: f64,
}

/// Symbolic components of the Hamilton–Jacobi condition, one per `q^i`.
pub fn hj_expressions(s: &SystemDef, g: &ClosedSectionSpec) -> Result<Vec<Expr>, HamJacError> {
    g.validate(s)?;
    let composed = s.expression.substitute(&g.substitution(s));
    let f = &s.frame;
    Ok((0..s.n())
        .map(|i| {
            let mut e = composed.diff(f.config(i));
            if s.is_cosymplectic() {
                for a in 0..s.k() {
                    e = Expr::add(e, g.gamma[a][i].diff(f.base(a)));
                }
            }
            e
        })
        .collect())
}

fn closedness_expressions(s: &SystemDef, g: &ClosedSectionSpec) -> Vec<Expr> {
    let q = s.frame.config_names();
    let mut out = Vec::new();
    for row in &g.gamma {
        for i in 0..q.len() {
            for j in i + 1..q.len() {
                out.push(Expr::sub(row[i].diff(&q[j]), row[j].diff(&q[i])));
            }
        }
    }
    out
}

/// Closedness and Hamilton–Jacobi defects at 100 Halton points of `[-1, 1]^d`,
/// `d` the dimension of `Q` (or `R^k × Q`).
pub fn hj_defect(s: &SystemDef, g: &ClosedSectionSpec) -> Result<HjDefect, HamJacError> {
    hj_defect_on(s, g, SampleBox::cube(base_dim(s), -1.0, 1.0).halton(DEFAULT_SAMPLES))
}

pub fn hj_defect_on(s: &SystemDef, g: &ClosedSectionSpec, points: Vec<Vec<f64>>) -> Result<HjDefect, HamJacError> {
    let hj = hj_expressions(s, g)?;
    let ctx = BaseContext::with_points(s, points);
    Ok(HjDefect { closedness: ctx.max_abs(&closedness_expressions(s, g))?, hj: ctx.max_abs(&hj)? })
}

/// The same defect from the potentials:
/// `max |∂/∂q^i (Σ_α ∂W^α/∂x^α + H(x, q, ∂W/∂q))|`.
pub fn hj_defect_from_potentials(s: &SystemDef, w: &[Expr]) -> Result<f64, HamJacError> {
    let g = ClosedSectionSpec::from_potentials(s, w.to_vec());
    g.validate(s)?;
    let mut whole = s.expression.substitute(&g.substitution(s));
    if s.is_cosymplectic() {
        for (a, wa) in w.iter().enumerate() {
            whole = Expr::add(whole, wa.diff(s.frame.base(a)));
        }
    }
    let grads: Vec<Expr> = s.frame.config_names().iter().map(|q| whole.diff(q)).collect();
    Ok(BaseContext::new(s).max_abs(&grads)?)
}

/// `Z^γ`: components `(Z_α)^i` over `q`, or over `(x, q)` with an implicit
/// unit `∂/∂x^α` part.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedField {
    pub components: Vec<Vec<Expr>>,
    pub cosymplectic: bool,
    slots: Vec<String>,
    constants: Vec<f64>,
}

impl ProjectedField {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn n(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }

    fn compiled(&self) -> Result<Vec<Vec<CompiledExpr>>, ExprError> {
        let refs: Vec<&str> = self.slots.iter().map(String::as_str).collect();
        self.components.iter().map(|r| r.iter().map(|e| e.compile(&refs)).collect()).collect()
    }
}

pub fn project_field(s: &SystemDef, g: &ClosedSectionSpec) -> Result<ProjectedField, HamJacError> {
    g.validate(s)?;
    let sub = g.substitution(s);
    let components = (0..s.k())
        .map(|a| (0..s.n()).map(|i| s.expression.diff(s.frame.momentum(a, i)).substitute(&sub)).collect())
        .collect();
    Ok(ProjectedField {
        components,
        cosymplectic: s.is_cosymplectic(),
        slots: base_slots(s),
        constants: s.constants().iter().map(|(_, v)| v).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedSection {
    pub section: GridSection,
    /// Largest mismatch between the two orders of composing each pair of axis flows.
    pub commutativity_defect: f64,
}

struct Flow {
    z: Vec<Vec<CompiledExpr>>,
    cos: bool,
    n: usize,
    k: usize,
    buf: Vec<f64>,
}

impl Flow {
    fn rate(&mut self, a: usize, x: &[f64], q: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        let off = if self.cos { self.k } else { 0 };
        if self.cos {
            self.buf[..self.k].copy_from_slice(x);
        }
        self.buf[off..off + self.n].copy_from_slice(q);
        for i in 0..self.n {
            out[i] = self.z[a][i].eval(&self.buf)?;
        }
        Ok(())
    }

    // One classical RK4 step of length h along axis a starting at base point x.
    fn step(&mut self, a: usize, x: &[f64], h: f64, q: &mut [f64]) -> Result<(), HamJacError> {
        let n = self.n;
        let mut xs = x.to_vec();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        self.rate(a, &xs, q, &mut k1)?;
        xs[a] = x[a] + 0.5 * h;
        (0..n).for_each(|i| tmp[i] = q[i] + 0.5 * h * k1[i]);
        self.rate(a, &xs, &tmp, &mut k2)?;
        (0..n).for_each(|i| tmp[i] = q[i] + 0.5 * h * k2[i]);
        self.rate(a, &xs, &tmp, &mut k3)?;
        xs[a] = x[a] + h;
        (0..n).for_each(|i| tmp[i] = q[i] + h * k3[i]);
        self.rate(a, &xs, &tmp, &mut k4)?;
        for i in 0..n {
            q[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !q[i].is_finite() {
                return Err(HamJacError::StepFailure { axis: a });
            }
        }
        Ok(())
    }

    // Flows `steps` grid cells along axis a from base point x, moving x too.
    fn run(&mut self, g: &Grid, a: usize, x: &mut [f64], steps: usize, q: &mut [f64]) -> Result<(), HamJacError> {
        let h = g.spacing(a);
        for _ in 0..steps {
            self.step(a, x, h, q)?;
            x[a] += h;
        }
        Ok(())
    }
}

/// Integral section of `Z^γ` through `q0` at the lower corner of `grid`.
///
/// Values are built by flowing along axis 1, then axis 2, and so on, one RK4
/// step per grid cell.
pub fn integrate_projected(z: &ProjectedField, q0: &[f64], grid: &Grid) -> Result<IntegratedSection, HamJacError> {
    let (k, n) = (z.k(), z.n());
    if grid.dim() != k || q0.len() != n {
        return Err(HamJacError::ShapeMismatch(format!(
            "grid has {} axes and q0 {} values for k={k}, n={n}",
            grid.dim(),
            q0.len()
        )));
    }
    let width = if z.cosymplectic { k + n } else { n };
    let mut buf = vec![0.0; width];
    buf.extend_from_slice(&z.constants);
    let mut flow = Flow { z: z.compiled()?, cos: z.cosymplectic, n, k, buf };

    let mut values = vec![vec![0.0; grid.len()]; n];
    for i in 0..n {
        values[i][0] = q0[i];
    }
    let mut q = vec![0.0; n];
    for a in 0..k {
        for p in 0..grid.len() {
            let idx = grid.unravel(p);
            if idx[a] == 0 || idx[a + 1..].iter().any(|&j| j != 0) {
                continue;
            }
            let prev = p - grid.stride(a);
            (0..n).for_each(|i| q[i] = values[i][prev]);
            flow.step(a, &grid.coords(prev), grid.spacing(a), &mut q)?;
            (0..n).for_each(|i| values[i][p] = q[i]);
        }
    }

    let mut defect: f64 = 0.0;
    let mut q2 = vec![0.0; n];
    for p in grid.interior() {
        let idx = grid.unravel(p);
        for a in 0..k {
            for b in a + 1..k {
                let mut corner = idx.clone();
                corner[a] = 0;
                corner[b] = 0;
                let c = grid.ravel(&corner);
                let start = grid.coords(c);
                (0..n).for_each(|i| q[i] = values[i][c]);
                q2.copy_from_slice(&q);
                let mut x = start.clone();
                flow.run(grid, a, &mut x, idx[a], &mut q)?;
                flow.run(grid, b, &mut x, idx[b], &mut q)?;
                let mut x = start;
                flow.run(grid, b, &mut x, idx[b], &mut q2)?;
                flow.run(grid, a, &mut x, idx[a], &mut q2)?;
                defect = q.iter().zip(&q2).fold(defect, |d, (u, v)| d.max((u - v).abs()));
            }
        }
    }
    Ok(IntegratedSection { section: GridSection::new(grid.clone(), values)?, commutativity_defect: defect })
}

/// Grid residual of the field equations of `s` on `γ∘σ`.
pub fn verify_lift(s: &SystemDef, g: &ClosedSectionSpec, sigma: &GridSection) -> Result<GridResidual, HamJacError> {
    g.validate(s)?;
    let grid = &sigma.grid;
    if grid.dim() != s.k() || sigma.n() != s.n() {
        return Err(HamJacError::ShapeMismatch("section does not match the system".into()));
    }
    let ctx = BaseContext::with_points(s, Vec::new());
    let compiled: Vec<Vec<CompiledExpr>> =
        g.gamma.iter().map(|r| r.iter().map(|e| ctx.compile(e)).collect()).collect::<Result<_, _>>()?;
    let (k, n) = (s.k(), s.n());
    let mut momenta = vec![vec![vec![0.0; grid.len()]; n]; k];
    let mut buf = Vec::new();
    for p in 0..grid.len() {
        buf.clear();
        if s.is_cosymplectic() {
            buf.extend(grid.coords(p));
        }
        buf.extend((0..n).map(|i| sigma.values[i][p]));
        buf.extend_from_slice(&ctx.consts);
        for a in 0..k {
            for i in 0..n {
                momenta[a][i][p] = compiled[a][i].eval(&buf)?;
            }
        }
    }
    let lifted = GridSection::new(grid.clone(), sigma.values.clone())?.with_momenta(momenta)?;
    Ok(fields::residual_on_grid(&lifted, s)?)
}

/// Evaluates `γ^α_i` at one base point given as an assignment.
pub fn gamma_at(g: &ClosedSectionSpec, at: &Assignment) -> Result<Vec<Vec<f64>>, ExprError> {
    g.gamma.iter().map(|r| r.iter().map(|e| e.eval(at)).collect()).collect()
}

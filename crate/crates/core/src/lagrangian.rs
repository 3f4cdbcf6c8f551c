//! Lagrangian data on `T^1_k Q` (or `R^k × T^1_k Q`).
//!
//! Velocity indices are flattened as `(α, i) ↦ α·n + i`, matching the
//! phase-coordinate order of [`crate::model`].

use alloc::vec::Vec;

use crate::expr::{Assignment, Expr, ExprError};
use crate::hamiltonian::CheckOptions;
use crate::linalg::{self, Matrix};
use crate::model::{KVectorField, ModelError, SystemDef, SystemKind};
use crate::probe;
use crate::structures::{self, StructureError, StructureReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LagrangianError {
    #[error("expected a Lagrangian system")]
    NotLagrangian,
    #[error("sample box has dimension {got}, expected {expected}")]
    BoxDimension { got: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Energy, Poincaré–Cartan coefficients and velocity Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianDerived {
    /// `E_L = v^i_α ∂L/∂v^i_α − L`.
    pub energy: Expr,
    /// `θ[α][i] = ∂L/∂v^i_α`.
    pub theta: Vec<Vec<Expr>>,
    /// `W[(α,i)][(β,j)] = ∂²L/∂v^i_α ∂v^j_β`.
    pub hessian: Vec<Vec<Expr>>,
}

fn require_lagrangian(s: &SystemDef) -> Result<(), LagrangianError> {
    if s.kind != SystemKind::Lagrangian {
        return Err(LagrangianError::NotLagrangian);
    }
    Ok(())
}

fn velocity_names(s: &SystemDef) -> Vec<&str> {
    (0..s.k()).flat_map(|a| (0..s.n()).map(move |i| (a, i))).map(|(a, i)| s.frame.velocity(i, a)).collect()
}

pub fn derive_lagrangian(s: &SystemDef) -> Result<LagrangianDerived, LagrangianError> {
    require_lagrangian(s)?;
    let l = &s.expression;
    let (k, n) = (s.k(), s.n());
    let theta: Vec<Vec<Expr>> = (0..k).map(|a| (0..n).map(|i| l.diff(s.frame.velocity(i, a))).collect()).collect();
    let vel = velocity_names(s);
    let flat: Vec<&Expr> = theta.iter().flatten().collect();
    let hessian = flat.iter().map(|t| vel.iter().map(|v| t.diff(v)).collect()).collect();
    let action = Expr::sum(vel.iter().zip(&flat).map(|(v, t)| Expr::mul(Expr::var(v), (*t).clone())));
    Ok(LagrangianDerived { energy: Expr::sub(action, l.clone()), theta, hessian })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Regularity {
    pub det: f64,
    pub regular: bool,
}

/// Relative determinant threshold for regularity.
pub const REGULARITY_TOL: f64 = 1e-10;

/// Numeric Hessian at a point.
pub fn hessian_at(d: &LagrangianDerived, at: &Assignment) -> Result<Matrix, ExprError> {
    let m = d.hessian.len();
    let mut out = Matrix::zeros(m, m);
    for (r, row) in d.hessian.iter().enumerate() {
        for (c, e) in row.iter().enumerate() {
            out[(r, c)] = e.eval(at)?;
        }
    }
    Ok(out)
}

pub(crate) fn regularity_of(w: &Matrix) -> Regularity {
    let det = linalg::det(w);
    let scale = w.max_abs();
    let threshold = REGULARITY_TOL * crate::math::powi(scale, w.rows() as i64);
    Regularity { det, regular: det.abs() > threshold }
}

pub fn regularity(d: &LagrangianDerived, at: &Assignment) -> Result<Regularity, ExprError> {
    Ok(regularity_of(&hessian_at(d, at)?))
}

/// Residual of the trace condition along a SOPDE:
///
/// ```text
/// Σ_α [ ∂²L/∂q^j∂v^i_α v^j_α + ∂²L/∂v^i_α∂v^j_β (X_α)^j_β (+ ∂²L/∂x^α∂v^i_α) ] − ∂L/∂q^i
/// ```
pub fn el_residual(s: &SystemDef, d: &LagrangianDerived, x: &KVectorField) -> Vec<Expr> {
    let (k, n) = (s.k(), s.n());
    let f = &s.frame;
    (0..n)
        .map(|i| {
            let mut terms = Vec::new();
            for a in 0..k {
                let th = &d.theta[a][i];
                for j in 0..n {
                    terms.push(Expr::mul(th.diff(f.config(j)), Expr::var(f.velocity(j, a))));
                    for b in 0..k {
                        let w = d.hessian[a * n + i][b * n + j].clone();
                        terms.push(Expr::mul(w, x.fiber[a][b][j].clone()));
                    }
                }
                if s.is_cosymplectic() {
                    terms.push(th.diff(f.base(a)));
                }
            }
            Expr::sub(Expr::sum(terms), s.expression.diff(f.config(i)))
        })
        .collect()
}

/// `(X_α)^i − v^i_α` for every `α, i`.
pub fn sopde_conditions(s: &SystemDef, x: &KVectorField) -> Vec<Expr> {
    let mut out = Vec::new();
    for a in 0..s.k() {
        for i in 0..s.n() {
            out.push(Expr::sub(x.config[a][i].clone(), Expr::var(s.frame.velocity(i, a))));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SopdeReport {
    pub is_sopde: bool,
    pub sopde_defect: f64,
    pub el_defect: f64,
    pub samples: usize,
}

pub fn check_sopde_el(x: &KVectorField, s: &SystemDef) -> Result<SopdeReport, LagrangianError> {
    check_sopde_el_with(x, s, &CheckOptions::default())
}

pub fn check_sopde_el_with(
    x: &KVectorField,
    s: &SystemDef,
    opts: &CheckOptions,
) -> Result<SopdeReport, LagrangianError> {
    let d = derive_lagrangian(s)?;
    s.validate_field(x)?;
    let pts = sample_points(s, opts)?;
    let (sopde_defect, samples) = probe::max_abs(s, &sopde_conditions(s, x), &pts)?;
    let (el_defect, _) = probe::max_abs(s, &el_residual(s, &d, x), &pts)?;
    Ok(SopdeReport { is_sopde: sopde_defect <= opts.tol, sopde_defect, el_defect, samples })
}

pub(crate) fn sample_points(s: &SystemDef, opts: &CheckOptions) -> Result<Vec<Vec<f64>>, LagrangianError> {
    let b = opts.sample_box.clone().unwrap_or_else(|| probe::default_box(s));
    if b.dim() != s.phase_dim() {
        return Err(LagrangianError::BoxDimension { got: b.dim(), expected: s.phase_dim() });
    }
    Ok(b.halton(opts.samples))
}

/// Matrix of `ω_L^α = dq^i ∧ d(∂L/∂v^i_α)` at a point, in phase coordinates.
pub fn poincare_cartan_matrices(
    s: &SystemDef,
    d: &LagrangianDerived,
    at: &Assignment,
) -> Result<Vec<Matrix>, ExprError> {
    let coords = s.phase_coords();
    let dim = coords.len();
    let off = if s.is_cosymplectic() { s.k() } else { 0 };
    let mut out = Vec::with_capacity(s.k());
    for a in 0..s.k() {
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..s.n() {
            let qi = off + i;
            for (c, name) in coords.iter().enumerate() {
                let fc = d.theta[a][i].diff(name).eval(at)?;
                m[(qi, c)] += fc;
                m[(c, qi)] -= fc;
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Checks that `(ω_L^α, V)` (with `η^α = dx^α` when cosymplectic) is a
/// k-(co)symplectic structure at the point.
pub fn verify_lagrangian_structure(
    s: &SystemDef,
    d: &LagrangianDerived,
    at: &Assignment,
) -> Result<StructureReport, LagrangianError> {
    let omegas = poincare_cartan_matrices(s, d, at)?;
    let dim = s.phase_dim();
    let off = if s.is_cosymplectic() { s.k() } else { 0 };
    let vertical: Vec<usize> = (off + s.n()..dim).collect();
    let etas = s.is_cosymplectic().then(|| {
        (0..s.k())
            .map(|a| {
                let mut e = alloc::vec![0.0; dim];
                e[a] = 1.0;
                e
            })
            .collect::<Vec<_>>()
    });
    Ok(structures::verify_structure(&omegas, etas.as_deref(), &vertical)?)
}

/// One Euler–Lagrange equation written as
/// `Σ c·∂_α∂_β ψ^j + Σ b·∂_α ψ^j + source = 0` with `v` replaced by `∂ψ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElEquation {
    /// `(j, α, β, coefficient)` with `α ≤ β`.
    pub second: Vec<(usize, usize, usize, Expr)>,
    /// `(j, α, coefficient)`.
    pub first: Vec<(usize, usize, Expr)>,
    pub source: Expr,
}

/// The Euler–Lagrange equations in second-order form.
pub fn el_equations(s: &SystemDef) -> Result<Vec<ElEquation>, LagrangianError> {
    let d = derive_lagrangian(s)?;
    let (k, n) = (s.k(), s.n());
    let f = &s.frame;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut second = Vec::new();
        let mut first = Vec::new();
        for j in 0..n {
            for a in 0..k {
                for b in a..k {
                    let mut c = d.hessian[a * n + i][b * n + j].clone();
                    if a != b {
                        c = Expr::add(c, d.hessian[b * n + i][a * n + j].clone());
                    }
                    if !c.is_zero() {
                        second.push((j, a, b, c));
                    }
                }
                let c = d.theta[a][i].diff(f.config(j));
                if !c.is_zero() {
                    first.push((j, a, c));
                }
            }
        }
        let mut source = Expr::neg(s.expression.diff(f.config(i)));
        if s.is_cosymplectic() {
            let dx = Expr::sum((0..k).map(|a| d.theta[a][i].diff(f.base(a))));
            source = Expr::add(dx, source);
        }
        out.push(ElEquation { second, first, source });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::Formalism;
    use alloc::vec;

    fn lag(k: usize, n: usize, text: &str, params: &[(&str, f64)]) -> SystemDef {
        SystemDef::parse("t", k, n, SystemKind::Lagrangian, Formalism::KSymplectic, text, params).unwrap()
    }

    fn sine_gordon() -> SystemDef {
        lag(2, 1, "0.5*(v1^2 - a^2*v2^2) - Omega^2*(1 - cos(q))", &[("a", 1.5), ("Omega", 0.8)])
    }

    fn navier(lambda: f64, mu: f64) -> SystemDef {
        lag(
            2,
            2,
            "0.5*(lam + 2*mu)*(v11^2 + v22^2) + 0.5*mu*(v12^2 + v21^2) + (lam + mu)*v11*v22",
            &[("lam", lambda), ("mu", mu)],
        )
    }

    #[test]
    fn sine_gordon_energy_matches_hand_expansion() {
        let s = sine_gordon();
        let d = derive_lagrangian(&s).unwrap();
        let want = parse("0.5*(v1^2 - a^2*v2^2) + Omega^2*(1 - cos(q))").unwrap();
        let mut h = crate::sampling::Halton::new(3);
        for _ in 0..20 {
            let u = h.next().unwrap();
            let pt: Vec<f64> = u.iter().map(|t| 4.0 * t - 2.0).collect();
            let at = s.point(&pt);
            let e = d.energy.eval(&at).unwrap();
            assert!((e - want.eval(&at).unwrap()).abs() <= 1e-12 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn navier_hessian_entries() {
        let s = navier(1.0, 1.0);
        let d = derive_lagrangian(&s).unwrap();
        let at = s.point(&[0.0; 6]);
        let w = hessian_at(&d, &at).unwrap();
        // flattened order: v11, v21, v12, v22
        assert_eq!([w[(0, 0)], w[(1, 1)], w[(2, 2)], w[(3, 3)]], [3.0, 1.0, 1.0, 3.0]);
        assert_eq!(w[(0, 3)], 2.0);
        assert_eq!(w[(3, 0)], 2.0);
        let r = regularity(&d, &at).unwrap();
        assert!((r.det - 5.0).abs() < 1e-12);
        assert!(r.regular);
    }

    #[test]
    fn navier_singular_when_mu_vanishes() {
        for (lam, mu) in [(1.0, 0.0), (-1.5, 1.0), (3.0, -2.0)] {
            let s = navier(lam, mu);
            let d = derive_lagrangian(&s).unwrap();
            let r = regularity(&d, &s.point(&[0.0; 6])).unwrap();
            assert_eq!(r.det.abs(), 0.0, "lam={lam} mu={mu}");
            assert!(!r.regular);
        }
    }

    #[test]
    fn minimal_surface_hessian_is_identity_at_rest() {
        let s = lag(2, 1, "sqrt(1 + v1^2 + v2^2)", &[]);
        let d = derive_lagrangian(&s).unwrap();
        let r = regularity(&d, &s.point(&[0.3, 0.0, 0.0])).unwrap();
        assert_eq!(r.det, 1.0);
    }

    #[test]
    fn linear_lagrangian_is_singular() {
        let s = lag(1, 1, "v1", &[]);
        let d = derive_lagrangian(&s).unwrap();
        assert!(d.energy.is_zero());
        assert_eq!(d.hessian, vec![vec![Expr::zero()]]);
        assert!(!regularity(&d, &s.point(&[0.0, 0.0])).unwrap().regular);
    }

    #[test]
    fn euler_relation_for_quadratic_lagrangians() {
        for s in [navier(0.7, 1.3), lag(3, 1, "0.5*(v1^2 + v2^2 + v3^2)", &[])] {
            let d = derive_lagrangian(&s).unwrap();
            for pt in s_box(&s) {
                let at = s.point(&pt);
                let (e, l) = (d.energy.eval(&at).unwrap(), s.expression.eval(&at).unwrap());
                assert!((e - l).abs() <= 1e-12 * (1.0 + l.abs()));
            }
        }
    }

    fn s_box(s: &SystemDef) -> Vec<Vec<f64>> {
        crate::sampling::SampleBox::cube(s.phase_dim(), -1.0, 1.0).halton(30)
    }

    #[test]
    fn laplace_sopde_with_zero_trace() {
        let s = lag(2, 1, "0.5*(v1^2 + v2^2)", &[]);
        let mut x = KVectorField::zero(2, 1, false);
        x.config[0][0] = Expr::var("v1");
        x.config[1][0] = Expr::var("v2");
        x.fiber[0][0][0] = parse("q*v2").unwrap();
        x.fiber[1][1][0] = parse("-q*v2").unwrap();
        x.fiber[0][1][0] = parse("sin(v1)").unwrap();
        let r = check_sopde_el(&x, &s).unwrap();
        assert!(r.is_sopde);
        assert_eq!(r.el_defect, 0.0);
    }

    #[test]
    fn not_sopde_when_config_component_missing() {
        let s = sine_gordon();
        let mut x = KVectorField::zero(2, 1, false);
        x.config[1][0] = Expr::var("v2");
        assert!(!check_sopde_el(&x, &s).unwrap().is_sopde);
    }

    #[test]
    fn sine_gordon_accelerations() {
        let s = sine_gordon();
        // A − a²B = −Ω² sin q with B chosen freely
        let mut x = KVectorField::zero(2, 1, false);
        x.config[0][0] = Expr::var("v1");
        x.config[1][0] = Expr::var("v2");
        x.fiber[1][1][0] = parse("q^2 + v1").unwrap();
        x.fiber[0][0][0] = parse("a^2*(q^2 + v1) - Omega^2*sin(q)").unwrap();
        let r = check_sopde_el(&x, &s).unwrap();
        assert!(r.is_sopde);
        assert!(r.el_defect <= 1e-14, "{r:?}");
    }

    #[test]
    fn hessian_permutation_keeps_determinant() {
        let s = navier(0.4, 0.9);
        let d = derive_lagrangian(&s).unwrap();
        let w = hessian_at(&d, &s.point(&[0.0; 6])).unwrap();
        let perm = [2, 0, 3, 1];
        let wp = Matrix::from_fn(4, 4, |i, j| w[(perm[i], perm[j])]);
        assert!((linalg::det(&w).abs() - linalg::det(&wp).abs()).abs() < 1e-12);
    }

    #[test]
    fn regular_lagrangian_gives_ksymplectic_structure() {
        for s in [sine_gordon(), navier(1.0, 1.0), lag(2, 1, "sqrt(1 + v1^2 + v2^2)", &[])] {
            let d = derive_lagrangian(&s).unwrap();
            for pt in s_box(&s) {
                let r = verify_lagrangian_structure(&s, &d, &s.point(&pt)).unwrap();
                assert!(r.pass, "{}", s.expression);
            }
        }
    }

    #[test]
    fn singular_lagrangian_structure_fails() {
        let s = lag(2, 1, "v1 + q*v2", &[]);
        let d = derive_lagrangian(&s).unwrap();
        let r = verify_lagrangian_structure(&s, &d, &s.point(&[0.1, 0.2, 0.3])).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn sine_gordon_el_equation() {
        let eqs = el_equations(&sine_gordon()).unwrap();
        assert_eq!(eqs.len(), 1);
        let e = &eqs[0];
        let at = sine_gordon().point(&[0.4, 0.0, 0.0]);
        let coeffs: Vec<(usize, usize, f64)> =
            e.second.iter().map(|(_, a, b, c)| (*a, *b, c.eval(&at).unwrap())).collect();
        assert_eq!(coeffs, [(0, 0, 1.0), (1, 1, -2.25)]);
        assert!(e.first.is_empty());
        let want = 0.64 * crate::math::sin(0.4);
        assert!((e.source.eval(&at).unwrap() - want).abs() < 1e-15);
    }
}

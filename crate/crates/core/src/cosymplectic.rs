//! k-cosymplectic systems: explicit dependence on the base coordinates.
//!
//! A k-vector field on `R^k × (T^1_k)^*Q` solves the Hamiltonian equations
//! when
//!
//! ```text
//! (X_α)_β = δ_αβ,   (X_α)^i = ∂H/∂p^α_i,   Σ_β (X_β)^β_i = −∂H/∂q^i.
//! ```
//!
//! Suspension lifts an autonomous k-symplectic solution by adjoining the
//! unit base components.

use alloc::vec::Vec;

use crate::expr::{Assignment, Expr, ExprError};
use crate::hamiltonian::{self, CheckOptions, HamiltonianError, HdwSystem, SolutionReport};
use crate::lagrangian::{self, LagrangianDerived, LagrangianError, SopdeReport};
use crate::linalg::Matrix;
use crate::model::{Formalism, KVectorField, ModelError, SystemDef, SystemKind};
use crate::probe;
use crate::structures::{self, StructureError};

/// Sampled tolerance for the autonomy test.
pub const AUTONOMY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CosymError {
    #[error("expected a k-cosymplectic system")]
    NotCosymplectic,
    #[error("expected a k-symplectic system")]
    NotKSymplectic,
    #[error("expected a {0} system")]
    WrongKind(&'static str),
    #[error("system or field depends on the base coordinates")]
    NotAutonomous,
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Lagrangian(#[from] LagrangianError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CosymHdwSystem {
    pub velocities: Vec<Vec<Expr>>,
    pub trace: Vec<Expr>,
    /// `∂H/∂x^α`.
    pub reeb: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CosymLagrangian {
    pub derived: LagrangianDerived,
    /// `−∂L/∂x^α`, the values of `(R_L)_α(E_L)`.
    pub reeb_energy: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CosymDerived {
    Hamiltonian(CosymHdwSystem),
    Lagrangian(CosymLagrangian),
}

fn require_cosym(s: &SystemDef) -> Result<(), CosymError> {
    if !s.is_cosymplectic() {
        return Err(CosymError::NotCosymplectic);
    }
    Ok(())
}

pub fn derive_cosym(s: &SystemDef) -> Result<CosymDerived, CosymError> {
    require_cosym(s)?;
    let xs = s.frame.base_names();
    Ok(match s.kind {
        SystemKind::Hamiltonian => {
            let HdwSystem { velocities, trace } = hamiltonian::hdw_rhs(s);
            CosymDerived::Hamiltonian(CosymHdwSystem {
                velocities,
                trace,
                reeb: xs.iter().map(|x| s.expression.diff(x)).collect(),
            })
        }
        SystemKind::Lagrangian => CosymDerived::Lagrangian(CosymLagrangian {
            derived: lagrangian::derive_lagrangian(s)?,
            reeb_energy: xs.iter().map(|x| Expr::neg(s.expression.diff(x))).collect(),
        }),
    })
}

fn hamiltonian_parts(s: &SystemDef) -> Result<HdwSystem, CosymError> {
    require_cosym(s)?;
    if s.kind != SystemKind::Hamiltonian {
        return Err(CosymError::WrongKind("Hamiltonian"));
    }
    Ok(hamiltonian::hdw_rhs(s))
}

fn identity_base(k: usize) -> Vec<Vec<Expr>> {
    (0..k).map(|a| (0..k).map(|b| if a == b { Expr::one() } else { Expr::zero() }).collect()).collect()
}

/// Gauge solution with unit base components.
pub fn cosym_gauge_solution(s: &SystemDef) -> Result<KVectorField, CosymError> {
    let hdw = hamiltonian_parts(s)?;
    let mut x = KVectorField::zero(s.k(), s.n(), true);
    x.base = Some(identity_base(s.k()));
    hamiltonian::fill_gauge(&mut x, &hdw);
    Ok(x)
}

fn base_defects(x: &KVectorField, unit: bool) -> Vec<Expr> {
    let mut out = Vec::new();
    if let Some(b) = &x.base {
        for (a, row) in b.iter().enumerate() {
            for (c, e) in row.iter().enumerate() {
                let want = if unit && a == c { Expr::one() } else { Expr::zero() };
                out.push(Expr::sub(e.clone(), want));
            }
        }
    }
    out
}

pub fn check_cosym_solution(x: &KVectorField, s: &SystemDef) -> Result<SolutionReport, CosymError> {
    check_cosym_solution_with(x, s, &CheckOptions::default())
}

pub fn check_cosym_solution_with(
    x: &KVectorField,
    s: &SystemDef,
    opts: &CheckOptions,
) -> Result<SolutionReport, CosymError> {
    let hdw = hamiltonian_parts(s)?;
    s.validate_field(x)?;
    let mut defects = base_defects(x, true);
    defects.extend(hamiltonian::solution_defects(x, &hdw));
    let mut kernel = base_defects(x, false);
    kernel.extend(hamiltonian::kernel_conditions(x));
    Ok(hamiltonian::report(s, x, &defects, &kernel, opts)?)
}

/// SOPDE and trace-condition check for k-cosymplectic Lagrangians; the base
/// components must be `δ_αβ` for the field to count as a SOPDE.
pub fn check_cosym_sopde_el(x: &KVectorField, s: &SystemDef) -> Result<SopdeReport, CosymError> {
    check_cosym_sopde_el_with(x, s, &CheckOptions::default())
}

pub fn check_cosym_sopde_el_with(
    x: &KVectorField,
    s: &SystemDef,
    opts: &CheckOptions,
) -> Result<SopdeReport, CosymError> {
    require_cosym(s)?;
    let mut r = lagrangian::check_sopde_el_with(x, s, opts)?;
    let pts = lagrangian::sample_points(s, opts)?;
    let (base, _) = probe::max_abs(s, &base_defects(x, true), &pts)?;
    r.sopde_defect = r.sopde_defect.max(base);
    r.is_sopde = r.sopde_defect <= opts.tol;
    Ok(r)
}

/// Largest violation of `(R_L)_α(E_L) = −∂L/∂x^α` at a point, with the
/// Reeb fields solved from `dx^α` and the Poincaré–Cartan matrices.
pub fn reeb_energy_defect(s: &SystemDef, at: &Assignment) -> Result<f64, CosymError> {
    require_cosym(s)?;
    let d = lagrangian::derive_lagrangian(s)?;
    let omegas = lagrangian::poincare_cartan_matrices(s, &d, at)?;
    let coords = s.phase_coords();
    let dim = coords.len();
    let etas: Vec<Vec<f64>> = (0..s.k()).map(|a| (0..dim).map(|c| if c == a { 1.0 } else { 0.0 }).collect()).collect();
    let reeb: Matrix = structures::reeb_fields(&etas, &omegas)?;
    let grad: Vec<f64> = coords.iter().map(|c| d.energy.diff(c).eval(at)).collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for a in 0..s.k() {
        let lhs: f64 = reeb.row(a).iter().zip(&grad).map(|(r, g)| r * g).sum();
        let rhs = -s.expression.diff(s.frame.base(a)).eval(at)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// True when every `∂(expression)/∂x^α` vanishes at the sample points.
pub fn is_autonomous(s: &SystemDef) -> Result<bool, CosymError> {
    require_cosym(s)?;
    let grads: Vec<Expr> = s.frame.base_names().iter().map(|x| s.expression.diff(x)).collect();
    let pts = probe::default_box(s).halton(crate::sampling::DEFAULT_SAMPLES);
    let (worst, _) = probe::max_abs(s, &grads, &pts)?;
    Ok(worst <= AUTONOMY_TOL)
}

/// Re-tags an autonomous system as k-cosymplectic and adjoins `∂/∂x^α` to
/// each component of `x`.
pub fn suspend(s: &SystemDef, x: &KVectorField) -> Result<(SystemDef, KVectorField), CosymError> {
    if s.is_cosymplectic() {
        return Err(CosymError::NotKSymplectic);
    }
    s.validate_field(x)?;
    let lifted = SystemDef::new(
        s.name.clone(),
        s.frame.clone(),
        s.kind,
        Formalism::KCosymplectic,
        s.expression.clone(),
        s.params.clone(),
    )?;
    let mut xb = x.clone();
    xb.base = Some(identity_base(s.k()));
    Ok((lifted, xb))
}

/// Inverse of [`suspend`]: drops the base components of an autonomous system.
pub fn desuspend(s: &SystemDef, x: &KVectorField) -> Result<(SystemDef, KVectorField), CosymError> {
    if !is_autonomous(s)? {
        return Err(CosymError::NotAutonomous);
    }
    let mut xp = x.clone();
    xp.base = None;
    let xs = s.frame.base_names();
    let uses_base = |e: &Expr| xs.iter().any(|b| e.depends_on(b));
    if xp.config.iter().flatten().chain(xp.fiber.iter().flatten().flatten()).any(uses_base) {
        return Err(CosymError::NotAutonomous);
    }
    // drop symbolic x terms whose derivative vanished numerically
    let zero_x = xs.iter().map(|b| (b.clone(), Expr::zero())).collect();
    let down = SystemDef::new(
        s.name.clone(),
        s.frame.clone(),
        s.kind,
        Formalism::KSymplectic,
        s.expression.substitute(&zero_x),
        s.params.clone(),
    )?;
    down.validate_field(&xp)?;
    Ok((down, xp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::hamiltonian::{check_solution, gauge_solution};

    fn sys(kind: SystemKind, form: Formalism, k: usize, n: usize, text: &str, params: &[(&str, f64)]) -> SystemDef {
        SystemDef::parse("t", k, n, kind, form, text, params).unwrap()
    }

    fn scalar_field() -> SystemDef {
        // Minkowski signature (−,+,+,+): √−g = 1, g_{αα} = (−1, 1, 1, 1)
        sys(
            SystemKind::Hamiltonian,
            Formalism::KCosymplectic,
            4,
            1,
            "0.5*(-p1^2 + p2^2 + p3^2 + p4^2) - (lam*q^4 - 0.5*m^2*q^2)",
            &[("lam", 0.3), ("m", 1.2)],
        )
    }

    #[test]
    fn scalar_field_derivatives() {
        let s = scalar_field();
        let CosymDerived::Hamiltonian(h) = derive_cosym(&s).unwrap() else { panic!() };
        let at = s.point(&[0.1, 0.2, 0.3, 0.4, 0.7, 1.0, 2.0, 3.0, 4.0]);
        // ∂H/∂q = −(F′(q) − m² q)
        let want = -(4.0 * 0.3 * 0.7f64.powi(3) - 1.44 * 0.7);
        assert!((-h.trace[0].eval(&at).unwrap() - want).abs() < 1e-14);
        let p: Vec<f64> = h.velocities.iter().map(|r| r[0].eval(&at).unwrap()).collect();
        assert_eq!(p, [-1.0, 2.0, 3.0, 4.0]);
        assert!(h.reeb.iter().all(Expr::is_zero));
    }

    #[test]
    fn electrostatic_with_position_dependent_density() {
        let s = sys(
            SystemKind::Hamiltonian,
            Formalism::KCosymplectic,
            3,
            1,
            "4*pi*(r + s*x1)*q + 0.5*(p1^2 + p2^2 + p3^2)",
            &[("r", 0.5), ("s", 0.25)],
        );
        let x = cosym_gauge_solution(&s).unwrap();
        let trace = Expr::sum((0..3).map(|a| x.fiber[a][a][0].clone()));
        let at = s.point(&[0.8, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0]);
        let want = -4.0 * core::f64::consts::PI * (0.5 + 0.25 * 0.8);
        assert!((trace.eval(&at).unwrap() - want).abs() < 1e-14);
        assert!(check_cosym_solution(&x, &s).unwrap().is_solution);
        assert!(!is_autonomous(&s).unwrap());
    }

    #[test]
    fn evolution_field_for_k1() {
        let s = sys(SystemKind::Hamiltonian, Formalism::KCosymplectic, 1, 1, "0.5*p1^2 + x1*q^2", &[]);
        let x = cosym_gauge_solution(&s).unwrap();
        assert_eq!(x.base, Some(alloc::vec![alloc::vec![Expr::one()]]));
        assert_eq!(x.config[0][0], s.expression.diff("p1"));
        assert_eq!(x.fiber[0][0][0], Expr::neg(s.expression.diff("q")));
    }

    #[test]
    fn gauge_passes_and_wrong_base_fails() {
        let s = scalar_field();
        let x = cosym_gauge_solution(&s).unwrap();
        assert!(check_cosym_solution(&x, &s).unwrap().is_solution);
        let mut bad = x.clone();
        bad.base.as_mut().unwrap()[0][1] = Expr::one();
        assert!(!check_cosym_solution(&bad, &s).unwrap().is_solution);
    }

    #[test]
    fn kernel_offsets_preserve_solutions() {
        let s = scalar_field();
        let x = cosym_gauge_solution(&s).unwrap();
        let mut y = KVectorField::zero(4, 1, true);
        let g = parse("x2*q + p3").unwrap();
        y.fiber[1][1][0] = g.clone();
        y.fiber[3][3][0] = Expr::neg(g);
        y.fiber[0][2][0] = parse("x1^2").unwrap();
        assert!(check_cosym_solution(&y, &s).unwrap().kernel_member);
        assert!(check_cosym_solution(&x.plus(&y).unwrap(), &s).unwrap().is_solution);
        // nonzero base part leaves the kernel
        y.base.as_mut().unwrap()[1][0] = Expr::one();
        assert!(!check_cosym_solution(&y, &s).unwrap().kernel_member);
    }

    #[test]
    fn suspension_round_trip() {
        let s = sys(
            SystemKind::Hamiltonian,
            Formalism::KSymplectic,
            3,
            1,
            "4*pi*r*q + 0.5*(p1^2 + p2^2 + p3^2)",
            &[("r", 1.0)],
        );
        let x = gauge_solution(&s).unwrap();
        let (sc, xc) = suspend(&s, &x).unwrap();
        assert!(is_autonomous(&sc).unwrap());
        let r = check_cosym_solution(&xc, &sc).unwrap();
        assert!(r.is_solution && r.max_defect == 0.0);
        let (sd, xd) = desuspend(&sc, &xc).unwrap();
        assert_eq!(xd, x);
        assert!(check_solution(&xd, &sd).unwrap().is_solution);
    }

    #[test]
    fn zero_system_suspends_to_base_directions() {
        let s = sys(SystemKind::Hamiltonian, Formalism::KSymplectic, 2, 1, "0", &[]);
        let (_, xc) = suspend(&s, &KVectorField::zero(2, 1, false)).unwrap();
        assert_eq!(xc.components(0)[..2], [Expr::one(), Expr::zero()]);
        assert_eq!(xc.components(1)[..2], [Expr::zero(), Expr::one()]);
        assert!(xc.components(0)[2..].iter().all(Expr::is_zero));
    }

    #[test]
    fn non_autonomous_refuses_desuspension() {
        let s = sys(SystemKind::Hamiltonian, Formalism::KCosymplectic, 1, 1, "0.5*p1^2 + x1*q", &[]);
        let x = cosym_gauge_solution(&s).unwrap();
        assert_eq!(desuspend(&s, &x).unwrap_err(), CosymError::NotAutonomous);
    }

    #[test]
    fn lagrangian_reeb_identity() {
        let s = sys(
            SystemKind::Lagrangian,
            Formalism::KCosymplectic,
            2,
            1,
            "0.5*(1 + 0.2*x1)*(v1^2 - v2^2) - (1 + x2^2)*q^2 + x1*q*v2",
            &[],
        );
        for pt in crate::sampling::SampleBox::cube(5, -1.0, 1.0).halton(20) {
            let d = reeb_energy_defect(&s, &s.point(&pt)).unwrap();
            assert!(d <= 1e-10, "{d}");
        }
    }

    #[test]
    fn cosymplectic_lagrangian_sopde() {
        let s = sys(SystemKind::Lagrangian, Formalism::KCosymplectic, 2, 1, "0.5*(v1^2 + v2^2) + x1*q", &[]);
        let mut x = KVectorField::zero(2, 1, true);
        x.base = Some(identity_base(2));
        x.config[0][0] = Expr::var("v1");
        x.config[1][0] = Expr::var("v2");
        x.fiber[0][0][0] = Expr::var("x1");
        let r = check_cosym_sopde_el(&x, &s).unwrap();
        assert!(r.is_sopde && r.el_defect == 0.0, "{r:?}");
        x.base = Some(alloc::vec![alloc::vec![Expr::zero(); 2]; 2]);
        assert!(!check_cosym_sopde_el(&x, &s).unwrap().is_sopde);
    }
}

//! Legendre transformation `FL(q, v) = (q, ∂L/∂v)` and the induced
//! Hamiltonian `H = E_L ∘ FL⁻¹`.
//!
//! Positions are `(x, q)` for k-cosymplectic systems and `q` otherwise;
//! velocities and momenta are flattened `α·n + i`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{Assignment, CompiledExpr, Expr, ExprError};
use crate::lagrangian::{self, LagrangianDerived, LagrangianError};
use crate::linalg::{self, Lu, Matrix};
use crate::model::{SystemDef, SystemKind};
use crate::structures::canonical_forms;

/// Newton stopping tolerance on the ∞-norm of `p − ∂L/∂v`.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LegendreError {
    #[error("velocity Hessian is singular (det {det:e}) at Newton iteration {iteration}")]
    SingularHessian { iteration: usize, det: f64 },
    #[error("Newton inversion did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("expected {expected} values for {what}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error(transparent)]
    Lagrangian(#[from] LagrangianError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Symbolic momenta `p^α_i = ∂L/∂v^i_α` of a Lagrangian system.
#[derive(Clone, Debug)]
pub struct LegendreMap {
    pub source: SystemDef,
    pub momenta: Vec<Vec<Expr>>,
    derived: LagrangianDerived,
    theta_c: Vec<CompiledExpr>,
    hessian_c: Vec<CompiledExpr>,
}

pub fn legendre_forward(s: &SystemDef) -> Result<LegendreMap, LegendreError> {
    let derived = lagrangian::derive_lagrangian(s)?;
    let theta_c = derived.theta.iter().flatten().map(|e| s.compile(e)).collect::<Result<_, _>>()?;
    let hessian_c = derived.hessian.iter().flatten().map(|e| s.compile(e)).collect::<Result<_, _>>()?;
    Ok(LegendreMap { source: s.clone(), momenta: derived.theta.clone(), derived, theta_c, hessian_c })
}

impl LegendreMap {
    pub fn derived(&self) -> &LagrangianDerived {
        &self.derived
    }

    fn positions(&self) -> usize {
        let s = &self.source;
        s.n() + if s.is_cosymplectic() { s.k() } else { 0 }
    }

    fn fibers(&self) -> usize {
        self.source.n() * self.source.k()
    }

    fn check_len(&self, what: &'static str, got: usize, expected: usize) -> Result<(), LegendreError> {
        if got != expected {
            return Err(LegendreError::Dimension { what, expected, got });
        }
        Ok(())
    }

    fn slots(&self, pos: &[f64], v: &[f64]) -> Vec<f64> {
        let mut phase = pos.to_vec();
        phase.extend_from_slice(v);
        self.source.slot_values(&phase)
    }

    /// Momenta at `(pos, v)`.
    pub fn apply(&self, pos: &[f64], v: &[f64]) -> Result<Vec<f64>, LegendreError> {
        self.check_len("positions", pos.len(), self.positions())?;
        self.check_len("velocities", v.len(), self.fibers())?;
        let slots = self.slots(pos, v);
        Ok(self.theta_c.iter().map(|c| c.eval(&slots)).collect::<Result<_, _>>()?)
    }

    fn hessian(&self, slots: &[f64]) -> Result<Matrix, ExprError> {
        let m = self.fibers();
        let mut w = Matrix::zeros(m, m);
        for (idx, c) in self.hessian_c.iter().enumerate() {
            w[(idx / m, idx % m)] = c.eval(slots)?;
        }
        Ok(w)
    }

    /// Solves `∂L/∂v(pos, v) = p` for `v` by damped Newton iteration from `guess`.
    pub fn invert(&self, pos: &[f64], p: &[f64], guess: &[f64]) -> Result<Vec<f64>, LegendreError> {
        self.check_len("positions", pos.len(), self.positions())?;
        self.check_len("momenta", p.len(), self.fibers())?;
        self.check_len("guess", guess.len(), self.fibers())?;
        let residual = |v: &[f64]| -> Result<(Vec<f64>, f64), LegendreError> {
            let theta = self.apply(pos, v)?;
            let r: Vec<f64> = p.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let norm = r.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
            Ok((r, norm))
        };
        let mut v = guess.to_vec();
        let (mut r, mut norm) = residual(&v)?;
        for iteration in 0..NEWTON_MAX_ITERS {
            if norm <= NEWTON_TOL {
                return Ok(v);
            }
            let w = self.hessian(&self.slots(pos, &v))?;
            let reg = lagrangian::regularity_of(&w);
            if !reg.regular {
                return Err(LegendreError::SingularHessian { iteration, det: reg.det });
            }
            let step = Lu::new(&w).solve(&r).ok_or(LegendreError::SingularHessian { iteration, det: reg.det })?;
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = v.iter().zip(&step).map(|(a, d)| a + t * d).collect();
                let next = residual(&trial);
                if let Ok((r2, n2)) = next {
                    if n2 < norm {
                        v = trial;
                        r = r2;
                        norm = n2;
                        break;
                    }
                }
                t *= 0.5;
                if t < 1e-6 {
                    return Err(LegendreError::NoConvergence { iterations: iteration + 1, residual: norm });
                }
            }
        }
        if norm <= NEWTON_TOL {
            return Ok(v);
        }
        Err(LegendreError::NoConvergence { iterations: NEWTON_MAX_ITERS, residual: norm })
    }
}

pub fn legendre_invert(m: &LegendreMap, pos: &[f64], p: &[f64], guess: &[f64]) -> Result<Vec<f64>, LegendreError> {
    m.invert(pos, p, guess)
}

/// `H = E_L ∘ FL⁻¹`, numerically for any regular `L` and in closed form
/// when the velocity Hessian is constant.
#[derive(Clone, Debug)]
pub struct InducedHamiltonian {
    pub map: LegendreMap,
    energy_c: CompiledExpr,
    /// Hamiltonian system on the same frame; present for constant Hessians.
    pub symbolic: Option<SystemDef>,
}

pub fn induced_hamiltonian(s: &SystemDef) -> Result<InducedHamiltonian, LegendreError> {
    let map = legendre_forward(s)?;
    let energy_c = s.compile(&map.derived.energy)?;
    let symbolic = closed_form(s, &map)?;
    Ok(InducedHamiltonian { map, energy_c, symbolic })
}

fn closed_form(s: &SystemDef, map: &LegendreMap) -> Result<Option<SystemDef>, LegendreError> {
    let consts = s.constants();
    let constant = map.derived.hessian.iter().flatten().all(|e| e.free_vars().iter().all(|v| consts.contains(v)));
    if !constant {
        return Ok(None);
    }
    let w = lagrangian::hessian_at(&map.derived, &consts)?;
    let winv = match linalg::inverse(&w) {
        Some(m) if lagrangian::regularity_of(&w).regular => m,
        _ => return Ok(None),
    };
    let (k, n) = (s.k(), s.n());
    let f = &s.frame;
    let vel: Vec<&str> = (0..k).flat_map(|a| (0..n).map(move |i| (a, i))).map(|(a, i)| f.velocity(i, a)).collect();
    let at_rest: BTreeMap<String, Expr> = vel.iter().map(|v| (String::from(*v), Expr::zero())).collect();
    // p − ∂L/∂v at v = 0, then v = W⁻¹ (p − b)
    let shifted: Vec<Expr> = map
        .momenta
        .iter()
        .flatten()
        .enumerate()
        .map(|(idx, t)| Expr::sub(Expr::var(f.momentum(idx / n, idx % n)), t.substitute(&at_rest)))
        .collect();
    let mut subst = BTreeMap::new();
    for (r, name) in vel.iter().enumerate() {
        let terms = shifted.iter().enumerate().map(|(c, e)| Expr::mul(Expr::constant(winv[(r, c)]), e.clone()));
        subst.insert(String::from(*name), Expr::sum(terms));
    }
    let h = map.derived.energy.substitute(&subst);
    let name = alloc::format!("{}_induced", s.name);
    let sys = SystemDef::new(name, f.clone(), SystemKind::Hamiltonian, s.formalism, h, s.params.clone())
        .map_err(LagrangianError::from)?;
    Ok(Some(sys))
}

impl InducedHamiltonian {
    /// `H(pos, p)`; Newton starts from `guess` (zeros when `None`).
    pub fn eval(&self, pos: &[f64], p: &[f64], guess: Option<&[f64]>) -> Result<f64, LegendreError> {
        let zeros = vec![0.0; p.len()];
        let v = self.map.invert(pos, p, guess.unwrap_or(&zeros))?;
        Ok(self.energy_c.eval(&self.map.slots(pos, &v))?)
    }
}

/// Largest entrywise mismatch between `FL^*θ^α`, `FL^*ω^α` and the
/// Poincaré–Cartan data `θ_L^α`, `ω_L^α` at a velocity-space point.
pub fn pullback_check(s: &SystemDef, at: &Assignment) -> Result<f64, LegendreError> {
    let map = legendre_forward(s)?;
    let d = map.derived();
    let coords = s.phase_coords();
    let dim = coords.len();
    let (k, n) = (s.k(), s.n());
    let cos = s.is_cosymplectic();
    let off = if cos { k } else { 0 };

    // Jacobian of FL: identity on positions, ∂θ/∂z on fiber rows
    let mut jac = Matrix::zeros(dim, dim);
    for r in 0..off + n {
        jac[(r, r)] = 1.0;
    }
    let theta: Vec<&Expr> = d.theta.iter().flatten().collect();
    let mut p = vec![0.0; k * n];
    for (idx, t) in theta.iter().enumerate() {
        p[idx] = t.eval(at)?;
        for (c, name) in coords.iter().enumerate() {
            jac[(off + n + idx, c)] = t.diff(name).eval(at)?;
        }
    }

    let canon = canonical_forms(k, n, cos);
    let omega_l = lagrangian::poincare_cartan_matrices(s, d, at)?;
    let jt = jac.transpose();
    let mut worst: f64 = 0.0;
    for a in 0..k {
        // θ^α = p^α_i dq^i at FL(z)
        let mut th = vec![0.0; dim];
        for i in 0..n {
            th[off + i] = p[a * n + i];
        }
        let pulled = jt.mul_vec(&th);
        for (c, val) in pulled.iter().enumerate() {
            let want = if c >= off && c < off + n { p[a * n + c - off] } else { 0.0 };
            worst = worst.max((val - want).abs());
        }
        let pulled = jt.matmul(&canon.omegas[a]).matmul(&jac);
        worst = worst.max(pulled.max_abs_diff(&omega_l[a]));
    }
    Ok(worst)
}

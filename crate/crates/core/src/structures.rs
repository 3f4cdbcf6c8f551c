//! Pointwise k-symplectic and k-cosymplectic structures.
//!
//! A 2-form is an antisymmetric `d×d` matrix `A` with `ω(u, w) = uᵀ A w`;
//! a 1-form is a length-`d` vector. The distribution `V` is given by the
//! coordinate indices whose unit vectors span it.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, Matrix};

/// Relative tolerance used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;
/// Relative tolerance for antisymmetry and vanishing on `V`.
pub const ZERO_TOL: f64 = 1e-12;
/// Largest acceptable residual of the Reeb conditions.
pub const REEB_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructureError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("form {index} is not antisymmetric (defect {defect:e})")]
    NotAntisymmetric { index: usize, defect: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("Reeb fields are not uniquely determined")]
    NoUniqueReeb,
}

/// Canonical forms on `(T^1_k)^*Q` or `R^k × (T^1_k)^*Q` in adapted coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForms {
    pub etas: Option<Vec<Vec<f64>>>,
    pub omegas: Vec<Matrix>,
    pub vertical: Vec<usize>,
    pub dim: usize,
}

/// `ω^α = dq^i ∧ dp^α_i` (and `η^α = dx^α` in the cosymplectic case).
pub fn canonical_forms(k: usize, n: usize, cosymplectic: bool) -> CanonicalForms {
    let off = if cosymplectic { k } else { 0 };
    let dim = off + n * (k + 1);
    let q = |i: usize| off + i;
    let p = |alpha: usize, i: usize| off + n + alpha * n + i;
    let omegas = (0..k)
        .map(|alpha| {
            let mut a = Matrix::zeros(dim, dim);
            for i in 0..n {
                a[(q(i), p(alpha, i))] = 1.0;
                a[(p(alpha, i), q(i))] = -1.0;
            }
            a
        })
        .collect();
    let etas = cosymplectic.then(|| {
        (0..k)
            .map(|alpha| {
                let mut e = vec![0.0; dim];
                e[alpha] = 1.0;
                e
            })
            .collect()
    });
    CanonicalForms { etas, omegas, vertical: (off + n..dim).collect(), dim }
}

impl CanonicalForms {
    pub fn verify(&self) -> Result<StructureReport, StructureError> {
        verify_structure(&self.omegas, self.etas.as_deref(), &self.vertical)
    }
}

/// Outcome of the axiom checks.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StructureReport {
    pub dim: usize,
    pub k: usize,
    pub vanishes_on_v: bool,
    pub kernel_intersection_dim: usize,
    pub eta_wedge_nonzero: Option<bool>,
    pub ker_omega_dim: Option<usize>,
    pub v_dim_ok: bool,
    pub pass: bool,
    pub reeb: Option<Matrix>,
}

fn check_shapes(omegas: &[Matrix], etas: Option<&[Vec<f64>]>, v: &[usize]) -> Result<usize, StructureError> {
    let d = match omegas.first() {
        Some(m) => m.rows(),
        None => return Err(StructureError::DimensionMismatch("no 2-forms given".into())),
    };
    for (idx, m) in omegas.iter().enumerate() {
        if m.rows() != d || m.cols() != d {
            return Err(StructureError::DimensionMismatch(format!(
                "form {idx} is {}x{}, expected {d}x{d}",
                m.rows(),
                m.cols()
            )));
        }
    }
    if let Some(etas) = etas {
        if etas.len() != omegas.len() {
            return Err(StructureError::DimensionMismatch(format!(
                "{} 1-forms for {} 2-forms",
                etas.len(),
                omegas.len()
            )));
        }
        if let Some(e) = etas.iter().find(|e| e.len() != d) {
            return Err(StructureError::DimensionMismatch(format!("1-form of length {}, expected {d}", e.len())));
        }
    }
    let mut seen = vec![false; d];
    for &i in v {
        if i >= d || seen[i] {
            return Err(StructureError::InvalidDistribution(format!("bad or repeated index {i}")));
        }
        seen[i] = true;
    }
    Ok(d)
}

fn omega_scale(omegas: &[Matrix]) -> f64 {
    omegas.iter().map(Matrix::max_abs).fold(0.0, f64::max)
}

/// Checks the k-symplectic axioms (`etas = None`) or the k-cosymplectic
/// axioms, and computes the Reeb fields when the latter hold.
pub fn verify_structure(
    omegas: &[Matrix],
    etas: Option<&[Vec<f64>]>,
    v: &[usize],
) -> Result<StructureReport, StructureError> {
    let d = check_shapes(omegas, etas, v)?;
    let k = omegas.len();
    let scale = omega_scale(omegas);
    for (index, m) in omegas.iter().enumerate() {
        let defect = m.max_abs_diff(&m.transpose().scale(-1.0));
        if defect > ZERO_TOL * scale {
            return Err(StructureError::NotAntisymmetric { index, defect });
        }
    }

    let mut vanishes = omegas.iter().all(|m| v.iter().all(|&a| v.iter().all(|&b| m[(a, b)].abs() <= ZERO_TOL * scale)));

    let mut blocks: Vec<&Matrix> = omegas.iter().collect();
    let omega_stack = Matrix::vstack(&blocks);
    let omega_rank = linalg::rank(&omega_stack, RANK_TOL);

    let eta_matrix = etas.map(Matrix::from_rows);
    let (kernel_dim, eta_wedge, ker_omega) = match &eta_matrix {
        None => (d - omega_rank, None, None),
        Some(eta) => {
            let eta_scale = eta.max_abs();
            vanishes &= v.iter().all(|&a| (0..k).all(|r| eta[(r, a)].abs() <= ZERO_TOL * eta_scale));
            let wedge = linalg::rank(eta, RANK_TOL) == k;
            // rank is relative to the largest entry, so bring both stacks to unit scale first
            let eta_n = if eta_scale > 0.0 { eta.scale(1.0 / eta_scale) } else { eta.clone() };
            let om_n = if scale > 0.0 { omega_stack.scale(1.0 / scale) } else { omega_stack.clone() };
            blocks = vec![&eta_n, &om_n];
            let full = Matrix::vstack(&blocks);
            (d - linalg::rank(&full, RANK_TOL), Some(wedge), Some(d - omega_rank))
        }
    };

    let base = if etas.is_some() { k } else { 0 };
    let v_dim_ok = (d - base) % (k + 1) == 0 && v.len() == (d - base) / (k + 1) * k;
    let pass =
        vanishes && kernel_dim == 0 && v_dim_ok && eta_wedge.unwrap_or(true) && ker_omega.is_none_or(|dim| dim == k);

    let reeb = match etas {
        Some(e) if pass => Some(reeb_fields(e, omegas)?),
        _ => None,
    };

    Ok(StructureReport {
        dim: d,
        k,
        vanishes_on_v: vanishes,
        kernel_intersection_dim: kernel_dim,
        eta_wedge_nonzero: eta_wedge,
        ker_omega_dim: ker_omega,
        v_dim_ok,
        pass,
        reeb,
    })
}

/// Solves `η^β(R_α) = δ^β_α`, `ι_{R_α} Ω^β = 0`; row `α` of the result is `R_α`.
pub fn reeb_fields(etas: &[Vec<f64>], omegas: &[Matrix]) -> Result<Matrix, StructureError> {
    let d = check_shapes(omegas, Some(etas), &[])?;
    let k = omegas.len();
    let scale = omega_scale(omegas);
    let eta = Matrix::from_rows(etas);
    let om: Vec<Matrix> = omegas.iter().map(|m| if scale > 0.0 { m.scale(1.0 / scale) } else { m.clone() }).collect();
    let mut blocks = vec![&eta];
    blocks.extend(om.iter());
    let a = Matrix::vstack(&blocks);
    let mut out = Matrix::zeros(k, d);
    for alpha in 0..k {
        let mut rhs = vec![0.0; a.rows()];
        rhs[alpha] = 1.0;
        let (x, res) = linalg::lstsq(&a, &rhs, RANK_TOL).ok_or(StructureError::NoUniqueReeb)?;
        if res > REEB_TOL {
            return Err(StructureError::NoUniqueReeb);
        }
        for (j, v) in x.into_iter().enumerate() {
            out[(alpha, j)] = v;
        }
    }
    Ok(out)
}

/// Largest violation of the Reeb conditions by the rows of `reeb`.
pub fn reeb_residual(reeb: &Matrix, etas: &[Vec<f64>], omegas: &[Matrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for alpha in 0..reeb.rows() {
        let r = reeb.row(alpha);
        for (beta, e) in etas.iter().enumerate() {
            let dot: f64 = e.iter().zip(r).map(|(a, b)| a * b).sum();
            let want = if alpha == beta { 1.0 } else { 0.0 };
            worst = worst.max((dot - want).abs());
        }
        for m in omegas {
            for v in m.mul_vec(r) {
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k2_n1_omega_one() {
        let c = canonical_forms(2, 1, false);
        assert_eq!(c.dim, 3);
        assert_eq!(c.omegas[0].to_rows(), vec![vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]);
        assert_eq!(c.vertical, [1, 2]);
    }

    #[test]
    fn k1_is_standard_symplectic() {
        let c = canonical_forms(1, 1, false);
        assert_eq!(c.omegas[0].to_rows(), vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn cosymplectic_layout() {
        let c = canonical_forms(2, 2, true);
        assert_eq!(c.dim, 8);
        let etas = c.etas.unwrap();
        assert_eq!(etas[0][0], 1.0);
        assert_eq!(etas[1][1], 1.0);
        assert_eq!(etas[0].iter().sum::<f64>(), 1.0);
        assert_eq!(c.vertical, [4, 5, 6, 7]);
    }

    #[test]
    fn canonical_k3_n1_passes() {
        let r = canonical_forms(3, 1, false).verify().unwrap();
        assert!(r.pass && r.vanishes_on_v);
        assert_eq!(r.kernel_intersection_dim, 0);
    }

    #[test]
    fn dropping_a_form_leaves_a_kernel() {
        let mut c = canonical_forms(2, 1, false);
        c.omegas[1] = Matrix::zeros(3, 3);
        let r = c.verify().unwrap();
        assert!(!r.pass);
        assert_eq!(r.kernel_intersection_dim, 1);
    }

    #[test]
    fn canonical_cosymplectic_k2_n1() {
        let c = canonical_forms(2, 1, true);
        let r = c.verify().unwrap();
        assert!(r.pass);
        assert_eq!(r.ker_omega_dim, Some(2));
        assert_eq!(r.eta_wedge_nonzero, Some(true));
        let reeb = r.reeb.unwrap();
        assert_eq!(reeb.to_rows()[0], [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(reeb.to_rows()[1], [0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn mechanics_reeb_is_time_direction() {
        let c = canonical_forms(1, 2, true);
        let reeb = c.verify().unwrap().reeb.unwrap();
        assert_eq!(reeb.to_rows()[0], [1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn permuted_basis_permutes_reeb() {
        let c = canonical_forms(2, 1, true);
        let perm = [3, 4, 0, 2, 1];
        let moved = |m: &Matrix| Matrix::from_fn(5, 5, |i, j| m[(perm[i], perm[j])]);
        let omegas: Vec<Matrix> = c.omegas.iter().map(moved).collect();
        let etas: Vec<Vec<f64>> =
            c.etas.as_ref().unwrap().iter().map(|e| (0..5).map(|i| e[perm[i]]).collect()).collect();
        let vertical: Vec<usize> = (0..5).filter(|&i| perm[i] >= 3).collect();
        let r = verify_structure(&omegas, Some(&etas), &vertical).unwrap();
        assert!(r.pass);
        let reeb = r.reeb.unwrap();
        // R_1 = e_{x1}, and x1 now lives at the position i with perm[i] == 0
        assert_eq!(reeb.row(0), [0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(reeb.row(1), [0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(reeb_residual(&reeb, &etas, &omegas) <= REEB_TOL);
    }

    #[test]
    fn all_small_canonical_models_pass() {
        for k in 1..=3 {
            for n in 1..=3 {
                for cos in [false, true] {
                    let c = canonical_forms(k, n, cos);
                    let r = c.verify().unwrap();
                    assert!(r.pass, "k={k} n={n} cos={cos}");
                    if let Some(reeb) = r.reeb {
                        let e = c.etas.as_ref().unwrap();
                        assert!(reeb_residual(&reeb, e, &c.omegas) <= REEB_TOL);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_non_antisymmetric() {
        let mut c = canonical_forms(1, 1, false);
        c.omegas[0][(1, 0)] = 1.0;
        assert!(matches!(c.verify(), Err(StructureError::NotAntisymmetric { index: 0, .. })));
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let mut c = canonical_forms(2, 1, false);
        c.omegas[1] = Matrix::zeros(4, 4);
        assert!(matches!(c.verify(), Err(StructureError::DimensionMismatch(_))));
    }

    #[test]
    fn common_scale_does_not_change_verdicts() {
        for s in [1e-8, -3.0, 1e6] {
            for cos in [false, true] {
                let c = canonical_forms(2, 2, cos);
                let a = c.verify().unwrap();
                let omegas: Vec<Matrix> = c.omegas.iter().map(|m| m.scale(s)).collect();
                let b = verify_structure(&omegas, c.etas.as_deref(), &c.vertical).unwrap();
                assert_eq!(
                    (a.pass, a.vanishes_on_v, a.kernel_intersection_dim, a.ker_omega_dim),
                    (b.pass, b.vanishes_on_v, b.kernel_intersection_dim, b.ker_omega_dim)
                );
            }
        }
    }

    #[test]
    fn reeb_requires_unique_solution() {
        let c = canonical_forms(2, 1, true);
        let zero: Vec<Matrix> = c.omegas.iter().map(|m| m.scale(0.0)).collect();
        assert_eq!(reeb_fields(c.etas.as_ref().unwrap(), &zero), Err(StructureError::NoUniqueReeb));
    }
}

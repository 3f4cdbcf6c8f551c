//! Coordinate frames, system definitions and k-vector fields.
//!
//! A [`CoordFrame`] names the adapted coordinates of `(T^1_k)^*Q` or
//! `T^1_k Q`, optionally extended by the base coordinates `x^1..x^k`.
//! Phase-space vectors are always laid out in the same order:
//!
//! ```text
//! (x^1..x^k,)  q^1..q^n,  p^1_1..p^1_n, ..., p^k_1..p^k_n
//! ```
//!
//! with `v^1_α..v^n_α` replacing the `α`-th momentum block for Lagrangian
//! systems.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::expr::{is_identifier, Assignment, CompiledExpr, Expr, ExprError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("free variable `{name}` in {context}")]
    FreeVariable { name: String, context: String },
    #[error("formalism error: {0}")]
    Formalism(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SystemKind {
    Hamiltonian,
    Lagrangian,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Formalism {
    #[cfg_attr(feature = "serde", serde(rename = "k-symplectic"))]
    KSymplectic,
    #[cfg_attr(feature = "serde", serde(rename = "k-cosymplectic"))]
    KCosymplectic,
}

impl Formalism {
    pub fn is_cosymplectic(self) -> bool {
        self == Formalism::KCosymplectic
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Formalism::KSymplectic => "k-symplectic",
            Formalism::KCosymplectic => "k-cosymplectic",
        }
    }
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Hamiltonian => "hamiltonian",
            SystemKind::Lagrangian => "lagrangian",
        }
    }
}

/// What a frame variable stands for. Indices are zero-based.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Role {
    Base(usize),
    Config(usize),
    Momentum { alpha: usize, i: usize },
    Velocity { i: usize, alpha: usize },
}

/// Variable names for a `(k, n)` field theory.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordFrame {
    k: usize,
    n: usize,
    x: Vec<String>,
    q: Vec<String>,
    p: Vec<Vec<String>>,
    v: Vec<Vec<String>>,
}

impl CoordFrame {
    /// Frame with default names.
    ///
    /// With a single field the names are `q`, `p1..pk` and `v1..vk`;
    /// otherwise `q1..qn`, `p{α}{i}` and `v{i}{α}`, switching to
    /// `p_{α}_{i}` and `v_{i}_{α}` when `k` or `n` exceeds 9.
    pub fn new(k: usize, n: usize) -> Result<Self, ModelError> {
        if k == 0 || n == 0 {
            return Err(ModelError::Schema(format!("k and n must be at least 1 (got k={k}, n={n})")));
        }
        let x = (1..=k).map(|a| format!("x{a}")).collect();
        let short = k <= 9 && n <= 9;
        let (q, p, v) = if n == 1 {
            (
                vec!["q".to_string()],
                (1..=k).map(|a| vec![format!("p{a}")]).collect(),
                vec![(1..=k).map(|a| format!("v{a}")).collect()],
            )
        } else {
            let pair = |c: char, a: usize, b: usize| {
                if short {
                    format!("{c}{a}{b}")
                } else {
                    format!("{c}_{a}_{b}")
                }
            };
            (
                (1..=n).map(|i| format!("q{i}")).collect(),
                (1..=k).map(|a| (1..=n).map(|i| pair('p', a, i)).collect()).collect(),
                (1..=n).map(|i| (1..=k).map(|a| pair('v', i, a)).collect()).collect(),
            )
        };
        Ok(CoordFrame { k, n, x, q, p, v })
    }

    /// Frame with explicit names; `p` is indexed `[α][i]` and `v` is `[i][α]`.
    pub fn with_names(
        x: Vec<String>,
        q: Vec<String>,
        p: Vec<Vec<String>>,
        v: Vec<Vec<String>>,
    ) -> Result<Self, ModelError> {
        let k = x.len();
        let n = q.len();
        if k == 0 || n == 0 {
            return Err(ModelError::Schema("empty base or configuration name list".into()));
        }
        if p.len() != k || p.iter().any(|r| r.len() != n) {
            return Err(ModelError::Schema(format!("momentum names must be {k}x{n}")));
        }
        if v.len() != n || v.iter().any(|r| r.len() != k) {
            return Err(ModelError::Schema(format!("velocity names must be {n}x{k}")));
        }
        let frame = CoordFrame { k, n, x, q, p, v };
        let mut seen = BTreeSet::new();
        for name in frame.all_names() {
            if !is_identifier(name) {
                return Err(ModelError::Schema(format!("`{name}` is not an identifier")));
            }
            if !seen.insert(name) {
                return Err(ModelError::Schema(format!("duplicate name `{name}`")));
            }
        }
        Ok(frame)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self, alpha: usize) -> &str {
        &self.x[alpha]
    }

    pub fn config(&self, i: usize) -> &str {
        &self.q[i]
    }

    pub fn momentum(&self, alpha: usize, i: usize) -> &str {
        &self.p[alpha][i]
    }

    pub fn velocity(&self, i: usize, alpha: usize) -> &str {
        &self.v[i][alpha]
    }

    pub fn base_names(&self) -> &[String] {
        &self.x
    }

    pub fn config_names(&self) -> &[String] {
        &self.q
    }

    pub fn momentum_names(&self) -> &[Vec<String>] {
        &self.p
    }

    pub fn velocity_names(&self) -> &[Vec<String>] {
        &self.v
    }

    pub fn all_names(&self) -> impl Iterator<Item = &str> {
        self.x
            .iter()
            .chain(self.q.iter())
            .chain(self.p.iter().flatten())
            .chain(self.v.iter().flatten())
            .map(String::as_str)
    }

    pub fn role(&self, name: &str) -> Option<Role> {
        if let Some(a) = self.x.iter().position(|s| s == name) {
            return Some(Role::Base(a));
        }
        if let Some(i) = self.q.iter().position(|s| s == name) {
            return Some(Role::Config(i));
        }
        for alpha in 0..self.k {
            for i in 0..self.n {
                if self.p[alpha][i] == name {
                    return Some(Role::Momentum { alpha, i });
                }
                if self.v[i][alpha] == name {
                    return Some(Role::Velocity { i, alpha });
                }
            }
        }
        None
    }

    /// Name of the fiber coordinate in block `alpha`, slot `i`.
    pub fn fiber(&self, kind: SystemKind, alpha: usize, i: usize) -> &str {
        match kind {
            SystemKind::Hamiltonian => &self.p[alpha][i],
            SystemKind::Lagrangian => &self.v[i][alpha],
        }
    }

    /// Phase-space coordinate names in canonical order.
    pub fn phase_coords(&self, kind: SystemKind, cosymplectic: bool) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.phase_dim(cosymplectic));
        if cosymplectic {
            out.extend(self.x.iter().map(String::as_str));
        }
        out.extend(self.q.iter().map(String::as_str));
        for alpha in 0..self.k {
            for i in 0..self.n {
                out.push(self.fiber(kind, alpha, i));
            }
        }
        out
    }

    pub fn phase_dim(&self, cosymplectic: bool) -> usize {
        let d = self.n * (self.k + 1);
        if cosymplectic {
            d + self.k
        } else {
            d
        }
    }
}

/// A Hamiltonian or Lagrangian field theory on a coordinate frame.
#[derive(Clone, Debug)]
pub struct SystemDef {
    pub name: String,
    pub frame: CoordFrame,
    pub kind: SystemKind,
    pub formalism: Formalism,
    pub expression: Expr,
    pub params: Assignment,
}

impl SystemDef {
    /// Builds and validates a system.
    pub fn new(
        name: impl Into<String>,
        frame: CoordFrame,
        kind: SystemKind,
        formalism: Formalism,
        expression: Expr,
        params: Assignment,
    ) -> Result<Self, ModelError> {
        let s = SystemDef { name: name.into(), frame, kind, formalism, expression, params };
        s.validate()?;
        Ok(s)
    }

    /// Parses `expression` and builds the system on a default frame.
    pub fn parse(
        name: &str,
        k: usize,
        n: usize,
        kind: SystemKind,
        formalism: Formalism,
        expression: &str,
        params: &[(&str, f64)],
    ) -> Result<Self, ModelError> {
        let e = crate::expr::parse(expression)?;
        let params = params.iter().map(|(k, v)| (*k, *v)).collect();
        SystemDef::new(name, CoordFrame::new(k, n)?, kind, formalism, e, params)
    }

    pub fn k(&self) -> usize {
        self.frame.k
    }

    pub fn n(&self) -> usize {
        self.frame.n
    }

    pub fn is_cosymplectic(&self) -> bool {
        self.formalism.is_cosymplectic()
    }

    fn validate(&self) -> Result<(), ModelError> {
        for (name, _) in self.params.iter() {
            if self.frame.role(name).is_some() {
                return Err(ModelError::Schema(format!("parameter `{name}` shadows a coordinate")));
            }
        }
        let vars = self.expression.free_vars();
        if !self.is_cosymplectic() {
            if let Some(x) = self.frame.x.iter().find(|x| vars.contains(*x)) {
                return Err(ModelError::Formalism(format!(
                    "expression depends on base coordinate `{x}` but the system is k-symplectic"
                )));
            }
        }
        self.check_names(&self.expression, "the system expression")
    }

    /// Returns the first name in `e` outside the frame's phase space and the
    /// parameters.
    fn check_names(&self, e: &Expr, context: &str) -> Result<(), ModelError> {
        let allowed = self.allowed_names();
        match e.free_vars().into_iter().find(|v| !allowed.contains(v.as_str())) {
            Some(name) => Err(ModelError::FreeVariable { name, context: context.to_string() }),
            None => Ok(()),
        }
    }

    fn allowed_names(&self) -> BTreeSet<&str> {
        let mut s: BTreeSet<&str> = self.phase_coords().into_iter().collect();
        s.extend(self.params.iter().map(|(k, _)| k));
        s.insert("pi");
        s
    }

    /// Phase-space coordinate names for this system's kind and formalism.
    pub fn phase_coords(&self) -> Vec<&str> {
        self.frame.phase_coords(self.kind, self.is_cosymplectic())
    }

    pub fn phase_dim(&self) -> usize {
        self.frame.phase_dim(self.is_cosymplectic())
    }

    /// Parameter bindings plus the predefined constants (`pi`).
    pub fn constants(&self) -> Assignment {
        let mut a = Assignment::new();
        a.insert("pi", PI);
        a.extend_from(&self.params);
        a
    }

    /// Copy with parameters overridden or added.
    pub fn with_params(&self, overrides: &Assignment) -> Result<Self, ModelError> {
        let mut s = self.clone();
        s.params.extend_from(overrides);
        s.validate()?;
        Ok(s)
    }

    /// Slot list for compiled evaluation: phase coordinates, then constants.
    pub fn slots(&self) -> Vec<String> {
        let mut out: Vec<String> = self.phase_coords().into_iter().map(String::from).collect();
        out.extend(self.constants().iter().map(|(k, _)| k.to_string()));
        out
    }

    /// Compiles `e` against [`SystemDef::slots`].
    pub fn compile(&self, e: &Expr) -> Result<CompiledExpr, ExprError> {
        let slots = self.slots();
        let refs: Vec<&str> = slots.iter().map(String::as_str).collect();
        e.compile(&refs)
    }

    /// Builds a slot vector from a phase point.
    pub fn slot_values(&self, phase: &[f64]) -> Vec<f64> {
        let mut out = phase.to_vec();
        out.extend(self.constants().iter().map(|(_, v)| v));
        out
    }

    /// Assignment binding constants and the given phase point.
    pub fn point(&self, phase: &[f64]) -> Assignment {
        let mut a = self.constants();
        for (name, v) in self.phase_coords().into_iter().zip(phase) {
            a.insert(name, *v);
        }
        a
    }

    /// Checks shapes and free variables of a k-vector field against this system.
    pub fn validate_field(&self, x: &KVectorField) -> Result<(), ModelError> {
        let (k, n) = (self.k(), self.n());
        if x.k() != k || x.n() != n {
            return Err(ModelError::Schema(format!("field is {}x{} but the system is k={k}, n={n}", x.k(), x.n())));
        }
        if x.base.is_some() != self.is_cosymplectic() {
            return Err(ModelError::Schema(
                "base components must be present exactly for k-cosymplectic systems".into(),
            ));
        }
        for alpha in 0..k {
            for (c, e) in x.components(alpha).iter().enumerate() {
                self.check_names(e, &format!("component {c} of X_{}", alpha + 1))?;
            }
        }
        Ok(())
    }
}

/// Checks `x` against `s`; free-function form of [`SystemDef::validate_field`].
pub fn validate_field(x: &KVectorField, s: &SystemDef) -> Result<(), ModelError> {
    s.validate_field(x)
}

/// Components of a k-vector field `(X_1, ..., X_k)` in adapted coordinates.
///
/// `fiber[α][β][i]` is the component of `X_α` along the `(β, i)` fiber
/// coordinate (`p^β_i` or `v^i_β`).
#[derive(Clone, Debug, PartialEq)]
pub struct KVectorField {
    pub base: Option<Vec<Vec<Expr>>>,
    pub config: Vec<Vec<Expr>>,
    pub fiber: Vec<Vec<Vec<Expr>>>,
}

impl KVectorField {
    pub fn zero(k: usize, n: usize, cosymplectic: bool) -> Self {
        KVectorField {
            base: cosymplectic.then(|| vec![vec![Expr::zero(); k]; k]),
            config: vec![vec![Expr::zero(); n]; k],
            fiber: vec![vec![vec![Expr::zero(); n]; k]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.config.len()
    }

    pub fn n(&self) -> usize {
        self.config.first().map_or(0, Vec::len)
    }

    /// Components of `X_alpha` in phase-coordinate order.
    pub fn components(&self, alpha: usize) -> Vec<Expr> {
        let mut out = Vec::new();
        if let Some(b) = &self.base {
            out.extend(b[alpha].iter().cloned());
        }
        out.extend(self.config[alpha].iter().cloned());
        for block in &self.fiber[alpha] {
            out.extend(block.iter().cloned());
        }
        out
    }

    /// Rebuilds a field from per-α component lists in phase-coordinate order.
    pub fn from_components(k: usize, n: usize, cosymplectic: bool, rows: &[Vec<Expr>]) -> Result<Self, ModelError> {
        let d = n * (k + 1) + if cosymplectic { k } else { 0 };
        if rows.len() != k || rows.iter().any(|r| r.len() != d) {
            return Err(ModelError::Schema(format!("expected {k} rows of {d} components")));
        }
        let mut x = KVectorField::zero(k, n, cosymplectic);
        for (alpha, row) in rows.iter().enumerate() {
            let mut it = row.iter().cloned();
            if let Some(b) = &mut x.base {
                for slot in b[alpha].iter_mut() {
                    *slot = it.next().unwrap();
                }
            }
            for slot in x.config[alpha].iter_mut() {
                *slot = it.next().unwrap();
            }
            for block in x.fiber[alpha].iter_mut() {
                for slot in block.iter_mut() {
                    *slot = it.next().unwrap();
                }
            }
        }
        Ok(x)
    }

    /// Componentwise sum; shapes must agree.
    pub fn plus(&self, other: &KVectorField) -> Result<Self, ModelError> {
        if self.k() != other.k() || self.n() != other.n() || self.base.is_some() != other.base.is_some() {
            return Err(ModelError::Schema("fields have different shapes".into()));
        }
        let (k, n) = (self.k(), self.n());
        let cos = self.base.is_some();
        let rows: Vec<Vec<Expr>> = (0..k)
            .map(|a| self.components(a).into_iter().zip(other.components(a)).map(|(u, w)| Expr::add(u, w)).collect())
            .collect();
        KVectorField::from_components(k, n, cos, &rows)
    }

    /// Applies `f` to every component.
    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        KVectorField {
            base: self.base.as_ref().map(|b| b.iter().map(|r| r.iter().map(&f).collect()).collect()),
            config: self.config.iter().map(|r| r.iter().map(&f).collect()).collect(),
            fiber: self.fiber.iter().map(|a| a.iter().map(|r| r.iter().map(&f).collect()).collect()).collect(),
        }
    }

    /// Substitutes the given variables in every component.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Self {
        self.map(|e| e.substitute(map))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sg_text() -> &'static str {
        "0.5*(v1^2 - a^2*v2^2) - Omega^2*(1 - cos(q))"
    }

    #[test]
    fn default_names() {
        let f = CoordFrame::new(2, 1).unwrap();
        assert_eq!(f.phase_coords(SystemKind::Hamiltonian, false), ["q", "p1", "p2"]);
        assert_eq!(f.phase_coords(SystemKind::Lagrangian, true), ["x1", "x2", "q", "v1", "v2"]);
        let f = CoordFrame::new(2, 2).unwrap();
        assert_eq!(f.phase_coords(SystemKind::Hamiltonian, false), ["q1", "q2", "p11", "p12", "p21", "p22"]);
        assert_eq!(f.phase_coords(SystemKind::Lagrangian, false), ["q1", "q2", "v11", "v21", "v12", "v22"]);
        let f = CoordFrame::new(10, 2).unwrap();
        assert_eq!(f.momentum(9, 1), "p_10_2");
        assert_eq!(f.velocity(1, 9), "v_2_10");
        assert_eq!(f.role("p_10_2"), Some(Role::Momentum { alpha: 9, i: 1 }));
        assert!(CoordFrame::new(0, 1).is_err());
    }

    #[test]
    fn explicit_names_must_be_distinct() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let bad = CoordFrame::with_names(s(&["t"]), s(&["q"]), vec![s(&["q"])], vec![s(&["v"])]);
        assert!(matches!(bad, Err(ModelError::Schema(_))));
        let ok = CoordFrame::with_names(s(&["t"]), s(&["y"]), vec![s(&["py"])], vec![s(&["vy"])]);
        assert_eq!(ok.unwrap().phase_coords(SystemKind::Hamiltonian, true), ["t", "y", "py"]);
    }

    #[test]
    fn sine_gordon_lagrangian_validates() {
        let s = SystemDef::parse(
            "sine_gordon",
            2,
            1,
            SystemKind::Lagrangian,
            Formalism::KSymplectic,
            sg_text(),
            &[("a", 1.0), ("Omega", 1.0)],
        );
        assert!(s.is_ok());
    }

    #[test]
    fn base_dependence_requires_cosymplectic() {
        let text = "x1*q + 0.5*(v1^2 - v2^2)";
        let r = SystemDef::parse("s", 2, 1, SystemKind::Lagrangian, Formalism::KSymplectic, text, &[]);
        assert!(matches!(r, Err(ModelError::Formalism(_))));
        let r = SystemDef::parse("s", 2, 1, SystemKind::Lagrangian, Formalism::KCosymplectic, text, &[]);
        assert!(r.is_ok());
    }

    #[test]
    fn free_variables_rejected() {
        let r = SystemDef::parse("s", 1, 1, SystemKind::Hamiltonian, Formalism::KSymplectic, "0.5*p1^2 + z", &[]);
        assert!(matches!(r, Err(ModelError::FreeVariable { ref name, .. }) if name == "z"));
        // velocities are not part of a Hamiltonian phase space
        let r = SystemDef::parse("s", 1, 1, SystemKind::Hamiltonian, Formalism::KSymplectic, "v1", &[]);
        assert!(matches!(r, Err(ModelError::FreeVariable { .. })));
        let r = SystemDef::parse("s", 1, 1, SystemKind::Hamiltonian, Formalism::KSymplectic, "0.5*p1^2", &[]);
        assert_eq!(r.unwrap().phase_coords(), ["q", "p1"]);
    }

    #[test]
    fn pi_is_predefined_and_overridable() {
        let s = SystemDef::parse("s", 1, 1, SystemKind::Hamiltonian, Formalism::KSymplectic, "pi*q", &[]).unwrap();
        let v = s.expression.eval(&s.point(&[1.0, 0.0])).unwrap();
        assert_eq!(v, PI);
        let s = s.with_params(&Assignment::new().with("pi", 3.0)).unwrap();
        assert_eq!(s.expression.eval(&s.point(&[1.0, 0.0])).unwrap(), 3.0);
    }

    #[test]
    fn params_may_not_shadow_coordinates() {
        let r = SystemDef::parse("s", 1, 1, SystemKind::Hamiltonian, Formalism::KSymplectic, "q", &[("q", 1.0)]);
        assert!(matches!(r, Err(ModelError::Schema(_))));
    }

    #[test]
    fn field_validation() {
        let s = SystemDef::parse("s", 2, 1, SystemKind::Hamiltonian, Formalism::KSymplectic, "0.5*(p1^2+p2^2)", &[])
            .unwrap();
        assert!(s.validate_field(&KVectorField::zero(2, 1, false)).is_ok());
        let mut x = KVectorField::zero(2, 1, false);
        x.config[1][0] = Expr::var("z");
        assert!(matches!(validate_field(&x, &s), Err(ModelError::FreeVariable { .. })));
        assert!(s.validate_field(&KVectorField::zero(2, 1, true)).is_err());
        assert!(s.validate_field(&KVectorField::zero(3, 1, false)).is_err());
    }

    #[test]
    fn components_round_trip() {
        let mut x = KVectorField::zero(2, 2, true);
        x.base.as_mut().unwrap()[1][1] = Expr::one();
        x.config[0][1] = Expr::var("q1");
        x.fiber[1][0][1] = Expr::var("p12");
        let rows: Vec<_> = (0..2).map(|a| x.components(a)).collect();
        assert_eq!(rows[1].len(), 8);
        assert_eq!(rows[1][1], Expr::one());
        assert_eq!(rows[1][2 + 2 + 1], Expr::var("p12"));
        assert_eq!(KVectorField::from_components(2, 2, true, &rows).unwrap(), x);
    }

    #[test]
    fn slots_compile() {
        let s = SystemDef::parse(
            "s",
            2,
            1,
            SystemKind::Lagrangian,
            Formalism::KSymplectic,
            sg_text(),
            &[("a", 2.0), ("Omega", 3.0)],
        )
        .unwrap();
        let c = s.compile(&s.expression).unwrap();
        let phase = [0.3, 0.5, -0.25];
        let direct = s.expression.eval(&s.point(&phase)).unwrap();
        assert_eq!(c.eval(&s.slot_values(&phase)).unwrap(), direct);
    }
}

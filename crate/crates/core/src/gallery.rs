//! Registry of worked example systems.
//!
//! Every entry builds a [`SystemDef`] from named parameters, in one or more
//! kind/formalism variants, and carries analytic solutions that can be
//! sampled onto a grid. Entries solved by time stepping also provide a
//! hyperbolic right-hand side.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{Assignment, CompiledExpr};
use crate::fields::{
    evolve_hyperbolic, relax_elliptic, Boundary, FieldsError, Grid, GridSection, Hyperbolic, PointState, Relaxed,
};
use crate::math;
use crate::model::{Formalism, ModelError, SystemDef, SystemKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GalleryError {
    #[error("unknown gallery entry `{0}`")]
    UnknownEntry(String),
    #[error("entry `{entry}` has no solution `{which}`")]
    UnknownSolution { entry: String, which: String },
    #[error("parameter `{name}`: {reason}")]
    BadParam { name: String, reason: String },
    #[error("entry `{entry}` has no {kind} {formalism} variant")]
    Unsupported { entry: String, kind: &'static str, formalism: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fields(#[from] FieldsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Recipe {
    Hyperbolic,
    Elliptic,
    ResidualOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SolutionInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub validity: &'static str,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GalleryEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// The first kind and formalism are the defaults.
    pub kinds: &'static [SystemKind],
    pub formalisms: &'static [Formalism],
    pub defaults: &'static [(&'static str, f64)],
    pub solutions: &'static [SolutionInfo],
    pub recipe: Recipe,
    pub related: &'static [&'static str],
    /// Components `γ^α_i` of a Hamilton–Jacobi section, α-major.
    pub hj_gamma: &'static [&'static str],
}

impl GalleryEntry {
    pub fn kind(&self) -> SystemKind {
        self.kinds[0]
    }

    pub fn formalism(&self) -> Formalism {
        self.formalisms[0]
    }

    pub fn solution(&self, which: &str) -> Option<&SolutionInfo> {
        self.solutions.iter().find(|s| s.name == which)
    }
}

use Formalism::{KCosymplectic as KC, KSymplectic as KS};
use SystemKind::{Hamiltonian as H, Lagrangian as L};

const fn sol(name: &'static str, description: &'static str, validity: &'static str) -> SolutionInfo {
    SolutionInfo { name, description, validity }
}

static ENTRIES: &[GalleryEntry] = &[
    GalleryEntry {
        name: "electrostatic",
        description: "Electrostatic potential with charge density r (r + s*x1 with base dependence), Euclidean metric",
        kinds: &[H, L],
        formalisms: &[KS, KC],
        defaults: &[("r", 1.0), ("s", 0.0)],
        solutions: &[sol(
            "quadratic",
            "psi = -(2*pi/3)*(r*|x|^2 + s*x1^3)",
            "all x; s enters only with base dependence",
        )],
        recipe: Recipe::Elliptic,
        related: &["laplace"],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "wave",
        description: "Wave equation in n space dimensions; the last base coordinate is time",
        kinds: &[H, L],
        formalisms: &[KS, KC],
        defaults: &[("n", 1.0), ("c", 1.0)],
        solutions: &[sol("dalembert", "psi = sin(x1 - c*t)", "all x; periodic in x1 with period 2*pi")],
        recipe: Recipe::Hyperbolic,
        related: &["vibrating_string"],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "laplace",
        description: "Laplace equation on R^n (k = n, one field)",
        kinds: &[H, L],
        formalisms: &[KS, KC],
        defaults: &[("n", 2.0)],
        solutions: &[
            sol("quadratic", "psi = x1^2 - x2^2", "n >= 2"),
            sol("exp_sin", "psi = exp(x1)*sin(x2)", "n >= 2"),
        ],
        recipe: Recipe::Elliptic,
        related: &["electrostatic", "harmonic_map_flat"],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "sine_gordon",
        description: "Sine-Gordon equation psi_11 - a^2 psi_22 + Omega^2 sin(psi) = 0; x1 is time",
        kinds: &[L, H],
        formalisms: &[KS, KC],
        defaults: &[("a", 1.0), ("Omega", 1.0), ("v", 0.5)],
        solutions: &[sol("kink", "psi = 4*atan(exp(Omega*(x2 - v*x1)/sqrt(a^2 - v^2)))", "|v| < a")],
        recipe: Recipe::Hyperbolic,
        related: &["ginzburg_landau"],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "ginzburg_landau",
        description: "Ginzburg-Landau equation psi_11 - a^2 psi_22 - 4 lambda psi (psi^2 - 1) = 0; x1 is time",
        kinds: &[L, H],
        formalisms: &[KS, KC],
        defaults: &[("a", 1.0), ("lambda", -0.5)],
        solutions: &[sol("kink", "psi = tanh(sqrt(-2*lambda)*x2/a)", "lambda < 0")],
        recipe: Recipe::Hyperbolic,
        related: &["sine_gordon"],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "navier",
        description: "Navier equations for a planar displacement with coefficients lambda, mu",
        kinds: &[L],
        formalisms: &[KS, KC],
        defaults: &[("lambda", 1.0), ("mu", 1.0)],
        solutions: &[
            sol("linear", "phi = (x1, -x2)", "all x"),
            sol("quadratic", "phi = (x1^2 - x2^2, -2*x1*x2)", "all x"),
        ],
        recipe: Recipe::Elliptic,
        related: &[],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "minimal_surface",
        description: "Minimal surface equation for a graph over the plane",
        kinds: &[L],
        formalisms: &[KS, KC],
        defaults: &[("A", 0.3), ("B", 0.7), ("c", 1.0)],
        solutions: &[
            sol("plane", "psi = A*x1 + B*x2", "all x"),
            sol("catenoid", "psi = c*acosh(sqrt(x1^2 + x2^2)/c)", "x1^2 + x2^2 > c^2"),
        ],
        recipe: Recipe::Elliptic,
        related: &[],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "scalar_field",
        description: "Massive scalar field on Minkowski space, F(q) = f2*q^2 + lam*q^4; x1 is time",
        kinds: &[H, L],
        formalisms: &[KS, KC],
        defaults: &[("m", 1.0), ("f2", 0.0), ("lam", 0.0), ("kappa", 2.0)],
        solutions: &[sol(
            "plane_wave",
            "psi = cos(omega*x1 - kappa*x2), omega^2 = kappa^2 + 2*f2 - m^2",
            "lam = 0 and kappa^2 + 2*f2 >= m^2",
        )],
        recipe: Recipe::Hyperbolic,
        related: &["klein_gordon", "scalar_field_hj"],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "klein_gordon",
        description: "Klein-Gordon equation, the scalar field with F(q) = m^2 q^2; x1 is time",
        kinds: &[H, L],
        formalisms: &[KS, KC],
        defaults: &[("m", 1.0), ("kappa", 1.0)],
        solutions: &[sol("plane_wave", "psi = cos(omega*x1 - kappa*x2), omega^2 = kappa^2 + m^2", "all x")],
        recipe: Recipe::Hyperbolic,
        related: &["scalar_field"],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "scalar_field_hj",
        description: "Scalar field with F(q) = m^2 q^2 / 2 and the section gamma^a = C_a q^2 / 2",
        kinds: &[H, L],
        formalisms: &[KC, KS],
        defaults: &[("C1", 1.0), ("C2", 1.0), ("C3", 0.0), ("C4", 0.0), ("C0", 4.0)],
        solutions: &[sol(
            "rational",
            "psi = 2/(C1*x1 - C2*x2 - C3*x3 - C4*x4 + C0)",
            "C1^2 = C2^2 + C3^2 + C4^2 and a nonzero denominator",
        )],
        recipe: Recipe::ResidualOnly,
        related: &["scalar_field"],
        hj_gamma: &["0.5*C1*q^2", "0.5*C2*q^2", "0.5*C3*q^2", "0.5*C4*q^2"],
    },
    GalleryEntry {
        name: "quadratic",
        description: "Quadratic system on R^2 with constant diagonal metrics g{alpha}{i} and V = w*|q|^2/2 (k = 2)",
        kinds: &[H, L],
        formalisms: &[KS, KC],
        defaults: &[("g11", 1.0), ("g12", 1.0), ("g21", 1.0), ("g22", 1.0), ("w", 1.0)],
        solutions: &[sol("standing", "psi^i = sin(sqrt(w*g1i)*x1)", "w*g11 >= 0 and w*g12 >= 0")],
        recipe: Recipe::Elliptic,
        related: &[],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "vibrating_string",
        description: "Vibrating string sigma psi_11 - tau psi_22 = 0; x1 is time",
        kinds: &[H, L],
        formalisms: &[KS, KC],
        defaults: &[("sigma", 1.0), ("tau", 1.0), ("a", 1.0), ("b", 1.0), ("C", 1.0)],
        solutions: &[sol("exp", "psi = C*exp((a/sigma)*x1 - (b/tau)*x2)", "tau*a^2 = sigma*b^2")],
        recipe: Recipe::Hyperbolic,
        related: &["wave"],
        hj_gamma: &["a*q", "b*q"],
    },
    GalleryEntry {
        name: "maxwell_vacuum",
        description: "Maxwell equations without currents for the potential (A1, A2, A3, Phi); x4 is time",
        kinds: &[L],
        formalisms: &[KS, KC],
        defaults: &[],
        solutions: &[sol("plane_wave", "A = (0, sin(x1 - x4), 0, 0)", "all x")],
        recipe: Recipe::ResidualOnly,
        related: &[],
        hj_gamma: &[],
    },
    GalleryEntry {
        name: "harmonic_map_flat",
        description: "Harmonic maps R^2 -> R^2 with flat metrics",
        kinds: &[L],
        formalisms: &[KC, KS],
        defaults: &[],
        solutions: &[sol("polynomial", "phi = (x1^2 - x2^2, x1*x2)", "all x")],
        recipe: Recipe::Elliptic,
        related: &["laplace"],
        hj_gamma: &[],
    },
];

pub fn entries() -> &'static [GalleryEntry] {
    ENTRIES
}

pub fn entry(name: &str) -> Result<&'static GalleryEntry, GalleryError> {
    ENTRIES.iter().find(|e| e.name == name).ok_or_else(|| GalleryError::UnknownEntry(name.into()))
}

/// Defaults overridden by `params`; unknown names are rejected.
pub fn resolve_params(e: &GalleryEntry, params: &Assignment) -> Result<Assignment, GalleryError> {
    let mut out = Assignment::new();
    for (k, v) in e.defaults {
        out.insert(*k, *v);
    }
    for (k, v) in params.iter() {
        if !out.contains(k) {
            return Err(GalleryError::BadParam { name: k.into(), reason: format!("not a parameter of `{}`", e.name) });
        }
        out.insert(k, v);
    }
    Ok(out)
}

fn dimension(p: &mut Assignment, name: &str, min: usize) -> Result<usize, GalleryError> {
    let v = p.remove(name).expect("structural default");
    if math::trunc(v) != v || v < min as f64 || v > 64.0 {
        return Err(GalleryError::BadParam { name: name.into(), reason: format!("expected an integer >= {min}") });
    }
    Ok(v as usize)
}

fn squares(prefix: &str, range: core::ops::RangeInclusive<usize>) -> String {
    range.map(|a| format!("{prefix}{a}^2")).collect::<Vec<_>>().join(" + ")
}

/// Default variant of an entry.
pub fn instantiate(name: &str, params: &Assignment) -> Result<SystemDef, GalleryError> {
    let e = entry(name)?;
    instantiate_variant(name, params, e.kind(), e.formalism())
}

pub fn instantiate_variant(
    name: &str,
    params: &Assignment,
    kind: SystemKind,
    formalism: Formalism,
) -> Result<SystemDef, GalleryError> {
    let e = entry(name)?;
    if !e.kinds.contains(&kind) || !e.formalisms.contains(&formalism) {
        return Err(GalleryError::Unsupported {
            entry: name.into(),
            kind: kind.as_str(),
            formalism: formalism.as_str(),
        });
    }
    let mut p = resolve_params(e, params)?;
    let cos = formalism.is_cosymplectic();
    let (k, n, text): (usize, usize, String) = match (name, kind) {
        ("electrostatic", _) => {
            let r = if cos { "(r + s*x1)" } else { "r" };
            match kind {
                H => (3, 1, format!("4*pi*{r}*q + 0.5*(p1^2 + p2^2 + p3^2)")),
                L => (3, 1, format!("0.5*(v1^2 + v2^2 + v3^2) - 4*pi*{r}*q")),
            }
        }
        ("wave", _) => {
            let n = dimension(&mut p, "n", 1)?;
            let t = n + 1;
            match kind {
                H => (t, 1, format!("0.5*(p{t}^2 - ({})/c^2)", squares("p", 1..=n))),
                L => (t, 1, format!("0.5*(v{t}^2 - c^2*({}))", squares("v", 1..=n))),
            }
        }
        ("laplace", _) => {
            let n = dimension(&mut p, "n", 1)?;
            match kind {
                H => (n, 1, format!("0.5*({})", squares("p", 1..=n))),
                L => (n, 1, format!("0.5*({})", squares("v", 1..=n))),
            }
        }
        ("sine_gordon", H) => (2, 1, "0.5*(p1^2 - p2^2/a^2) - Omega^2*cos(q)".into()),
        ("sine_gordon", L) => (2, 1, "0.5*(v1^2 - a^2*v2^2) - Omega^2*(1 - cos(q))".into()),
        ("ginzburg_landau", H) => (2, 1, "0.5*(p1^2 - p2^2/a^2) - lambda*(q^2 - 1)^2".into()),
        ("ginzburg_landau", L) => (2, 1, "0.5*(v1^2 - a^2*v2^2) + lambda*(q^2 - 1)^2".into()),
        ("navier", _) => {
            (2, 2, "(0.5*lambda + mu)*(v11^2 + v22^2) + 0.5*mu*(v12^2 + v21^2) + (lambda + mu)*v11*v22".into())
        }
        ("minimal_surface", _) => (2, 1, "sqrt(1 + v1^2 + v2^2)".into()),
        ("scalar_field", H) => (4, 1, "0.5*(-p1^2 + p2^2 + p3^2 + p4^2) - (f2*q^2 + lam*q^4 - 0.5*m^2*q^2)".into()),
        ("scalar_field", L) => (4, 1, "0.5*(-v1^2 + v2^2 + v3^2 + v4^2) + (f2*q^2 + lam*q^4 - 0.5*m^2*q^2)".into()),
        ("klein_gordon", H) => (4, 1, "0.5*(-p1^2 + p2^2 + p3^2 + p4^2) - 0.5*m^2*q^2".into()),
        ("klein_gordon", L) => (4, 1, "0.5*(-v1^2 + v2^2 + v3^2 + v4^2) + 0.5*m^2*q^2".into()),
        ("scalar_field_hj", H) => (4, 1, "0.5*(-p1^2 + p2^2 + p3^2 + p4^2)".into()),
        ("scalar_field_hj", L) => (4, 1, "0.5*(-v1^2 + v2^2 + v3^2 + v4^2)".into()),
        ("quadratic", H) => (2, 2, "0.5*(g11*p11^2 + g12*p12^2 + g21*p21^2 + g22*p22^2) + 0.5*w*(q1^2 + q2^2)".into()),
        ("quadratic", L) => (2, 2, "0.5*(v11^2/g11 + v21^2/g12 + v12^2/g21 + v22^2/g22) - 0.5*w*(q1^2 + q2^2)".into()),
        ("vibrating_string", H) => (2, 1, "0.5*(p1^2/sigma - p2^2/tau)".into()),
        ("vibrating_string", L) => (2, 1, "0.5*(sigma*v1^2 - tau*v2^2)".into()),
        ("maxwell_vacuum", _) => (
            4,
            4,
            "0.5*((v21 - v12)^2 + (v31 - v13)^2 + (v32 - v23)^2 - (v41 - v14)^2 - (v42 - v24)^2 - (v43 - v34)^2)"
                .into(),
        ),
        ("harmonic_map_flat", _) => (2, 2, "0.5*(v11^2 + v12^2 + v21^2 + v22^2)".into()),
        _ => unreachable!("every registered variant has a builder"),
    };
    let params: Vec<(String, f64)> = p.iter().map(|(k, v)| (k.to_string(), v)).collect();
    let refs: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    Ok(SystemDef::parse(name, k, n, kind, formalism, &text, &refs)?)
}

/// The base dimension `k` of the default variant under `params`.
pub fn base_dim(name: &str, params: &Assignment) -> Result<usize, GalleryError> {
    Ok(instantiate(name, params)?.k())
}

/// An analytic solution with its parameters resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticSection {
    pub entry: &'static str,
    pub which: &'static str,
    pub k: usize,
    pub n: usize,
    params: Assignment,
}

fn param(p: &Assignment, name: &str) -> f64 {
    p.get(name).unwrap_or_else(|| panic!("parameter {name} resolved from defaults"))
}

pub fn analytic_solution(name: &str, which: &str, params: &Assignment) -> Result<AnalyticSection, GalleryError> {
    let e = entry(name)?;
    let info =
        e.solution(which).ok_or_else(|| GalleryError::UnknownSolution { entry: name.into(), which: which.into() })?;
    let s = instantiate(name, params)?;
    let p = resolve_params(e, params)?;
    let (k, n) = (s.k(), s.n());
    if name == "laplace" && k < 2 {
        return Err(GalleryError::BadParam { name: "n".into(), reason: "solution needs n >= 2".into() });
    }
    Ok(AnalyticSection { entry: e.name, which: info.name, k, n, params: p })
}

impl AnalyticSection {
    pub fn params(&self) -> &Assignment {
        &self.params
    }

    /// Field values at a base point.
    pub fn psi(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x).0
    }

    /// `∂ψ^i/∂x^α`, indexed `[i][α]`.
    pub fn gradient(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.eval(x).1
    }

    fn eval(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let p = &self.params;
        let k = self.k;
        let mut g = vec![vec![0.0; k]; self.n];
        let psi = match (self.entry, self.which) {
            ("electrostatic", _) => {
                let (r, s) = (param(p, "r"), param(p, "s"));
                let c = -2.0 * core::f64::consts::PI / 3.0;
                let r2: f64 = x.iter().map(|v| v * v).sum();
                for a in 0..3 {
                    g[0][a] = c * 2.0 * r * x[a];
                }
                g[0][0] += c * 3.0 * s * x[0] * x[0];
                vec![c * (r * r2 + s * x[0] * x[0] * x[0])]
            }
            ("wave", _) => {
                let c = param(p, "c");
                let arg = x[0] - c * x[k - 1];
                g[0][0] = math::cos(arg);
                g[0][k - 1] = -c * math::cos(arg);
                vec![math::sin(arg)]
            }
            ("laplace", "quadratic") => {
                g[0][0] = 2.0 * x[0];
                g[0][1] = -2.0 * x[1];
                vec![x[0] * x[0] - x[1] * x[1]]
            }
            ("laplace", _) => {
                let (ex, s, c) = (math::exp(x[0]), math::sin(x[1]), math::cos(x[1]));
                g[0][0] = ex * s;
                g[0][1] = ex * c;
                vec![ex * s]
            }
            ("sine_gordon", _) => {
                let (a, om, v) = (param(p, "a"), param(p, "Omega"), param(p, "v"));
                let d = math::sqrt(a * a - v * v);
                let th = om * (x[1] - v * x[0]) / d;
                let sech = 1.0 / math::cosh(th);
                g[0][0] = 2.0 * sech * (-v * om / d);
                g[0][1] = 2.0 * sech * (om / d);
                vec![4.0 * math::atan(math::exp(th))]
            }
            ("ginzburg_landau", _) => {
                let kap = math::sqrt(-2.0 * param(p, "lambda")) / param(p, "a");
                let t = math::tanh(kap * x[1]);
                g[0][1] = kap * (1.0 - t * t);
                vec![t]
            }
            ("navier", "linear") => {
                g[0][0] = 1.0;
                g[1][1] = -1.0;
                vec![x[0], -x[1]]
            }
            ("navier", _) => {
                g[0] = vec![2.0 * x[0], -2.0 * x[1]];
                g[1] = vec![-2.0 * x[1], -2.0 * x[0]];
                vec![x[0] * x[0] - x[1] * x[1], -2.0 * x[0] * x[1]]
            }
            ("minimal_surface", "plane") => {
                let (a, b) = (param(p, "A"), param(p, "B"));
                g[0] = vec![a, b];
                vec![a * x[0] + b * x[1]]
            }
            ("minimal_surface", _) => {
                let c = param(p, "c");
                let r = math::sqrt(x[0] * x[0] + x[1] * x[1]);
                let u = r / c;
                let slope = c / math::sqrt(r * r - c * c);
                g[0] = vec![slope * x[0] / r, slope * x[1] / r];
                vec![c * math::ln(u + math::sqrt(u * u - 1.0))]
            }
            ("scalar_field" | "klein_gordon", _) => {
                let (m, kap) = (param(p, "m"), param(p, "kappa"));
                let f2 = if self.entry == "klein_gordon" { m * m } else { param(p, "f2") };
                let om = math::sqrt(kap * kap + 2.0 * f2 - m * m);
                let arg = om * x[0] - kap * x[1];
                g[0][0] = -om * math::sin(arg);
                g[0][1] = kap * math::sin(arg);
                vec![math::cos(arg)]
            }
            ("scalar_field_hj", _) => {
                let c = [param(p, "C1"), -param(p, "C2"), -param(p, "C3"), -param(p, "C4")];
                let d: f64 = c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + param(p, "C0");
                for a in 0..4 {
                    g[0][a] = -2.0 * c[a] / (d * d);
                }
                vec![2.0 / d]
            }
            ("quadratic", _) => {
                let w = param(p, "w");
                let kap = [math::sqrt(w * param(p, "g11")), math::sqrt(w * param(p, "g12"))];
                for i in 0..2 {
                    g[i][0] = kap[i] * math::cos(kap[i] * x[0]);
                }
                vec![math::sin(kap[0] * x[0]), math::sin(kap[1] * x[0])]
            }
            ("vibrating_string", _) => {
                let (ra, rb) = (param(p, "a") / param(p, "sigma"), param(p, "b") / param(p, "tau"));
                let v = param(p, "C") * math::exp(ra * x[0] - rb * x[1]);
                g[0] = vec![ra * v, -rb * v];
                vec![v]
            }
            ("maxwell_vacuum", _) => {
                let c = math::cos(x[0] - x[3]);
                g[1][0] = c;
                g[1][3] = -c;
                vec![0.0, math::sin(x[0] - x[3]), 0.0, 0.0]
            }
            ("harmonic_map_flat", _) => {
                g[0] = vec![2.0 * x[0], -2.0 * x[1]];
                g[1] = vec![x[1], x[0]];
                vec![x[0] * x[0] - x[1] * x[1], x[0] * x[1]]
            }
            _ => unreachable!("every registered solution has an evaluator"),
        };
        (psi, g)
    }

    /// Box on which the solution is documented, one interval per axis.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        let two_pi = 2.0 * core::f64::consts::PI;
        (0..self.k)
            .map(|a| match (self.entry, self.which) {
                ("electrostatic", _) => (-1.0, 1.0),
                ("wave", _) if a + 1 == self.k => (0.0, 1.0),
                ("wave", _) => (0.0, two_pi),
                ("sine_gordon", _) if a == 1 => (-8.0, 8.0),
                ("ginzburg_landau", _) if a == 1 => (-5.0, 5.0),
                ("minimal_surface", "catenoid") => (1.0, 2.0),
                _ => (0.0, 1.0),
            })
            .collect()
    }

    /// Grid over [`AnalyticSection::domain`] with `count` nodes per axis.
    pub fn grid(&self, count: usize) -> Result<Grid, GalleryError> {
        let axes = self.domain().into_iter().map(|(a, b)| crate::fields::Axis::new(a, b, count)).collect();
        Ok(Grid::new(axes)?)
    }

    /// Samples the solution on `grid`.
    ///
    /// With `kind` Hamiltonian the momenta `∂L/∂v^i_α` of the entry's
    /// Lagrangian are attached; with `kind` Lagrangian the exact velocities.
    pub fn sample(&self, grid: &Grid, kind: SystemKind, formalism: Formalism) -> Result<GridSection, GalleryError> {
        let (k, n) = (self.k, self.n);
        if grid.dim() != k {
            return Err(FieldsError::Shape(format!("grid has {} axes, solution needs {k}", grid.dim())).into());
        }
        let len = grid.len();
        let mut values = vec![vec![0.0; len]; n];
        let mut vel = vec![vec![vec![0.0; len]; k]; n];
        for p in 0..len {
            let (psi, g) = self.eval(&grid.coords(p));
            for i in 0..n {
                values[i][p] = psi[i];
                for a in 0..k {
                    vel[i][a][p] = g[i][a];
                }
            }
        }
        let sec = GridSection::new(grid.clone(), values)?;
        match kind {
            L => Ok(sec.with_velocities(vel)?),
            H => {
                let overrides: Assignment =
                    self.params.iter().filter(|(name, _)| *name != "n").map(|(a, b)| (a.to_string(), b)).collect();
                let mut full = overrides.clone();
                if let Some(nv) = self.params.get("n") {
                    full.insert("n", nv);
                }
                let lag = instantiate_variant(self.entry, &full, L, formalism)?;
                let f = &lag.frame;
                let flux: Vec<Vec<CompiledExpr>> = (0..k)
                    .map(|a| (0..n).map(|i| lag.compile(&lag.expression.diff(f.velocity(i, a)))).collect())
                    .collect::<Result<_, _>>()
                    .map_err(ModelError::from)?;
                let cos = lag.is_cosymplectic();
                let mut momenta = vec![vec![vec![0.0; len]; n]; k];
                let mut phase = vec![0.0; lag.phase_dim()];
                for p in 0..len {
                    let mut j = 0;
                    if cos {
                        for c in grid.coords(p) {
                            phase[j] = c;
                            j += 1;
                        }
                    }
                    for i in 0..n {
                        phase[j + i] = sec.values[i][p];
                    }
                    j += n;
                    for a in 0..k {
                        for i in 0..n {
                            phase[j + a * n + i] = vel[i][a][p];
                        }
                    }
                    let slots = lag.slot_values(&phase);
                    for a in 0..k {
                        for i in 0..n {
                            momenta[a][i][p] = flux[a][i].eval(&slots).map_err(ModelError::from)?;
                        }
                    }
                }
                Ok(sec.with_momenta(momenta)?)
            }
        }
    }
}

pub type RhsFn = dyn Fn(&PointState, &mut [f64]);

/// Right-hand side `∂²ψ/∂t² = F` for an entry solved by time stepping.
pub struct HyperbolicRecipe {
    pub time_axis: usize,
    pub speed: f64,
    pub rhs: Box<RhsFn>,
}

pub fn hyperbolic(name: &str, params: &Assignment) -> Result<HyperbolicRecipe, GalleryError> {
    let e = entry(name)?;
    if e.recipe != Recipe::Hyperbolic {
        return Err(GalleryError::Unsupported { entry: name.into(), kind: "hyperbolic", formalism: "time-stepping" });
    }
    let k = base_dim(name, params)?;
    let p = resolve_params(e, params)?;
    let spatial_sum = move |st: &PointState, t: usize| -> f64 { (0..k).filter(|&a| a != t).map(|a| st.d2(0, a)).sum() };
    Ok(match name {
        "wave" => {
            let c = param(&p, "c");
            let t = k - 1;
            HyperbolicRecipe {
                time_axis: t,
                speed: c,
                rhs: Box::new(move |st, out| out[0] = c * c * spatial_sum(st, t)),
            }
        }
        "sine_gordon" => {
            let (a, om) = (param(&p, "a"), param(&p, "Omega"));
            HyperbolicRecipe {
                time_axis: 0,
                speed: a,
                rhs: Box::new(move |st, out| out[0] = a * a * st.d2(0, 1) - om * om * math::sin(st.psi[0])),
            }
        }
        "ginzburg_landau" => {
            let (a, lam) = (param(&p, "a"), param(&p, "lambda"));
            HyperbolicRecipe {
                time_axis: 0,
                speed: a,
                rhs: Box::new(move |st, out| {
                    let q = st.psi[0];
                    out[0] = a * a * st.d2(0, 1) + 4.0 * lam * q * (q * q - 1.0);
                }),
            }
        }
        "scalar_field" | "klein_gordon" => {
            let m = param(&p, "m");
            let (f2, lam) = if name == "klein_gordon" { (m * m, 0.0) } else { (param(&p, "f2"), param(&p, "lam")) };
            HyperbolicRecipe {
                time_axis: 0,
                speed: 1.0,
                rhs: Box::new(move |st, out| {
                    let q = st.psi[0];
                    let df = 2.0 * f2 * q + 4.0 * lam * q * q * q;
                    out[0] = spatial_sum(st, 0) + m * m * q - df;
                }),
            }
        }
        "vibrating_string" => {
            let c2 = param(&p, "tau") / param(&p, "sigma");
            HyperbolicRecipe {
                time_axis: 0,
                speed: math::sqrt(c2),
                rhs: Box::new(move |st, out| out[0] = c2 * st.d2(0, 1)),
            }
        }
        _ => unreachable!("hyperbolic entries are listed above"),
    })
}

/// Leapfrog run of `name` on `grid`, with initial data and Dirichlet
/// boundary values taken from the analytic solution `which`.
///
/// The wave entry uses periodic spatial boundaries instead.
pub fn evolve_solution(name: &str, which: &str, params: &Assignment, grid: &Grid) -> Result<GridSection, GalleryError> {
    let recipe = hyperbolic(name, params)?;
    let exact = analytic_solution(name, which, params)?;
    let t = recipe.time_axis;
    let dirichlet = |x: &[f64], out: &mut [f64]| out.copy_from_slice(&exact.psi(x));
    let rate = |x: &[f64], out: &mut [f64]| {
        for (o, g) in out.iter_mut().zip(exact.gradient(x)) {
            *o = g[t];
        }
    };
    let boundary = if name == "wave" { Boundary::Periodic } else { Boundary::Dirichlet(&dirichlet) };
    let problem = Hyperbolic { n: exact.n, time_axis: t, speed: recipe.speed, boundary, rhs: &*recipe.rhs };
    Ok(evolve_hyperbolic(&problem, grid, &dirichlet, &rate)?)
}

/// Gauss–Seidel solve of the Lagrangian variant of `name` on `grid`, with
/// boundary values from the analytic solution `which` and a zero interior.
pub fn relax_solution(
    name: &str,
    which: &str,
    params: &Assignment,
    grid: &Grid,
    tol: f64,
    max_iters: usize,
) -> Result<Relaxed, GalleryError> {
    let e = entry(name)?;
    let s = instantiate_variant(name, params, L, e.formalism())?;
    let exact = analytic_solution(name, which, params)?;
    let mut init = GridSection::from_fn(grid.clone(), exact.n, |x, out| out.copy_from_slice(&exact.psi(x)))?;
    for p in grid.interior() {
        for v in init.values.iter_mut() {
            v[p] = 0.0;
        }
    }
    Ok(relax_elliptic(&s, &init, tol, max_iters)?)
}

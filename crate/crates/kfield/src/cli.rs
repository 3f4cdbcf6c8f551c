//! The `kfield` command line.
//!
//! Exit codes: 0 on success or a passing check, 1 when a check fails, 2 on
//! usage, input or evaluation errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kfield_core::cosymplectic::{self, CosymDerived};
use kfield_core::fields::{self, Axis, Grid, GridSection};
use kfield_core::gallery::{self, Recipe};
use kfield_core::hamiltonian::{self, CheckOptions};
use kfield_core::hamjac::{self, ClosedSectionSpec};
use kfield_core::lagrangian::{self, ElEquation};
use kfield_core::legendre;
use kfield_core::sampling::SampleBox;
use kfield_core::structures::canonical_forms;
use kfield_core::{Assignment, Expr, Formalism, KVectorField, SystemDef, SystemKind, GRID_TOL, POINT_TOL};
use serde_json::{json, Value};

use crate::io;

#[derive(Parser, Debug)]
#[command(
    name = "kfield",
    version,
    about = "Field equations, solutions and checks for k-symplectic and k-cosymplectic field theories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Emit a JSON report instead of text.
    #[arg(long)]
    json: bool,
    /// Parameter overrides, `name=value[,name=value...]`.
    #[arg(long)]
    params: Option<String>,
    /// Pass/fail tolerance (defaults: 1e-10 pointwise, 1e-8 on grids).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the field equations of a system.
    Derive {
        /// System JSON file or gallery entry `name[:kind[:formalism]]`.
        system: String,
        #[command(flatten)]
        common: Common,
    },
    /// Verify the axioms of the canonical k-symplectic or k-cosymplectic model.
    CheckStructure {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        cosymplectic: bool,
        #[arg(long)]
        json: bool,
    },
    /// Check a k-vector field (the gauge solution by default) or a grid section.
    CheckSolution {
        system: String,
        /// k-vector field JSON file.
        #[arg(long, conflicts_with = "section")]
        field: Option<PathBuf>,
        /// Grid section CSV file.
        #[arg(long)]
        section: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Solve a gallery entry on a grid with data from one of its analytic solutions.
    Solve {
        /// Gallery entry name.
        system: String,
        /// Analytic solution supplying boundary and initial data.
        #[arg(long)]
        solution: Option<String>,
        /// Axes as `min:max:count[,...]`; one spec is repeated over all axes.
        #[arg(long)]
        grid: Option<String>,
        /// Number of time steps for time-stepping entries.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 200_000)]
        max_sweeps: usize,
        /// CSV output for the computed section.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Legendre map diagnostics for a Lagrangian system.
    Legendre {
        system: String,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Hamilton–Jacobi defects, integration of the projected field and lift check.
    Hamjac {
        system: String,
        /// Components of gamma, α-major and comma separated; defaults to the
        /// gallery entry's section when it has one.
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        /// Value of the section at the first grid node, one per field.
        #[arg(long)]
        q0: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Browse the example registry.
    Gallery {
        #[command(subcommand)]
        action: GalleryCommand,
    },
}

#[derive(Subcommand, Debug)]
enum GalleryCommand {
    /// List entries.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Print an entry as a system JSON file.
    Show {
        /// `name[:kind[:formalism]]`.
        name: String,
        #[arg(long)]
        params: Option<String>,
    },
    /// Evaluate an analytic solution at a base point.
    Eval {
        name: String,
        which: String,
        /// Base point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug)]
struct CliError(String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

type CliResult = Result<bool, CliError>;

fn fail(msg: impl Into<String>) -> CliError {
    CliError(msg.into())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    let mut buf = Vec::new();
    let result = dispatch(cli.command, &mut buf);
    let _ = out.write_all(&buf);
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(CliError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn dispatch(cmd: Command, out: &mut Vec<u8>) -> CliResult {
    match cmd {
        Command::Derive { system, common } => derive(&system, &common, out),
        Command::CheckStructure { k, n, cosymplectic, json } => check_structure(k, n, cosymplectic, json, out),
        Command::CheckSolution { system, field, section, samples, common } => {
            check_solution(&system, field.as_deref(), section.as_deref(), samples, &common, out)
        }
        Command::Solve { system, solution, grid, steps, max_sweeps, out: path, common } => {
            solve(&system, solution.as_deref(), grid.as_deref(), steps, max_sweeps, path.as_deref(), &common, out)
        }
        Command::Legendre { system, samples, common } => legendre_cmd(&system, samples, &common, out),
        Command::Hamjac { system, gamma, grid, q0, out: path, common } => {
            hamjac_cmd(&system, gamma.as_deref(), grid.as_deref(), q0.as_deref(), path.as_deref(), &common, out)
        }
        Command::Gallery { action } => gallery_cmd(action, out),
    }
}

pub fn parse_params(text: Option<&str>) -> Result<Assignment, String> {
    let mut a = Assignment::new();
    for item in text.unwrap_or("").split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| format!("parameter `{item}` is not name=value"))?;
        let v: f64 = v.trim().parse().map_err(|_| format!("parameter `{item}` has a non-numeric value"))?;
        a.insert(k.trim(), v);
    }
    Ok(a)
}

/// Parses `min:max:count[,...]`; a single spec is repeated `k` times.
pub fn parse_grid(text: &str, k: usize) -> Result<Grid, String> {
    let mut axes = Vec::new();
    for spec in text.split(',').map(str::trim) {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid axis `{spec}` is not min:max:count"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| format!("bad minimum in `{spec}`"))?;
        let hi: f64 = parts[1].parse().map_err(|_| format!("bad maximum in `{spec}`"))?;
        let count: usize = parts[2].parse().map_err(|_| format!("bad count in `{spec}`"))?;
        axes.push(Axis::new(lo, hi, count));
    }
    if axes.len() == 1 && k > 1 {
        axes = vec![axes[0]; k];
    }
    if axes.len() != k {
        return Err(format!("grid has {} axes, the system needs {k}", axes.len()));
    }
    Grid::new(axes).map_err(|e| e.to_string())
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"))).collect()
}

/// Splits on commas outside parentheses.
fn split_top(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(text[start..].trim());
    out
}

fn parse_kind(t: &str) -> Result<SystemKind, CliError> {
    match t {
        "hamiltonian" | "h" => Ok(SystemKind::Hamiltonian),
        "lagrangian" | "l" => Ok(SystemKind::Lagrangian),
        _ => Err(fail(format!("unknown kind `{t}`"))),
    }
}

fn parse_formalism(t: &str) -> Result<Formalism, CliError> {
    match t {
        "k-symplectic" | "ks" => Ok(Formalism::KSymplectic),
        "k-cosymplectic" | "kc" => Ok(Formalism::KCosymplectic),
        _ => Err(fail(format!("unknown formalism `{t}`"))),
    }
}

fn gallery_gamma(spec: &str) -> Result<Vec<&'static str>, CliError> {
    let name = spec.split(':').next().unwrap_or_default();
    match gallery::entry(name) {
        Ok(e) if !Path::new(spec).is_file() && !e.hj_gamma.is_empty() => Ok(e.hj_gamma.to_vec()),
        _ => Err(fail(format!("`{spec}` has no built-in section; pass --gamma"))),
    }
}

/// A system file path, or a gallery entry `name[:kind[:formalism]]`.
fn resolve_system(spec: &str, params: Option<&str>) -> Result<SystemDef, CliError> {
    let overrides = parse_params(params)?;
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        let s = io::load_system(&text).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        return Ok(s.with_params(&overrides)?);
    }
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default();
    let entry = gallery::entry(name).map_err(|_| fail(format!("`{spec}` is neither a file nor a gallery entry")))?;
    let kind = parts.next().map(parse_kind).transpose()?.unwrap_or(entry.kind());
    let formalism = parts.next().map(parse_formalism).transpose()?.unwrap_or(entry.formalism());
    Ok(gallery::instantiate_variant(name, &overrides, kind, formalism)?)
}

fn write_json(out: &mut Vec<u8>, v: &Value) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    out.push(b'\n');
    Ok(())
}

fn sub(n: usize) -> String {
    const DIGITS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];
    n.to_string().chars().map(|c| DIGITS[c.to_digit(10).unwrap() as usize]).collect()
}

fn partial(axes: &[usize], k: usize) -> String {
    let parts: Vec<String> = axes.iter().map(|a| sub(a + 1)).collect();
    format!("∂{}", if k > 9 { parts.join(",") } else { parts.concat() })
}

fn field_name(s: &SystemDef, i: usize) -> String {
    if s.n() == 1 {
        "ψ".into()
    } else {
        format!("ψ{}", i + 1)
    }
}

fn momentum_field(s: &SystemDef, a: usize, i: usize) -> String {
    let p = s.frame.momentum(a, i);
    format!("π{}", p.strip_prefix('p').unwrap_or(p))
}

/// Renames coordinates to section names: `q → ψ`, `p → π`, `v^i_α → ∂_αψ^i`.
fn section_renames(s: &SystemDef) -> BTreeMap<String, String> {
    let f = &s.frame;
    let mut m = BTreeMap::new();
    for i in 0..s.n() {
        m.insert(f.config(i).to_string(), field_name(s, i));
        for a in 0..s.k() {
            match s.kind {
                SystemKind::Hamiltonian => m.insert(f.momentum(a, i).to_string(), momentum_field(s, a, i)),
                SystemKind::Lagrangian => {
                    m.insert(f.velocity(i, a).to_string(), format!("{}{}", partial(&[a], s.k()), field_name(s, i)))
                }
            };
        }
    }
    m
}

/// Prints `e` with variables replaced by the display names in `names`.
fn render(e: &Expr, names: &BTreeMap<String, String>) -> String {
    let placeholders: BTreeMap<String, String> =
        names.keys().enumerate().map(|(idx, k)| (k.clone(), format!("zqz{idx}zqz"))).collect();
    let e = e.simplify();
    if e.is_zero() {
        return "0".into();
    }
    let mut text = e.rename(&placeholders).to_string();
    for (idx, shown) in names.values().enumerate() {
        text = text.replace(&format!("zqz{idx}zqz"), shown);
    }
    text
}

fn join_terms(terms: &[String]) -> String {
    let mut out = String::new();
    for (idx, t) in terms.iter().enumerate() {
        match (idx, t.strip_prefix('-')) {
            (0, _) => out.push_str(t),
            (_, Some(rest)) => {
                out.push_str(" - ");
                out.push_str(rest);
            }
            _ => {
                out.push_str(" + ");
                out.push_str(t);
            }
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

fn term(coef: &Expr, symbol: &str, names: &BTreeMap<String, String>) -> String {
    match coef.as_const() {
        Some(1.0) => symbol.into(),
        Some(-1.0) => format!("-{symbol}"),
        _ => {
            let c = render(coef, names);
            let simple = !c[1..].contains([' ', '+']) && !c[1..].contains(" - ");
            if simple {
                format!("{c}·{symbol}")
            } else {
                format!("({c})·{symbol}")
            }
        }
    }
}

fn el_text(s: &SystemDef, eq: &ElEquation, names: &BTreeMap<String, String>) -> String {
    let k = s.k();
    let mut terms = Vec::new();
    for (j, a, b, c) in &eq.second {
        terms.push(term(c, &format!("{}{}", partial(&[*a, *b], k), field_name(s, *j)), names));
    }
    for (j, a, c) in &eq.first {
        terms.push(term(c, &format!("{}{}", partial(&[*a], k), field_name(s, *j)), names));
    }
    if !eq.source.is_zero() {
        terms.push(render(&eq.source, names));
    }
    format!("{} = 0", join_terms(&terms))
}

fn derive(spec: &str, common: &Common, out: &mut Vec<u8>) -> CliResult {
    let s = resolve_system(spec, common.params.as_deref())?;
    let names = section_renames(&s);
    let (k, n) = (s.k(), s.n());
    let mut lines = Vec::new();
    let report = match s.kind {
        SystemKind::Hamiltonian => {
            let (velocities, trace, reeb) = if s.is_cosymplectic() {
                match cosymplectic::derive_cosym(&s)? {
                    CosymDerived::Hamiltonian(h) => (h.velocities, h.trace, Some(h.reeb)),
                    CosymDerived::Lagrangian(_) => unreachable!("kind checked above"),
                }
            } else {
                let h = hamiltonian::derive_hdw(&s)?;
                (h.velocities, h.trace, None)
            };
            for a in 0..k {
                for i in 0..n {
                    let lhs = format!("{}{}", partial(&[a], k), field_name(&s, i));
                    lines.push(format!("{lhs} = {}", render(&velocities[a][i], &names)));
                }
            }
            for i in 0..n {
                let lhs: Vec<String> =
                    (0..k).map(|a| format!("{}{}", partial(&[a], k), momentum_field(&s, a, i))).collect();
                lines.push(format!("{} = {}", lhs.join(" + "), render(&trace[i], &names)));
            }
            if let Some(r) = &reeb {
                for (a, e) in r.iter().enumerate() {
                    lines.push(format!("∂H/∂{} = {}", s.frame.base(a), render(e, &names)));
                }
            }
            json!({
                "velocities": velocities.iter().map(|r| r.iter().map(|e| e.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "trace": trace.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                "reeb": reeb.map(|r| r.iter().map(|e| e.to_string()).collect::<Vec<_>>()),
            })
        }
        SystemKind::Lagrangian => {
            let eqs = lagrangian::el_equations(&s)?;
            let mut structured = Vec::new();
            for eq in &eqs {
                lines.push(el_text(&s, eq, &names));
                structured.push(json!({
                    "second": eq.second.iter().map(|(j, a, b, c)| json!({"field": j + 1, "axes": [a + 1, b + 1], "coefficient": c.to_string()})).collect::<Vec<_>>(),
                    "first": eq.first.iter().map(|(j, a, c)| json!({"field": j + 1, "axis": a + 1, "coefficient": c.to_string()})).collect::<Vec<_>>(),
                    "source": eq.source.to_string(),
                }));
            }
            json!({ "euler_lagrange": structured })
        }
    };
    if common.json {
        let mut v = json!({
            "system": s.name,
            "kind": s.kind.as_str(),
            "formalism": s.formalism.as_str(),
            "k": k,
            "n": n,
            "equations": lines,
        });
        v["derived"] = report;
        write_json(out, &v)?;
    } else {
        let title = match s.kind {
            SystemKind::Hamiltonian => "Hamilton–De Donder–Weyl equations",
            SystemKind::Lagrangian => "Euler–Lagrange equations",
        };
        writeln!(out, "{} ({}, {}, k={k}, n={n})", s.name, s.kind.as_str(), s.formalism.as_str())?;
        writeln!(out, "{title}:")?;
        for l in &lines {
            writeln!(out, "  {l}")?;
        }
    }
    Ok(true)
}

fn check_structure(k: usize, n: usize, cos: bool, json_out: bool, out: &mut Vec<u8>) -> CliResult {
    if k == 0 || n == 0 {
        return Err(fail("k and n must be at least 1"));
    }
    let forms = canonical_forms(k, n, cos);
    let r = forms.verify()?;
    let frame = kfield_core::CoordFrame::new(k, n)?;
    let coords: Vec<String> = frame.phase_coords(SystemKind::Hamiltonian, cos).into_iter().map(String::from).collect();
    let reeb_text: Vec<String> = r
        .reeb
        .as_ref()
        .map(|m| {
            (0..m.rows())
                .map(|a| {
                    let terms: Vec<String> = m
                        .row(a)
                        .iter()
                        .zip(&coords)
                        .filter(|(v, _)| v.abs() > 1e-12)
                        .map(|(v, c)| if (*v - 1.0).abs() <= 1e-12 { format!("∂/∂{c}") } else { format!("{v}·∂/∂{c}") })
                        .collect();
                    format!("R{} = {}", sub(a + 1), if terms.is_empty() { "0".into() } else { terms.join(" + ") })
                })
                .collect()
        })
        .unwrap_or_default();
    if json_out {
        let mut v = serde_json::to_value(&r)?;
        v["coords"] = json!(coords);
        v["formalism"] = json!(if cos { "k-cosymplectic" } else { "k-symplectic" });
        write_json(out, &v)?;
    } else {
        let name = if cos { "k-cosymplectic" } else { "k-symplectic" };
        writeln!(out, "canonical {name} model, k={k}, n={n}, dim={}", r.dim)?;
        writeln!(out, "  forms vanish on V: {}", r.vanishes_on_v)?;
        writeln!(out, "  dim V correct: {}", r.v_dim_ok)?;
        writeln!(out, "  kernel intersection dim: {}", r.kernel_intersection_dim)?;
        if let Some(w) = r.eta_wedge_nonzero {
            writeln!(out, "  eta wedge nonzero: {w}")?;
        }
        if let Some(d) = r.ker_omega_dim {
            writeln!(out, "  dim of common kernel of the 2-forms: {d}")?;
        }
        for t in &reeb_text {
            writeln!(out, "  {t}")?;
        }
        writeln!(out, "{}", if r.pass { "PASS" } else { "FAIL" })?;
    }
    Ok(r.pass)
}

fn gauge_field(s: &SystemDef) -> Result<KVectorField, CliError> {
    match (s.kind, s.is_cosymplectic()) {
        (SystemKind::Hamiltonian, false) => Ok(hamiltonian::gauge_solution(s)?),
        (SystemKind::Hamiltonian, true) => Ok(cosymplectic::cosym_gauge_solution(s)?),
        (SystemKind::Lagrangian, _) => Err(fail("Lagrangian systems need --field or --section")),
    }
}

fn check_solution(
    spec: &str,
    field: Option<&Path>,
    section: Option<&Path>,
    samples: usize,
    common: &Common,
    out: &mut Vec<u8>,
) -> CliResult {
    let s = resolve_system(spec, common.params.as_deref())?;
    if let Some(path) = section {
        let text = std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        let sec = io::read_section_csv(&text)?;
        let tol = common.tol.unwrap_or(GRID_TOL);
        let r = fields::residual_on_grid(&sec, &s)?;
        let pass = r.max() <= tol;
        if common.json {
            write_json(
                out,
                &json!({"system": s.name, "pass": pass, "tol": tol, "max": r.max(), "families": r.families}),
            )?;
        } else {
            writeln!(out, "grid residual of {} on {:?} nodes", s.name, sec.grid.shape())?;
            for f in &r.families {
                writeln!(out, "  {:<16} max {:.6e}  rms {:.6e}  points {}", f.family, f.max, f.rms, f.points)?;
            }
            writeln!(out, "{} (tol {tol:e})", if pass { "PASS" } else { "FAIL" })?;
        }
        return Ok(pass);
    }
    let tol = common.tol.unwrap_or(POINT_TOL);
    let x = match field {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
            io::load_field(&text)?
        }
        None => gauge_field(&s)?,
    };
    let opts = CheckOptions { sample_box: None, samples, tol };
    let (pass, report) = match (s.kind, s.is_cosymplectic()) {
        (SystemKind::Hamiltonian, cos) => {
            let r = if cos {
                cosymplectic::check_cosym_solution_with(&x, &s, &opts)?
            } else {
                hamiltonian::check_solution_with(&x, &s, &opts)?
            };
            (r.is_solution, serde_json::to_value(&r)?)
        }
        (SystemKind::Lagrangian, cos) => {
            let r = if cos {
                cosymplectic::check_cosym_sopde_el_with(&x, &s, &opts)?
            } else {
                lagrangian::check_sopde_el_with(&x, &s, &opts)?
            };
            (r.is_sopde && r.el_defect <= tol, serde_json::to_value(&r)?)
        }
    };
    if common.json {
        write_json(out, &json!({"system": s.name, "pass": pass, "tol": tol, "report": report}))?;
    } else {
        let source = if field.is_some() { "field" } else { "gauge solution" };
        writeln!(out, "{source} of {} at {samples} sample points", s.name)?;
        if let Value::Object(m) = &report {
            for (key, v) in m {
                writeln!(out, "  {key}: {v}")?;
            }
        }
        writeln!(out, "{} (tol {tol:e})", if pass { "PASS" } else { "FAIL" })?;
    }
    Ok(pass)
}

fn default_grid(
    exact: &gallery::AnalyticSection,
    time_axis: Option<(usize, f64)>,
    steps: Option<usize>,
) -> Result<Grid, CliError> {
    let domain = exact.domain();
    let mut axes: Vec<Axis> = domain.iter().map(|&(a, b)| Axis::new(a, b, 33)).collect();
    if let Some((t, speed)) = time_axis {
        let hmin =
            axes.iter().enumerate().filter(|(a, _)| *a != t).map(|(_, ax)| ax.spacing()).fold(f64::INFINITY, f64::min);
        let span = axes[t].max - axes[t].min;
        let steps = steps.unwrap_or_else(|| (span * speed.abs() / (0.5 * hmin)).ceil() as usize);
        axes[t].count = steps.max(2) + 1;
    }
    Ok(Grid::new(axes)?)
}

#[allow(clippy::too_many_arguments)]
fn solve(
    name: &str,
    which: Option<&str>,
    grid: Option<&str>,
    steps: Option<usize>,
    max_sweeps: usize,
    path: Option<&Path>,
    common: &Common,
    out: &mut Vec<u8>,
) -> CliResult {
    let entry = gallery::entry(name)
        .map_err(|_| fail(format!("`{name}` is not a gallery entry; solve works on gallery entries only")))?;
    let params = parse_params(common.params.as_deref())?;
    let which = which.unwrap_or(entry.solutions[0].name);
    let exact = gallery::analytic_solution(name, which, &params)?;
    let recipe = match entry.recipe {
        Recipe::Hyperbolic => Some(gallery::hyperbolic(name, &params)?),
        Recipe::Elliptic => None,
        Recipe::ResidualOnly => return Err(fail(format!("`{name}` has no solver recipe; use check-solution"))),
    };
    let time = recipe.as_ref().map(|r| (r.time_axis, r.speed));
    let mut g = match grid {
        Some(t) => parse_grid(t, exact.k)?,
        None => default_grid(&exact, time, steps)?,
    };
    if let (Some(st), Some((t, _)), Some(_)) = (steps, time, grid) {
        let mut axes = g.axes().to_vec();
        axes[t].count = st + 1;
        g = Grid::new(axes)?;
    }
    let tol = common.tol.unwrap_or(1e-10);
    let (section, extra) = match recipe {
        Some(r) => {
            let sec = gallery::evolve_solution(name, which, &params, &g)?;
            (sec, json!({"method": "leapfrog", "time_axis": r.time_axis + 1, "steps": g.axis(r.time_axis).count - 1}))
        }
        None => match gallery::relax_solution(name, which, &params, &g, tol, max_sweeps) {
            Ok(r) => (r.section, json!({"method": "gauss-seidel", "sweeps": r.sweeps, "residual": r.residual})),
            Err(gallery::GalleryError::Fields(fields::FieldsError::NoConvergence { iterations, residual })) => {
                writeln!(out, "no convergence after {iterations} sweeps, residual {residual:.6e}")?;
                return Ok(false);
            }
            Err(e) => return Err(e.into()),
        },
    };
    let errs: Vec<f64> = (0..exact.n).map(|i| section.max_error(i, |x| exact.psi(x)[i], false)).collect();
    let max_err = errs.iter().cloned().fold(0.0, f64::max);
    if let Some(p) = path {
        std::fs::write(p, io::write_section_csv(&section)).map_err(|e| fail(format!("{}: {e}", p.display())))?;
    }
    if common.json {
        let mut v = json!({
            "system": name,
            "solution": which,
            "shape": g.shape(),
            "max_error": max_err,
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
            m.extend(e);
        }
        write_json(out, &v)?;
    } else {
        writeln!(out, "{name} with data from `{which}` on {:?} nodes", g.shape())?;
        if let Value::Object(m) = &extra {
            for (key, v) in m {
                writeln!(out, "  {key}: {v}")?;
            }
        }
        writeln!(out, "  max error vs analytic: {max_err:.6e}")?;
        if let Some(p) = path {
            writeln!(out, "  section written to {}", p.display())?;
        }
    }
    Ok(true)
}

fn legendre_cmd(spec: &str, samples: usize, common: &Common, out: &mut Vec<u8>) -> CliResult {
    let s = resolve_system(spec, common.params.as_deref())?;
    if s.kind != SystemKind::Lagrangian {
        return Err(fail("legendre needs a Lagrangian system"));
    }
    let tol = common.tol.unwrap_or(1e-8);
    let induced = legendre::induced_hamiltonian(&s)?;
    let d = induced.map.derived().clone();
    let dim = s.phase_dim();
    let npos = dim - s.k() * s.n();
    let pts = SampleBox::cube(dim, -1.0, 1.0).halton(samples);
    let (mut singular, mut pullback, mut round_trip, mut min_det) = (0usize, 0.0f64, 0.0f64, f64::INFINITY);
    for pt in &pts {
        let at = s.point(pt);
        let reg = lagrangian::regularity(&d, &at)?;
        min_det = min_det.min(reg.det.abs());
        if !reg.regular {
            singular += 1;
            continue;
        }
        pullback = pullback.max(legendre::pullback_check(&s, &at)?);
        let (pos, v) = pt.split_at(npos);
        let p = induced.map.apply(pos, v)?;
        let back = induced.map.invert(pos, &p, &vec![0.0; v.len()])?;
        round_trip = round_trip.max(back.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let pass = singular == 0 && pullback <= tol && round_trip <= tol;
    let hamiltonian = induced.symbolic.as_ref().map(|h| h.expression.simplify().to_string());
    let momenta: Vec<Vec<String>> =
        induced.map.momenta.iter().map(|r| r.iter().map(|e| e.to_string()).collect()).collect();
    if common.json {
        write_json(
            out,
            &json!({
                "system": s.name,
                "pass": pass,
                "tol": tol,
                "samples": pts.len(),
                "singular_points": singular,
                "min_abs_det": min_det,
                "pullback_defect": pullback,
                "round_trip_error": round_trip,
                "momenta": momenta,
                "hamiltonian": hamiltonian,
            }),
        )?;
    } else {
        writeln!(out, "Legendre map of {} at {} sample points", s.name, pts.len())?;
        for (a, row) in momenta.iter().enumerate() {
            for (i, p) in row.iter().enumerate() {
                writeln!(out, "  {} = {p}", s.frame.momentum(a, i))?;
            }
        }
        writeln!(out, "  singular points: {singular}")?;
        writeln!(out, "  min |det W|: {min_det:.6e}")?;
        writeln!(out, "  pullback defect: {pullback:.6e}")?;
        writeln!(out, "  round-trip error: {round_trip:.6e}")?;
        match &hamiltonian {
            Some(h) => writeln!(out, "  H = {h}")?,
            None => writeln!(out, "  H has no closed form; evaluate numerically")?,
        }
        writeln!(out, "{} (tol {tol:e})", if pass { "PASS" } else { "FAIL" })?;
    }
    Ok(pass)
}

fn hamjac_cmd(
    spec: &str,
    gamma: Option<&str>,
    grid: Option<&str>,
    q0: Option<&str>,
    path: Option<&Path>,
    common: &Common,
    out: &mut Vec<u8>,
) -> CliResult {
    let s = resolve_system(spec, common.params.as_deref())?;
    let tol = common.tol.unwrap_or(POINT_TOL);
    let texts = match gamma {
        Some(g) => split_top(g),
        None => gallery_gamma(spec)?,
    };
    let g = ClosedSectionSpec::parse(&s, &texts)?;
    let defect = hamjac::hj_defect(&s, &g)?;
    let pass = defect.closedness <= tol && defect.hj <= tol;

    let grid = match grid {
        Some(t) => parse_grid(t, s.k())?,
        None => parse_grid("0:1:33", s.k())?,
    };
    let q0 = match q0 {
        Some(t) => parse_list(t)?,
        None => vec![1.0; s.n()],
    };
    if q0.len() != s.n() {
        return Err(fail(format!("--q0 needs {} values", s.n())));
    }
    let z = hamjac::project_field(&s, &g)?;
    let integrated = hamjac::integrate_projected(&z, &q0, &grid)?;
    let lift = hamjac::verify_lift(&s, &g, &integrated.section)?;
    if let Some(p) = path {
        let lifted = lifted_section(&s, &g, &integrated.section)?;
        std::fs::write(p, io::write_section_csv(&lifted)).map_err(|e| fail(format!("{}: {e}", p.display())))?;
    }
    if common.json {
        write_json(
            out,
            &json!({
                "system": s.name,
                "pass": pass,
                "tol": tol,
                "closedness": defect.closedness,
                "hj": defect.hj,
                "commutativity_defect": integrated.commutativity_defect,
                "lift_residual": lift.max(),
                "lift_families": lift.families,
                "shape": grid.shape(),
            }),
        )?;
    } else {
        writeln!(out, "Hamilton–Jacobi check of {} with gamma = ({})", s.name, texts.join(", "))?;
        writeln!(out, "  closedness defect: {:.6e}", defect.closedness)?;
        writeln!(out, "  hj defect: {:.6e}", defect.hj)?;
        writeln!(out, "  integrated on {:?} nodes from q0 = {q0:?}", grid.shape())?;
        writeln!(out, "  flow commutativity defect: {:.6e}", integrated.commutativity_defect)?;
        writeln!(out, "  lifted section HDW residual: {:.6e}", lift.max())?;
        writeln!(out, "{} (tol {tol:e})", if pass { "PASS" } else { "FAIL" })?;
    }
    Ok(pass)
}

fn lifted_section(s: &SystemDef, g: &ClosedSectionSpec, sigma: &GridSection) -> Result<GridSection, CliError> {
    let (k, n) = (s.k(), s.n());
    let grid = &sigma.grid;
    let mut momenta = vec![vec![vec![0.0; grid.len()]; n]; k];
    let f = &s.frame;
    for p in 0..grid.len() {
        let mut at = s.constants();
        if s.is_cosymplectic() {
            for (a, c) in grid.coords(p).into_iter().enumerate() {
                at.insert(f.base(a), c);
            }
        }
        for i in 0..n {
            at.insert(f.config(i), sigma.values[i][p]);
        }
        let vals = hamjac::gamma_at(g, &at)?;
        for a in 0..k {
            for i in 0..n {
                momenta[a][i][p] = vals[a][i];
            }
        }
    }
    Ok(sigma.clone().with_momenta(momenta)?)
}

fn gallery_cmd(action: GalleryCommand, out: &mut Vec<u8>) -> CliResult {
    match action {
        GalleryCommand::List { json } => {
            if json {
                write_json(out, &serde_json::to_value(gallery::entries())?)?;
            } else {
                for e in gallery::entries() {
                    let kinds: Vec<&str> = e.kinds.iter().map(|k| k.as_str()).collect();
                    let solutions: Vec<&str> = e.solutions.iter().map(|s| s.name).collect();
                    writeln!(out, "{:<18} [{}] {}", e.name, kinds.join("/"), e.description)?;
                    writeln!(out, "{:<18} solutions: {}", "", solutions.join(", "))?;
                }
            }
        }
        GalleryCommand::Show { name, params } => {
            let s = resolve_system(&name, params.as_deref())?;
            writeln!(out, "{}", io::print_system(&s))?;
        }
        GalleryCommand::Eval { name, which, at, params, json } => {
            let params = parse_params(params.as_deref())?;
            let exact = gallery::analytic_solution(&name, &which, &params)?;
            let x = parse_list(&at)?;
            if x.len() != exact.k {
                return Err(fail(format!("--at needs {} coordinates", exact.k)));
            }
            let psi = exact.psi(&x);
            if json {
                write_json(
                    out,
                    &json!({"entry": name, "solution": which, "at": x, "psi": psi, "gradient": exact.gradient(&x)}),
                )?;
            } else {
                let text: Vec<String> = psi.iter().map(|v| format!("{v}")).collect();
                writeln!(out, "{}", text.join(","))?;
            }
        }
    }
    Ok(true)
}

//! File formats: system JSON, k-vector field JSON and grid-section CSV.

use std::collections::BTreeMap;

use kfield_core::expr::parse;
use kfield_core::fields::{Axis, FieldsError, Grid, GridSection};
use kfield_core::{Assignment, CoordFrame, ExprError, Formalism, KVectorField, ModelError, SystemDef, SystemKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("CSV error on line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Fields(#[from] FieldsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NameLists {
    pub x: Vec<String>,
    pub q: Vec<String>,
    pub p: Vec<Vec<String>>,
    pub v: Vec<Vec<String>>,
}

/// On-disk form of a [`SystemDef`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub name: String,
    pub kind: SystemKind,
    pub formalism: Formalism,
    pub k: usize,
    pub n: usize,
    pub expression: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<NameLists>,
}

impl SystemFile {
    pub fn build(&self) -> Result<SystemDef, IoError> {
        let frame = match &self.names {
            None => CoordFrame::new(self.k, self.n)?,
            Some(nl) => {
                let f = CoordFrame::with_names(nl.x.clone(), nl.q.clone(), nl.p.clone(), nl.v.clone())?;
                if f.k() != self.k || f.n() != self.n {
                    return Err(IoError::Schema(format!(
                        "names describe k={}, n={} but the file declares k={}, n={}",
                        f.k(),
                        f.n(),
                        self.k,
                        self.n
                    )));
                }
                f
            }
        };
        let params: Assignment = self.params.iter().map(|(k, v)| (k.clone(), *v)).collect();
        Ok(SystemDef::new(&self.name, frame, self.kind, self.formalism, parse(&self.expression)?, params)?)
    }

    pub fn from_system(s: &SystemDef) -> Self {
        let f = &s.frame;
        let default = CoordFrame::new(s.k(), s.n()).ok();
        let names = (default.as_ref() != Some(f)).then(|| NameLists {
            x: f.base_names().to_vec(),
            q: f.config_names().to_vec(),
            p: f.momentum_names().to_vec(),
            v: f.velocity_names().to_vec(),
        });
        SystemFile {
            name: s.name.clone(),
            kind: s.kind,
            formalism: s.formalism,
            k: s.k(),
            n: s.n(),
            expression: s.expression.to_string(),
            params: s.params.iter().map(|(k, v)| (k.to_string(), v)).collect(),
            names,
        }
    }
}

pub fn load_system(json_text: &str) -> Result<SystemDef, IoError> {
    let file: SystemFile = serde_json::from_str(json_text)?;
    file.build()
}

pub fn print_system(s: &SystemDef) -> String {
    serde_json::to_string_pretty(&SystemFile::from_system(s)).expect("system files always serialize")
}

/// On-disk form of a [`KVectorField`]: one row per `X_α` in phase-coordinate
/// order (`x` when cosymplectic, then `q`, then the α-major fibers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    pub k: usize,
    pub n: usize,
    pub cosymplectic: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coords: Vec<String>,
    pub components: Vec<Vec<String>>,
}

pub fn load_field(json_text: &str) -> Result<KVectorField, IoError> {
    let file: FieldFile = serde_json::from_str(json_text)?;
    let rows = file
        .components
        .iter()
        .map(|r| r.iter().map(|t| parse(t)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(KVectorField::from_components(file.k, file.n, file.cosymplectic, &rows)?)
}

pub fn print_field(x: &KVectorField, s: &SystemDef) -> String {
    let file = FieldFile {
        k: x.k(),
        n: x.n(),
        cosymplectic: x.base.is_some(),
        coords: s.phase_coords().into_iter().map(String::from).collect(),
        components: (0..x.k()).map(|a| x.components(a).iter().map(|e| e.to_string()).collect()).collect(),
    };
    serde_json::to_string_pretty(&file).expect("field files always serialize")
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with columns `x1..xk, psi_1..psi_n`, then `p_α_i` (α-major) when
/// momenta are present and `v_i_α` when velocities are present.
pub fn write_section_csv(sec: &GridSection) -> String {
    let g = &sec.grid;
    let (k, n) = (g.dim(), sec.n());
    let mut header: Vec<String> = (1..=k).map(|a| format!("x{a}")).collect();
    header.extend((1..=n).map(|i| format!("psi_{i}")));
    if sec.momenta.is_some() {
        for a in 1..=k {
            header.extend((1..=n).map(|i| format!("p_{a}_{i}")));
        }
    }
    if sec.velocities.is_some() {
        for i in 1..=n {
            header.extend((1..=k).map(|a| format!("v_{i}_{a}")));
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for p in 0..g.len() {
        let mut row: Vec<String> = g.coords(p).into_iter().map(fmt17).collect();
        row.extend(sec.values.iter().map(|v| fmt17(v[p])));
        if let Some(m) = &sec.momenta {
            row.extend(m.iter().flatten().map(|v| fmt17(v[p])));
        }
        if let Some(v) = &sec.velocities {
            row.extend(v.iter().flatten().map(|v| fmt17(v[p])));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

enum Column {
    X,
    Psi,
    P,
    V,
}

fn classify(name: &str, k: usize, n: usize, col: usize) -> Option<Column> {
    let idx = |s: &str| s.parse::<usize>().ok();
    if let Some(rest) = name.strip_prefix("psi_") {
        return (idx(rest)? == col - k + 1).then_some(Column::Psi);
    }
    if let Some(rest) = name.strip_prefix('x') {
        return (idx(rest)? == col + 1).then_some(Column::X);
    }
    let parts: Vec<&str> = name.split('_').collect();
    if parts.len() == 3 {
        let (a, b) = (idx(parts[1])?, idx(parts[2])?);
        let off = col - k - n;
        return match parts[0] {
            "p" if (a - 1) * n + b - 1 == off => Some(Column::P),
            "v" => Some(Column::V),
            _ => None,
        };
    }
    None
}

/// Reads a section written by [`write_section_csv`]; the grid is rebuilt from
/// the coordinate columns and must be uniform and row-major.
pub fn read_section_csv(text: &str) -> Result<GridSection, IoError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(IoError::Csv { line: 1, message: "empty file".into() })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let k = names.iter().take_while(|h| h.starts_with('x')).count();
    let n = names.iter().filter(|h| h.starts_with("psi_")).count();
    let bad_header = |message: String| IoError::Csv { line: 1, message };
    if k == 0 || n == 0 {
        return Err(bad_header("header needs x and psi columns".into()));
    }
    let mut kinds = Vec::new();
    for (c, h) in names.iter().enumerate() {
        let kind = classify(h, k, n, c).ok_or_else(|| bad_header(format!("unexpected column `{h}`")))?;
        kinds.push(kind);
    }
    let np = kinds.iter().filter(|c| matches!(c, Column::P)).count();
    let nv = kinds.iter().filter(|c| matches!(c, Column::V)).count();
    if (np != 0 && np != k * n) || (nv != 0 && nv != k * n) || k + n + np + nv != names.len() {
        return Err(bad_header("momentum or velocity columns incomplete".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in lines {
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::Csv { line: ln + 1, message: e.to_string() })?;
        if row.len() != names.len() {
            return Err(IoError::Csv { line: ln + 1, message: format!("expected {} fields", names.len()) });
        }
        rows.push(row);
    }

    let mut axes = Vec::with_capacity(k);
    for a in 0..k {
        let mut seen: Vec<f64> = Vec::new();
        for r in &rows {
            if !seen.contains(&r[a]) {
                seen.push(r[a]);
            }
        }
        let lo = seen.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = seen.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        axes.push(Axis::new(lo, hi, seen.len()));
    }
    let grid = Grid::new(axes)?;
    if grid.len() != rows.len() {
        return Err(IoError::Schema(format!("{} rows for a grid of {} nodes", rows.len(), grid.len())));
    }
    for (p, r) in rows.iter().enumerate() {
        for (a, c) in grid.coords(p).iter().enumerate() {
            let scale = 1.0 + grid.axis(a).max.abs().max(grid.axis(a).min.abs());
            if (r[a] - c).abs() > 1e-9 * scale {
                return Err(IoError::Csv {
                    line: p + 2,
                    message: "coordinates are not a uniform row-major grid".into(),
                });
            }
        }
    }
    let column = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let values = (0..n).map(|i| column(k + i)).collect();
    let mut sec = GridSection::new(grid, values)?;
    let mut c = k + n;
    if np > 0 {
        let m = (0..k).map(|a| (0..n).map(|i| column(c + a * n + i)).collect()).collect();
        sec = sec.with_momenta(m)?;
        c += np;
    }
    if nv > 0 {
        let v = (0..n).map(|i| (0..k).map(|a| column(c + i * k + a)).collect()).collect();
        sec = sec.with_velocities(v)?;
    }
    Ok(sec)
}

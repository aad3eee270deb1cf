//! Text formats for constraint sets, key maps and key-rate rows.
//!
//! Constraint files are TOML. Matrices are given row-major as separate real
//! and imaginary arrays of length `dim²`; `im` may be omitted for real
//! matrices and `tolerance` defaults to `1e-8`.
//!
//! ```toml
//! dim = 2
//!
//! [[constraint]]
//! name = "Z"
//! value = 0.2
//! re = [1.0, 0.0, 0.0, -1.0]
//! ```
//!
//! Key-map files use the same layout with `[[projector]]` tables (no `value`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, HermitianOperator, KeyMap};
use crate::optimizer::Constraint;
use crate::scan::KeyRatePoint;

pub const CSV_HEADER: [&str; 9] = [
    "distance_km",
    "rate",
    "method",
    "Q_mu",
    "E_mu",
    "Y1_L",
    "e1_U",
    "h_zE",
    "status",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
    re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    dim: usize,
    #[serde(default)]
    constraint: Vec<MatrixEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyMapFile {
    dim: usize,
    projector: Vec<MatrixEntry>,
}

/// Named constraints read from a file.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub dim: usize,
    pub names: Vec<String>,
    pub constraints: Vec<Constraint>,
}

fn parse_err(what: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        what: what.into(),
        message: message.into(),
    }
}

fn entry_matrix(what: &str, label: &str, e: &MatrixEntry, dim: usize) -> Result<HermitianOperator> {
    let n = dim * dim;
    if e.re.len() != n || e.im.as_ref().is_some_and(|im| im.len() != n) {
        return Err(parse_err(
            what,
            format!("{label}: expected {n} entries for a {dim}x{dim} matrix"),
        ));
    }
    let im = |k: usize| e.im.as_ref().map_or(0.0, |v| v[k]);
    let m = CMatrix::from_fn(dim, dim, |i, j| c64(e.re[i * dim + j], im(i * dim + j)));
    HermitianOperator::new(m).map_err(|err| parse_err(what, format!("{label}: {err}")))
}

fn flatten(m: &CMatrix) -> (Vec<f64>, Option<Vec<f64>>) {
    let d = m.nrows();
    let mut re = Vec::with_capacity(d * d);
    let mut im = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            re.push(m[(i, j)].re);
            im.push(m[(i, j)].im);
        }
    }
    let im = im.iter().any(|x| *x != 0.0).then_some(im);
    (re, im)
}

pub fn parse_constraints(text: &str) -> Result<ConstraintSet> {
    let what = "constraint file";
    let file: ConstraintFile = toml::from_str(text).map_err(|e| parse_err(what, e.to_string()))?;
    if file.dim == 0 {
        return Err(parse_err(what, "dim must be positive"));
    }
    let mut names = Vec::new();
    let mut constraints = Vec::new();
    for (k, e) in file.constraint.iter().enumerate() {
        let name = e.name.clone().unwrap_or_else(|| format!("constraint{k}"));
        let value = e
            .value
            .ok_or_else(|| parse_err(what, format!("{name}: missing value")))?;
        let op = entry_matrix(what, &name, e, file.dim)?;
        let c = match e.tolerance {
            Some(t) => Constraint::with_tolerance(op, value, t),
            None => Constraint::new(op, value),
        }
        .map_err(|err| parse_err(what, format!("{name}: {err}")))?;
        names.push(name);
        constraints.push(c);
    }
    Ok(ConstraintSet {
        dim: file.dim,
        names,
        constraints,
    })
}

pub fn parse_keymap(text: &str) -> Result<KeyMap> {
    let what = "key-map file";
    let file: KeyMapFile = toml::from_str(text).map_err(|e| parse_err(what, e.to_string()))?;
    let projectors = file
        .projector
        .iter()
        .enumerate()
        .map(|(k, e)| entry_matrix(what, &format!("projector {k}"), e, file.dim))
        .collect::<Result<Vec<_>>>()?;
    KeyMap::new(projectors).map_err(|err| parse_err(what, err.to_string()))
}

fn to_toml<T: Serialize>(what: &str, v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| parse_err(what, e.to_string()))
}

pub fn write_constraints(names: &[&str], constraints: &[Constraint], dim: usize) -> Result<String> {
    let constraint = constraints
        .iter()
        .zip(names)
        .map(|(c, name)| {
            let (re, im) = flatten(c.observable.matrix());
            MatrixEntry {
                name: Some((*name).to_string()),
                value: Some(c.value),
                tolerance: Some(c.tolerance),
                re,
                im,
            }
        })
        .collect();
    to_toml("constraint file", &ConstraintFile { dim, constraint })
}

pub fn write_keymap(keymap: &KeyMap) -> Result<String> {
    let projector = keymap
        .projectors()
        .iter()
        .map(|p| {
            let (re, im) = flatten(p.matrix());
            MatrixEntry {
                name: None,
                value: None,
                tolerance: None,
                re,
                im,
            }
        })
        .collect();
    to_toml(
        "key-map file",
        &KeyMapFile {
            dim: keymap.dim(),
            projector,
        },
    )
}

/// CSV fields in [`CSV_HEADER`] order. Floats use the shortest round-trip form.
pub fn csv_fields(p: &KeyRatePoint) -> [String; 9] {
    [
        p.distance_km.to_string(),
        p.rate.to_string(),
        p.method.label().to_string(),
        p.q_mu.to_string(),
        p.e_mu.to_string(),
        p.y1_lower.to_string(),
        p.e1_upper.to_string(),
        p.h_ze.to_string(),
        p.status.label().to_string(),
    ]
}

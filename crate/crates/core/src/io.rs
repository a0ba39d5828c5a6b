//! JSON instance files.
//!
//! ```json
//! { "vqfp-schema": 1, "n": 1,
//!   "objectives": [ { "A": [[0]], "a": [1], "a0": -2, "B": [[1]], "b": [0], "b0": 2 } ],
//!   "constraints": [ { "type": "box", "lo": [-2], "hi": [2] } ] }
//! ```
//!
//! Matrices are dense and row-major. Each objective holds the numerator
//! `xᵀAx + aᵀx + a0` and the denominator `xᵀBx + bᵀx + b0`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Invariant, Location, Result};
use crate::model::{Constraint, Matrix, ProblemInstance, QuadraticFunction, Vector};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(rename = "vqfp-schema", default = "schema_default")]
    schema: u32,
    n: usize,
    objectives: Vec<ObjectiveFile>,
    #[serde(default)]
    constraints: Vec<ConstraintFile>,
}

fn schema_default() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveFile {
    #[serde(rename = "A")]
    a_mat: Vec<Vec<f64>>,
    a: Vec<f64>,
    a0: f64,
    #[serde(rename = "B")]
    b_mat: Vec<Vec<f64>>,
    b: Vec<f64>,
    b0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ConstraintFile {
    Affine {
        a: Vec<f64>,
        b: f64,
    },
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
        d: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

fn matrix(rows: &[Vec<f64>], n: usize, at: Location) -> Result<Matrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::validation(
            Invariant::Dimension,
            at,
            format!("expected a {n}x{n} matrix"),
        ));
    }
    Ok(Matrix::from_fn(n, n, |r, s| rows[r][s]))
}

fn vector(xs: &[f64], n: usize, at: Location) -> Result<Vector> {
    if xs.len() != n {
        return Err(Error::validation(
            Invariant::Dimension,
            at,
            format!("expected a vector of length {n}, got {}", xs.len()),
        ));
    }
    Ok(Vector::from_column_slice(xs))
}

fn quadratic(
    q: &[Vec<f64>],
    c: &[f64],
    d: f64,
    n: usize,
    at: Location,
    tol: &Tolerances,
) -> Result<QuadraticFunction> {
    QuadraticFunction::new(matrix(q, n, at)?, vector(c, n, at)?, d, tol.load_symmetry)
        .map_err(|e| crate::model::relocate(e, at))
}

/// Parses and validates an instance from JSON text.
pub fn parse_instance(text: &str, tol: &Tolerances) -> Result<ProblemInstance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.schema != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported vqfp-schema {} (expected {SCHEMA_VERSION})",
            file.schema
        )));
    }
    let n = file.n;
    let mut objectives = Vec::with_capacity(file.objectives.len());
    for (i, o) in file.objectives.iter().enumerate() {
        let at = Location::Objective(i);
        let f = quadratic(&o.a_mat, &o.a, o.a0, n, at, tol)?;
        let g = quadratic(&o.b_mat, &o.b, o.b0, n, at, tol)?;
        objectives.push((f, g));
    }
    let mut constraints = Vec::with_capacity(file.constraints.len());
    for (j, c) in file.constraints.iter().enumerate() {
        let at = Location::Constraint(j);
        constraints.push(match c {
            ConstraintFile::Affine { a, b } => Constraint::Affine {
                a: vector(a, n, at)?,
                b: *b,
            },
            ConstraintFile::Quadratic { q, c, d } => {
                Constraint::ConvexQuadratic(quadratic(q, c, *d, n, at, tol)?)
            }
            ConstraintFile::Box { lo, hi } => Constraint::Box {
                lo: vector(lo, n, at)?,
                hi: vector(hi, n, at)?,
            },
        });
    }
    ProblemInstance::new(n, objectives, constraints, tol)
}

/// Reads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>, tol: &Tolerances) -> Result<ProblemInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_instance(&text, tol)
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|s| m[(r, s)]).collect())
        .collect()
}

/// Serializes an instance in the file schema (pretty-printed, 17-digit round trip).
pub fn to_json(p: &ProblemInstance) -> String {
    let file = InstanceFile {
        schema: SCHEMA_VERSION,
        n: p.dim(),
        objectives: p
            .objectives()
            .iter()
            .map(|o| ObjectiveFile {
                a_mat: rows(o.f().q()),
                a: o.f().c().as_slice().to_vec(),
                a0: o.f().d(),
                b_mat: rows(o.g().q()),
                b: o.g().c().as_slice().to_vec(),
                b0: o.g().d(),
            })
            .collect(),
        constraints: p
            .constraints()
            .iter()
            .map(|c| match c {
                Constraint::Affine { a, b } => ConstraintFile::Affine {
                    a: a.as_slice().to_vec(),
                    b: *b,
                },
                Constraint::ConvexQuadratic(h) => ConstraintFile::Quadratic {
                    q: rows(h.q()),
                    c: h.c().as_slice().to_vec(),
                    d: h.d(),
                },
                Constraint::Box { lo, hi } => ConstraintFile::Box {
                    lo: lo.as_slice().to_vec(),
                    hi: hi.as_slice().to_vec(),
                },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("instance serialization cannot fail")
}

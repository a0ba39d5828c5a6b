use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Which instance invariant a validation failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    Dimension,
    Symmetry,
    Psd,
    GPositivity,
    BoxOrder,
    Empty,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Invariant::Dimension => "dimension",
            Invariant::Symmetry => "symmetry",
            Invariant::Psd => "psd",
            Invariant::GPositivity => "g-positivity",
            Invariant::BoxOrder => "box-order",
            Invariant::Empty => "empty",
        };
        f.write_str(s)
    }
}

/// Where in an instance a validation failure was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum Location {
    Instance,
    Objective(usize),
    Constraint(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Instance => f.write_str("instance"),
            Location::Objective(i) => write!(f, "objective {i}"),
            Location::Constraint(j) => write!(f, "constraint {j}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A denominator is not positive at the point of evaluation.
    #[error("g_{objective}(x) = {value:e} is not positive")]
    Domain { objective: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("validation failed ({invariant}, {location}): {detail}")]
    Validation {
        invariant: Invariant,
        location: Location,
        detail: String,
    },

    #[error("point is infeasible: constraint rows {violated:?} violated")]
    InfeasiblePoint { violated: Vec<usize> },

    #[error(
        "eigendecomposition did not converge: off-diagonal norm {off_norm:e} after {sweeps} sweeps"
    )]
    Convergence { off_norm: f64, sweeps: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("route inapplicable: {0}")]
    InapplicableRoute(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(
        invariant: Invariant,
        location: Location,
        detail: impl Into<String>,
    ) -> Self {
        Error::Validation {
            invariant,
            location,
            detail: detail.into(),
        }
    }
}

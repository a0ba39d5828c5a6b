//! Problem data: quadratic functions, ratio objectives, convex constraints.
//!
//! Quadratics follow the convention `q(x) = xᵀQx + cᵀx + d` with **no** ½
//! factor, so `∇q(x) = 2Qx + c`. Most QP software assumes `½xᵀQx`; inputs
//! coming from such tools must be halved before use.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::{Error, Invariant, Location, Result};
use crate::spectral;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Asymmetry left after symmetrization must not exceed this.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFunction {
    q: Matrix,
    c: Vector,
    d: f64,
}

impl QuadraticFunction {
    /// Builds `xᵀQx + cᵀx + d`, symmetrizing `Q` as `(Q + Qᵀ)/2`.
    ///
    /// Fails if `Q` is not square, `c` has the wrong length, or the
    /// asymmetry `max|Q - Qᵀ|` before symmetrization exceeds `sym_tol`.
    pub fn new(q: Matrix, c: Vector, d: f64, sym_tol: f64) -> Result<Self> {
        let n = c.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::validation(
                Invariant::Dimension,
                Location::Instance,
                format!(
                    "matrix is {}x{}, vector has length {n}",
                    q.nrows(),
                    q.ncols()
                ),
            ));
        }
        if !q.iter().chain(c.iter()).all(|v| v.is_finite()) || !d.is_finite() {
            return Err(Error::validation(
                Invariant::Dimension,
                Location::Instance,
                "non-finite coefficient",
            ));
        }
        let asym = max_asymmetry(&q);
        if asym > sym_tol {
            return Err(Error::validation(
                Invariant::Symmetry,
                Location::Instance,
                format!("max|Q - Qᵀ| = {asym:e} exceeds {sym_tol:e}"),
            ));
        }
        let q = symmetrize(&q);
        Ok(QuadraticFunction { q, c, d })
    }

    /// `aᵀx + b`.
    pub fn affine(a: Vector, b: f64) -> Self {
        let n = a.len();
        QuadraticFunction {
            q: Matrix::zeros(n, n),
            c: a,
            d: b,
        }
    }

    pub fn constant(n: usize, d: f64) -> Self {
        Self::affine(Vector::zeros(n), d)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn c(&self) -> &Vector {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn is_affine(&self) -> bool {
        self.q.iter().all(|v| *v == 0.0)
    }

    pub fn value(&self, x: &Vector) -> f64 {
        x.dot(&(&self.q * x)) + self.c.dot(x) + self.d
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.q * x * 2.0 + &self.c
    }

    /// The Hessian `2Q`.
    pub fn hessian(&self) -> Matrix {
        &self.q * 2.0
    }
}

/// One objective `f/g` with `g` validated positive on all of ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioObjective {
    f: QuadraticFunction,
    g: QuadraticFunction,
    g_minimizer: Vector,
    g_min: f64,
}

impl RatioObjective {
    /// Validates that `g.Q` is PSD and that `2 g.Q x + g.c = 0` has a
    /// solution `w` with `g(w) >= g_positivity`; `g` then stays positive
    /// everywhere.
    pub fn new(f: QuadraticFunction, g: QuadraticFunction, tol: &Tolerances) -> Result<Self> {
        if f.dim() != g.dim() {
            return Err(Error::validation(
                Invariant::Dimension,
                Location::Instance,
                "numerator and denominator dimensions differ",
            ));
        }
        let eig = spectral::eig_sym(g.q())?;
        if !eig.is_psd(tol.psd) {
            return Err(Error::validation(
                Invariant::Psd,
                Location::Instance,
                format!("denominator matrix has eigenvalue {:e}", eig.min()),
            ));
        }
        // least-squares solution of 2Bw = -b through the eigenbasis
        let scale = eig.max_abs().max(1.0);
        let cutoff = 1e-12 * scale;
        let rhs = -g.c() * 0.5;
        let coords = eig.eigenvectors.transpose() * &rhs;
        let mut y = Vector::zeros(g.dim());
        for k in 0..g.dim() {
            let mu = eig.eigenvalues[k];
            if mu.abs() > cutoff {
                y[k] = coords[k] / mu;
            }
        }
        let w = &eig.eigenvectors * y;
        let residual = (g.q() * &w * 2.0 + g.c()).norm();
        if residual > 1e-9 * (1.0 + g.c().norm()) {
            return Err(Error::validation(
                Invariant::GPositivity,
                Location::Instance,
                format!(
                    "2Bx + b = 0 is inconsistent (residual {residual:e}); g is unbounded below"
                ),
            ));
        }
        let g_min = g.value(&w);
        if g_min < tol.g_positivity {
            return Err(Error::validation(
                Invariant::GPositivity,
                Location::Instance,
                format!("minimum of the denominator is {g_min:e}"),
            ));
        }
        Ok(RatioObjective {
            f,
            g,
            g_minimizer: w,
            g_min,
        })
    }

    pub fn f(&self) -> &QuadraticFunction {
        &self.f
    }

    pub fn g(&self) -> &QuadraticFunction {
        &self.g
    }

    /// The point where `g` attains its minimum over ℝⁿ.
    pub fn g_minimizer(&self) -> &Vector {
        &self.g_minimizer
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }
}

/// A convex inequality constraint as supplied by the user.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `aᵀx + b <= 0`.
    Affine { a: Vector, b: f64 },
    /// `xᵀQx + cᵀx + d <= 0` with `Q` PSD.
    ConvexQuadratic(QuadraticFunction),
    /// `lo <= x <= hi`, expanded to `2n` affine rows.
    Box { lo: Vector, hi: Vector },
}

/// Where an expanded constraint row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RowOrigin {
    Affine {
        constraint: usize,
    },
    Quadratic {
        constraint: usize,
    },
    BoxLower {
        constraint: usize,
        coordinate: usize,
    },
    BoxUpper {
        constraint: usize,
        coordinate: usize,
    },
}

/// One expanded constraint `h_j(x) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub h: QuadraticFunction,
    pub origin: RowOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible,
    /// Indices of violated rows and the amount `h_j(x)` by which each is violated.
    Infeasible {
        violated: Vec<usize>,
        margins: Vec<f64>,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// m ratio objectives and ℓ convex constraints over ℝⁿ. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    n: usize,
    objectives: Vec<RatioObjective>,
    constraints: Vec<Constraint>,
    rows: Vec<ConstraintRow>,
    bounding_box: Option<(Vector, Vector)>,
}

impl ProblemInstance {
    /// Validates every invariant and expands boxes into affine rows.
    ///
    /// Each objective is a `(f, g)` pair; errors carry the index of the
    /// offending objective or constraint.
    pub fn new(
        n: usize,
        objectives: Vec<(QuadraticFunction, QuadraticFunction)>,
        constraints: Vec<Constraint>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation(
                Invariant::Empty,
                Location::Instance,
                "n must be at least 1",
            ));
        }
        if objectives.is_empty() {
            return Err(Error::validation(
                Invariant::Empty,
                Location::Instance,
                "at least one objective is required",
            ));
        }
        let mut ratios = Vec::with_capacity(objectives.len());
        for (i, (f, g)) in objectives.into_iter().enumerate() {
            let at = Location::Objective(i);
            if f.dim() != n || g.dim() != n {
                return Err(Error::validation(
                    Invariant::Dimension,
                    at,
                    format!("expected dimension {n}"),
                ));
            }
            ratios.push(RatioObjective::new(f, g, tol).map_err(|e| relocate(e, at))?);
        }

        let mut rows = Vec::new();
        let mut bounding_box: Option<(Vector, Vector)> = None;
        for (j, con) in constraints.iter().enumerate() {
            let at = Location::Constraint(j);
            match con {
                Constraint::Affine { a, b } => {
                    check_len(a.len(), n, at)?;
                    if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                        return Err(Error::validation(
                            Invariant::Dimension,
                            at,
                            "non-finite coefficient",
                        ));
                    }
                    rows.push(ConstraintRow {
                        h: QuadraticFunction::affine(a.clone(), *b),
                        origin: RowOrigin::Affine { constraint: j },
                    });
                }
                Constraint::ConvexQuadratic(h) => {
                    check_len(h.dim(), n, at)?;
                    let eig = spectral::eig_sym(h.q())?;
                    if !eig.is_psd(tol.psd) {
                        return Err(Error::validation(
                            Invariant::Psd,
                            at,
                            format!("constraint matrix has eigenvalue {:e}", eig.min()),
                        ));
                    }
                    rows.push(ConstraintRow {
                        h: h.clone(),
                        origin: RowOrigin::Quadratic { constraint: j },
                    });
                }
                Constraint::Box { lo, hi } => {
                    check_len(lo.len(), n, at)?;
                    check_len(hi.len(), n, at)?;
                    for k in 0..n {
                        if !(lo[k].is_finite() && hi[k].is_finite()) {
                            return Err(Error::validation(
                                Invariant::BoxOrder,
                                at,
                                "box bounds must be finite",
                            ));
                        }
                        if lo[k] > hi[k] {
                            return Err(Error::validation(
                                Invariant::BoxOrder,
                                at,
                                format!("lo[{k}] = {} exceeds hi[{k}] = {}", lo[k], hi[k]),
                            ));
                        }
                    }
                    for k in 0..n {
                        let mut e = Vector::zeros(n);
                        e[k] = -1.0;
                        rows.push(ConstraintRow {
                            h: QuadraticFunction::affine(e.clone(), lo[k]),
                            origin: RowOrigin::BoxLower {
                                constraint: j,
                                coordinate: k,
                            },
                        });
                        e[k] = 1.0;
                        rows.push(ConstraintRow {
                            h: QuadraticFunction::affine(e, -hi[k]),
                            origin: RowOrigin::BoxUpper {
                                constraint: j,
                                coordinate: k,
                            },
                        });
                    }
                    bounding_box = Some(match bounding_box {
                        None => (lo.clone(), hi.clone()),
                        Some((l, h)) => (l.sup(lo), h.inf(hi)),
                    });
                }
            }
        }
        Ok(ProblemInstance {
            n,
            objectives: ratios,
            constraints,
            rows,
            bounding_box,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_objectives(&self) -> usize {
        self.objectives.len()
    }

    /// Number of expanded constraint rows (ℓ).
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objectives(&self) -> &[RatioObjective] {
        &self.objectives
    }

    pub fn objective(&self, i: usize) -> &RatioObjective {
        &self.objectives[i]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    /// Intersection of all box constraints, if any.
    pub fn bounding_box(&self) -> Option<(&Vector, &Vector)> {
        self.bounding_box.as_ref().map(|(l, h)| (l, h))
    }

    /// True when every row is affine.
    pub fn is_polyhedral(&self) -> bool {
        self.rows.iter().all(|r| r.h.is_affine())
    }

    fn check_point(&self, x: &Vector) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn positive_g(&self, i: usize, x: &Vector) -> Result<f64> {
        let g = self.objectives[i].g.value(x);
        if g > 0.0 {
            Ok(g)
        } else {
            Err(Error::Domain {
                objective: i,
                value: g,
            })
        }
    }

    /// `f_i(x)/g_i(x)` for a single objective.
    pub fn ratio(&self, i: usize, x: &Vector) -> Result<f64> {
        self.check_point(x)?;
        let g = self.positive_g(i, x)?;
        Ok(self.objectives[i].f.value(x) / g)
    }

    /// The objective vector `(f_i(x)/g_i(x))_i`.
    pub fn evaluate_ratios(&self, x: &Vector) -> Result<Vector> {
        self.check_point(x)?;
        let mut out = Vector::zeros(self.objectives.len());
        for i in 0..self.objectives.len() {
            let g = self.positive_g(i, x)?;
            out[i] = self.objectives[i].f.value(x) / g;
        }
        Ok(out)
    }

    /// Values `g_i(x)` for all objectives.
    pub fn denominators(&self, x: &Vector) -> Result<Vector> {
        self.check_point(x)?;
        let mut out = Vector::zeros(self.objectives.len());
        for i in 0..self.objectives.len() {
            out[i] = self.positive_g(i, x)?;
        }
        Ok(out)
    }

    /// Gradient of `f_i/g_i` by the quotient rule.
    pub fn ratio_gradient_row(&self, i: usize, x: &Vector) -> Result<Vector> {
        self.check_point(x)?;
        let obj = &self.objectives[i];
        let g = self.positive_g(i, x)?;
        let f = obj.f.value(x);
        Ok((obj.f.gradient(x) * g - obj.g.gradient(x) * f) / (g * g))
    }

    /// m×n matrix whose row `i` is `∇(f_i/g_i)(x)`.
    pub fn ratio_gradient(&self, x: &Vector) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.objectives.len(), self.n);
        for i in 0..self.objectives.len() {
            out.set_row(i, &self.ratio_gradient_row(i, x)?.transpose());
        }
        Ok(out)
    }

    /// `(u_i, s_i)` with `u_i = g_i(x*)/g_i(x)` and
    /// `s_i = (x-x*)ᵀ[A_i - (f_i/g_i)(x*) B_i](x-x*) / g_i(x)`.
    pub fn u_and_s(&self, i: usize, x: &Vector, xstar: &Vector) -> Result<(f64, f64)> {
        self.check_point(x)?;
        self.check_point(xstar)?;
        let obj = &self.objectives[i];
        let gx = self.positive_g(i, x)?;
        let gs = self.positive_g(i, xstar)?;
        let rho = obj.f.value(xstar) / gs;
        let d = x - xstar;
        let m = obj.f.q() - obj.g.q() * rho;
        let s = d.dot(&(&m * &d)) / gx;
        Ok((gs / gx, s))
    }

    /// `|Δratio - u_i ∇(f_i/g_i)(x*)ᵀ(x-x*) - s_i|`; zero up to rounding.
    pub fn identity_residual(&self, i: usize, x: &Vector, xstar: &Vector) -> Result<f64> {
        let (u, s) = self.u_and_s(i, x, xstar)?;
        let lhs = self.ratio(i, x)? - self.ratio(i, xstar)?;
        let grad = self.ratio_gradient_row(i, xstar)?;
        let rhs = u * grad.dot(&(x - xstar)) + s;
        Ok((lhs - rhs).abs())
    }

    /// Constraint row values `h_j(x)`.
    pub fn constraint_values(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.h.value(x)))
    }

    /// Feasible iff `h_j(x) <= tol` for every row.
    pub fn feasibility(&self, x: &Vector, tol: f64) -> Feasibility {
        if x.len() != self.n {
            return Feasibility::Infeasible {
                violated: Vec::new(),
                margins: Vec::new(),
            };
        }
        let mut violated = Vec::new();
        let mut margins = Vec::new();
        for (j, row) in self.rows.iter().enumerate() {
            let h = row.h.value(x);
            if !(h <= tol) {
                violated.push(j);
                margins.push(h);
            }
        }
        if violated.is_empty() {
            Feasibility::Feasible
        } else {
            Feasibility::Infeasible { violated, margins }
        }
    }

    pub fn is_feasible(&self, x: &Vector, tol: f64) -> bool {
        self.feasibility(x, tol).is_feasible()
    }
}

fn check_len(got: usize, n: usize, at: Location) -> Result<()> {
    if got != n {
        return Err(Error::validation(
            Invariant::Dimension,
            at,
            format!("expected length {n}, got {got}"),
        ));
    }
    Ok(())
}

pub(crate) fn relocate(e: Error, at: Location) -> Error {
    match e {
        Error::Validation {
            invariant, detail, ..
        } => Error::Validation {
            invariant,
            location: at,
            detail,
        },
        other => other,
    }
}

pub fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for s in (r + 1)..n {
            worst = worst.max((m[(r, s)] - m[(s, r)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

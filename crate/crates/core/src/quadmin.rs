//! Minimization of a quadratic `q(x) = xᵀQx + cᵀx + d` over the feasible set.
//!
//! Strategy, in order:
//!
//! 1. `S = ℝⁿ`: solved in closed form (global minimizer or unbounded).
//! 2. `S` a bounded polyhedron and `n <= exhaustive_dims_max`: every face is
//!    visited through its active set; on each face the reduced problem is
//!    solved when its reduced Hessian is positive definite. The minimum of a
//!    quadratic over a polytope is attained in the relative interior of some
//!    face on which it is a nondegenerate stationary point (or at a vertex),
//!    so the enumeration is exact.
//! 3. `Q` PSD: log-barrier Newton method, globally optimal up to the
//!    duality gap `ℓ/t`.
//! 4. Otherwise: multistart local search with a shifted-Hessian barrier
//!    method, reported as local together with a lower bound.

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{ConstraintRow, Matrix, ProblemInstance, QuadraticFunction, Vector};
use crate::spectral::{eig_sym, EigenDecomposition};

/// Iterates with norm above this are taken as evidence of unboundedness.
pub const DIVERGENCE_NORM: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    ActiveSet,
    Barrier,
    Multistart,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum QuadMinOutcome {
    /// Certified global minimum.
    Global {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        value: f64,
        method: Method,
    },
    /// Best point found by local search; the global minimum lies in
    /// `[lower_bound, value]`. `lower_bound` is `-inf` on unbounded sets.
    Local {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        value: f64,
        lower_bound: f64,
    },
    /// A feasible point of very low value along a feasible direction of
    /// negative curvature or descent.
    Unbounded {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        value: f64,
    },
}

impl QuadMinOutcome {
    /// Value of the best point found.
    pub fn value(&self) -> f64 {
        match self {
            QuadMinOutcome::Global { value, .. }
            | QuadMinOutcome::Local { value, .. }
            | QuadMinOutcome::Unbounded { value, .. } => *value,
        }
    }

    pub fn point(&self) -> &Vector {
        match self {
            QuadMinOutcome::Global { x, .. }
            | QuadMinOutcome::Local { x, .. }
            | QuadMinOutcome::Unbounded { x, .. } => x,
        }
    }

    /// Certified lower bound on the infimum.
    pub fn lower_bound(&self) -> f64 {
        match self {
            QuadMinOutcome::Global { value, .. } => *value,
            QuadMinOutcome::Local { lower_bound, .. } => *lower_bound,
            QuadMinOutcome::Unbounded { .. } => f64::NEG_INFINITY,
        }
    }
}

/// Minimizes `q` over the feasible set of `p`.
///
/// `center` must be feasible; it seeds the local searches and anchors the
/// fallback lower bound.
pub fn minimize_quadratic(
    q: &QuadraticFunction,
    p: &ProblemInstance,
    center: &Vector,
    cfg: &RunConfig,
) -> Result<QuadMinOutcome> {
    let n = p.dim();
    if q.dim() != n || center.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if q.dim() != n { q.dim() } else { center.len() },
        });
    }
    let eig = eig_sym(q.q())?;
    let convex = eig.is_psd(cfg.tol.psd);
    let rows = p.rows();

    if rows.is_empty() {
        return Ok(unconstrained(q, &eig, convex));
    }
    if p.is_polyhedral() && p.bounding_box().is_some() && n <= cfg.exhaustive_dims_max {
        if let Some(out) = active_set_enumeration(q, rows, n, cfg)? {
            return Ok(out);
        }
    }
    if convex {
        if let Some(x0) = strictly_feasible_point(rows, center)? {
            return Ok(match barrier(q, rows, x0, false)? {
                BarrierEnd::Converged(x) => {
                    let value = q.value(&x);
                    QuadMinOutcome::Global {
                        x,
                        value,
                        method: Method::Barrier,
                    }
                }
                BarrierEnd::Diverged(x) => {
                    let value = q.value(&x);
                    QuadMinOutcome::Unbounded { x, value }
                }
            });
        }
    }
    multistart(q, p, &eig, center, cfg)
}

fn unconstrained(q: &QuadraticFunction, eig: &EigenDecomposition, convex: bool) -> QuadMinOutcome {
    let n = q.dim();
    let thr = eig.threshold(1e-12);
    // direction of unboundedness, if any
    let mut dir = None;
    if !convex {
        dir = Some(eig.eigenvector(0));
    } else {
        // 2Qx = -c solvable iff c has no component in the null space of Q
        for k in 0..n {
            if eig.eigenvalues[k].abs() <= thr {
                let v = eig.eigenvector(k);
                let comp = v.dot(q.c());
                if comp.abs() > 1e-9 * (1.0 + q.c().norm()) {
                    dir = Some(v * -comp.signum());
                    break;
                }
            }
        }
    }
    if let Some(d) = dir {
        let x = d * DIVERGENCE_NORM;
        let value = q.value(&x);
        return QuadMinOutcome::Unbounded { x, value };
    }
    let coords = eig.eigenvectors.transpose() * (q.c() * -0.5);
    let mut y = Vector::zeros(n);
    for k in 0..n {
        if eig.eigenvalues[k].abs() > thr {
            y[k] = coords[k] / eig.eigenvalues[k];
        }
    }
    let x = &eig.eigenvectors * y;
    let value = q.value(&x);
    QuadMinOutcome::Global {
        x,
        value,
        method: Method::ClosedForm,
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k.min(n - k) {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r.min(usize::MAX as u128) as usize
}

fn row_tol(a: &Vector, b: f64, x: &Vector) -> f64 {
    1e-9 * (1.0 + b.abs() + a.norm() * x.norm())
}

/// Visits every independent active set of at most `n` rows. Returns `None`
/// if the number of sets exceeds the configured cap.
fn active_set_enumeration(
    q: &QuadraticFunction,
    rows: &[ConstraintRow],
    n: usize,
    cfg: &RunConfig,
) -> Result<Option<QuadMinOutcome>> {
    let l = rows.len();
    let total: usize = (0..=n.min(l))
        .map(|k| binomial(l, k))
        .fold(0usize, |a, b| a.saturating_add(b));
    if total > cfg.exhaustive_sets_max {
        return Ok(None);
    }
    let a: Vec<&Vector> = rows.iter().map(|r| r.h.c()).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.h.d()).collect();
    let qm = q.q();
    let qscale = qm.amax().max(1.0);
    let mut best: Option<(Vector, f64)> = None;

    let mut consider = |w: &[usize]| -> Result<()> {
        let k = w.len();
        let (x0, basis) = if k == 0 {
            (Vector::zeros(n), Matrix::identity(n, n))
        } else {
            let m = Matrix::from_fn(k, n, |r, s| a[w[r]][s]);
            let gram = &m * m.transpose();
            let mtm = m.transpose() * &m;
            let e = eig_sym(&mtm)?;
            let thr = 1e-10 * e.max_abs().max(1e-300);
            let rank = e.eigenvalues.iter().filter(|v| **v > thr).count();
            if rank < k {
                return Ok(());
            }
            let Some(ch) = Cholesky::new(gram) else {
                return Ok(());
            };
            let rhs = Vector::from_iterator(k, w.iter().map(|&j| -b[j]));
            let x0 = m.transpose() * ch.solve(&rhs);
            // eigenvalues ascending: the first n - k eigenvectors span the null space
            let basis = e.eigenvectors.columns(0, n - k).into_owned();
            (x0, basis)
        };
        let x = if basis.ncols() == 0 {
            x0
        } else {
            let hr = basis.transpose() * qm * &basis;
            let cr = basis.transpose() * q.gradient(&x0);
            let er = eig_sym(&hr)?;
            if er.min() <= 1e-10 * qscale {
                return Ok(());
            }
            let coords = er.eigenvectors.transpose() * (cr * -0.5);
            let y = Vector::from_iterator(
                coords.len(),
                coords
                    .iter()
                    .zip(er.eigenvalues.iter())
                    .map(|(c, mu)| c / mu),
            );
            let z = &er.eigenvectors * y;
            x0 + &basis * z
        };
        if !x.iter().all(|v| v.is_finite()) {
            return Ok(());
        }
        let feasible = (0..l).all(|j| a[j].dot(&x) + b[j] <= row_tol(a[j], b[j], &x));
        if feasible {
            let value = q.value(&x);
            if best.as_ref().is_none_or(|(_, bv)| value < *bv) {
                best = Some((x, value));
            }
        }
        Ok(())
    };

    for k in 0..=n.min(l) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            consider(&idx)?;
            // next combination in lexicographic order
            let mut pos = k;
            while pos > 0 && idx[pos - 1] == l - k + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            for r in pos..k {
                idx[r] = idx[r - 1] + 1;
            }
        }
    }
    Ok(best.map(|(x, value)| QuadMinOutcome::Global {
        x,
        value,
        method: Method::ActiveSet,
    }))
}

fn max_h(rows: &[ConstraintRow], x: &Vector) -> f64 {
    rows.iter()
        .map(|r| r.h.value(x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `H d = -g`, shifting `H` by a multiple of the identity until a
/// Cholesky factorization succeeds.
fn shifted_solve(h: &Matrix, g: &Vector) -> Vector {
    let n = h.nrows();
    let scale = h.amax().max(1e-300);
    let mut shift = 0.0;
    loop {
        let mut hs = h.clone();
        for i in 0..n {
            hs[(i, i)] += shift;
        }
        if let Some(ch) = Cholesky::new(hs) {
            return ch.solve(&(-g));
        }
        shift = if shift == 0.0 {
            1e-12 * scale
        } else {
            shift * 10.0
        };
    }
}

enum BarrierEnd {
    Converged(Vector),
    Diverged(Vector),
}

/// Log-barrier method for `min q` over `{h_j < 0}` from a strictly feasible
/// start. With `local = true` the Newton system is shifted to stay a descent
/// method on nonconvex `q`.
fn barrier(
    q: &QuadraticFunction,
    rows: &[ConstraintRow],
    mut x: Vector,
    local: bool,
) -> Result<BarrierEnd> {
    let l = rows.len() as f64;
    let mut t = 1.0;
    let q2 = q.hessian();
    let phi = |x: &Vector, t: f64| -> f64 {
        let mut s = t * q.value(x);
        for r in rows {
            let h = r.h.value(x);
            if h >= 0.0 {
                return f64::INFINITY;
            }
            s -= (-h).ln();
        }
        s
    };
    for _outer in 0..60 {
        for _inner in 0..200 {
            let mut grad = q.gradient(&x) * t;
            let mut hess = &q2 * t;
            for r in rows {
                let h = r.h.value(&x);
                let gh = r.h.gradient(&x);
                grad += &gh / (-h);
                hess += &gh * gh.transpose() / (h * h) + r.h.hessian() / (-h);
            }
            let dx = if local {
                shifted_solve(&hess, &grad)
            } else {
                match Cholesky::new(hess.clone()) {
                    Some(ch) => ch.solve(&(-&grad)),
                    None => shifted_solve(&hess, &grad),
                }
            };
            let dec = -grad.dot(&dx);
            if !(dec > 1e-14 * (1.0 + t * q.value(&x).abs())) {
                break;
            }
            let f0 = phi(&x, t);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let xn = &x + &dx * step;
                let fnew = phi(&xn, t);
                if fnew.is_finite() && fnew <= f0 - 0.25 * step * dec {
                    x = xn;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if x.norm() > DIVERGENCE_NORM {
                return Ok(BarrierEnd::Diverged(x));
            }
            if !moved {
                break;
            }
        }
        if l / t <= 1e-11 * (1.0 + q.value(&x).abs()) {
            break;
        }
        t *= 10.0;
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("barrier iterate became non-finite".into()));
    }
    Ok(BarrierEnd::Converged(x))
}

/// Finds a point with every `h_j < 0`, or `None` when the feasible set has
/// empty interior. Minimizes `s` subject to `h_j(x) <= s`, `s >= -1`.
fn strictly_feasible_point(rows: &[ConstraintRow], start: &Vector) -> Result<Option<Vector>> {
    let n = start.len();
    if max_h(rows, start) < -1e-9 {
        return Ok(Some(start.clone()));
    }
    let mut x = start.clone();
    let mut s = max_h(rows, &x).max(-0.5) + 1.0;
    let phi = |x: &Vector, s: f64, t: f64| -> f64 {
        if s <= -1.0 {
            return f64::INFINITY;
        }
        let mut v = t * s - (s + 1.0).ln();
        for r in rows {
            let gap = s - r.h.value(x);
            if gap <= 0.0 {
                return f64::INFINITY;
            }
            v -= gap.ln();
        }
        v
    };
    let mut t = 1.0;
    for _outer in 0..40 {
        for _inner in 0..200 {
            // variables (x, s)
            let mut grad = Vector::zeros(n + 1);
            let mut hess = Matrix::zeros(n + 1, n + 1);
            grad[n] = t - 1.0 / (s + 1.0);
            hess[(n, n)] = 1.0 / ((s + 1.0) * (s + 1.0));
            for r in rows {
                let gap = s - r.h.value(&x);
                let mut dg = Vector::zeros(n + 1);
                dg.rows_mut(0, n).copy_from(&(-r.h.gradient(&x)));
                dg[n] = 1.0;
                grad -= &dg / gap;
                hess += &dg * dg.transpose() / (gap * gap);
                let hh = r.h.hessian() / gap;
                let mut view = hess.view_mut((0, 0), (n, n));
                view += hh;
            }
            let d = shifted_solve(&hess, &grad);
            let dec = -grad.dot(&d);
            if !(dec > 1e-14) {
                break;
            }
            let f0 = phi(&x, s, t);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let xn = &x + d.rows(0, n) * step;
                let sn = s + d[n] * step;
                let fnew = phi(&xn, sn, t);
                if fnew.is_finite() && fnew <= f0 - 0.25 * step * dec {
                    x = xn;
                    s = sn;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if max_h(rows, &x) < -1e-9 && s < -0.25 {
            break;
        }
        if (rows.len() as f64 + 1.0) / t < 1e-13 {
            break;
        }
        t *= 10.0;
    }
    Ok((max_h(rows, &x) < -1e-10).then_some(x))
}

/// Largest feasible step along `d` from `x`, capped at `cap`.
fn max_step(rows: &[ConstraintRow], x: &Vector, d: &Vector, cap: f64) -> f64 {
    let feasible = |s: f64| max_h(rows, &(x + d * s)) < 0.0;
    if feasible(cap) {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Lower bound `q(c) - ‖∇q(c)‖R + min(0, λ_min(2Q)/2)R²` over the bounding
/// box, where `R` is the largest distance from `c` to a box corner.
fn box_lower_bound(
    q: &QuadraticFunction,
    p: &ProblemInstance,
    eig: &EigenDecomposition,
    c: &Vector,
) -> f64 {
    let Some((lo, hi)) = p.bounding_box() else {
        return f64::NEG_INFINITY;
    };
    let r2: f64 = (0..c.len())
        .map(|k| (c[k] - lo[k]).abs().max((hi[k] - c[k]).abs()).powi(2))
        .sum();
    let r = r2.sqrt();
    q.value(c) - q.gradient(c).norm() * r + eig.min().min(0.0) * r2
}

fn multistart(
    q: &QuadraticFunction,
    p: &ProblemInstance,
    eig: &EigenDecomposition,
    center: &Vector,
    cfg: &RunConfig,
) -> Result<QuadMinOutcome> {
    let n = p.dim();
    let rows = p.rows();
    let lower_bound = box_lower_bound(q, p, eig, center);
    let mut best = (center.clone(), q.value(center));
    let Some(xc) = strictly_feasible_point(rows, center)? else {
        // empty interior: only the centre itself is available
        return Ok(QuadMinOutcome::Local {
            x: best.0,
            value: best.1,
            lower_bound,
        });
    };
    let mut dirs: Vec<Vector> = Vec::new();
    for k in 0..n {
        let v = eig.eigenvector(k);
        dirs.push(v.clone());
        dirs.push(-v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while dirs.len() + 1 < cfg.multistart.max(1) {
        let v = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if v.norm() > 1e-6 {
            dirs.push(v.normalize());
        }
    }
    let cap = 1e6 * (1.0 + xc.norm());
    let mut starts = vec![xc.clone()];
    for d in &dirs {
        let smax = max_step(rows, &xc, d, cap);
        if smax >= cap {
            let far = &xc + d * cap;
            if d.dot(&(q.q() * d)) < 0.0 && q.value(&far) < q.value(&xc) {
                let value = q.value(&far);
                return Ok(QuadMinOutcome::Unbounded { x: far, value });
            }
        }
        starts.push(&xc + d * (0.9 * smax.min(cap)));
    }
    for s in starts {
        let x = match barrier(q, rows, s, true)? {
            BarrierEnd::Converged(x) => x,
            BarrierEnd::Diverged(x) => {
                let value = q.value(&x);
                return Ok(QuadMinOutcome::Unbounded { x, value });
            }
        };
        let value = q.value(&x);
        if value < best.1 {
            best = (x, value);
        }
    }
    if lower_bound >= best.1 - cfg.tol.z {
        return Ok(QuadMinOutcome::Global {
            x: best.0,
            value: best.1,
            method: Method::Multistart,
        });
    }
    Ok(QuadMinOutcome::Local {
        x: best.0,
        value: best.1,
        lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Constraint;
    use crate::Tolerances;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn instance(n: usize, constraints: Vec<Constraint>) -> ProblemInstance {
        let g = QuadraticFunction::constant(n, 1.0);
        ProblemInstance::new(n, vec![(g.clone(), g)], constraints, &Tolerances::default()).unwrap()
    }

    fn boxed(lo: &[f64], hi: &[f64]) -> Constraint {
        Constraint::Box {
            lo: v(lo),
            hi: v(hi),
        }
    }

    fn quad(n: usize, q: &[f64], c: &[f64], d: f64) -> QuadraticFunction {
        QuadraticFunction::new(Matrix::from_row_slice(n, n, q), v(c), d, 1e-12).unwrap()
    }

    #[test]
    fn concave_on_interval_hits_an_endpoint() {
        let p = instance(1, vec![boxed(&[-2.0], &[2.0])]);
        let q = quad(1, &[-1.0], &[0.0], 0.0);
        let out = minimize_quadratic(&q, &p, &v(&[0.0]), &RunConfig::default()).unwrap();
        match out {
            QuadMinOutcome::Global { x, value, method } => {
                assert_eq!(value, -4.0);
                assert_eq!(x[0].abs(), 2.0);
                assert_eq!(method, Method::ActiveSet);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strictly_convex_unconstrained() {
        let p = instance(2, vec![]);
        let q = quad(2, &[2.0, 0.0, 0.0, 1.0], &[4.0, -2.0], 1.0);
        let out = minimize_quadratic(&q, &p, &v(&[0.0, 0.0]), &RunConfig::default()).unwrap();
        let QuadMinOutcome::Global { x, .. } = out else {
            panic!()
        };
        assert!((x - v(&[-1.0, 1.0])).amax() < 1e-14);
    }

    #[test]
    fn concave_unconstrained_is_unbounded() {
        let p = instance(1, vec![]);
        let q = quad(1, &[-1.0], &[0.0], 0.0);
        let out = minimize_quadratic(&q, &p, &v(&[0.0]), &RunConfig::default()).unwrap();
        assert!(matches!(out, QuadMinOutcome::Unbounded { .. }));
        let lin = QuadraticFunction::affine(v(&[1.0, 0.0]), 0.0);
        let p2 = instance(2, vec![]);
        let out = minimize_quadratic(&lin, &p2, &v(&[0.0, 0.0]), &RunConfig::default()).unwrap();
        assert!(matches!(out, QuadMinOutcome::Unbounded { .. }));
    }

    #[test]
    fn linear_objective_over_disk() {
        let disk = Constraint::ConvexQuadratic(quad(2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], -1.0));
        let p = instance(2, vec![disk]);
        let q = QuadraticFunction::affine(v(&[1.0, 0.0]), 0.0);
        let out = minimize_quadratic(&q, &p, &v(&[0.0, 0.0]), &RunConfig::default()).unwrap();
        let QuadMinOutcome::Global { x, value, method } = out else {
            panic!()
        };
        assert_eq!(method, Method::Barrier);
        assert!((value + 1.0).abs() < 1e-9, "{value}");
        assert!((x - v(&[-1.0, 0.0])).amax() < 1e-4);
    }

    #[test]
    fn barrier_starts_from_a_boundary_point() {
        let disk = Constraint::ConvexQuadratic(quad(2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], -1.0));
        let p = instance(2, vec![disk]);
        let q = quad(2, &[1.0, 0.0, 0.0, 1.0], &[-4.0, 0.0], 0.0);
        let out = minimize_quadratic(&q, &p, &v(&[1.0, 0.0]), &RunConfig::default()).unwrap();
        let QuadMinOutcome::Global { x, .. } = out else {
            panic!()
        };
        assert!((x - v(&[1.0, 0.0])).amax() < 1e-6);
    }

    #[test]
    fn nonconvex_over_disk_and_box() {
        let disk = Constraint::ConvexQuadratic(quad(2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], -1.0));
        let p = instance(2, vec![disk, boxed(&[-1.0, -1.0], &[1.0, 1.0])]);
        let q = quad(2, &[-1.0, 0.0, 0.0, -0.5], &[0.0, 0.0], 0.0);
        let out = minimize_quadratic(&q, &p, &v(&[0.0, 0.0]), &RunConfig::default()).unwrap();
        match out {
            QuadMinOutcome::Local {
                value, lower_bound, ..
            } => {
                assert!((value + 1.0).abs() < 1e-6, "{value}");
                assert!((lower_bound + 2.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonconvex_without_box_has_no_finite_bound() {
        let disk = Constraint::ConvexQuadratic(quad(2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], -1.0));
        let p = instance(2, vec![disk]);
        let q = quad(2, &[-1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], 0.0);
        let out = minimize_quadratic(&q, &p, &v(&[0.0, 0.0]), &RunConfig::default()).unwrap();
        assert_eq!(out.lower_bound(), f64::NEG_INFINITY);
        assert!((out.value() + 1.0).abs() < 1e-6);
    }

    #[test]
    fn active_set_matches_a_fine_grid() {
        let p = instance(
            2,
            vec![
                boxed(&[-1.0, -2.0], &[2.0, 1.0]),
                Constraint::Affine {
                    a: v(&[1.0, 1.0]),
                    b: -1.5,
                },
            ],
        );
        let q = quad(2, &[1.0, 2.0, 2.0, -1.0], &[0.3, -0.7], 0.2);
        let out = minimize_quadratic(&q, &p, &v(&[0.0, 0.0]), &RunConfig::default()).unwrap();
        let QuadMinOutcome::Global { value, x, .. } = out else {
            panic!()
        };
        assert!(p.is_feasible(&x, 1e-9));
        let mut grid_min = f64::INFINITY;
        for i in 0..=300 {
            for j in 0..=300 {
                let y = v(&[-1.0 + 3.0 * i as f64 / 300.0, -2.0 + 3.0 * j as f64 / 300.0]);
                if p.is_feasible(&y, 1e-12) {
                    grid_min = grid_min.min(q.value(&y));
                }
            }
        }
        assert!(value <= grid_min + 1e-12, "{value} vs {grid_min}");
        assert!(value >= grid_min - 0.1);
    }

    #[test]
    fn binomial_counts() {
        assert_eq!(binomial(8, 0), 1);
        assert_eq!(binomial(8, 4), 70);
        assert_eq!(binomial(3, 5), 0);
    }
}

//! Brute-force dominance oracle over a lattice of the bounding box.
//!
//! Grid points are enumerated in row-major order (last coordinate fastest),
//! which is also lexicographic order, so "first dominator found" is the
//! lexicographically smallest one. Parallel scans use order-preserving
//! searches and return the same bytes as a sequential scan.
//!
//! With nested steps `step, step/2, step/4, ...` over the same box every
//! coarse lattice is a subset of the finer ones, so a point dominated on a
//! coarse grid stays dominated after refinement.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{Feasibility, ProblemInstance, Vector};

/// Lattice `lo + k·step` of the instance's bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lo: Vector,
    step: f64,
    counts: Vec<usize>,
    len: usize,
}

impl Grid {
    /// Builds the lattice, refusing grids with more than `cfg.grid_cap` points.
    pub fn new(p: &ProblemInstance, step: f64, cfg: &RunConfig) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!(
                "grid step must be positive, got {step}"
            )));
        }
        let (lo, hi) = p.bounding_box().ok_or_else(|| {
            Error::Config("the oracle needs a box constraint to bound the grid".into())
        })?;
        let mut counts = Vec::with_capacity(p.dim());
        let mut len: usize = 1;
        for k in 0..p.dim() {
            let span = (hi[k] - lo[k]) / step;
            let c = (span + 1e-9 * (1.0 + span)).floor() as usize + 1;
            counts.push(c);
            len = len
                .checked_mul(c)
                .filter(|l| *l <= cfg.grid_cap)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "grid with step {step} exceeds the cap of {} points",
                        cfg.grid_cap
                    ))
                })?;
        }
        Ok(Grid {
            lo: lo.clone(),
            step,
            counts,
            len,
        })
    }

    /// Number of lattice points, feasible or not.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// The `idx`-th lattice point in row-major order.
    pub fn point(&self, mut idx: usize) -> Vector {
        let n = self.counts.len();
        let mut x = Vector::zeros(n);
        for k in (0..n).rev() {
            let c = self.counts[k];
            x[k] = self.lo[k] + (idx % c) as f64 * self.step;
            idx /= c;
        }
        x
    }
}

/// All feasible lattice points in row-major order.
pub fn grid_points(p: &ProblemInstance, step: f64, cfg: &RunConfig) -> Result<Vec<Vector>> {
    let grid = Grid::new(p, step, cfg)?;
    Ok((0..grid.len())
        .into_par_iter()
        .map(|i| grid.point(i))
        .filter(|x| p.is_feasible(x, cfg.tol.feasibility))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    #[serde(serialize_with = "crate::ser::vector")]
    pub query: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub query_ratios: Vector,
    pub dominated: bool,
    pub weakly_dominated: bool,
    #[serde(serialize_with = "crate::ser::opt_vector")]
    pub dominator: Option<Vector>,
    #[serde(serialize_with = "crate::ser::opt_vector")]
    pub weak_dominator: Option<Vector>,
    /// Strict-improvement margin that was required.
    pub margin: f64,
    pub grid_step: f64,
    /// Feasible grid points scanned.
    pub points_checked: usize,
}

/// `a` dominates `b`: no coordinate worse, at least one better by more than `margin`.
pub fn dominates(a: &Vector, b: &Vector, margin: &Vector) -> bool {
    let mut strict = false;
    for i in 0..a.len() {
        if a[i] > b[i] {
            return false;
        }
        if a[i] < b[i] - margin[i] {
            strict = true;
        }
    }
    strict
}

/// Every coordinate of `a` better than `b` by more than `margin`.
pub fn strictly_dominates(a: &Vector, b: &Vector, margin: &Vector) -> bool {
    (0..a.len()).all(|i| a[i] < b[i] - margin[i])
}

/// First feasible grid point whose image under `eval` dominates `target`
/// (strictly in every coordinate when `weak` is set), with per-point margins.
pub fn first_dominator<E, M>(
    p: &ProblemInstance,
    grid: &Grid,
    tol: f64,
    target: &Vector,
    eval: E,
    margin: M,
    weak: bool,
) -> Option<Vector>
where
    E: Fn(&Vector) -> Vector + Sync,
    M: Fn(&Vector) -> Vector + Sync,
{
    (0..grid.len()).into_par_iter().find_map_first(|i| {
        let x = grid.point(i);
        if !p.is_feasible(&x, tol) {
            return None;
        }
        let v = eval(&x);
        let m = margin(&x);
        let hit = if weak {
            strictly_dominates(&v, target, &m)
        } else {
            dominates(&v, target, &m)
        };
        hit.then_some(x)
    })
}

fn ratios(p: &ProblemInstance, x: &Vector) -> Vector {
    p.evaluate_ratios(x)
        .expect("denominators are positive on validated instances")
}

fn check_query(p: &ProblemInstance, q: &Vector, tol: f64) -> Result<()> {
    if q.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: q.len(),
        });
    }
    match p.feasibility(q, tol) {
        Feasibility::Feasible => Ok(()),
        Feasibility::Infeasible { violated, .. } => Err(Error::InfeasiblePoint { violated }),
    }
}

fn report(
    p: &ProblemInstance,
    query: &Vector,
    step: f64,
    margin: f64,
    cfg: &RunConfig,
) -> Result<DominanceReport> {
    check_query(p, query, cfg.tol.feasibility)?;
    let grid = Grid::new(p, step, cfg)?;
    let tol = cfg.tol.feasibility;
    let rq = ratios(p, query);
    let mv = Vector::from_element(p.num_objectives(), margin);
    let eval = |x: &Vector| ratios(p, x);
    let dominator = first_dominator(p, &grid, tol, &rq, eval, |_| mv.clone(), false);
    let weak_dominator = first_dominator(p, &grid, tol, &rq, eval, |_| mv.clone(), true);
    let points_checked = (0..grid.len())
        .into_par_iter()
        .filter(|&i| p.is_feasible(&grid.point(i), tol))
        .count();
    Ok(DominanceReport {
        query: query.clone(),
        query_ratios: rq,
        dominated: dominator.is_some(),
        weakly_dominated: weak_dominator.is_some(),
        dominator,
        weak_dominator,
        margin,
        grid_step: step,
        points_checked,
    })
}

/// Scans the grid for a point dominating `query`, requiring a strict
/// improvement of more than `dom_tol` in some ratio.
pub fn dominance_check(
    p: &ProblemInstance,
    query: &Vector,
    step: f64,
    dom_tol: f64,
    cfg: &RunConfig,
) -> Result<DominanceReport> {
    report(p, query, step, dom_tol, cfg)
}

/// Largest ratio-gradient norm over the grid (sampled with a stride when
/// the grid exceeds `samples` points).
pub fn lipschitz_estimate(
    p: &ProblemInstance,
    step: f64,
    samples: usize,
    cfg: &RunConfig,
) -> Result<f64> {
    let grid = Grid::new(p, step, cfg)?;
    let stride = (grid.len() / samples.max(1)).max(1);
    let idx: Vec<usize> = (0..grid.len()).step_by(stride).collect();
    Ok(idx
        .par_iter()
        .map(|&i| {
            let x = grid.point(i);
            if !p.is_feasible(&x, cfg.tol.feasibility) {
                return 0.0;
            }
            let g = p
                .ratio_gradient(&x)
                .expect("denominators are positive on validated instances");
            (0..g.nrows()).map(|r| g.row(r).norm()).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}

/// Dominance with the discretization-aware margin
/// `dom_tol + lipschitz · step · √n`.
pub fn dominance_check_with_margin(
    p: &ProblemInstance,
    query: &Vector,
    step: f64,
    dom_tol: f64,
    lipschitz: f64,
    cfg: &RunConfig,
) -> Result<DominanceReport> {
    let margin = dom_tol + lipschitz * step * (p.dim() as f64).sqrt();
    report(p, query, step, margin, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontPoint {
    #[serde(serialize_with = "crate::ser::vector")]
    pub point: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub ratios: Vector,
}

/// Feasible grid points not dominated by any other grid point, in grid order.
pub fn approximate_pareto_front(
    p: &ProblemInstance,
    step: f64,
    dom_tol: f64,
    cfg: &RunConfig,
) -> Result<Vec<FrontPoint>> {
    let pts = grid_points(p, step, cfg)?;
    let vals: Vec<Vector> = pts.par_iter().map(|x| ratios(p, x)).collect();
    let margin = Vector::from_element(p.num_objectives(), dom_tol);
    // a dominator never has a larger first ratio, so scan candidates sorted by it
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| vals[a][0].total_cmp(&vals[b][0]).then(a.cmp(&b)));
    let keep: Vec<bool> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let vi = &vals[i];
            let end = order.partition_point(|&j| vals[j][0] <= vi[0]);
            !order[..end]
                .iter()
                .any(|&j| j != i && dominates(&vals[j], vi, &margin))
        })
        .collect();
    Ok(pts
        .into_iter()
        .zip(vals)
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|((point, ratios), _)| FrontPoint { point, ratios })
        .collect())
}

//! Checks of the Mond–Weir type dual at given points.
//!
//! A dual point is a triple `(u, τ, λ)` with `u ∈ S`, `τ > 0`, `λ >= 0`,
//! `Σ λ_j = 1`, `Σ λ_j h_j(u) >= 0` and
//!
//! ```text
//! Σ τ_i (∇f_i(u) - (f_i(u)/g_i(u)) ∇g_i(u)) + Σ λ_j ∇h_j(u) = 0.
//! ```
//!
//! Its objective value is the ratio vector at `u`. Nothing here maximizes
//! the dual; each function verifies one duality statement at the points it
//! is given.

use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{certify_point_with_tau, Certificate};
use crate::config::{RunConfig, Tolerances};
use crate::error::{Error, Result};
use crate::kkt::{scalarized_gradient_sum, MultiplierPair};
use crate::lp::{solve_linear_program, LinearProgram, LpOutcome};
use crate::model::{Feasibility, ProblemInstance, Vector};
use crate::oracle::{dominance_check, dominates, grid_points, DominanceReport};
use crate::spectral::{build_f, eig_sym, PsdStatus};

pub const REASON_LAMBDA_SUM_ZERO: &str = "lambda-sum-zero";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualResiduals {
    /// `‖Σ τ_i (∇f_i - ρ_i ∇g_i)(u) + Σ λ_j ∇h_j(u)‖_∞`.
    pub stationarity: f64,
    /// `Σ λ_j h_j(u)`, required to be `>= 0`.
    pub lambda_h_sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPoint {
    #[serde(serialize_with = "crate::ser::vector")]
    pub u: Vector,
    /// Multipliers of the scalarized gradients.
    #[serde(serialize_with = "crate::ser::vector")]
    pub tau: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub lambda: Vector,
    pub residuals: DualResiduals,
}

impl DualPoint {
    /// Wraps `(u, τ, λ)` and evaluates its residuals.
    pub fn new(p: &ProblemInstance, u: Vector, tau: Vector, lambda: Vector) -> Result<Self> {
        if u.len() != p.dim() {
            return Err(Error::Dimension {
                expected: p.dim(),
                got: u.len(),
            });
        }
        if tau.len() != p.num_objectives() {
            return Err(Error::Dimension {
                expected: p.num_objectives(),
                got: tau.len(),
            });
        }
        if lambda.len() != p.num_rows() {
            return Err(Error::Dimension {
                expected: p.num_rows(),
                got: lambda.len(),
            });
        }
        let mut s = scalarized_gradient_sum(p, &u, &tau)?;
        let mut sign = 0.0;
        for (j, row) in p.rows().iter().enumerate() {
            s += row.h.gradient(&u) * lambda[j];
            sign += lambda[j] * row.h.value(&u);
        }
        Ok(DualPoint {
            residuals: DualResiduals {
                stationarity: s.amax(),
                lambda_h_sign: sign,
            },
            u,
            tau,
            lambda,
        })
    }

    /// The dual objective vector `f(u)/g(u)`.
    pub fn value(&self, p: &ProblemInstance) -> Result<Vector> {
        p.evaluate_ratios(&self.u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DualConstraint {
    UInS,
    TauPositive,
    LambdaNonnegative,
    LambdaSumOne,
    Stationarity,
    LambdaHSign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DualFeasibility {
    Feasible,
    Infeasible {
        constraint: DualConstraint,
        amount: f64,
    },
}

impl DualFeasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, DualFeasibility::Feasible)
    }
}

/// Checks every dual constraint. Stationarity is measured relative to
/// `max(1, Σ τ_i)`.
pub fn dual_feasible(p: &ProblemInstance, dp: &DualPoint, tol: &Tolerances) -> DualFeasibility {
    use DualConstraint::*;
    let fail = |constraint, amount| DualFeasibility::Infeasible { constraint, amount };
    if let Feasibility::Infeasible { margins, .. } = p.feasibility(&dp.u, tol.feasibility) {
        return fail(UInS, margins.iter().copied().fold(0.0, f64::max));
    }
    if let Some(t) = dp.tau.iter().copied().find(|t| !(*t > 0.0)) {
        return fail(TauPositive, t);
    }
    if let Some(l) = dp.lambda.iter().copied().find(|l| *l < -tol.sign) {
        return fail(LambdaNonnegative, l);
    }
    let sum = dp.lambda.sum();
    if (sum - 1.0).abs() > tol.sign * (1.0 + p.num_rows() as f64) {
        return fail(LambdaSumOne, sum);
    }
    if dp.residuals.stationarity > tol.stationarity * dp.tau.sum().max(1.0) {
        return fail(Stationarity, dp.residuals.stationarity);
    }
    if dp.residuals.lambda_h_sign < -tol.sign {
        return fail(LambdaHSign, dp.residuals.lambda_h_sign);
    }
    DualFeasibility::Feasible
}

fn require_primal_feasible(p: &ProblemInstance, x: &Vector, tol: f64) -> Result<()> {
    if x.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: x.len(),
        });
    }
    match p.feasibility(x, tol) {
        Feasibility::Feasible => Ok(()),
        Feasibility::Infeasible { violated, .. } => Err(Error::InfeasiblePoint { violated }),
    }
}

fn f_status(p: &ProblemInstance, w: &Vector, u: &Vector, tol: f64) -> Result<PsdStatus> {
    Ok(eig_sym(&build_f(p, w, u)?)?.status(tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum WeakDuality {
    Consistent,
    /// The primal ratio vector dominates the dual one.
    CounterexampleFound {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        #[serde(serialize_with = "crate::ser::vector")]
        primal_value: Vector,
        #[serde(serialize_with = "crate::ser::vector")]
        dual_value: Vector,
        dual: DualPoint,
    },
}

/// Checks that `f(x)/g(x)` does not dominate the dual value at `dp`.
///
/// Requires `F(τ, u)` PSD; otherwise the statement has no hypothesis to rest
/// on and [`Error::HypothesisNotMet`] is returned.
pub fn weak_duality_check(
    p: &ProblemInstance,
    x: &Vector,
    dp: &DualPoint,
    cfg: &RunConfig,
) -> Result<WeakDuality> {
    require_primal_feasible(p, x, cfg.tol.feasibility)?;
    if !f_status(p, &dp.tau, &dp.u, cfg.tol.psd)?.is_psd() {
        return Err(Error::HypothesisNotMet(
            "F(tau, u) is not positive semidefinite".into(),
        ));
    }
    weak_duality_unchecked(p, x, dp, cfg.tol.dominance)
}

fn weak_duality_unchecked(
    p: &ProblemInstance,
    x: &Vector,
    dp: &DualPoint,
    dom_tol: f64,
) -> Result<WeakDuality> {
    let primal_value = p.evaluate_ratios(x)?;
    let dual_value = dp.value(p)?;
    let margin = Vector::from_element(p.num_objectives(), dom_tol);
    Ok(if dominates(&primal_value, &dual_value, &margin) {
        WeakDuality::CounterexampleFound {
            x: x.clone(),
            primal_value,
            dual_value,
            dual: dp.clone(),
        }
    } else {
        WeakDuality::Consistent
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakDualitySweep {
    pub checked: usize,
    pub counterexamples: Vec<WeakDuality>,
}

/// Runs [`weak_duality_check`] against every feasible grid point.
pub fn weak_duality_sweep(
    p: &ProblemInstance,
    dp: &DualPoint,
    step: f64,
    cfg: &RunConfig,
) -> Result<WeakDualitySweep> {
    if !f_status(p, &dp.tau, &dp.u, cfg.tol.psd)?.is_psd() {
        return Err(Error::HypothesisNotMet(
            "F(tau, u) is not positive semidefinite".into(),
        ));
    }
    let pts = grid_points(p, step, cfg)?;
    let results: Vec<WeakDuality> = pts
        .par_iter()
        .map(|x| weak_duality_unchecked(p, x, dp, cfg.tol.dominance))
        .collect::<Result<_>>()?;
    Ok(WeakDualitySweep {
        checked: pts.len(),
        counterexamples: results
            .into_iter()
            .filter(|r| !matches!(r, WeakDuality::Consistent))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StrongDuality {
    Dual { dual: DualPoint, equal_values: bool },
    NotConstructible { reason: String },
}

/// Builds `(x*, τ/g(x*), λ)` from ratio-gradient multipliers and rescales
/// `(τ, λ)` jointly so that `Σ λ_j = 1`. Multipliers of inactive rows with
/// negligible `λ_j h_j(x*)` are taken as zero.
pub fn strong_duality_construct(
    p: &ProblemInstance,
    xstar: &Vector,
    mp: &MultiplierPair,
    cfg: &RunConfig,
) -> Result<StrongDuality> {
    require_primal_feasible(p, xstar, cfg.tol.feasibility)?;
    // multipliers of inactive rows whose complementarity term is below
    // tolerance are solver noise
    let h = p.constraint_values(xstar);
    let noise = cfg.tol.stationarity * (mp.tau.sum() + mp.lambda_sum());
    let lambda = Vector::from_fn(mp.lambda.len(), |j, _| {
        if h[j].abs() > cfg.tol.feasibility && (mp.lambda[j] * h[j]).abs() <= noise {
            0.0
        } else {
            mp.lambda[j]
        }
    });
    let sum = lambda.sum();
    if !(sum > cfg.tol.sign) {
        return Ok(StrongDuality::NotConstructible {
            reason: REASON_LAMBDA_SUM_ZERO.into(),
        });
    }
    let tau = mp.tau.component_div(&p.denominators(xstar)?) / sum;
    let lambda = lambda / sum;
    let dual = DualPoint::new(p, xstar.clone(), tau, lambda)?;
    let equal_values = dual.value(p)? == p.evaluate_ratios(xstar)?;
    Ok(StrongDuality::Dual { dual, equal_values })
}

/// Searches for a dual-feasible `(τ, λ)` at a given `u` by maximizing
/// `min τ_i` (capped at 1) under the dual constraints, with stationarity
/// relaxed to the stationarity tolerance. Only rows active at
/// `u` may carry weight, since `Σ λ_j h_j(u) >= 0` with `u ∈ S` forces it.
pub fn find_dual_point(
    p: &ProblemInstance,
    u: &Vector,
    cfg: &RunConfig,
) -> Result<Option<DualPoint>> {
    require_primal_feasible(p, u, cfg.tol.feasibility)?;
    let (m, n) = (p.num_objectives(), p.dim());
    let active: Vec<usize> = p
        .constraint_values(u)
        .iter()
        .enumerate()
        .filter(|(_, h)| h.abs() <= cfg.tol.feasibility)
        .map(|(j, _)| j)
        .collect();
    if active.is_empty() {
        return Ok(None);
    }
    let la = active.len();
    let nv = m + la + 1;
    let mut d = Vec::with_capacity(m);
    for (i, o) in p.objectives().iter().enumerate() {
        let rho = p.ratio(i, u)?;
        d.push(o.f().gradient(u) - o.g().gradient(u) * rho);
    }
    let hg: Vec<Vector> = active.iter().map(|&j| p.rows()[j].h.gradient(u)).collect();
    let mut lp = LinearProgram {
        c: vec![0.0; nv],
        ..Default::default()
    };
    lp.c[nv - 1] = 1.0;
    // stationarity within ±tol: exact equalities make nearly dependent
    // gradient rows infeasible in floating point
    let eps = cfg.tol.stationarity;
    for k in 0..n {
        let mut row = vec![0.0; nv];
        for i in 0..m {
            row[i] = d[i][k];
        }
        for a in 0..la {
            row[m + a] = hg[a][k];
        }
        lp.a_ineq.push(row.iter().map(|v| -v).collect());
        lp.b_ineq.push(eps);
        lp.a_ineq.push(row);
        lp.b_ineq.push(eps);
    }
    let mut row = vec![0.0; nv];
    row[m..m + la].fill(1.0);
    lp.a_eq.push(row);
    lp.b_eq.push(1.0);
    for i in 0..m {
        let mut row = vec![0.0; nv];
        row[nv - 1] = 1.0;
        row[i] = -1.0;
        lp.a_ineq.push(row);
        lp.b_ineq.push(0.0);
    }
    let mut row = vec![0.0; nv];
    row[nv - 1] = 1.0;
    lp.a_ineq.push(row);
    lp.b_ineq.push(1.0);
    match solve_linear_program(&lp)? {
        LpOutcome::Optimal { x, objective } if objective >= cfg.tol.strict => {
            let tau = Vector::from_column_slice(&x[..m]);
            let mut lambda = Vector::zeros(p.num_rows());
            for (a, &j) in active.iter().enumerate() {
                lambda[j] = x[m + a];
            }
            let dp = DualPoint::new(p, u.clone(), tau, lambda)?;
            Ok(dual_feasible(p, &dp, &cfg.tol).is_feasible().then_some(dp))
        }
        _ => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverseReport {
    pub certificate: Certificate,
    pub oracle: Option<DominanceReport>,
}

impl ConverseReport {
    /// Certified, or at least not dominated on the oracle grid.
    pub fn confirmed(&self) -> bool {
        self.certificate.is_certified() || self.oracle.as_ref().is_some_and(|o| !o.dominated)
    }
}

/// Confirms that the `u` of a dual-feasible point with `F(τ, u)` PSD is
/// Pareto optimal: certifies `u` with `τ ∘ g(u)` and, when `oracle_step`
/// is given, runs the grid oracle at `u`.
pub fn converse_duality_check(
    p: &ProblemInstance,
    dp: &DualPoint,
    oracle_step: Option<f64>,
    cfg: &RunConfig,
) -> Result<ConverseReport> {
    if let DualFeasibility::Infeasible { constraint, amount } = dual_feasible(p, dp, &cfg.tol) {
        return Err(Error::HypothesisNotMet(format!(
            "dual point violates {constraint:?} ({amount:e})"
        )));
    }
    if !f_status(p, &dp.tau, &dp.u, cfg.tol.psd)?.is_psd() {
        return Err(Error::HypothesisNotMet(
            "F(tau, u) is not positive semidefinite".into(),
        ));
    }
    let tau_ratio = dp.tau.component_mul(&p.denominators(&dp.u)?);
    let certificate = certify_point_with_tau(p, &dp.u, cfg, Some(&tau_ratio))?;
    let oracle = match oracle_step {
        Some(step) => Some(dominance_check(p, &dp.u, step, cfg.tol.dominance, cfg)?),
        None => None,
    };
    Ok(ConverseReport {
        certificate,
        oracle,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StrictConverse {
    SamePoint,
    HypothesisNotMet {
        reason: String,
    },
    Violation {
        #[serde(serialize_with = "crate::ser::vector")]
        xstar: Vector,
        #[serde(serialize_with = "crate::ser::vector")]
        u: Vector,
        distance: f64,
        weighted_gap: f64,
    },
}

/// With `Σ τ_i ρ_i(x*) = Σ τ_i ρ_i(u)` and `F(τ/g(x*), u)` positive
/// definite, `x*` and `u` must coincide.
pub fn strict_converse_check(
    p: &ProblemInstance,
    xstar: &Vector,
    dp: &DualPoint,
    cfg: &RunConfig,
) -> Result<StrictConverse> {
    require_primal_feasible(p, xstar, cfg.tol.feasibility)?;
    let not_met = |reason: String| Ok(StrictConverse::HypothesisNotMet { reason });
    if let DualFeasibility::Infeasible { constraint, amount } = dual_feasible(p, dp, &cfg.tol) {
        return not_met(format!("dual point violates {constraint:?} ({amount:e})"));
    }
    let rx = p.evaluate_ratios(xstar)?;
    let ru = dp.value(p)?;
    let weighted_gap = dp.tau.dot(&rx) - dp.tau.dot(&ru);
    if weighted_gap.abs() > cfg.tol.stationarity * (1.0 + dp.tau.dot(&rx.abs())) {
        return not_met(format!("weighted values differ by {weighted_gap:e}"));
    }
    let w = dp.tau.component_div(&p.denominators(xstar)?);
    if f_status(p, &w, &dp.u, cfg.tol.psd)? != PsdStatus::PositiveDefinite {
        return not_met("F(tau/g(x*), u) is not positive definite".into());
    }
    let distance = (xstar - &dp.u).norm();
    Ok(if distance <= cfg.tol.point {
        StrictConverse::SamePoint
    } else {
        StrictConverse::Violation {
            xstar: xstar.clone(),
            u: dp.u.clone(),
            distance,
            weighted_gap,
        }
    })
}

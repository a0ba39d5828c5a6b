//! Multiplier recovery for the first-order conditions at a candidate point.
//!
//! Strict positivity of `τ` is decided by a max-min linear program: with
//! variables `(τ, λ, t) >= 0`,
//!
//! ```text
//! maximize t
//!   Σ τ_i ∇(f_i/g_i)(x*) + Σ λ_j ∇h_j(x*) = 0
//!   Σ λ_j h_j(x*) = 0
//!   Σ τ_i + Σ λ_j = N
//!   t <= τ_i
//! ```
//!
//! and multipliers exist iff the optimal `t` clears `strict · N`.

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::lp::{solve_linear_program, LinearProgram, LpOutcome};
use crate::model::{Feasibility, ProblemInstance, Vector};

/// `(τ, λ)` with the residuals they leave at the point they were built for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierPair {
    #[serde(serialize_with = "crate::ser::vector")]
    pub tau: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub lambda: Vector,
    /// `‖Σ τ_i ∇(f_i/g_i)(x*) + Σ λ_j ∇h_j(x*)‖_∞`.
    pub stationarity_residual: f64,
    /// `|Σ λ_j h_j(x*)|`.
    pub complementarity_residual: f64,
}

impl MultiplierPair {
    /// Wraps `(τ, λ)` and evaluates both residuals at `xstar`.
    pub fn new(p: &ProblemInstance, xstar: &Vector, tau: Vector, lambda: Vector) -> Result<Self> {
        let (stationarity_residual, complementarity_residual) =
            kkt_residuals(p, xstar, &tau, &lambda)?;
        Ok(MultiplierPair {
            tau,
            lambda,
            stationarity_residual,
            complementarity_residual,
        })
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambda.sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MultiplierSearch {
    Found(MultiplierPair),
    /// No `τ > 0`, `λ >= 0` satisfies stationarity and complementarity.
    /// `floor` is the optimal `t` of the max-min program (`0` when infeasible).
    NoneExist {
        floor: f64,
    },
}

impl MultiplierSearch {
    pub fn found(&self) -> Option<&MultiplierPair> {
        match self {
            MultiplierSearch::Found(mp) => Some(mp),
            MultiplierSearch::NoneExist { .. } => None,
        }
    }
}

/// Stationarity and complementarity residuals of the ratio-gradient system.
pub fn kkt_residuals(
    p: &ProblemInstance,
    xstar: &Vector,
    tau: &Vector,
    lambda: &Vector,
) -> Result<(f64, f64)> {
    check_lengths(p, tau, lambda)?;
    let mut s = Vector::zeros(p.dim());
    for i in 0..p.num_objectives() {
        s += p.ratio_gradient_row(i, xstar)? * tau[i];
    }
    let mut comp = 0.0;
    for (j, row) in p.rows().iter().enumerate() {
        s += row.h.gradient(xstar) * lambda[j];
        comp += lambda[j] * row.h.value(xstar);
    }
    Ok((s.amax(), comp.abs()))
}

fn check_lengths(p: &ProblemInstance, tau: &Vector, lambda: &Vector) -> Result<()> {
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
    Ok(())
}

fn require_feasible(p: &ProblemInstance, xstar: &Vector, tol: f64) -> Result<()> {
    if xstar.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: xstar.len(),
        });
    }
    match p.feasibility(xstar, tol) {
        Feasibility::Feasible => Ok(()),
        Feasibility::Infeasible { violated, .. } => Err(Error::InfeasiblePoint { violated }),
    }
}

/// Constraint values with near-active rows snapped to exactly zero.
fn snapped_constraint_values(p: &ProblemInstance, xstar: &Vector, tol: f64) -> Vector {
    p.constraint_values(xstar)
        .map(|h| if h.abs() <= tol { 0.0 } else { h })
}

/// Recovers multipliers `τ > 0`, `λ >= 0` at a feasible point.
pub fn find_multipliers(
    p: &ProblemInstance,
    xstar: &Vector,
    cfg: &RunConfig,
) -> Result<MultiplierSearch> {
    require_feasible(p, xstar, cfg.tol.feasibility)?;
    let (m, l, n) = (p.num_objectives(), p.num_rows(), p.dim());
    let nv = m + l + 1;
    let grads = p.ratio_gradient(xstar)?;
    let hvals = snapped_constraint_values(p, xstar, cfg.tol.feasibility);
    let hgrads: Vec<Vector> = p.rows().iter().map(|r| r.h.gradient(xstar)).collect();

    let mut lp = LinearProgram {
        c: vec![0.0; nv],
        ..Default::default()
    };
    lp.c[m + l] = 1.0;
    for k in 0..n {
        let mut row = vec![0.0; nv];
        for i in 0..m {
            row[i] = grads[(i, k)];
        }
        for j in 0..l {
            row[m + j] = hgrads[j][k];
        }
        lp.a_eq.push(row);
        lp.b_eq.push(0.0);
    }
    if l > 0 {
        let mut row = vec![0.0; nv];
        for j in 0..l {
            row[m + j] = hvals[j];
        }
        lp.a_eq.push(row);
        lp.b_eq.push(0.0);
    }
    let norm = cfg.multiplier_normalization;
    let mut row = vec![1.0; nv];
    row[m + l] = 0.0;
    lp.a_eq.push(row);
    lp.b_eq.push(norm);
    for i in 0..m {
        let mut row = vec![0.0; nv];
        row[m + l] = 1.0;
        row[i] = -1.0;
        lp.a_ineq.push(row);
        lp.b_ineq.push(0.0);
    }

    match solve_linear_program(&lp)? {
        LpOutcome::Optimal { x, objective } => {
            if objective < cfg.tol.strict * norm {
                return Ok(MultiplierSearch::NoneExist { floor: objective });
            }
            let tau = Vector::from_column_slice(&x[..m]);
            let lambda = Vector::from_column_slice(&x[m..m + l]);
            Ok(MultiplierSearch::Found(MultiplierPair::new(
                p, xstar, tau, lambda,
            )?))
        }
        LpOutcome::Infeasible => Ok(MultiplierSearch::NoneExist { floor: 0.0 }),
        LpOutcome::Unbounded => Err(Error::Numerical(
            "multiplier program reported unbounded".into(),
        )),
    }
}

/// Completes a user-supplied `τ > 0` with some `λ >= 0` satisfying
/// stationarity and complementarity, if one exists.
pub fn find_lambda_for_tau(
    p: &ProblemInstance,
    xstar: &Vector,
    tau: &Vector,
    cfg: &RunConfig,
) -> Result<Option<MultiplierPair>> {
    require_feasible(p, xstar, cfg.tol.feasibility)?;
    let (m, l, n) = (p.num_objectives(), p.num_rows(), p.dim());
    if tau.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: tau.len(),
        });
    }
    if tau.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config("every tau entry must be positive".into()));
    }
    let mut target = Vector::zeros(n);
    for i in 0..m {
        target -= p.ratio_gradient_row(i, xstar)? * tau[i];
    }
    if l == 0 {
        let mp = MultiplierPair::new(p, xstar, tau.clone(), Vector::zeros(0))?;
        return Ok((mp.stationarity_residual <= cfg.tol.stationarity).then_some(mp));
    }
    let hvals = snapped_constraint_values(p, xstar, cfg.tol.feasibility);
    let hgrads: Vec<Vector> = p.rows().iter().map(|r| r.h.gradient(xstar)).collect();
    let mut lp = LinearProgram {
        c: vec![-1.0; l],
        ..Default::default()
    };
    for k in 0..n {
        lp.a_eq.push((0..l).map(|j| hgrads[j][k]).collect());
        lp.b_eq.push(target[k]);
    }
    lp.a_eq.push(hvals.iter().copied().collect());
    lp.b_eq.push(0.0);
    match solve_linear_program(&lp)? {
        LpOutcome::Optimal { x, .. } => {
            let mp = MultiplierPair::new(p, xstar, tau.clone(), Vector::from_vec(x))?;
            Ok((mp.stationarity_residual <= cfg.tol.stationarity).then_some(mp))
        }
        _ => Ok(None),
    }
}

/// `τ_i = μ_i / g_i(x*)`, turning ratio-gradient multipliers into
/// multipliers of the scalarized system.
pub fn convert_multipliers(p: &ProblemInstance, xstar: &Vector, mu: &Vector) -> Result<Vector> {
    if mu.len() != p.num_objectives() {
        return Err(Error::Dimension {
            expected: p.num_objectives(),
            got: mu.len(),
        });
    }
    if let Some(i) = mu.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain {
            objective: i,
            value: mu[i],
        });
    }
    Ok(mu.component_div(&p.denominators(xstar)?))
}

/// `Σ τ_i (∇f_i - (f_i/g_i)∇g_i)` at `x`.
pub fn scalarized_gradient_sum(p: &ProblemInstance, x: &Vector, tau: &Vector) -> Result<Vector> {
    let mut s = Vector::zeros(p.dim());
    for (i, obj) in p.objectives().iter().enumerate() {
        let rho = p.ratio(i, x)?;
        s += (obj.f().gradient(x) - obj.g().gradient(x) * rho) * tau[i];
    }
    Ok(s)
}

/// `‖Σ τ_i (∇f_i(x*) - (f_i/g_i)(x*)∇g_i(x*)) + Σ λ_j ∇h_j(x*)‖_∞`.
pub fn stationarity_residual_scalarized(
    p: &ProblemInstance,
    xstar: &Vector,
    tau: &Vector,
    lambda: &Vector,
) -> Result<f64> {
    check_lengths(p, tau, lambda)?;
    let mut s = scalarized_gradient_sum(p, xstar, tau)?;
    for (j, row) in p.rows().iter().enumerate() {
        s += row.h.gradient(xstar) * lambda[j];
    }
    Ok(s.amax())
}

/// `‖Σ μ_i ∇(f_i/g_i)(x*) - Σ τ_i (∇f_i - (f_i/g_i)∇g_i)(x*)‖_∞` for
/// `τ = convert_multipliers(μ)`; zero up to rounding.
pub fn conversion_identity_residual(
    p: &ProblemInstance,
    xstar: &Vector,
    mu: &Vector,
) -> Result<f64> {
    let tau = convert_multipliers(p, xstar, mu)?;
    let mut lhs = Vector::zeros(p.dim());
    for i in 0..p.num_objectives() {
        lhs += p.ratio_gradient_row(i, xstar)? * mu[i];
    }
    Ok((lhs - scalarized_gradient_sum(p, xstar, &tau)?).amax())
}

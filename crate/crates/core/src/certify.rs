//! The two-step optimality test and its sufficient-condition routes.
//!
//! Step 1 recovers multipliers (see [`crate::kkt`]); when none exist the
//! point is reported `NotKkt`. Step 2 tries the configured routes in order
//! and stops at the first one whose condition is verified. A failed route
//! refutes only that sufficient condition, never Pareto optimality.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Route, RunConfig, Tolerances};
use crate::error::{Error, Result};
use crate::kkt::{find_lambda_for_tau, find_multipliers, MultiplierPair, MultiplierSearch};
use crate::model::{Feasibility, Matrix, ProblemInstance, QuadraticFunction, Vector};
use crate::quadmin::{minimize_quadratic, QuadMinOutcome};
use crate::spectral::{
    build_f_hat, build_fi, build_h_data, eig_sym, objective_spectra, EigenDecomposition,
    HMatrixData,
};

pub const GGCQ_NOTE: &str =
    "conclusion valid under the generalized Guignard constraint qualification";
pub const SYMMETRIC_PART_NOTE: &str = "Hbar semidefiniteness evaluated on its symmetric part";
pub const PAIRING_NOTE: &str = "eigenpairs of A_i and B_i paired by ascending sorted position";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertificateStatus {
    CertifiedPareto {
        route: Route,
    },
    NotKkt,
    Inconclusive {
        reason: String,
        #[serde(serialize_with = "crate::ser::opt_vector")]
        witness: Option<Vector>,
    },
}

/// Outcome of checking one inequality over `S`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InequalityCheck {
    Holds,
    /// The inequality fails at `x` by `gap > tol`.
    FailsAt {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        gap: f64,
    },
    /// Neither verified nor refuted: the best point found has `value`, the
    /// infimum is only known to be `>= lower_bound`.
    Undecided {
        lower_bound: f64,
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        value: f64,
    },
}

impl InequalityCheck {
    pub fn holds(&self) -> bool {
        matches!(self, InequalityCheck::Holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RouteOutcome {
    Verified,
    Failed {
        detail: String,
        #[serde(serialize_with = "crate::ser::opt_vector")]
        witness: Option<Vector>,
    },
    Inapplicable {
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteAttempt {
    pub route: Route,
    pub outcome: RouteOutcome,
}

/// Eigenvalues of `A_i` and `B_i` in the order used for pairing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSpectrum {
    pub objective: usize,
    #[serde(serialize_with = "crate::ser::vector")]
    pub eig_a: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub eig_b: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    #[serde(serialize_with = "crate::ser::vector")]
    pub point: Vector,
    pub status: CertificateStatus,
    pub multipliers: Option<MultiplierPair>,
    /// `lp` or `override`.
    pub tau_source: &'static str,
    pub z_min_value: Option<f64>,
    pub attempts: Vec<RouteAttempt>,
    pub pairing: Vec<PairedSpectrum>,
    pub tolerances: Tolerances,
    pub note: String,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self.status, CertificateStatus::CertifiedPareto { .. })
    }

    /// The route that certified the point, if any.
    pub fn route(&self) -> Option<Route> {
        match self.status {
            CertificateStatus::CertifiedPareto { route } => Some(route),
            _ => None,
        }
    }
}

/// `Z(x, x*) = (x - x*)ᵀ F̂ (x - x*)` with `F̂ = F(τ/g(x*), x*)`.
pub fn z_value(p: &ProblemInstance, tau: &Vector, xstar: &Vector, x: &Vector) -> Result<f64> {
    let fhat = build_f_hat(p, tau, xstar)?;
    let d = x - xstar;
    Ok(d.dot(&(&fhat * &d)))
}

/// `Z(x, x*) = Σ τ_i s_i(x, x*) / u_i(x, x*)`, the defining form.
pub fn z_value_ratio_form(
    p: &ProblemInstance,
    tau: &Vector,
    xstar: &Vector,
    x: &Vector,
) -> Result<f64> {
    let mut z = 0.0;
    for i in 0..p.num_objectives() {
        let (u, s) = p.u_and_s(i, x, xstar)?;
        z += tau[i] * s / u;
    }
    Ok(z)
}

/// `(γ, η)` for objective `i` and eigen-index `k`:
/// `γ = ⟨x-x*, p_k⟩² τ_i/g_i(x*)`, `η = ⟨x-x*, q_k⟩² τ_i f_i(x*)/g_i(x*)²`.
pub fn gamma_eta(
    p: &ProblemInstance,
    i: usize,
    k: usize,
    tau: &Vector,
    xstar: &Vector,
    x: &Vector,
    eig_a: &EigenDecomposition,
    eig_b: &EigenDecomposition,
) -> Result<(f64, f64)> {
    let g = p.denominators(xstar)?[i];
    let f = p.objective(i).f().value(xstar);
    let d = x - xstar;
    let dp = d.dot(&eig_a.eigenvector(k));
    let dq = d.dot(&eig_b.eigenvector(k));
    Ok((dp * dp * tau[i] / g, dq * dq * tau[i] * f / (g * g)))
}

/// `Σ_i Σ_k [μ_k(A_i) γ - μ_k(B_i) η]`, which equals `Z(x, x*)`.
pub fn z_eigen_expansion(
    p: &ProblemInstance,
    tau: &Vector,
    xstar: &Vector,
    x: &Vector,
    spectra: &[(EigenDecomposition, EigenDecomposition)],
) -> Result<f64> {
    let mut z = 0.0;
    for (i, (ea, eb)) in spectra.iter().enumerate() {
        for k in 0..p.dim() {
            let (gamma, eta) = gamma_eta(p, i, k, tau, xstar, x, ea, eb)?;
            z += ea.eigenvalues[k] * gamma - eb.eigenvalues[k] * eta;
        }
    }
    Ok(z)
}

/// Result of globally minimizing `Z(·, x*)` over `S`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZMinimum {
    GlobalMin {
        value: f64,
        #[serde(serialize_with = "crate::ser::vector")]
        argmin: Vector,
    },
    /// The minimum is only bracketed: `bound <= min <= incumbent_value`.
    LowerBoundOnly {
        bound: f64,
        #[serde(serialize_with = "crate::ser::vector")]
        incumbent: Vector,
        incumbent_value: f64,
    },
}

fn centered_quadratic(m: &Matrix, center: &Vector) -> QuadraticFunction {
    let mc = m * center;
    QuadraticFunction::new(m.clone(), -&mc * 2.0, center.dot(&mc), f64::INFINITY)
        .expect("centred quadratic has consistent dimensions")
}

fn require_feasible(p: &ProblemInstance, x: &Vector, tol: f64) -> Result<()> {
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

/// Minimizes `Z(·, x*)` over `S`.
pub fn minimize_z(
    p: &ProblemInstance,
    tau: &Vector,
    xstar: &Vector,
    cfg: &RunConfig,
) -> Result<ZMinimum> {
    require_feasible(p, xstar, cfg.tol.feasibility)?;
    let fhat = build_f_hat(p, tau, xstar)?;
    if eig_sym(&fhat)?.is_psd(cfg.tol.psd) {
        return Ok(ZMinimum::GlobalMin {
            value: 0.0,
            argmin: xstar.clone(),
        });
    }
    let z = centered_quadratic(&fhat, xstar);
    Ok(match minimize_quadratic(&z, p, xstar, cfg)? {
        QuadMinOutcome::Global { x, value, .. } => ZMinimum::GlobalMin { value, argmin: x },
        QuadMinOutcome::Local {
            x,
            value,
            lower_bound,
        } => ZMinimum::LowerBoundOnly {
            bound: lower_bound,
            incumbent: x,
            incumbent_value: value,
        },
        QuadMinOutcome::Unbounded { x, value } => ZMinimum::LowerBoundOnly {
            bound: f64::NEG_INFINITY,
            incumbent: x,
            incumbent_value: value,
        },
    })
}

/// Decides `min_{x∈S} q(x) >= -tol`.
fn nonneg_on_s(
    q: &QuadraticFunction,
    p: &ProblemInstance,
    center: &Vector,
    cfg: &RunConfig,
) -> Result<InequalityCheck> {
    let tol = cfg.tol.route;
    if eig_sym(q.q())?.is_psd(cfg.tol.psd)
        && q.value(center).abs() <= tol
        && q.gradient(center).amax() <= tol
    {
        // convex and stationary at a point where it vanishes
        return Ok(InequalityCheck::Holds);
    }
    let out = minimize_quadratic(q, p, center, cfg)?;
    let value = out.value();
    if out.lower_bound() >= -tol {
        return Ok(InequalityCheck::Holds);
    }
    if value < -tol
        && matches!(
            out,
            QuadMinOutcome::Global { .. } | QuadMinOutcome::Unbounded { .. }
        )
    {
        return Ok(InequalityCheck::FailsAt {
            x: out.point().clone(),
            gap: -value,
        });
    }
    Ok(InequalityCheck::Undecided {
        lower_bound: out.lower_bound(),
        x: out.point().clone(),
        value,
    })
}

/// Checks `μ_k(A_i) γ >= μ_k(B_i) η` on all of `S`.
pub fn check_eigen_inequality(
    p: &ProblemInstance,
    i: usize,
    k: usize,
    tau: &Vector,
    xstar: &Vector,
    eig_a: &EigenDecomposition,
    eig_b: &EigenDecomposition,
    cfg: &RunConfig,
) -> Result<InequalityCheck> {
    let g = p.denominators(xstar)?[i];
    let rho = p.ratio(i, xstar)?;
    let mu_a = eig_a.eigenvalues[k];
    let mu_b = eig_b.eigenvalues[k];
    if mu_a >= 0.0 && mu_b * rho <= 0.0 {
        return Ok(InequalityCheck::Holds);
    }
    let pk = eig_a.eigenvector(k);
    let qk = eig_b.eigenvector(k);
    let m = (&pk * pk.transpose() * mu_a - &qk * qk.transpose() * (mu_b * rho)) * (tau[i] / g);
    nonneg_on_s(&centered_quadratic(&m, xstar), p, xstar, cfg)
}

/// The quadratic `xᵀ sym(Hbar) x - αᵀx + β`.
pub fn h_quadratic(hd: &HMatrixData) -> Result<QuadraticFunction> {
    let t = hd.terms.as_ref().ok_or_else(|| {
        Error::InapplicableRoute(format!(
            "H_({},{}) is not real-valued",
            hd.objective, hd.index
        ))
    })?;
    Ok(
        QuadraticFunction::new(t.symmetric_hbar(), -&t.alpha, t.beta, f64::INFINITY)
            .expect("H quadratic has consistent dimensions"),
    )
}

/// Checks `H_{i,k}(x) >= 0` on all of `S`.
pub fn check_h_nonneg(
    p: &ProblemInstance,
    hd: &HMatrixData,
    xstar: &Vector,
    cfg: &RunConfig,
) -> Result<InequalityCheck> {
    let q = h_quadratic(hd)?;
    nonneg_on_s(&q, p, xstar, cfg)
}

fn pairs(p: &ProblemInstance) -> Vec<(usize, usize)> {
    (0..p.num_objectives())
        .flat_map(|i| (0..p.dim()).map(move |k| (i, k)))
        .collect()
}

fn all_h_data(
    p: &ProblemInstance,
    xstar: &Vector,
    spectra: &[(EigenDecomposition, EigenDecomposition)],
) -> Result<Vec<HMatrixData>> {
    pairs(p)
        .into_iter()
        .map(|(i, k)| build_h_data(p, i, k, xstar, &spectra[i].0, &spectra[i].1))
        .collect()
}

fn failed(detail: String, witness: Option<Vector>) -> RouteOutcome {
    RouteOutcome::Failed { detail, witness }
}

/// Keeps a witness only when the violation exceeds ten times the tolerance.
fn inequality_outcome(
    label: &str,
    checks: Vec<((usize, usize), InequalityCheck)>,
    tol: f64,
) -> RouteOutcome {
    for ((i, k), c) in &checks {
        if let InequalityCheck::FailsAt { x, gap } = c {
            let witness = (*gap > 10.0 * tol).then(|| x.clone());
            return failed(
                format!("{label} for (i={i}, k={k}) fails by {gap:e}"),
                witness,
            );
        }
    }
    for ((i, k), c) in &checks {
        if let InequalityCheck::Undecided {
            lower_bound, value, ..
        } = c
        {
            return failed(
                format!(
                    "{label} for (i={i}, k={k}) undecided: minimum in [{lower_bound:e}, {value:e}]"
                ),
                None,
            );
        }
    }
    RouteOutcome::Verified
}

struct RouteContext<'a> {
    p: &'a ProblemInstance,
    xstar: &'a Vector,
    tau: &'a Vector,
    cfg: &'a RunConfig,
    spectra: Option<Vec<(EigenDecomposition, EigenDecomposition)>>,
    z_min: Option<f64>,
}

impl RouteContext<'_> {
    fn spectra(&mut self) -> Result<&[(EigenDecomposition, EigenDecomposition)]> {
        if self.spectra.is_none() {
            self.spectra = Some(objective_spectra(self.p)?);
        }
        Ok(self.spectra.as_deref().expect("just filled"))
    }

    fn run(&mut self, route: Route) -> Result<RouteOutcome> {
        let (p, xstar, cfg) = (self.p, self.xstar, self.cfg);
        let tol = cfg.tol.route;
        match route {
            Route::PointwisePsd => {
                for i in 0..p.num_objectives() {
                    let e = eig_sym(&build_fi(p, i, xstar)?)?;
                    if !e.is_psd(cfg.tol.psd) {
                        return Ok(failed(
                            format!("F_{i}(x*) has eigenvalue {:e}", e.min()),
                            None,
                        ));
                    }
                }
                Ok(RouteOutcome::Verified)
            }
            Route::HPsdAlphaZero => {
                let hds = all_h_data(p, xstar, self.spectra()?)?;
                if let Some(hd) = hds.iter().find(|h| !h.real_valued) {
                    return Ok(RouteOutcome::Inapplicable {
                        detail: format!("H_({},{}) is not real-valued", hd.objective, hd.index),
                    });
                }
                for hd in &hds {
                    let t = hd.terms.as_ref().expect("real-valued");
                    let e = eig_sym(&t.symmetric_hbar())?;
                    if !e.is_psd(cfg.tol.psd) {
                        return Ok(failed(
                            format!(
                                "sym(Hbar_({},{})) has eigenvalue {:e}",
                                hd.objective,
                                hd.index,
                                e.min()
                            ),
                            None,
                        ));
                    }
                    let scale = 1.0 + t.a_plus.norm() * t.a_minus.norm() * (1.0 + xstar.norm());
                    if t.alpha.amax() > tol * scale {
                        return Ok(failed(
                            format!(
                                "alpha_({},{}) = {:e} is not zero",
                                hd.objective,
                                hd.index,
                                t.alpha.amax()
                            ),
                            None,
                        ));
                    }
                }
                Ok(RouteOutcome::Verified)
            }
            Route::HNonneg => {
                let hds = all_h_data(p, xstar, self.spectra()?)?;
                if let Some(hd) = hds.iter().find(|h| !h.real_valued) {
                    return Ok(RouteOutcome::Inapplicable {
                        detail: format!("H_({},{}) is not real-valued", hd.objective, hd.index),
                    });
                }
                let checks: Vec<_> = hds
                    .par_iter()
                    .map(|hd| Ok(((hd.objective, hd.index), check_h_nonneg(p, hd, xstar, cfg)?)))
                    .collect::<Result<_>>()?;
                Ok(inequality_outcome("H >= 0", checks, tol))
            }
            Route::EigenInequality => {
                let tau = self.tau;
                let spectra = self.spectra()?;
                let checks: Vec<_> = pairs(p)
                    .par_iter()
                    .map(|&(i, k)| {
                        let (ea, eb) = &spectra[i];
                        Ok((
                            (i, k),
                            check_eigen_inequality(p, i, k, tau, xstar, ea, eb, cfg)?,
                        ))
                    })
                    .collect::<Result<_>>()?;
                Ok(inequality_outcome("mu_A gamma >= mu_B eta", checks, tol))
            }
            Route::ZMinimization => match minimize_z(p, self.tau, xstar, cfg)? {
                ZMinimum::GlobalMin { value, argmin } => {
                    self.z_min = Some(value);
                    if value >= -tol {
                        Ok(RouteOutcome::Verified)
                    } else {
                        let witness = (value < -10.0 * tol).then_some(argmin);
                        Ok(failed(format!("min Z = {value:e}"), witness))
                    }
                }
                ZMinimum::LowerBoundOnly {
                    bound,
                    incumbent,
                    incumbent_value,
                } => {
                    self.z_min = Some(bound);
                    if bound >= -tol {
                        Ok(RouteOutcome::Verified)
                    } else {
                        let witness = (incumbent_value < -10.0 * tol).then_some(incumbent);
                        Ok(failed(
                            format!("min Z only bracketed in [{bound:e}, {incumbent_value:e}]"),
                            witness,
                        ))
                    }
                }
            },
        }
    }
}

/// Runs the full test at `xstar` with LP-recovered multipliers.
pub fn certify_point(p: &ProblemInstance, xstar: &Vector, cfg: &RunConfig) -> Result<Certificate> {
    certify_point_with_tau(p, xstar, cfg, None)
}

/// As [`certify_point`], optionally with a user-supplied `τ` that is
/// completed to a multiplier pair instead of the LP vertex.
pub fn certify_point_with_tau(
    p: &ProblemInstance,
    xstar: &Vector,
    cfg: &RunConfig,
    tau_override: Option<&Vector>,
) -> Result<Certificate> {
    cfg.validate()?;
    require_feasible(p, xstar, cfg.tol.feasibility)?;
    let mut cert = Certificate {
        point: xstar.clone(),
        status: CertificateStatus::NotKkt,
        multipliers: None,
        tau_source: if tau_override.is_some() {
            "override"
        } else {
            "lp"
        },
        z_min_value: None,
        attempts: Vec::new(),
        pairing: Vec::new(),
        tolerances: cfg.tol,
        note: String::new(),
    };
    let mp = match tau_override {
        Some(tau) => find_lambda_for_tau(p, xstar, tau, cfg)?.ok_or_else(|| {
            Error::HypothesisNotMet(
                "the supplied tau admits no lambda satisfying the first-order conditions".into(),
            )
        })?,
        None => match find_multipliers(p, xstar, cfg)? {
            MultiplierSearch::Found(mp) => mp,
            MultiplierSearch::NoneExist { .. } => {
                cert.note = GGCQ_NOTE.into();
                return Ok(cert);
            }
        },
    };
    let residuals_ok = mp.stationarity_residual <= cfg.tol.stationarity
        && mp.complementarity_residual <= cfg.tol.sign;
    cert.multipliers = Some(mp.clone());
    if !residuals_ok {
        cert.status = CertificateStatus::Inconclusive {
            reason: format!(
                "multiplier residuals ({:e}, {:e}) exceed tolerance",
                mp.stationarity_residual, mp.complementarity_residual
            ),
            witness: None,
        };
        return Ok(cert);
    }

    let mut ctx = RouteContext {
        p,
        xstar,
        tau: &mp.tau,
        cfg,
        spectra: None,
        z_min: None,
    };
    let mut notes: Vec<&str> = Vec::new();
    let mut certified = None;
    for &route in &cfg.routes {
        if matches!(
            route,
            Route::HPsdAlphaZero | Route::HNonneg | Route::EigenInequality
        ) && !notes.contains(&PAIRING_NOTE)
        {
            notes.push(PAIRING_NOTE);
        }
        if route == Route::HPsdAlphaZero && !notes.contains(&SYMMETRIC_PART_NOTE) {
            notes.push(SYMMETRIC_PART_NOTE);
        }
        let outcome = ctx.run(route)?;
        let ok = outcome == RouteOutcome::Verified;
        cert.attempts.push(RouteAttempt { route, outcome });
        if ok {
            certified = Some(route);
            break;
        }
    }
    cert.z_min_value = ctx.z_min;
    if let Some(spectra) = &ctx.spectra {
        cert.pairing = spectra
            .iter()
            .enumerate()
            .map(|(i, (a, b))| PairedSpectrum {
                objective: i,
                eig_a: a.eigenvalues.clone(),
                eig_b: b.eigenvalues.clone(),
            })
            .collect();
    }
    cert.status = match certified {
        Some(route) => CertificateStatus::CertifiedPareto { route },
        None => {
            let reason = cert
                .attempts
                .iter()
                .map(|a| match &a.outcome {
                    RouteOutcome::Failed { detail, .. } | RouteOutcome::Inapplicable { detail } => {
                        format!("{:?}: {detail}", a.route)
                    }
                    RouteOutcome::Verified => unreachable!("verified routes stop the loop"),
                })
                .collect::<Vec<_>>()
                .join("; ");
            let witness = cert.attempts.iter().find_map(|a| match &a.outcome {
                RouteOutcome::Failed { witness, .. } => witness.clone(),
                _ => None,
            });
            CertificateStatus::Inconclusive { reason, witness }
        }
    };
    cert.note = notes.join("; ");
    Ok(cert)
}

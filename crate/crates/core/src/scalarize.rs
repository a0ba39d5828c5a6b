//! Weighted scalarization anchored at a point, and the fixed-point search
//! built on it.
//!
//! For an anchor `x*` with `α_i = f_i(x*)/g_i(x*)` and weights `w > 0`, the
//! scalarized objective is `Σ w_i (f_i(x) - α_i g_i(x))`, a single quadratic
//! with Hessian part `F(w, x*)`. A global minimizer of it is Pareto optimal
//! for the shifted problem, hence for the original one.
//!
//! The search re-anchors at each minimizer until the ratio values stop
//! moving. Convergence is not claimed when a subproblem is nonconvex; such
//! runs end as [`DinkelbachOutcome::Stalled`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::kkt::{find_lambda_for_tau, find_multipliers};
use crate::model::{Feasibility, Matrix, ProblemInstance, QuadraticFunction, Vector};
use crate::oracle::{dominance_check, first_dominator, Grid};
use crate::quadmin::{minimize_quadratic, QuadMinOutcome};
use crate::spectral::{build_f, build_fi, psd_status};

pub const REASON_LOCAL_ONLY: &str = "nonconvex-subproblem-local-only";
pub const REASON_UNBOUNDED: &str = "unbounded-subproblem";
pub const REASON_MAX_ITER: &str = "max-iter";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarizedProblem {
    #[serde(serialize_with = "crate::ser::vector")]
    pub anchor: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub weights: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub alphas: Vector,
    #[serde(serialize_with = "crate::ser::matrix")]
    pub q_eff: Matrix,
    #[serde(serialize_with = "crate::ser::vector")]
    pub c_eff: Vector,
    pub d_eff: f64,
    /// `q_eff` is positive semidefinite.
    pub convex: bool,
}

impl ScalarizedProblem {
    /// `Σ w_i (f_i(x) - α_i g_i(x))` from the original quadratics.
    pub fn value(&self, p: &ProblemInstance, x: &Vector) -> f64 {
        p.objectives()
            .iter()
            .enumerate()
            .map(|(i, o)| self.weights[i] * (o.f().value(x) - self.alphas[i] * o.g().value(x)))
            .sum()
    }

    /// The objective as one quadratic `xᵀQ_eff x + c_effᵀx + d_eff`.
    pub fn quadratic(&self) -> QuadraticFunction {
        QuadraticFunction::new(
            self.q_eff.clone(),
            self.c_eff.clone(),
            self.d_eff,
            f64::INFINITY,
        )
        .expect("sums of symmetric matrices are symmetric")
    }

    /// Gradient `2 Q_eff x + c_eff`.
    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.q_eff * x * 2.0 + &self.c_eff
    }
}

/// Builds the scalarized problem anchored at `xstar`.
pub fn build_scalarized(
    p: &ProblemInstance,
    xstar: &Vector,
    w: &Vector,
    cfg: &RunConfig,
) -> Result<ScalarizedProblem> {
    if xstar.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: xstar.len(),
        });
    }
    if w.len() != p.num_objectives() {
        return Err(Error::Dimension {
            expected: p.num_objectives(),
            got: w.len(),
        });
    }
    if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config("every weight must be positive".into()));
    }
    let alphas = p.evaluate_ratios(xstar)?;
    let q_eff = build_f(p, w, xstar)?;
    let mut c_eff = Vector::zeros(p.dim());
    let mut d_eff = 0.0;
    for (i, o) in p.objectives().iter().enumerate() {
        c_eff += (o.f().c() - o.g().c() * alphas[i]) * w[i];
        d_eff += w[i] * (o.f().d() - alphas[i] * o.g().d());
    }
    let convex = psd_status(&q_eff, cfg.tol.psd)?.is_psd();
    Ok(ScalarizedProblem {
        anchor: xstar.clone(),
        weights: w.clone(),
        alphas,
        q_eff,
        c_eff,
        d_eff,
        convex,
    })
}

/// `|φ(x₁) - φ(x₂) - (x₁-x₂)ᵀF_i(x*)(x₁-x₂) - ∇φ(x₂)ᵀ(x₁-x₂)|` for
/// `φ = f_i - α_i g_i` anchored at `xstar`; zero up to rounding.
pub fn expansion_residual(
    p: &ProblemInstance,
    i: usize,
    xstar: &Vector,
    x1: &Vector,
    x2: &Vector,
) -> Result<f64> {
    let alpha = p.ratio(i, xstar)?;
    let o = p.objective(i);
    let phi = |x: &Vector| o.f().value(x) - alpha * o.g().value(x);
    let d = x1 - x2;
    let fi = build_fi(p, i, xstar)?;
    let grad = o.f().gradient(x2) - o.g().gradient(x2) * alpha;
    Ok((phi(x1) - phi(x2) - d.dot(&(&fi * &d)) - grad.dot(&d)).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScalarMin {
    GlobalMin {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        value: f64,
    },
    /// Best local point; the global minimum lies in `[lower_bound, value]`.
    LocalOnly {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        value: f64,
        lower_bound: f64,
    },
    Unbounded {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        value: f64,
    },
}

/// Minimizes the scalarized objective over the feasible set.
pub fn minimize_scalarized(
    sp: &ScalarizedProblem,
    p: &ProblemInstance,
    cfg: &RunConfig,
) -> Result<ScalarMin> {
    Ok(
        match minimize_quadratic(&sp.quadratic(), p, &sp.anchor, cfg)? {
            QuadMinOutcome::Global { x, value, .. } => ScalarMin::GlobalMin { x, value },
            QuadMinOutcome::Local {
                x,
                value,
                lower_bound,
            } => ScalarMin::LocalOnly {
                x,
                value,
                lower_bound,
            },
            QuadMinOutcome::Unbounded { x, value } => ScalarMin::Unbounded { x, value },
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DinkelbachOutcome {
    Converged {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        iterations: usize,
        /// Ratio vectors of the start and of every iterate.
        #[serde(serialize_with = "crate::ser::vectors")]
        history: Vec<Vector>,
    },
    Stalled {
        #[serde(serialize_with = "crate::ser::vector")]
        x: Vector,
        reason: String,
    },
}

impl DinkelbachOutcome {
    pub fn point(&self) -> &Vector {
        match self {
            DinkelbachOutcome::Converged { x, .. } | DinkelbachOutcome::Stalled { x, .. } => x,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, DinkelbachOutcome::Converged { .. })
    }
}

fn relative_change(a: &Vector, b: &Vector) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / (1.0 + y.abs()))
        .fold(0.0, f64::max)
}

/// Fixed-point search: `x_{k+1}` minimizes the scalarization anchored at `x_k`.
///
/// Stops when `max_i |α_i^{k+1} - α_i^k| / (1 + |α_i^k|) <= alpha` tolerance
/// or after `max_iter` subproblems.
pub fn dinkelbach_search(
    p: &ProblemInstance,
    w: &Vector,
    x0: &Vector,
    cfg: &RunConfig,
) -> Result<DinkelbachOutcome> {
    if x0.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: x0.len(),
        });
    }
    if let Feasibility::Infeasible { violated, .. } = p.feasibility(x0, cfg.tol.feasibility) {
        return Err(Error::InfeasiblePoint { violated });
    }
    let mut x = x0.clone();
    let mut alpha = p.evaluate_ratios(&x)?;
    let mut history = vec![alpha.clone()];
    for k in 1..=cfg.max_iter {
        let sp = build_scalarized(p, &x, w, cfg)?;
        let next = match minimize_scalarized(&sp, p, cfg)? {
            ScalarMin::GlobalMin { x, .. } => x,
            ScalarMin::LocalOnly { x, .. } => {
                return Ok(DinkelbachOutcome::Stalled {
                    x,
                    reason: REASON_LOCAL_ONLY.into(),
                })
            }
            ScalarMin::Unbounded { x, .. } => {
                return Ok(DinkelbachOutcome::Stalled {
                    x,
                    reason: REASON_UNBOUNDED.into(),
                })
            }
        };
        let next_alpha = p.evaluate_ratios(&next)?;
        let change = relative_change(&next_alpha, &alpha);
        history.push(next_alpha.clone());
        x = next;
        alpha = next_alpha;
        if change <= cfg.tol.alpha {
            return Ok(DinkelbachOutcome::Converged {
                x,
                iterations: k,
                history,
            });
        }
    }
    Ok(DinkelbachOutcome::Stalled {
        x,
        reason: REASON_MAX_ITER.into(),
    })
}

/// Positive weights `k / divisions` with integer `k_i >= 1`, `Σ k_i = divisions`,
/// in lexicographic order of `k`.
pub fn simplex_lattice(m: usize, divisions: usize) -> Vec<Vector> {
    fn rec(m: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == m {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        let rest = m - prefix.len() - 1;
        for k in 1..=left.saturating_sub(rest) {
            prefix.push(k);
            rec(m, left - k, prefix, out);
            prefix.pop();
        }
    }
    if m == 0 || divisions < m {
        return Vec::new();
    }
    let mut out = Vec::new();
    rec(m, divisions, &mut Vec::with_capacity(m), &mut out);
    out.into_iter()
        .map(|k| Vector::from_iterator(m, k.into_iter().map(|v| v as f64 / divisions as f64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    #[serde(serialize_with = "crate::ser::vector")]
    pub weights: Vector,
    pub outcome: DinkelbachOutcome,
}

/// Runs the search for every lattice weight in parallel; results keep lattice order.
pub fn sweep(
    p: &ProblemInstance,
    x0: &Vector,
    divisions: usize,
    cfg: &RunConfig,
) -> Result<Vec<SweepEntry>> {
    let lattice = simplex_lattice(p.num_objectives(), divisions);
    if lattice.is_empty() {
        return Err(Error::Config(format!(
            "{divisions} divisions cannot give {} positive weights",
            p.num_objectives()
        )));
    }
    lattice
        .into_par_iter()
        .map(|w| {
            let outcome = dinkelbach_search(p, &w, x0, cfg)?;
            Ok(SweepEntry {
                weights: w,
                outcome,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdWeights {
    /// Ratio-gradient multipliers.
    #[serde(serialize_with = "crate::ser::vector")]
    pub tau: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub lambda: Vector,
    /// `τ / g(x*)`, the matching scalarization weights.
    #[serde(serialize_with = "crate::ser::vector")]
    pub weights: Vector,
    pub source: &'static str,
}

/// Looks for valid multipliers at `xstar` whose weights make `F(w, x*)` PSD.
///
/// Tries the multiplier-program vertex first, then `cfg.multistart` random
/// points of the simplex. Returns `None` when no candidate works; this says
/// nothing about whether such weights exist.
pub fn seek_psd_weights(
    p: &ProblemInstance,
    xstar: &Vector,
    cfg: &RunConfig,
) -> Result<Option<PsdWeights>> {
    let g = p.denominators(xstar)?;
    let accept =
        |tau: &Vector, lambda: &Vector, source: &'static str| -> Result<Option<PsdWeights>> {
            let weights = tau.component_div(&g);
            Ok(psd_status(&build_f(p, &weights, xstar)?, cfg.tol.psd)?
                .is_psd()
                .then(|| PsdWeights {
                    tau: tau.clone(),
                    lambda: lambda.clone(),
                    weights,
                    source,
                }))
        };
    let Some(mp) = find_multipliers(p, xstar, cfg)?.found().cloned() else {
        return Ok(None);
    };
    if let Some(found) = accept(&mp.tau, &mp.lambda, "lp-vertex")? {
        return Ok(Some(found));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = p.num_objectives();
    for _ in 0..cfg.multistart {
        let raw: Vec<f64> = (0..m)
            .map(|_| -rng.random::<f64>().max(1e-12).ln())
            .collect();
        let s: f64 = raw.iter().sum();
        let tau = Vector::from_iterator(m, raw.into_iter().map(|v| v / s));
        if let Some(mp) = find_lambda_for_tau(p, xstar, &tau, cfg)? {
            if let Some(found) = accept(&mp.tau, &mp.lambda, "random")? {
                return Ok(Some(found));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReformulationCheck {
    /// Both objective spaces agree on whether `x*` is dominated.
    Consistent { dominated: bool },
    /// Exactly one space sees a dominator; `witness` is that dominator.
    Violation {
        #[serde(serialize_with = "crate::ser::vector")]
        witness: Vector,
        dominated_in_ratios: bool,
        dominated_in_shifted: bool,
    },
}

/// Compares grid dominance of `xstar` for the ratios and for the shifted
/// objectives `f_i - α_i g_i` (strict margin scaled by `g_i`).
pub fn check_reformulation_equivalence(
    p: &ProblemInstance,
    xstar: &Vector,
    step: f64,
    dom_tol: f64,
    cfg: &RunConfig,
) -> Result<ReformulationCheck> {
    let ratio_report = dominance_check(p, xstar, step, dom_tol, cfg)?;
    let grid = Grid::new(p, step, cfg)?;
    let alphas = p.evaluate_ratios(xstar)?;
    let m = p.num_objectives();
    let shifted = |x: &Vector| {
        Vector::from_iterator(
            m,
            p.objectives()
                .iter()
                .enumerate()
                .map(|(i, o)| o.f().value(x) - alphas[i] * o.g().value(x)),
        )
    };
    let margin = |x: &Vector| {
        p.denominators(x)
            .expect("denominators are positive on validated instances")
            * dom_tol
    };
    let shifted_dominator = first_dominator(
        p,
        &grid,
        cfg.tol.feasibility,
        &Vector::zeros(m),
        shifted,
        margin,
        false,
    );
    Ok(match (ratio_report.dominator, shifted_dominator) {
        (None, None) => ReformulationCheck::Consistent { dominated: false },
        (Some(_), Some(_)) => ReformulationCheck::Consistent { dominated: true },
        (Some(w), None) | (None, Some(w)) => ReformulationCheck::Violation {
            dominated_in_ratios: ratio_report.dominated,
            dominated_in_shifted: !ratio_report.dominated,
            witness: w,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::certify_point;
    use crate::model::Constraint;
    use crate::testutil::example;
    use crate::Tolerances;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn example_anchor_at_zero() {
        let p = example();
        let sp =
            build_scalarized(&p, &v(&[0.0]), &v(&[1.0, 1.0, 1.0]), &RunConfig::default()).unwrap();
        assert!((sp.q_eff[(0, 0)] - 7.0).abs() < 1e-14);
        assert!((sp.c_eff[0] - 3.0).abs() < 1e-14);
        assert!(sp.d_eff.abs() < 1e-14);
        assert!(sp.convex);
        assert!(sp.value(&p, &v(&[0.0])).abs() < 1e-14);
        match minimize_scalarized(&sp, &p, &RunConfig::default()).unwrap() {
            ScalarMin::GlobalMin { x, value } => {
                assert!((x[0] + 3.0 / 14.0).abs() < 1e-8);
                assert!((value + 9.0 / 28.0).abs() < 1e-8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_objective_collapses_to_fi() {
        let p = example();
        let one = ProblemInstance::new(
            1,
            vec![(p.objective(1).f().clone(), p.objective(1).g().clone())],
            p.constraints().to_vec(),
            &Tolerances::default(),
        )
        .unwrap();
        let x = v(&[0.7]);
        let sp = build_scalarized(&one, &x, &v(&[1.0]), &RunConfig::default()).unwrap();
        let fi = crate::spectral::build_fi(&one, 0, &x).unwrap();
        assert_eq!(sp.q_eff, fi);
        assert!(sp.value(&one, &x).abs() < 1e-14);
    }

    #[test]
    fn expanded_and_direct_values_agree() {
        let p = example();
        let sp =
            build_scalarized(&p, &v(&[0.3]), &v(&[0.2, 1.5, 0.7]), &RunConfig::default()).unwrap();
        let q = sp.quadratic();
        for x in [-2.0, -0.4, 0.0, 1.3, 2.0] {
            assert!((q.value(&v(&[x])) - sp.value(&p, &v(&[x]))).abs() < 1e-10);
        }
    }

    #[test]
    fn concave_without_constraints_is_unbounded() {
        let f = QuadraticFunction::new(Matrix::from_element(1, 1, -1.0), v(&[0.0]), 0.0, 1e-12)
            .unwrap();
        let g = QuadraticFunction::constant(1, 1.0);
        let p = ProblemInstance::new(1, vec![(f, g)], vec![], &Tolerances::default()).unwrap();
        let sp = build_scalarized(&p, &v(&[0.0]), &v(&[1.0]), &RunConfig::default()).unwrap();
        assert!(!sp.convex);
        assert!(matches!(
            minimize_scalarized(&sp, &p, &RunConfig::default()).unwrap(),
            ScalarMin::Unbounded { .. }
        ));
    }

    #[test]
    fn strictly_convex_unconstrained_minimum() {
        let f =
            QuadraticFunction::new(Matrix::identity(2, 2), v(&[-2.0, 4.0]), 1.0, 1e-12).unwrap();
        let g = QuadraticFunction::constant(2, 2.0);
        let p = ProblemInstance::new(2, vec![(f, g)], vec![], &Tolerances::default()).unwrap();
        let sp = build_scalarized(&p, &v(&[0.0, 0.0]), &v(&[1.0]), &RunConfig::default()).unwrap();
        match minimize_scalarized(&sp, &p, &RunConfig::default()).unwrap() {
            ScalarMin::GlobalMin { x, .. } => {
                assert!(sp.gradient(&x).amax() < 1e-10);
                assert!((x - v(&[1.0, -2.0])).amax() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonpositive_weights_are_rejected() {
        let p = example();
        assert!(matches!(
            build_scalarized(&p, &v(&[0.0]), &v(&[1.0, 0.0, 1.0]), &RunConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pareto_anchor_with_psd_weights_is_a_fixed_point() {
        let p = example();
        let cfg = RunConfig::default();
        let x = v(&[0.0]);
        let pw = seek_psd_weights(&p, &x, &cfg).unwrap().unwrap();
        assert_eq!(pw.source, "lp-vertex");
        match dinkelbach_search(&p, &pw.weights, &x, &cfg).unwrap() {
            DinkelbachOutcome::Converged {
                x: xb, iterations, ..
            } => {
                assert_eq!(iterations, 1);
                assert!(xb[0].abs() < 1e-6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn example_search_from_one_reaches_a_certified_point() {
        let p = example();
        let cfg = RunConfig::default();
        let pw = seek_psd_weights(&p, &v(&[0.0]), &cfg).unwrap().unwrap();
        let out = dinkelbach_search(&p, &pw.weights, &v(&[1.0]), &cfg).unwrap();
        assert!(out.is_converged(), "{out:?}");
        let xb = out.point().clone();
        assert!(find_multipliers(&p, &xb, &cfg).unwrap().found().is_some());
        assert!(certify_point(&p, &xb, &cfg).unwrap().is_certified());
    }

    #[test]
    fn single_ratio_reaches_the_classic_fixed_point() {
        // x/(x² + 1) on [-3, 3]: minimizer x = -1
        let f = QuadraticFunction::affine(v(&[1.0]), 0.0);
        let g = QuadraticFunction::new(Matrix::identity(1, 1), v(&[0.0]), 1.0, 1e-12).unwrap();
        let p = ProblemInstance::new(
            1,
            vec![(f, g)],
            vec![Constraint::Box {
                lo: v(&[-3.0]),
                hi: v(&[3.0]),
            }],
            &Tolerances::default(),
        )
        .unwrap();
        let out = dinkelbach_search(&p, &v(&[1.0]), &v(&[3.0]), &RunConfig::default()).unwrap();
        let x = out.point()[0];
        assert!(out.is_converged());
        assert!((x + 1.0).abs() < 1e-6);
        let alpha = p.ratio(0, &v(&[x])).unwrap();
        let o = p.objective(0);
        assert!((o.f().value(&v(&[x])) - alpha * o.g().value(&v(&[x]))).abs() < 1e-12);
    }

    #[test]
    fn lattice_shape() {
        let l = simplex_lattice(3, 10);
        assert_eq!(l.len(), 36);
        assert_eq!(l[0], v(&[0.1, 0.1, 0.8]));
        assert!(l
            .iter()
            .all(|w| (w.sum() - 1.0).abs() < 1e-12 && w.min() > 0.0));
        assert!(simplex_lattice(3, 2).is_empty());
        assert_eq!(simplex_lattice(1, 5), vec![v(&[1.0])]);
    }

    #[test]
    fn sweep_is_ordered_and_deterministic() {
        let p = example();
        let cfg = RunConfig::default();
        let a = sweep(&p, &v(&[1.0]), 4, &cfg).unwrap();
        let b = sweep(&p, &v(&[1.0]), 4, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].weights, v(&[0.25, 0.25, 0.5]));
    }

    #[test]
    fn membership_agrees_on_the_example() {
        let p = example();
        let cfg = RunConfig::default();
        assert_eq!(
            check_reformulation_equivalence(&p, &v(&[0.0]), 1e-3, 1e-9, &cfg).unwrap(),
            ReformulationCheck::Consistent { dominated: false }
        );
        assert_eq!(
            check_reformulation_equivalence(&p, &v(&[1.9]), 1e-3, 1e-9, &cfg).unwrap(),
            ReformulationCheck::Consistent { dominated: true }
        );
    }
}

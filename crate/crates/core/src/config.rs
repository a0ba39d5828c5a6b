//! Tolerances and run configuration shared by every module.
//!
//! All defaults live here so a report can record exactly what it was
//! computed with.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Absolute slack allowed on `h_j(x) <= 0`.
    pub feasibility: f64,
    /// Eigenvalue threshold for PSD classification, relative to `max(1, max|eig|)`.
    pub psd: f64,
    /// Largest pre-symmetrization asymmetry accepted at load time.
    pub load_symmetry: f64,
    /// Minimum accepted value of `g_i` at its unconstrained minimizer.
    pub g_positivity: f64,
    /// Stationarity residual (infinity norm) accepted for multipliers.
    pub stationarity: f64,
    /// Sign tolerance for complementarity and dual sign constraints.
    pub sign: f64,
    /// Floor that the smallest objective multiplier must clear to count as positive.
    pub strict: f64,
    /// Slack allowed when deciding that a route inequality holds on `S`.
    pub route: f64,
    /// Localization tolerance for global minimization of indefinite quadratics.
    pub z: f64,
    /// Margin by which a ratio must improve to count as a strict improvement.
    pub dominance: f64,
    /// Stopping tolerance on ratio anchors in the fixed-point search (relative to `1 + |alpha|`).
    pub alpha: f64,
    /// Distance under which two points are considered the same.
    pub point: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-9,
            psd: 1e-9,
            load_symmetry: 1e-8,
            g_positivity: 1e-9,
            stationarity: 1e-8,
            sign: 1e-9,
            strict: 1e-9,
            route: 1e-9,
            z: 1e-6,
            dominance: 1e-9,
            alpha: 1e-9,
            point: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("feasibility", self.feasibility),
            ("psd", self.psd),
            ("load_symmetry", self.load_symmetry),
            ("g_positivity", self.g_positivity),
            ("stationarity", self.stationarity),
            ("sign", self.sign),
            ("strict", self.strict),
            ("route", self.route),
            ("z", self.z),
            ("dominance", self.dominance),
            ("alpha", self.alpha),
            ("point", self.point),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "tolerance `{name}` must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A sufficient condition the certifier can try.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Every `A_i - (f_i/g_i)(x*) B_i` is PSD.
    PointwisePsd,
    /// Global minimum over `S` of the weighted residual quadratic `Z(., x*)` is nonnegative.
    ZMinimization,
    /// Per-eigenpair inequalities `mu_A gamma >= mu_B eta` hold on `S`.
    EigenInequality,
    /// Every rank-one quadratic `H_{i,k}` is nonnegative on `S`.
    HNonneg,
    /// Every `Hbar_{i,k}` is PSD and every `alpha_{i,k}` vanishes.
    HPsdAlphaZero,
}

impl Route {
    /// Cheapest-first order used by `auto`.
    pub const AUTO: [Route; 4] = [
        Route::PointwisePsd,
        Route::HPsdAlphaZero,
        Route::EigenInequality,
        Route::ZMinimization,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub tol: Tolerances,
    pub routes: Vec<Route>,
    /// Largest dimension for which indefinite quadratics are minimized exhaustively.
    pub exhaustive_dims_max: usize,
    /// Cap on the number of active sets the exhaustive minimizer may visit.
    pub exhaustive_sets_max: usize,
    /// Number of starts for the local fallback search.
    pub multistart: usize,
    /// Iteration cap of the fixed-point search.
    pub max_iter: usize,
    /// Largest grid the oracle will enumerate.
    pub grid_cap: usize,
    /// Divisions of the weight simplex lattice for sweeps.
    pub sweep_divisions: usize,
    pub seed: u64,
    /// Normalization constant of the multiplier LP (`sum tau + sum lambda`).
    pub multiplier_normalization: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tol: Tolerances::default(),
            routes: Route::AUTO.to_vec(),
            exhaustive_dims_max: 4,
            exhaustive_sets_max: 200_000,
            multistart: 32,
            max_iter: 100,
            grid_cap: 10_000_000,
            sweep_divisions: 10,
            seed: 0x5eed,
            multiplier_normalization: 1.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.tol.validate()?;
        if self.routes.is_empty() {
            return Err(Error::Config("at least one route must be selected".into()));
        }
        if !(self.multiplier_normalization > 0.0) {
            return Err(Error::Config(
                "multiplier normalization must be positive".into(),
            ));
        }
        if self.sweep_divisions == 0 {
            return Err(Error::Config("sweep divisions must be positive".into()));
        }
        Ok(())
    }
}

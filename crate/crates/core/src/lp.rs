//! Dense two-phase simplex with Bland's rule.
//!
//! Solves `maximize cᵀx` subject to `A_eq x = b_eq`, `A_ineq x <= b_ineq`
//! and `x >= 0`. Pivoting is deterministic: the entering column is the
//! lowest-index improving column and ties in the ratio test go to the
//! lowest-index basic variable.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ineq: Vec<Vec<f64>>,
    pub b_ineq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    // rows x (cols + 1); last column is the right-hand side
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, obj: &mut [f64], r: usize, j: usize) {
        let piv = self.t[r][j];
        for v in self.t[r].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.t[r].clone();
        for (k, row) in self.t.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[j] = 0.0;
            }
        }
        let f = obj[j];
        if f != 0.0 {
            for (v, p) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            obj[j] = 0.0;
        }
        self.basis[r] = j;
    }

    /// Runs Bland's rule on the reduced-cost row `obj` (maximization:
    /// columns with positive reduced cost improve). Returns false if unbounded.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize, max_iter: usize) -> Result<bool> {
        for _ in 0..max_iter {
            let Some(j) = (0..allowed).find(|&j| obj[j] > PIVOT_EPS) else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][j];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-14 * (1.0 + bratio.abs())
                                || ((ratio - bratio).abs() <= 1e-14 * (1.0 + bratio.abs())
                                    && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Ok(false),
                Some((r, _)) => self.pivot(obj, r, j),
            }
        }
        Err(Error::Numerical(format!(
            "simplex exceeded {max_iter} pivots (anti-cycling guard)"
        )))
    }
}

/// Solves the LP; see the module docs for the problem form.
pub fn solve_linear_program(lp: &LinearProgram) -> Result<LpOutcome> {
    let nv = lp.c.len();
    if lp.a_eq.len() != lp.b_eq.len() || lp.a_ineq.len() != lp.b_ineq.len() {
        return Err(Error::Dimension {
            expected: lp.a_eq.len() + lp.a_ineq.len(),
            got: lp.b_eq.len() + lp.b_ineq.len(),
        });
    }
    for row in lp.a_eq.iter().chain(&lp.a_ineq) {
        if row.len() != nv {
            return Err(Error::Dimension {
                expected: nv,
                got: row.len(),
            });
        }
    }
    let n_ineq = lp.a_ineq.len();
    let n_eq = lp.a_eq.len();
    let m = n_ineq + n_eq;

    // columns: x | slacks | artificials
    let needs_art: Vec<bool> = (0..m)
        .map(|r| if r < n_ineq { lp.b_ineq[r] < 0.0 } else { true })
        .collect();
    let n_art = needs_art.iter().filter(|b| **b).count();
    let slack0 = nv;
    let art0 = nv + n_ineq;
    let cols = nv + n_ineq + n_art;

    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut next_art = art0;
    for r in 0..m {
        let (row, b, slack) = if r < n_ineq {
            (&lp.a_ineq[r], lp.b_ineq[r], Some(slack0 + r))
        } else {
            (&lp.a_eq[r - n_ineq], lp.b_eq[r - n_ineq], None)
        };
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..nv {
            t[r][j] = sign * row[j];
        }
        if let Some(s) = slack {
            t[r][s] = sign;
        }
        t[r][cols] = sign * b;
        if needs_art[r] {
            t[r][next_art] = 1.0;
            basis[r] = next_art;
            next_art += 1;
        } else {
            basis[r] = slack.expect("inequality rows carry a slack");
        }
    }
    let mut tab = Tableau { t, basis, cols };
    let max_iter = 50 * (cols + m + 10);

    // phase 1: maximize -Σ artificials
    if n_art > 0 {
        let mut obj = vec![0.0; cols + 1];
        for j in art0..cols {
            obj[j] = -1.0;
        }
        for r in 0..m {
            if tab.basis[r] >= art0 {
                for j in 0..=cols {
                    obj[j] += tab.t[r][j];
                }
            }
        }
        tab.optimize(&mut obj, cols, max_iter)?;
        let infeas: f64 = (0..m)
            .filter(|&r| tab.basis[r] >= art0)
            .map(|r| tab.rhs(r))
            .sum();
        let scale = lp
            .b_eq
            .iter()
            .chain(&lp.b_ineq)
            .fold(1.0f64, |a, b| a.max(b.abs()));
        if infeas > 1e-9 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining artificials out of the basis
        for r in 0..m {
            if tab.basis[r] >= art0 {
                if let Some(j) = (0..art0).find(|&j| tab.t[r][j].abs() > PIVOT_EPS) {
                    tab.pivot(&mut obj, r, j);
                }
            }
        }
    }

    // phase 2
    let mut obj = vec![0.0; cols + 1];
    obj[..nv].copy_from_slice(&lp.c);
    for r in 0..m {
        let b = tab.basis[r];
        let cb = if b < nv { lp.c[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=cols {
                obj[j] -= cb * tab.t[r][j];
            }
        }
    }
    if !tab.optimize(&mut obj, art0, max_iter)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![0.0; nv];
    for r in 0..m {
        if tab.basis[r] < nv {
            x[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    let objective = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, objective })
}

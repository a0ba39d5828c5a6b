//! Symmetric eigendecomposition and the matrices built from it.
//!
//! Eigendecompositions use cyclic Jacobi rotations; the output is sorted
//! ascending and every eigenvector is signed so that its first component
//! above `SIGN_THRESHOLD` in magnitude is positive. Identical inputs give
//! bit-identical outputs.
//!
//! When eigenpairs of `A_i` and `B_i` are combined under a common index `k`
//! (the rank-one `H` construction and the per-eigenpair inequalities), the
//! two decompositions are paired by sorted position.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Matrix, ProblemInstance, Vector};

/// Jacobi stops once the off-diagonal Frobenius norm falls below this
/// fraction of `‖M‖_F`.
pub const JACOBI_REL_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 30;
const SIGN_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenDecomposition {
    /// Sorted ascending.
    #[serde(serialize_with = "crate::ser::vector")]
    pub eigenvalues: Vector,
    /// Column `k` pairs with `eigenvalues[k]`.
    #[serde(serialize_with = "crate::ser::matrix")]
    pub eigenvectors: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdStatus {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
    NegativeSemidefinite,
    NegativeDefinite,
}

impl PsdStatus {
    /// PSD in the wide sense (includes PD).
    pub fn is_psd(self) -> bool {
        matches!(
            self,
            PsdStatus::PositiveDefinite | PsdStatus::PositiveSemidefinite
        )
    }
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Absolute threshold corresponding to the relative tolerance `tol`.
    pub fn threshold(&self, tol: f64) -> f64 {
        tol * self.max_abs().max(1.0)
    }

    pub fn status(&self, tol: f64) -> PsdStatus {
        if self.dim() == 0 {
            return PsdStatus::PositiveSemidefinite;
        }
        let t = self.threshold(tol);
        let (lo, hi) = (self.min(), self.max());
        if lo >= t {
            PsdStatus::PositiveDefinite
        } else if lo >= -t {
            PsdStatus::PositiveSemidefinite
        } else if hi <= -t {
            PsdStatus::NegativeDefinite
        } else if hi <= t {
            PsdStatus::NegativeSemidefinite
        } else {
            PsdStatus::Indefinite
        }
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.status(tol).is_psd()
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let scaled = Matrix::from_fn(self.dim(), self.dim(), |r, k| {
            self.eigenvectors[(r, k)] * self.eigenvalues[k]
        });
        scaled * self.eigenvectors.transpose()
    }

    pub fn eigenvector(&self, k: usize) -> Vector {
        self.eigenvectors.column(k).into_owned()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn eig_sym(m: &Matrix) -> Result<EigenDecomposition> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: m.ncols(),
        });
    }
    let mut a = m.clone();
    let mut v = Matrix::identity(n, n);
    let norm = a.norm();
    let target = JACOBI_REL_TOL * norm;

    let mut converged = off_diagonal_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
        sweeps += 1;
        converged = off_diagonal_norm(&a) <= target;
    }
    if !converged {
        return Err(Error::Convergence {
            off_norm: off_diagonal_norm(&a),
            sweeps,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let eigenvalues = Vector::from_iterator(n, order.iter().map(|&k| a[(k, k)]));
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).into_owned();
        if let Some(first) = col.iter().find(|x| x.abs() > SIGN_THRESHOLD) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

// Applies the rotation in the (p, q) plane that annihilates a[p][q].
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for r in 0..n {
        for s in 0..n {
            if r != s {
                sum += a[(r, s)] * a[(r, s)];
            }
        }
    }
    sum.sqrt()
}

/// Classifies `m` by its extreme eigenvalues against `±tol·max(1, max|λ|)`.
pub fn psd_status(m: &Matrix, tol: f64) -> Result<PsdStatus> {
    Ok(eig_sym(m)?.status(tol))
}

/// `F_i(x) = A_i - (f_i(x)/g_i(x)) B_i`.
pub fn build_fi(p: &ProblemInstance, i: usize, x: &Vector) -> Result<Matrix> {
    let rho = p.ratio(i, x)?;
    let obj = p.objective(i);
    Ok(obj.f().q() - obj.g().q() * rho)
}

/// `F(w, x) = Σ w_i F_i(x)`.
pub fn build_f(p: &ProblemInstance, w: &Vector, x: &Vector) -> Result<Matrix> {
    if w.len() != p.num_objectives() {
        return Err(Error::Dimension {
            expected: p.num_objectives(),
            got: w.len(),
        });
    }
    let n = p.dim();
    let mut out = Matrix::zeros(n, n);
    for i in 0..p.num_objectives() {
        out += build_fi(p, i, x)? * w[i];
    }
    Ok(out)
}

/// `F(τ/g(x*), x*)`, the matrix of the weighted residual quadratic.
pub fn build_f_hat(p: &ProblemInstance, tau: &Vector, xstar: &Vector) -> Result<Matrix> {
    let g = p.denominators(xstar)?;
    build_f(p, &tau.component_div(&g), xstar)
}

/// Eigendecompositions of `(A_i, B_i)` for every objective.
pub fn objective_spectra(
    p: &ProblemInstance,
) -> Result<Vec<(EigenDecomposition, EigenDecomposition)>> {
    p.objectives()
        .iter()
        .map(|o| Ok((eig_sym(o.f().q())?, eig_sym(o.g().q())?)))
        .collect()
}

/// The real-valued pieces of the rank-one construction for a pair `(i, k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HTerms {
    #[serde(serialize_with = "crate::ser::vector")]
    pub a_plus: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub a_minus: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub alpha: Vector,
    pub beta: f64,
    /// `a_plus a_minusᵀ`, generally not symmetric.
    #[serde(serialize_with = "crate::ser::matrix")]
    pub hbar: Matrix,
}

impl HTerms {
    /// `xᵀ Hbar x - αᵀx + β`.
    pub fn value(&self, x: &Vector) -> f64 {
        x.dot(&(&self.hbar * x)) - self.alpha.dot(x) + self.beta
    }

    /// `⟨x - x*, a⁺⟩⟨x - x*, a⁻⟩`, equal to [`HTerms::value`] up to rounding.
    pub fn factored(&self, x: &Vector, xstar: &Vector) -> f64 {
        let d = x - xstar;
        d.dot(&self.a_plus) * d.dot(&self.a_minus)
    }

    /// `½(Hbar + Hbarᵀ)`, which alone determines `xᵀ Hbar x`.
    pub fn symmetric_hbar(&self) -> Matrix {
        (&self.hbar + self.hbar.transpose()) * 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HMatrixData {
    pub objective: usize,
    pub index: usize,
    pub mu_a: f64,
    pub mu_b: f64,
    /// `f_i(x*)/g_i(x*)`.
    pub ratio: f64,
    pub real_valued: bool,
    /// Present iff `real_valued`.
    pub terms: Option<HTerms>,
}

fn clamp_radicand(v: f64, scale: f64) -> Option<f64> {
    if v >= 0.0 {
        Some(v)
    } else if v >= -1e-12 * (1.0 + scale) {
        Some(0.0)
    } else {
        None
    }
}

/// Builds `a⁺, a⁻, α, β, Hbar` for objective `i` and eigen-index `k`.
///
/// The pair is flagged not real-valued when `μ_k(A_i) < 0` or
/// `μ_k(B_i)·f_i(x*)/g_i(x*) < 0`, i.e. when a square root would leave ℝ.
pub fn build_h_data(
    p: &ProblemInstance,
    i: usize,
    k: usize,
    xstar: &Vector,
    eig_a: &EigenDecomposition,
    eig_b: &EigenDecomposition,
) -> Result<HMatrixData> {
    let rho = p.ratio(i, xstar)?;
    let mu_a = eig_a.eigenvalues[k];
    let mu_b = eig_b.eigenvalues[k];
    let ra = clamp_radicand(mu_a, eig_a.max_abs());
    let rb = clamp_radicand(mu_b * rho, eig_b.max_abs() * rho.abs());
    let terms = match (ra, rb) {
        (Some(ra), Some(rb)) => {
            let pk = eig_a.eigenvector(k);
            let qk = eig_b.eigenvector(k);
            let a_plus = &pk * ra.sqrt() + &qk * rb.sqrt();
            let a_minus = &pk * ra.sqrt() - &qk * rb.sqrt();
            let sp = xstar.dot(&a_plus);
            let sm = xstar.dot(&a_minus);
            let alpha = &a_minus * sp + &a_plus * sm;
            let hbar = &a_plus * a_minus.transpose();
            Some(HTerms {
                a_plus,
                a_minus,
                alpha,
                beta: sp * sm,
                hbar,
            })
        }
        _ => None,
    };
    Ok(HMatrixData {
        objective: i,
        index: k,
        mu_a,
        mu_b,
        ratio: rho,
        real_valued: terms.is_some(),
        terms,
    })
}

/// Largest discrepancy between `Hbar`, `α` and their entrywise expansions
/// in terms of the eigenvector components. Zero up to rounding.
pub fn entrywise_check(
    hd: &HMatrixData,
    xstar: &Vector,
    eig_a: &EigenDecomposition,
    eig_b: &EigenDecomposition,
) -> Result<f64> {
    let terms = hd
        .terms
        .as_ref()
        .ok_or_else(|| Error::InapplicableRoute("H data is not real-valued".into()))?;
    let k = hd.index;
    let pk = eig_a.eigenvector(k);
    let qk = eig_b.eigenvector(k);
    let ma = hd.mu_a.max(0.0);
    let cb = (hd.mu_b * hd.ratio).max(0.0);
    let cross = (ma * cb).sqrt();
    let n = pk.len();
    let mut worst = 0.0f64;
    for r in 0..n {
        for s in 0..n {
            let expected = if r == s {
                ma * pk[r] * pk[r] - cb * qk[r] * qk[r]
            } else {
                ma * pk[r] * pk[s] + cross * (pk[s] * qk[r] - pk[r] * qk[s]) - cb * qk[r] * qk[s]
            };
            worst = worst.max((terms.hbar[(r, s)] - expected).abs());
        }
    }
    let xp = xstar.dot(&pk);
    let xq = xstar.dot(&qk);
    for r in 0..n {
        let expected = 2.0 * ma * xp * pk[r] - 2.0 * cb * xq * qk[r];
        worst = worst.max((terms.alpha[r] - expected).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::example;

    fn m(n: usize, xs: &[f64]) -> Matrix {
        Matrix::from_row_slice(n, n, xs)
    }

    #[test]
    fn identity_decomposes_trivially() {
        let e = eig_sym(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(e.eigenvectors, Matrix::identity(3, 3));
    }

    #[test]
    fn diagonal_is_sorted() {
        let e = eig_sym(&m(2, &[3.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 3.0]);
        assert_eq!(e.eigenvectors, m(2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn two_by_two_closed_form() {
        let e = eig_sym(&m(2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 3.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.eigenvector(0);
        let v1 = e.eigenvector(1);
        assert!((v0 - Vector::from_column_slice(&[h, -h])).amax() < 1e-14);
        assert!((v1 - Vector::from_column_slice(&[h, h])).amax() < 1e-14);
    }

    #[test]
    fn zero_size_and_zero_matrix() {
        let e = eig_sym(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(e.status(1e-9), PsdStatus::PositiveSemidefinite);
        assert_eq!(
            psd_status(&m(2, &[1.0, 0.0, 0.0, -1.0]), 1e-9).unwrap(),
            PsdStatus::Indefinite
        );
        assert_eq!(
            psd_status(&m(1, &[-2.0]), 1e-9).unwrap(),
            PsdStatus::NegativeDefinite
        );
        assert_eq!(
            psd_status(&m(2, &[-1.0, 0.0, 0.0, 0.0]), 1e-9).unwrap(),
            PsdStatus::NegativeSemidefinite
        );
    }

    #[test]
    fn fi_at_origin() {
        let p = example();
        let x = Vector::from_column_slice(&[0.0]);
        let f: Vec<f64> = (0..3)
            .map(|i| build_fi(&p, i, &x).unwrap()[(0, 0)])
            .collect();
        assert_eq!(f, vec![1.0, 3.0, 3.0]);
        assert_eq!(
            psd_status(&build_fi(&p, 0, &x).unwrap(), 1e-9).unwrap(),
            PsdStatus::PositiveDefinite
        );
        let ones = Vector::from_element(3, 1.0);
        assert_eq!(build_f(&p, &ones, &x).unwrap()[(0, 0)], 7.0);
        let tau = Vector::from_column_slice(&[0.5, 1.0, 0.25]);
        assert_eq!(build_f_hat(&p, &tau, &x).unwrap()[(0, 0)], 4.0);
        assert!(matches!(
            build_f(&p, &Vector::from_element(2, 1.0), &x),
            Err(Error::Dimension {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn h_data_for_negative_eigenvalue_is_not_real() {
        let p = example();
        let spectra = objective_spectra(&p).unwrap();
        let x = Vector::from_column_slice(&[0.0]);
        let hd = build_h_data(&p, 2, 0, &x, &spectra[2].0, &spectra[2].1).unwrap();
        assert_eq!(hd.mu_a, -2.0);
        assert!(!hd.real_valued);
        assert!(hd.terms.is_none());
    }

    #[test]
    fn h_data_unit_case() {
        // A = B = [1], f/g = 1 at x* = 0
        use crate::model::{ProblemInstance, QuadraticFunction};
        let one = Matrix::identity(1, 1);
        let f = QuadraticFunction::new(one.clone(), Vector::zeros(1), 1.0, 1e-8).unwrap();
        let g = QuadraticFunction::new(one, Vector::zeros(1), 1.0, 1e-8).unwrap();
        let p = ProblemInstance::new(1, vec![(f, g)], vec![], &Default::default()).unwrap();
        let spectra = objective_spectra(&p).unwrap();
        let x = Vector::zeros(1);
        let hd = build_h_data(&p, 0, 0, &x, &spectra[0].0, &spectra[0].1).unwrap();
        let t = hd.terms.as_ref().unwrap();
        assert_eq!(t.a_plus[0], 2.0);
        assert_eq!(t.a_minus[0], 0.0);
        assert_eq!(t.alpha[0], 0.0);
        assert_eq!(t.beta, 0.0);
        assert_eq!(t.hbar[(0, 0)], 0.0);
        assert_eq!(
            entrywise_check(&hd, &x, &spectra[0].0, &spectra[0].1).unwrap(),
            0.0
        );
    }

    #[test]
    fn zero_eigenvalues_give_zero_terms() {
        use crate::model::{ProblemInstance, QuadraticFunction};
        let f = QuadraticFunction::affine(Vector::from_column_slice(&[1.0, 0.0]), 0.5);
        let g = QuadraticFunction::constant(2, 2.0);
        let p = ProblemInstance::new(2, vec![(f, g)], vec![], &Default::default()).unwrap();
        let spectra = objective_spectra(&p).unwrap();
        let x = Vector::from_column_slice(&[0.3, -0.2]);
        for k in 0..2 {
            let hd = build_h_data(&p, 0, k, &x, &spectra[0].0, &spectra[0].1).unwrap();
            let t = hd.terms.as_ref().unwrap();
            assert_eq!(t.hbar.amax(), 0.0);
            assert_eq!(t.value(&Vector::from_column_slice(&[5.0, 1.0])), 0.0);
            assert_eq!(
                entrywise_check(&hd, &x, &spectra[0].0, &spectra[0].1).unwrap(),
                0.0
            );
        }
    }
}

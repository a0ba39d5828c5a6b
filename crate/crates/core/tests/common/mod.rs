#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vqfp::{io, Constraint, Matrix, ProblemInstance, QuadraticFunction, Tolerances, Vector};

pub const EXAMPLE_JSON: &str = include_str!("../../examples/paper_example.json");

pub fn example() -> ProblemInstance {
    io::parse_instance(EXAMPLE_JSON, &Tolerances::default()).unwrap()
}

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn point(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-r..r))
}

pub fn symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
    (&m + m.transpose()) * 0.5
}

pub fn psd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.transpose() * &m * 0.5 + Matrix::identity(n, n) * 0.1
}

/// A denominator with `min g >= 0.5` over ℝⁿ.
pub fn denominator(rng: &mut ChaCha8Rng, n: usize) -> QuadraticFunction {
    let b = psd(rng, n);
    let c = point(rng, n, 1.0);
    let inv = b.clone().try_inverse().unwrap();
    let d = 0.25 * c.dot(&(&inv * &c)) + 0.5 + rng.random_range(0.0..1.0);
    QuadraticFunction::new(b, c, d, 1e-12).unwrap()
}

pub fn unit_box(n: usize) -> Constraint {
    Constraint::Box {
        lo: Vector::from_element(n, -1.0),
        hi: Vector::from_element(n, 1.0),
    }
}

/// Indefinite numerators over `[-1, 1]ⁿ`.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ProblemInstance {
    let objectives = (0..m)
        .map(|_| {
            let f = QuadraticFunction::new(
                symmetric(rng, n, 1.0),
                point(rng, n, 1.0),
                rng.random_range(-1.0..1.0),
                1e-12,
            )
            .unwrap();
            (f, denominator(rng, n))
        })
        .collect();
    ProblemInstance::new(n, objectives, vec![unit_box(n)], &Tolerances::default()).unwrap()
}

/// Numerators with PSD Hessian and negative values on the box, so every
/// `A_i - ρ_i B_i` is PSD there.
pub fn convex_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ProblemInstance {
    let objectives = (0..m)
        .map(|_| {
            let a = psd(rng, n) * 0.3;
            let c = point(rng, n, 1.0);
            let f = QuadraticFunction::new(a, c, -4.0 - rng.random_range(0.0..1.0), 1e-12).unwrap();
            (f, denominator(rng, n))
        })
        .collect();
    ProblemInstance::new(n, objectives, vec![unit_box(n)], &Tolerances::default()).unwrap()
}

/// Positive weights drawn uniformly from `[0.1, 1]`.
pub fn weights(rng: &mut ChaCha8Rng, m: usize) -> Vector {
    Vector::from_fn(m, |_, _| rng.random_range(0.1..1.0))
}

/// Grid step keeping the oracle grid near 10⁴ points on `[-1, 1]ⁿ`.
pub fn grid_step(n: usize) -> f64 {
    match n {
        1 => 1.0 / 512.0,
        2 => 1.0 / 64.0,
        _ => 1.0 / 8.0,
    }
}

use vqfp::certify::{gamma_eta, z_eigen_expansion, z_value, z_value_ratio_form};
use vqfp::kkt::conversion_identity_residual;
use vqfp::scalarize::{build_scalarized, expansion_residual};
use vqfp::spectral::{build_h_data, entrywise_check, objective_spectra};
use vqfp::RunConfig;

/// An instance of random shape with `n, m <= 3`.
pub fn any_instance(rng: &mut ChaCha8Rng) -> ProblemInstance {
    let n = rng.random_range(1..=3);
    let m = rng.random_range(1..=3);
    random_instance(rng, n, m)
}

fn positive(rng: &mut ChaCha8Rng, m: usize) -> Vector {
    Vector::from_fn(m, |_, _| rng.random_range(0.05..1.0))
}

fn worst_over<F>(seed: u64, draws: usize, mut f: F) -> f64
where
    F: FnMut(&mut ChaCha8Rng, &ProblemInstance) -> f64,
{
    let mut r = rng(seed);
    (0..draws)
        .map(|_| {
            let p = any_instance(&mut r);
            f(&mut r, &p)
        })
        .fold(0.0, f64::max)
}

/// Largest residual of the ratio-difference identity.
pub fn ratio_identity_worst(seed: u64, draws: usize) -> f64 {
    worst_over(seed, draws, |r, p| {
        let (x, xs) = (point(r, p.dim(), 1.0), point(r, p.dim(), 1.0));
        (0..p.num_objectives())
            .map(|i| p.identity_residual(i, &x, &xs).unwrap())
            .fold(0.0, f64::max)
    })
}

/// Largest gap between the quadratic and ratio forms of `Z`.
pub fn z_two_form_worst(seed: u64, draws: usize) -> f64 {
    worst_over(seed, draws, |r, p| {
        let tau = positive(r, p.num_objectives());
        let (x, xs) = (point(r, p.dim(), 1.0), point(r, p.dim(), 1.0));
        (z_value(p, &tau, &xs, &x).unwrap() - z_value_ratio_form(p, &tau, &xs, &x).unwrap()).abs()
    })
}

/// Largest gap between `Z` and its eigen expansion.
pub fn eigen_expansion_worst(seed: u64, draws: usize) -> f64 {
    worst_over(seed, draws, |r, p| {
        let tau = positive(r, p.num_objectives());
        let (x, xs) = (point(r, p.dim(), 1.0), point(r, p.dim(), 1.0));
        let spectra = objective_spectra(p).unwrap();
        (z_value(p, &tau, &xs, &x).unwrap()
            - z_eigen_expansion(p, &tau, &xs, &x, &spectra).unwrap())
        .abs()
    })
}

/// Largest entrywise discrepancy of `Hbar` and `α`, with the number of
/// real-valued pairs examined.
pub fn entrywise_worst(seed: u64, draws: usize) -> (f64, usize) {
    let mut pairs = 0;
    let worst = worst_over(seed, draws, |r, p| {
        let xs = point(r, p.dim(), 1.0);
        let spectra = objective_spectra(p).unwrap();
        let mut w = 0.0f64;
        for (i, (ea, eb)) in spectra.iter().enumerate() {
            for k in 0..p.dim() {
                let hd = build_h_data(p, i, k, &xs, ea, eb).unwrap();
                if hd.real_valued {
                    pairs += 1;
                    w = w.max(entrywise_check(&hd, &xs, ea, eb).unwrap());
                }
            }
        }
        w
    });
    (worst, pairs)
}

/// Largest residual of the multiplier conversion identity.
pub fn conversion_worst(seed: u64, draws: usize) -> f64 {
    worst_over(seed, draws, |r, p| {
        let mu = positive(r, p.num_objectives());
        let xs = point(r, p.dim(), 1.0);
        conversion_identity_residual(p, &xs, &mu).unwrap()
    })
}

/// Largest residual of the scalarized difference expansion.
pub fn scalarized_expansion_worst(seed: u64, draws: usize) -> f64 {
    worst_over(seed, draws, |r, p| {
        let (x1, x2, xs) = (
            point(r, p.dim(), 1.0),
            point(r, p.dim(), 1.0),
            point(r, p.dim(), 1.0),
        );
        (0..p.num_objectives())
            .map(|i| expansion_residual(p, i, &xs, &x1, &x2).unwrap())
            .fold(0.0, f64::max)
    })
}

/// Compares the sign of the per-pair eigen inequality with the sign of the
/// rank-one quadratic `H` wherever the latter is real-valued.
/// Returns `(comparisons, disagreements)`.
pub fn route_equivalence(
    seed: u64,
    instances: usize,
    points_per_instance: usize,
) -> (usize, usize) {
    let mut r = rng(seed);
    let (mut checked, mut disagreements) = (0, 0);
    for _ in 0..instances {
        let p = any_instance(&mut r);
        let tau = positive(&mut r, p.num_objectives());
        let xs = point(&mut r, p.dim(), 1.0);
        let g = p.denominators(&xs).unwrap();
        let spectra = objective_spectra(&p).unwrap();
        let mut data = Vec::new();
        for (i, (ea, eb)) in spectra.iter().enumerate() {
            for k in 0..p.dim() {
                let hd = build_h_data(&p, i, k, &xs, ea, eb).unwrap();
                if hd.real_valued {
                    data.push((i, k, hd));
                }
            }
        }
        for _ in 0..points_per_instance {
            let x = point(&mut r, p.dim(), 1.0);
            for (i, k, hd) in &data {
                let (ea, eb) = &spectra[*i];
                let (gamma, eta) = gamma_eta(&p, *i, *k, &tau, &xs, &x, ea, eb).unwrap();
                let lhs = ea.eigenvalues[*k] * gamma - eb.eigenvalues[*k] * eta;
                let h = hd.terms.as_ref().unwrap().value(&x) * tau[*i] / g[*i];
                checked += 1;
                if (lhs >= -1e-12) != (h >= -1e-12) {
                    disagreements += 1;
                }
            }
        }
    }
    (checked, disagreements)
}

fn central_difference<F: Fn(&Vector) -> f64>(f: F, x: &Vector, h: f64) -> Vector {
    Vector::from_fn(x.len(), |k, _| {
        let mut a = x.clone();
        let mut b = x.clone();
        a[k] += h;
        b[k] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

fn relative_gap(analytic: &Vector, numeric: &Vector) -> f64 {
    (analytic - numeric).amax() / analytic.amax().max(1.0)
}

/// Largest relative gap between analytic gradients (numerators,
/// denominators, ratios, scalarized objectives) and central differences.
pub fn gradient_worst(seed: u64, probes: usize) -> f64 {
    let cfg = RunConfig::default();
    worst_over(seed, probes, |r, p| {
        let x = point(r, p.dim(), 1.0);
        let xs = point(r, p.dim(), 1.0);
        let h = 1e-5;
        let mut w = 0.0f64;
        for (i, o) in p.objectives().iter().enumerate() {
            w = w.max(relative_gap(
                &o.f().gradient(&x),
                &central_difference(|y| o.f().value(y), &x, h),
            ));
            w = w.max(relative_gap(
                &o.g().gradient(&x),
                &central_difference(|y| o.g().value(y), &x, h),
            ));
            let analytic = p.ratio_gradient_row(i, &x).unwrap();
            w = w.max(relative_gap(
                &analytic,
                &central_difference(|y| p.ratio(i, y).unwrap(), &x, h),
            ));
        }
        let sp = build_scalarized(p, &xs, &positive(r, p.num_objectives()), &cfg).unwrap();
        w.max(relative_gap(
            &sp.gradient(&x),
            &central_difference(|y| sp.value(p, y), &x, h),
        ))
    })
}

use vqfp::certify::certify_point;
use vqfp::duality::{
    converse_duality_check, dual_feasible, strong_duality_construct, weak_duality_sweep,
    StrongDuality,
};
use vqfp::kkt::find_multipliers;
use vqfp::oracle::{dominance_check, dominance_check_with_margin, lipschitz_estimate};
use vqfp::scalarize::dinkelbach_search;
use vqfp::spectral::{build_f, psd_status};
use vqfp::Error;

#[derive(Debug, Default, Clone, Copy)]
pub struct AgreementStats {
    pub candidates: usize,
    pub certified: usize,
    pub dominated_beyond_margin: usize,
}

/// Certifies fixed points of the weighted search on random box instances
/// and checks each certified point against the grid oracle with the
/// Lipschitz margin.
pub fn certify_oracle_agreement(seed: u64, instances: usize, searches: usize) -> AgreementStats {
    let cfg = RunConfig::default();
    let mut r = rng(seed);
    let mut stats = AgreementStats::default();
    for _ in 0..instances {
        let p = any_instance(&mut r);
        let step = grid_step(p.dim());
        let lip = lipschitz_estimate(&p, step, 10_000, &cfg).unwrap();
        for _ in 0..searches {
            let w = weights(&mut r, p.num_objectives());
            let x0 = point(&mut r, p.dim(), 1.0);
            let x = dinkelbach_search(&p, &w, &x0, &cfg)
                .unwrap()
                .point()
                .clone();
            stats.candidates += 1;
            if certify_point(&p, &x, &cfg).unwrap().is_certified() {
                stats.certified += 1;
                let report =
                    dominance_check_with_margin(&p, &x, step, cfg.tol.dominance, lip, &cfg)
                        .unwrap();
                if report.dominated {
                    stats.dominated_beyond_margin += 1;
                }
            }
        }
    }
    stats
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DualityStats {
    pub certified: usize,
    pub lambda_positive: usize,
    pub round_trips: usize,
    pub not_constructible: usize,
    pub weak_points_checked: usize,
    pub weak_counterexamples: usize,
}

/// Strong-duality construction, dual feasibility, converse re-certification
/// and a weak-duality grid sweep for certified points of convex instances.
pub fn duality_suite(seed: u64, instances: usize) -> DualityStats {
    let cfg = RunConfig::default();
    let mut r = rng(seed);
    let mut s = DualityStats::default();
    for _ in 0..instances {
        let n = r.random_range(1..=3);
        let m = r.random_range(1..=3);
        let p = convex_instance(&mut r, n, m);
        let w = weights(&mut r, m);
        let x0 = point(&mut r, n, 1.0);
        let x = dinkelbach_search(&p, &w, &x0, &cfg)
            .unwrap()
            .point()
            .clone();
        let cert = certify_point(&p, &x, &cfg).unwrap();
        if !cert.is_certified() {
            continue;
        }
        s.certified += 1;
        let mp = cert.multipliers.as_ref().unwrap();
        match strong_duality_construct(&p, &x, mp, &cfg).unwrap() {
            StrongDuality::NotConstructible { .. } => s.not_constructible += 1,
            StrongDuality::Dual { dual, equal_values } => {
                s.lambda_positive += 1;
                let feasible = dual_feasible(&p, &dual, &cfg.tol).is_feasible();
                let step = grid_step(n);
                let confirmed = match converse_duality_check(&p, &dual, Some(step), &cfg) {
                    Ok(report) => {
                        report.certificate.is_certified() && !report.oracle.unwrap().dominated
                    }
                    Err(Error::HypothesisNotMet(_)) => false,
                    Err(e) => panic!("{e}"),
                };
                if equal_values && feasible && confirmed {
                    s.round_trips += 1;
                }
                if psd_status(&build_f(&p, &dual.tau, &dual.u).unwrap(), cfg.tol.psd)
                    .unwrap()
                    .is_psd()
                {
                    let sweep = weak_duality_sweep(&p, &dual, step, &cfg).unwrap();
                    s.weak_points_checked += sweep.checked;
                    s.weak_counterexamples += sweep.counterexamples.len();
                }
            }
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct SearchRun {
    pub start: f64,
    pub converged: bool,
    pub iterations: usize,
    pub point: Vector,
    pub step1_residual: f64,
    pub undominated: bool,
}

/// The fixed-point search on the Example from random starts, with weights
/// taken from the multipliers recovered at `x* = 0`.
pub fn example_searches(seed: u64, starts: usize) -> Vec<SearchRun> {
    let p = example();
    let cfg = RunConfig::default();
    let mp = find_multipliers(&p, &v(&[0.0]), &cfg)
        .unwrap()
        .found()
        .cloned()
        .unwrap();
    let w = mp.tau.component_div(&p.denominators(&v(&[0.0])).unwrap());
    let mut r = rng(seed);
    (0..starts)
        .map(|_| {
            let start = uniform(&mut r, -2.0, 2.0);
            let out = dinkelbach_search(&p, &w, &v(&[start]), &cfg).unwrap();
            let x = out.point().clone();
            let iterations = match &out {
                vqfp::scalarize::DinkelbachOutcome::Converged { iterations, .. } => *iterations,
                _ => cfg.max_iter,
            };
            let step1_residual = match find_multipliers(&p, &x, &cfg).unwrap().found() {
                Some(mp) => mp.stationarity_residual.max(mp.complementarity_residual),
                None => f64::INFINITY,
            };
            let undominated = !dominance_check(&p, &x, 1e-3, cfg.tol.dominance, &cfg)
                .unwrap()
                .dominated;
            SearchRun {
                start,
                converged: out.is_converged(),
                iterations,
                point: x,
                step1_residual,
                undominated,
            }
        })
        .collect()
}

mod common;

use common::*;
use vqfp::oracle::{approximate_pareto_front, dominance_check, grid_points};
use vqfp::scalarize::{
    build_scalarized, check_reformulation_equivalence, minimize_scalarized, ReformulationCheck,
    ScalarMin,
};
use vqfp::RunConfig;

#[test]
fn shifted_and_ratio_dominance_agree_on_random_boxes() {
    let cfg = RunConfig::default();
    let mut r = rng(21);
    for draw in 0..50 {
        let m = 1 + draw % 3;
        let p = random_instance(&mut r, 2, m);
        let x = point(&mut r, 2, 1.0);
        let verdict =
            check_reformulation_equivalence(&p, &x, 1.0 / 32.0, cfg.tol.dominance, &cfg).unwrap();
        assert!(
            matches!(verdict, ReformulationCheck::Consistent { .. }),
            "draw {draw}: {verdict:?}"
        );
    }
}

#[test]
fn front_points_are_undominated_at_the_same_step() {
    let cfg = RunConfig::default();
    let mut r = rng(22);
    for _ in 0..10 {
        let p = random_instance(&mut r, 2, 2);
        let step = 1.0 / 16.0;
        for fp in approximate_pareto_front(&p, step, cfg.tol.dominance, &cfg).unwrap() {
            assert!(
                !dominance_check(&p, &fp.point, step, cfg.tol.dominance, &cfg)
                    .unwrap()
                    .dominated
            );
        }
    }
}

#[test]
fn refinement_keeps_dominated_points_out_of_the_front() {
    let cfg = RunConfig::default();
    let mut r = rng(23);
    for _ in 0..5 {
        let p = random_instance(&mut r, 2, 3);
        let coarse = 1.0 / 8.0;
        let front_coarse = approximate_pareto_front(&p, coarse, cfg.tol.dominance, &cfg).unwrap();
        let front_fine =
            approximate_pareto_front(&p, coarse / 2.0, cfg.tol.dominance, &cfg).unwrap();
        let on_coarse = |x: &vqfp::Vector| front_coarse.iter().any(|fp| fp.point == *x);
        for x in grid_points(&p, coarse, &cfg).unwrap() {
            if !on_coarse(&x) {
                assert!(
                    front_fine.iter().all(|fp| fp.point != x),
                    "{x:?} re-entered the front"
                );
            }
        }
    }
}

#[test]
fn scalarized_global_minima_are_grid_undominated() {
    let cfg = RunConfig::default();
    let mut r = rng(24);
    let mut checked = 0;
    for _ in 0..40 {
        let n = 1 + checked % 2;
        let p = random_instance(&mut r, n, 2);
        let anchor = point(&mut r, n, 1.0);
        let sp = build_scalarized(&p, &anchor, &weights(&mut r, 2), &cfg).unwrap();
        if let ScalarMin::GlobalMin { x, .. } = minimize_scalarized(&sp, &p, &cfg).unwrap() {
            let verdict =
                check_reformulation_equivalence(&p, &x, grid_step(n), cfg.tol.dominance, &cfg)
                    .unwrap();
            assert!(matches!(verdict, ReformulationCheck::Consistent { .. }));
            checked += 1;
        }
    }
    assert!(checked >= 30);
}

#[test]
fn certified_points_survive_the_oracle() {
    let stats = certify_oracle_agreement(25, 12, 2);
    assert!(stats.certified > 0, "{stats:?}");
    assert_eq!(stats.dominated_beyond_margin, 0, "{stats:?}");
}

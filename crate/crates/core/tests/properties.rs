mod common;

use qml_core::osc::operator::{operator_norm, DenseOperator, PowerOptions};
use qml_core::quasimode::{build_model_quasimode, lp_norm, QuasimodeSettings};
use qml_core::symbol::{eval_jet, parse_symbol, PhasePoint};

#[test]
fn jets_match_finite_differences() {
    let worst = common::jet_vs_fd(6, 11);
    assert!(worst < 1e-6, "worst relative error {:e}", worst);
}

#[test]
fn jets_are_symmetric() {
    let f = parse_symbol(common::SMOOTH_SYMBOLS[3].0, 3).unwrap();
    let j = eval_jet(&f, &PhasePoint::new(vec![0.3, -0.2, 0.1], vec![0.5, 0.4, -0.7]), 3).unwrap();
    for a in 0..6 {
        for b in 0..6 {
            assert!((j.d2(a, b) - j.d2(b, a)).abs() <= 1e-12);
            for c in 0..6 {
                assert!((j.d3(a, b, c) - j.d3(c, a, b)).abs() <= 1e-12);
                assert!((j.d3(a, b, c) - j.d3(b, a, c)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn poisson_bracket_algebra() {
    let worst = common::bracket_algebra(25, 3);
    assert!(worst < 1e-10, "worst residual {:e}", worst);
}

#[test]
fn fourier_unitary_and_invertible() {
    let (unit, rt, direct) = common::fourier_checks(5);
    assert!(unit < 1e-10, "unitarity {:e}", unit);
    assert!(rt < 1e-10, "round trip {:e}", rt);
    assert!(direct < 1e-10, "direct sum {:e}", direct);
}

#[test]
fn hamilton_jacobi_residuals() {
    let worst = common::hj_residuals();
    assert!(worst < 1e-6, "residual {:e}", worst);
}

#[test]
fn norm_estimate_matches_svd() {
    let worst = common::operator_norm_vs_svd(9);
    assert!(worst < 1e-6, "relative error {:e}", worst);
}

#[test]
fn norm_estimate_is_seed_independent() {
    let op = DenseOperator::new(
        3,
        3,
        [3.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.5, 1.0]
            .iter()
            .map(|&v| v.into())
            .collect(),
    )
    .unwrap();
    let a = operator_norm(
        &op,
        &PowerOptions {
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let b = operator_norm(
        &op,
        &PowerOptions {
            seed: 99,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((a.sigma - b.sigma).abs() < 1e-9 * a.sigma);
}

#[test]
fn quasimode_norms_converge_under_refinement() {
    let h = 1.0 / 64.0;
    let coarse = QuasimodeSettings::default();
    let fine = QuasimodeSettings {
        points_per_period: 2.0 * coarse.points_per_period,
        region_points: 2 * coarse.region_points - 1,
        ..coarse
    };
    let a = build_model_quasimode(2, h, &coarse).unwrap();
    let b = build_model_quasimode(2, h, &fine).unwrap();
    for p in [2.0, 4.0] {
        let (na, nb) = (lp_norm(&a.region, p).unwrap(), lp_norm(&b.region, p).unwrap());
        assert!((na - nb).abs() < 0.01 * nb, "p = {}: {} vs {}", p, na, nb);
    }
    assert!((a.u_l2 - b.u_l2).abs() < 0.01 * b.u_l2);
    assert!((a.f_l2 - b.f_l2).abs() < 0.01 * b.f_l2);
}

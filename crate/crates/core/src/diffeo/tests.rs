use super::*;
use crate::sampling::{sample_points, Region};
use proptest::prelude::*;

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn ball(n: usize, r: f64) -> Region {
    Region::Ball {
        center: Vector::zeros(n),
        radius: r,
    }
}

fn e(n: usize, i: usize) -> Vector {
    linalg::unit(n, i)
}

#[test]
fn twist_zero_amplitude_is_identity() {
    let f = make_twist(2, 0.0, 0.1, 0.3).unwrap();
    let x = v(&[0.1, 0.05]);
    assert_eq!(f.eval(&x), x);
    assert_eq!(f.analytic_t(), 1.0);
    assert_eq!(f.analytic_eta_slope(), 0.0);
}

#[test]
fn twist_fixes_origin_and_complement() {
    let f = make_twist(3, 0.4, 0.05, 1.0 / 3.0).unwrap();
    assert_eq!(f.eval(&Vector::zeros(3)), Vector::zeros(3));
    let x = v(&[0.3, 0.2, 0.0]);
    assert_eq!(f.eval(&x), x);
    let inside = v(&[0.02, 0.0, 0.01]);
    let y = f.eval(&inside);
    let expect = v(&[0.02 * 0.4f64.cos(), 0.02 * 0.4f64.sin(), 0.01]);
    assert!((y - expect).norm() < 1e-15);
}

#[test]
fn twist_rejects_bad_radii() {
    assert!(make_twist(2, 0.3, 0.0, 0.3).is_err());
    assert!(make_twist(2, 0.3, 0.2, 0.1).is_err());
    assert!(make_twist(2, 0.3, 0.1, 0.5).is_err());
    assert!(make_twist(1, 0.3, 0.1, 0.2).is_err());
}

#[test]
fn twist_jacobian_validates() {
    let f = make_twist(2, 0.3, 0.05, 1.0 / 3.0).unwrap();
    let report = validate_jacobian(&f, 400, 11);
    assert!(report.passed, "{:?}", report.failures);
    assert!(report.max_deviation < 1e-6);
}

#[test]
fn twist_constants_dominate_dense_grid() {
    // Independent oracle: maximize ‖Df‖ and a fine-difference ‖D²f‖ on a polar grid.
    let f = make_twist(2, 0.4, 0.05, 1.0 / 3.0).unwrap();
    let mut sup_norm = 0.0_f64;
    let mut sup_slope = 0.0_f64;
    for i in 0..=2000 {
        let r = 0.05 + (1.0 / 3.0 - 0.05) * i as f64 / 2000.0;
        let x = v(&[r, 0.0]);
        let j = f.jacobian(&x);
        sup_norm = sup_norm.max(linalg::op_norm(&j));
        let h = 1e-6;
        for dir in [e(2, 0), e(2, 1)] {
            let d = linalg::op_norm(&(f.jacobian(&(&x + &dir * h)) - &j)) / h;
            sup_slope = sup_slope.max(d);
        }
    }
    assert!(sup_norm <= f.analytic_t());
    assert!(
        sup_norm > 0.97 * f.analytic_t(),
        "T should be near tight: {sup_norm} vs {}",
        f.analytic_t()
    );
    assert!(sup_slope <= f.analytic_eta_slope());
}

#[test]
fn bump_push_basic_values() {
    let f = make_bump_push(&e(2, 1), 0.1, 1.0 / 3.0).unwrap();
    assert!((f.eval(&Vector::zeros(2)) - v(&[0.0, 0.1])).norm() < 1e-15);
    let x = v(&[0.0, 0.34]);
    assert_eq!(f.eval(&x), x);
    let id = make_bump_push(&e(2, 1), 0.0, 1.0 / 3.0).unwrap();
    assert_eq!(id.eval(&v(&[0.1, 0.1])), v(&[0.1, 0.1]));
}

#[test]
fn bump_push_rejects_fold() {
    // |a|·(15/8)/R ≥ 1
    assert!(make_bump_push(&e(2, 0), 0.2, 1.0 / 3.0).is_err());
    assert!(make_bump_push(&v(&[1.0, 1.0]), 0.1, 1.0 / 3.0).is_err());
}

#[test]
fn bump_push_newton_round_trip() {
    let f = make_bump_push(&e(3, 1), 0.1, 1.0 / 3.0).unwrap();
    for p in sample_points(&ball(3, 0.4), 100, 5) {
        let y = p.as_finite().unwrap();
        let x = f.invert(y).unwrap();
        assert!((f.eval(&x) - y).norm() < 1e-10);
    }
}

#[test]
fn bump_push_validates_and_claimed_bound_is_caught() {
    let f = make_bump_push(&e(2, 0), 0.1, 1.0 / 3.0).unwrap();
    let ok = validate_jacobian(&f, 400, 3);
    assert!(ok.passed, "{:?}", ok.failures);
    let slope = f.analytic_eta_slope();
    let bad = f.with_claimed_bounds(1.0, slope);
    let report = validate_jacobian(&bad, 400, 3);
    assert!(!report.passed);
    assert!(report.failures.iter().any(|m| m.contains("analytic T")));
}

#[test]
fn spiral_fixes_unit_circle_and_inverts() {
    let s = make_spiral(1.5).unwrap();
    for a in [0.0, 1.0, 2.5, 4.0] {
        let z = v(&[f64::cos(a), f64::sin(a)]);
        assert!((s.eval(&z) - &z).norm() < 1e-15);
    }
    assert_eq!(s.eval(&Vector::zeros(2)), Vector::zeros(2));
    let inv = make_spiral(-1.5).unwrap();
    let region = Region::Annulus {
        dim: 2,
        inner: 0.01,
        outer: 100.0,
    };
    for p in sample_points(&region, 200, 2) {
        let z = p.as_finite().unwrap();
        assert!((s.eval(&inv.eval(z)) - z).norm() < 1e-12 * z.norm().max(1.0));
    }
}

#[test]
fn spiral_distortion_constant() {
    let p = SpiralParams { k: 1.5 };
    assert!((p.distortion() - 2.0).abs() < 1e-15);
    let l = p.distortion();
    assert!((l - 1.0 / l - 1.5).abs() < 1e-15);
    assert!((SpiralParams::from_distortion(4.0).k - 3.75).abs() < 1e-15);
    let s = make_spiral(1.5).unwrap();
    let report = validate_jacobian(&s, 300, 9);
    assert!(report.max_deviation < 1e-6, "{}", report.max_deviation);
    assert!(report.sampled_sup_norm <= 2.0 + 1e-12);
    assert!(report.sampled_sup_norm > 1.999);
}

#[test]
fn identity_validation_has_zero_deviation() {
    let report = validate_jacobian(&make_identity(3), 50, 1);
    assert!(report.max_deviation < 1e-10);
    assert!(report.passed);
}

#[test]
fn compose_with_identity_and_inverse() {
    let f = make_twist(2, 0.3, 0.05, 0.3).unwrap();
    let fi = compose(&f, &make_identity(2)).unwrap();
    let ff = compose(&f, &f.inverse()).unwrap();
    for p in sample_points(&ball(2, 0.4), 100, 4) {
        let x = p.as_finite().unwrap();
        assert_eq!(fi.eval(x), f.eval(x));
        assert!((ff.eval(x) - x).norm() < 1e-10);
    }
}

#[test]
fn compose_jacobian_matches_finite_differences() {
    let f = make_twist(2, 0.3, 0.05, 0.3).unwrap();
    let g = make_bump_push(&e(2, 0), 0.08, 0.3).unwrap();
    let h = compose(&f, &g).unwrap();
    let report = validate_jacobian(&h, 300, 8);
    assert!(report.passed, "{:?}", report.failures);
    for p in sample_points(&ball(2, 0.3), 50, 1) {
        let x = p.as_finite().unwrap();
        let chain = f.jacobian(&g.eval(x)) * g.jacobian(x);
        assert!((h.jacobian(x) - chain).abs().max() < 1e-14);
    }
}

#[test]
fn composite_support_is_a_covering_ball() {
    let s1 = Support::Ball {
        center: v(&[0.0, 0.0]),
        radius: 1.0,
    };
    let s2 = Support::Ball {
        center: v(&[3.0, 0.0]),
        radius: 0.5,
    };
    match s1.union(&s2) {
        Support::Ball { center, radius } => {
            assert!((radius - 2.25).abs() < 1e-15);
            assert!((center - v(&[1.25, 0.0])).norm() < 1e-15);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn newton_identity_takes_zero_iterations() {
    let id = make_identity(2);
    let sol = newton_invert(&id, &e(2, 0), &NewtonOptions::default()).unwrap();
    assert_eq!(sol.iterations, 0);
    assert_eq!(sol.x, e(2, 0));
}

#[test]
fn newton_outside_support_returns_input() {
    let f = make_bump_push(&e(2, 0), 0.1, 0.3).unwrap();
    let y = v(&[2.0, 1.0]);
    let sol = newton_invert(&f, &y, &NewtonOptions::default()).unwrap();
    assert_eq!(sol.x, y);
}

#[test]
fn newton_inverts_twist_on_many_points() {
    // Force the Newton path on a twist even though an exact inverse exists.
    let f = make_twist(2, 0.4, 0.05, 1.0 / 3.0).unwrap();
    let mut iters = Vec::new();
    let mut worst = 0.0_f64;
    for p in sample_points(&ball(2, 1.0 / 3.0), 1000, 21) {
        let y = p.as_finite().unwrap();
        let sol = newton_invert(&f, y, &NewtonOptions::default()).unwrap();
        worst = worst.max((f.eval(&sol.x) - y).norm());
        iters.push(sol.iterations);
    }
    iters.sort_unstable();
    assert!(worst < 1e-12);
    assert!(
        iters[iters.len() / 2] <= 6,
        "median iterations {}",
        iters[iters.len() / 2]
    );
}

#[test]
fn newton_non_convergence_reports_best_residual() {
    let f = make_bump_push(&e(2, 0), 0.1, 0.3).unwrap();
    let opts = NewtonOptions {
        tol: 1e-30,
        max_iter: 3,
    };
    match newton_invert(&f, &v(&[0.05, 0.0]), &opts) {
        Err(Error::NonConvergence { best_residual, .. }) => assert!(best_residual.is_finite()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn inverse_jacobian_identity() {
    let f = make_bump_push(&e(2, 1), 0.1, 1.0 / 3.0).unwrap();
    for p in sample_points(&ball(2, 0.3), 100, 6) {
        let x = p.as_finite().unwrap();
        let y = f.eval(x);
        let lhs = f.inverse_jacobian(&y).unwrap();
        let rhs = linalg::inverse(&f.jacobian(x)).unwrap();
        assert!((lhs - rhs).abs().max() < 1e-8);
    }
}

#[test]
fn similarity_conjugation_scales_slope() {
    let f = make_twist(2, 0.4, 0.05, 1.0 / 3.0).unwrap();
    let g = f.conjugate_by_scale(0.5).unwrap();
    assert_eq!(g.analytic_t(), f.analytic_t());
    assert!((g.analytic_eta_slope() - 2.0 * f.analytic_eta_slope()).abs() < 1e-12);
    let x = v(&[0.05, 0.02]);
    assert!((g.eval(&x) - f.eval(&(&x * 2.0)) * 0.5).norm() < 1e-15);
    let report = validate_jacobian(&g, 200, 2);
    assert!(report.passed, "{:?}", report.failures);
    let y = g.eval(&x);
    assert!((g.invert(&y).unwrap() - x).norm() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn catalog_maps_are_identity_outside_support(
        a in -1.0f64..1.0, r in 0.34f64..50.0, phi in 0.0f64..std::f64::consts::TAU,
    ) {
        let x = v(&[r * phi.cos(), r * phi.sin()]);
        let t = make_twist(2, a, 0.05, 1.0 / 3.0).unwrap();
        prop_assert_eq!(t.eval(&x), x.clone());
        let b = make_bump_push(&e(2, 0), a * 0.15, 1.0 / 3.0).unwrap();
        prop_assert_eq!(b.eval(&x), x.clone());
    }

    #[test]
    fn twist_inverse_consistency(a in -1.0f64..1.0, x0 in -0.3f64..0.3, x1 in -0.3f64..0.3) {
        let f = make_twist(2, a, 0.05, 1.0 / 3.0).unwrap();
        let x = v(&[x0, x1]);
        let y = f.eval(&x);
        prop_assert!((f.invert(&y).unwrap() - &x).norm() < 1e-14);
    }

    #[test]
    fn twist_sup_norm_below_t(a in -1.5f64..1.5, inner in 0.01f64..0.2, r in 0.0f64..0.34, phi in 0.0f64..6.3) {
        let f = make_twist(2, a, inner, 1.0 / 3.0).unwrap();
        let x = v(&[r * phi.cos(), r * phi.sin()]);
        let (hi, lo) = linalg::singular_range(&f.jacobian(&x));
        prop_assert!(hi <= f.analytic_t() * (1.0 + 1e-12));
        prop_assert!(1.0 / lo <= f.analytic_t() * (1.0 + 1e-12));
    }
}

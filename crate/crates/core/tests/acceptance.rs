//! Acceptance gate: runs every criterion at its stated tolerance and prints
//! one pass/fail line each. Runs without the libtest harness so the lines are
//! always visible; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use spherefac::certify::spherical_transfer;
use spherefac::diffeo::{make_bump_push, make_twist, NewtonOptions, SmoothMap};
use spherefac::factorize::{factorize_diffeo, verify_factorization, PipelineOptions, SphereDiffeo};
use spherefac::geometry::{
    ball_normalizer, chi_dist, embed_unit_sphere, project_chart, SphericalBall,
};
use spherefac::linalg::{self, Vector};
use spherefac::onedim::{compose_factors, factor_full, summarize, IntervalMap};
use spherefac::pathcore::{self, propagate, propagate_including_zero, PropagatedMap};
use spherefac::sampling::{self, Region};
use spherefac::spiralbounds::{spiral_bound, spiral_distortion_scan, Annulus};
use spherefac::{Point, Rotation};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn twist(n: usize, a: f64) -> SmoothMap {
    make_twist(n, a, 0.05, 1.0 / 3.0).unwrap()
}

fn bump(n: usize) -> SmoothMap {
    make_bump_push(&linalg::unit(n, 1), 0.1, 1.0 / 3.0).unwrap()
}

fn strict_newton(f: SmoothMap) -> SmoothMap {
    f.with_newton(NewtonOptions {
        tol: 1e-12,
        ..NewtonOptions::default()
    })
}

fn finite_points(region: &Region, count: usize, seed: u64) -> Vec<Vector> {
    sampling::sample_points(region, count, seed)
        .into_iter()
        .filter_map(|p| p.as_finite().cloned())
        .collect()
}

fn endpoint_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        for f in [twist(n, 0.3), bump(n)] {
            let f = strict_newton(f);
            let g = propagate(&f).unwrap();
            for x in finite_points(&pathcore::path_region(n), 1000, 11) {
                let h0 = g.h_eval(0.0, &x).unwrap();
                let h1 = g.h_eval(1.0, &x).unwrap();
                worst = worst.max((h0 - &x).norm()).max((h1 - f.eval(&x)).norm());
            }
        }
    }
    outcome(
        worst < 1e-8,
        format!("max endpoint error {worst:.3e} (< 1e-8)"),
    )
}

struct Sweep {
    disp_slack: f64,
    deriv_slack: f64,
}

fn sweep_all() -> Sweep {
    let mut disp_slack = f64::NEG_INFINITY;
    let mut deriv_slack = f64::NEG_INFINITY;
    for (i, f) in [twist(2, 0.3), bump(2), twist(3, 0.3), bump(3)]
        .into_iter()
        .enumerate()
    {
        let n = f.dim();
        let g: PropagatedMap = propagate(&strict_newton(f)).unwrap();
        let b = pathcore::bounds(&g, 256, 5);
        let (times, pts) = pathcore::sweep_inputs(n, 200, 100, 20 + i as u64);
        for r in pathcore::sweep(&g, &b, &times, &pts).unwrap() {
            disp_slack = disp_slack.max(r.max_disp - r.disp_bound);
            deriv_slack = deriv_slack.max(r.max_deriv - r.deriv_bound);
        }
    }
    Sweep {
        disp_slack,
        deriv_slack,
    }
}

fn end_to_end() -> Outcome {
    let f = SphereDiffeo::from_map(twist(2, 0.4)).unwrap();
    let opts = PipelineOptions::default();
    let mut counts = Vec::new();
    let mut notes = Vec::new();
    let mut ok = true;
    for eps in [0.2, 0.05] {
        let fac = factorize_diffeo(&f, eps, &opts).unwrap();
        let check = verify_factorization(&f, &fac, 1000, 99).unwrap();
        let certified = fac.steps.iter().all(|s| {
            s.certificate.passes(eps)
                && s.certificate.l_lower <= 1.0 + eps
                && s.certificate.max_disp <= eps
        });
        ok &= certified && check.passed && fac.residual < 1e-6 && check.max_chi_deviation < 1e-6;
        counts.push(fac.factor_count());
        notes.push(format!(
            "ε={eps}: {} factors, residual {:.2e}",
            fac.factor_count(),
            check.max_chi_deviation.max(fac.residual)
        ));
    }
    ok &= counts[1] >= counts[0];
    outcome(ok, notes.join("; "))
}

fn onedim() -> Outcome {
    let f = IntervalMap::polynomial(&[0.0, 1.0, 0.5], 0.0, 1.0).unwrap();
    let alpha = std::f64::consts::SQRT_2;
    let factors = factor_full(&f, alpha).unwrap();
    let summary = summarize(&factors, 10_000);
    let within = summary
        .iter()
        .all(|s| s.min_derivative >= 1.0 / alpha - 1e-6 && s.max_derivative <= alpha + 1e-6);
    let residual = (0..10_000)
        .map(|i| {
            let x = i as f64 / 9_999.0;
            (compose_factors(&factors, x) - f.eval(x)).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        factors.len() == 2 && within && residual < 1e-8,
        format!(
            "{} factors, derivative ranges within α: {within}, residual {residual:.2e}",
            factors.len()
        ),
    )
}

fn spiral() -> Outcome {
    let scan = spiral_distortion_scan(1.5, Annulus::default(), 1024).unwrap();
    let b = spiral_bound(1.5, 1.1).unwrap();
    let ok = (1.99..=2.01).contains(&scan)
        && b.lower_bound_n_ceil >= 4
        && (b.lower_bound_n - 3.273).abs() <= 1e-3;
    outcome(
        ok,
        format!(
            "scan {scan:.6}, lower bound {:.6} → N ≥ {}",
            b.lower_bound_n, b.lower_bound_n_ceil
        ),
    )
}

fn transfer() -> Outcome {
    let eps = 0.1;
    let brute = (0..=1_000_000)
        .map(|i| {
            let r = 100.0 * i as f64 / 1e6;
            eps * (2.0 * r + eps) / (1.0 + r * r)
        })
        .fold(0.0, f64::max);
    let closed = spherical_transfer(eps).unwrap();
    let zero = spherical_transfer(0.0).unwrap();
    outcome(
        (closed - brute).abs() < 1e-9 && zero == 0.0,
        format!("ε′(0.1) = {closed:.12} vs grid {brute:.12}, ε′(0) = {zero}"),
    )
}

fn random_rotation(n: usize, seed: u64) -> Rotation {
    let mut r = sampling::rng(seed);
    let mut rot = Rotation::identity(n);
    for i in 0..=n {
        for j in (i + 1)..=n {
            let a = 2.0 * std::f64::consts::PI * rand::Rng::random::<f64>(&mut r);
            rot = Rotation::coordinate_plane(n, i, j, a).unwrap().after(&rot);
        }
    }
    Rotation::from_matrix(rot.matrix().clone()).unwrap()
}

fn geometry() -> Outcome {
    let n = 3;
    let region = Region::Union(vec![
        Region::Sphere { dim: n },
        Region::Ball {
            center: Vector::zeros(n),
            radius: 3.0,
        },
    ]);
    let xs = sampling::sample_points(&region, 10_000, 1);
    let ys = sampling::sample_points(&region, 10_000, 2);
    let chordal = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            ((embed_unit_sphere(x) - embed_unit_sphere(y)).norm() - 2.0 * chi_dist(x, y)).abs()
        })
        .fold(0.0, f64::max);

    let mut isometry: f64 = 0.0;
    for k in 0..10 {
        let r = random_rotation(n, 100 + k);
        for (x, y) in xs.iter().zip(&ys).take(1000) {
            isometry = isometry.max((chi_dist(&r.apply(x), &r.apply(y)) - chi_dist(x, y)).abs());
        }
    }

    let mut contained = true;
    let mut rng = sampling::rng(3);
    for k in 0..5 {
        let center = project_random(&mut rng, n);
        let ball = SphericalBall::new(center, 0.15 + 0.15 * k as f64).unwrap();
        let g = ball_normalizer(&ball).unwrap();
        let small = SphericalBall::from_euclidean_at_origin(n, 1.0 / 3.0).unwrap();
        for x in sampling::sample_points(
            &Region::Ball {
                center: Vector::zeros(n),
                radius: 1.0 / 3.0,
            },
            1000,
            10 + k,
        ) {
            contained &= ball.contains(&g.apply(&x), 1e-12);
        }
        // Candidates near the embedded centre, pushed radially onto the sphere.
        let c = embed_unit_sphere(&ball.center);
        let mut inside: Vec<Point> = Vec::new();
        while inside.len() < 1000 {
            let v = &c + sampling::uniform_ball(&mut rng, &Vector::zeros(n + 1), 2.5 * ball.radius);
            let p = project_chart(&(&v / v.norm()));
            if ball.contains(&p, 0.0) {
                inside.push(p);
            }
        }
        for y in &inside {
            contained &= small.contains(&g.apply_inverse(y), 1e-12);
        }
    }
    outcome(
        chordal < 1e-12 && isometry < 1e-10 && contained,
        format!("chordal − 2χ {chordal:.2e}, rotation χ error {isometry:.2e}, normalizer containment {contained}"),
    )
}

fn project_random(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Point {
    project_chart(&sampling::uniform_sphere_point(rng, n + 1))
}

fn index_convention() -> Outcome {
    let f = twist(2, 0.3);
    let wrong = propagate_including_zero(&f).unwrap();
    let right = propagate(&f).unwrap();
    let pts = finite_points(
        &Region::Ball {
            center: Vector::zeros(2),
            radius: 1.0 / 3.0,
        },
        1000,
        4,
    );
    let mut to_identity: f64 = 0.0;
    let mut from_f: f64 = 0.0;
    let mut right_err: f64 = 0.0;
    for x in &pts {
        let h1 = wrong.h_eval(1.0, x).unwrap();
        to_identity = to_identity.max((&h1 - x).norm());
        from_f = from_f.max((&h1 - f.eval(x)).norm());
        right_err = right_err.max((right.h_eval(1.0, x).unwrap() - f.eval(x)).norm());
    }
    outcome(
        to_identity < 1e-8 && from_f > 1e-3 && right_err < 1e-8,
        format!(
            "m = 0 variant: |h₁ − id| {to_identity:.2e}, |h₁ − f| {from_f:.3}; m ≥ 1: |h₁ − f| {right_err:.2e}"
        ),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() {
    let mut results: Vec<(&str, Outcome, Duration, Option<Duration>)> = Vec::new();

    let (o, d) = timed(endpoint_identities);
    results.push(("1 endpoint identities", o, d, Some(Duration::from_secs(10))));

    let (sweep, d) = timed(sweep_all);
    results.push((
        "2 displacement bound",
        outcome(
            sweep.disp_slack <= 1e-9,
            format!("max(sampled − T(T+1)|s−t|) = {:.3e}", sweep.disp_slack),
        ),
        d,
        Some(Duration::from_secs(30)),
    ));
    results.push((
        "3 derivative bound",
        outcome(
            sweep.deriv_slack <= 1e-8,
            format!(
                "max(sampled − T³η + Tη((T+1)δ)) = {:.3e}",
                sweep.deriv_slack
            ),
        ),
        d,
        Some(Duration::from_secs(60)),
    ));

    let (o, d) = timed(end_to_end);
    results.push((
        "4 end-to-end factorization",
        o,
        d,
        Some(Duration::from_secs(300)),
    ));
    let (o, d) = timed(onedim);
    results.push(("5 interval factorization", o, d, None));
    let (o, d) = timed(spiral);
    results.push(("6 spiral constants", o, d, None));
    let (o, d) = timed(transfer);
    results.push(("7 spherical transfer", o, d, None));
    let (o, d) = timed(geometry);
    results.push(("8 geometry identities", o, d, None));
    let (o, d) = timed(index_convention);
    results.push(("9 index convention", o, d, None));

    let mut all = true;
    for (name, o, d, limit) in &results {
        let in_time = limit.is_none_or(|l| *d < l);
        let passed = o.passed && in_time;
        all &= passed;
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "[{}] criterion {name}: {} ({:.2}s{budget})",
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            d.as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}

//! Factor-count bounds for the logarithmic spiral `s_k(z) = z e^{ik log|z|}`.
//!
//! `s_k` is `L`-bi-Lipschitz with `|k| = L − 1/L`, yet any factorization into
//! `α`-bi-Lipschitz maps needs at least `|k| (α² − 1)^{−1/2}` factors, while
//! an interval map of distortion `L` splits into fewer than `log_α L + 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::diffeo::{make_spiral, SpiralParams};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::Vector;
use crate::sampling::{self, Region};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub k: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub alpha: f64,
    /// `|k| (α² − 1)^{−1/2}`.
    pub lower_bound_n: f64,
    /// Smallest integer count compatible with the lower bound.
    pub lower_bound_n_ceil: u64,
    /// `⌈log_α L⌉`, the count achieved for interval maps of distortion `L`.
    pub onedim_upper_n: u64,
    pub notes: String,
}

/// Distortion `L ≥ 1` with `|k| = L − 1/L`.
pub fn spiral_distortion(k: f64) -> f64 {
    SpiralParams { k }.distortion()
}

pub fn spiral_bound(k: f64, alpha: f64) -> Result<BoundReport> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "α must exceed 1, got {alpha}"
        )));
    }
    if !k.is_finite() {
        return Err(Error::InvalidParameter("spiral rate must be finite".into()));
    }
    let l = spiral_distortion(k);
    let lower = k.abs() / (alpha * alpha - 1.0).sqrt();
    let upper = (l.ln() / alpha.ln()).ceil().max(0.0);
    let notes = if k == 0.0 {
        "s_0 is the identity; no factors are needed".to_string()
    } else {
        format!(
            "s_k is {l}-bi-Lipschitz on the plane but needs at least {} factors of distortion {alpha}; \
             an interval map of the same distortion needs {upper}",
            lower.ceil()
        )
    };
    Ok(BoundReport {
        k,
        l,
        alpha,
        lower_bound_n: lower,
        lower_bound_n_ceil: lower.ceil() as u64,
        onedim_upper_n: upper as u64,
        notes,
    })
}

/// Radii `inner ≤ |z| ≤ outer` of the scanned annulus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Annulus {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Annulus {
    fn default() -> Self {
        Annulus {
            inner: 0.5,
            outer: 2.0,
        }
    }
}

const SCAN_SEED: u64 = 0x7370_6972;

/// Largest of `|Df v|` and `1/|Df v|` over `samples` points of the annulus
/// and `samples` unit directions `v` at angles `πi/samples`.
///
/// Point sets are prefix-stable and directions for `2m` samples contain those
/// for `m`, so along dyadic resolutions the estimate is non-decreasing; it
/// never exceeds `L` because `Df` has singular values `L` and `1/L`.
pub fn spiral_distortion_scan(k: f64, annulus: Annulus, samples: usize) -> Result<f64> {
    if !(annulus.inner > 0.0) || !(annulus.outer >= annulus.inner) {
        return Err(Error::InvalidParameter(format!(
            "annulus must exclude 0, got [{}, {}]",
            annulus.inner, annulus.outer
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "scan needs at least one sample".into(),
        ));
    }
    let f = make_spiral(k)?;
    let region = Region::Annulus {
        dim: 2,
        inner: annulus.inner,
        outer: annulus.outer,
    };
    let points = sampling::sample_points(&region, samples, SCAN_SEED);
    let dirs: Vec<Vector> = (0..samples)
        .map(|i| {
            let a = std::f64::consts::PI * i as f64 / samples as f64;
            Vector::from_vec(vec![a.cos(), a.sin()])
        })
        .collect();
    let best = points
        .par_iter()
        .filter_map(|p| match p {
            Point::Finite(x) => Some(f.jacobian(x)),
            Point::Infinity(_) => None,
        })
        .map(|j| {
            dirs.iter().fold(1.0f64, |acc, v| {
                let s = (&j * v).norm() / v.norm();
                acc.max(s).max(1.0 / s)
            })
        })
        .reduce(|| 1.0, f64::max);
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub resolution: usize,
    pub estimate: f64,
}

/// Scan estimates at resolutions `2, 4, …` up to `max_samples`.
pub fn spiral_scan_table(k: f64, annulus: Annulus, max_samples: usize) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::new();
    let mut m = 2;
    while m <= max_samples.max(2) {
        rows.push(ScanRow {
            resolution: m,
            estimate: spiral_distortion_scan(k, annulus, m)?,
        });
        m *= 2;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bound_for_k_one_and_a_half() {
        let b = spiral_bound(1.5, 1.1).unwrap();
        assert!((b.l - 2.0).abs() < 1e-15);
        // 1.5 / √0.21, evaluated independently.
        assert!((b.lower_bound_n - 3.2732683535398843).abs() < 1e-12);
        assert_eq!(b.lower_bound_n_ceil, 4);
        // log_1.1 2 ≈ 7.27.
        assert_eq!(b.onedim_upper_n, 8);
    }

    #[test]
    fn bound_limit_at_zero() {
        let b = spiral_bound(0.0, 1.5).unwrap();
        assert_eq!(b.l, 1.0);
        assert_eq!(b.lower_bound_n, 0.0);
        assert_eq!(b.onedim_upper_n, 0);
        let small = spiral_bound(1e-9, 1.5).unwrap();
        assert!(small.l - 1.0 < 1e-9 && small.lower_bound_n < 1e-8);
    }

    #[test]
    fn rejects_alpha_at_most_one() {
        assert!(spiral_bound(1.0, 1.0).is_err());
        assert!(spiral_bound(1.0, 0.5).is_err());
    }

    #[test]
    fn scan_values() {
        let a = Annulus::default();
        assert_eq!(spiral_distortion_scan(0.0, a, 64).unwrap(), 1.0);
        let e = spiral_distortion_scan(1.5, a, 256).unwrap();
        assert!((e - 2.0).abs() < 0.01, "{e}");
        let e = spiral_distortion_scan(3.75, a, 256).unwrap();
        assert!((e - 4.0).abs() < 0.02, "{e}");
        assert!(spiral_distortion_scan(
            1.0,
            Annulus {
                inner: 0.0,
                outer: 1.0
            },
            8
        )
        .is_err());
    }

    #[test]
    fn scan_is_monotone_and_below_l() {
        let rows = spiral_scan_table(1.5, Annulus::default(), 512).unwrap();
        assert_eq!(rows.len(), 9);
        for w in rows.windows(2) {
            assert!(w[1].estimate >= w[0].estimate);
        }
        for r in &rows {
            assert!(r.estimate <= 2.0 + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn distortion_round_trip(k in -50.0f64..50.0) {
            let l = spiral_distortion(k);
            prop_assert!(l >= 1.0);
            prop_assert!((l - 1.0 / l - k.abs()).abs() < 1e-12 * l.max(1.0));
        }

        #[test]
        fn lower_bound_scales(k in 0.01f64..20.0, alpha in 1.01f64..3.0) {
            let s = (alpha * alpha - 1.0).sqrt() / 2.0;
            let half = (1.0 + s * s).sqrt();
            let a = spiral_bound(k, alpha).unwrap().lower_bound_n;
            let b = spiral_bound(k, half).unwrap().lower_bound_n;
            prop_assert!((b - 2.0 * a).abs() < 1e-12 * b.max(1.0));
        }
    }
}

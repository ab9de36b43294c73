//! The radial cutoff profile shared by the catalog maps.
//!
//! `β(r) = 1 − S((r − inner)/(outer − inner))` with the quintic smoothstep
//! `S(u) = 10u³ − 15u⁴ + 6u⁵`, clamped to `[0, 1]`. `S` is C² with
//! `S′ = S″ = 0` at both ends, so `β` is 1 on `[0, inner]`, 0 on
//! `[outer, ∞)` and C² everywhere.

/// `sup |S′| = S′(1/2) = 15/8`.
pub const SUP_S1: f64 = 15.0 / 8.0;
/// `sup |S″| = 10/√3`, attained at `u = (1 ± 1/√3)/2`.
pub const SUP_S2: f64 = 5.773_502_691_896_258;
/// `sup |S‴| = 60`, attained at the endpoints.
pub const SUP_S3: f64 = 60.0;

pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

pub fn smoothstep_d1(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    let v = u * (1.0 - u);
    30.0 * v * v
}

pub fn smoothstep_d2(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profile {
    pub inner: f64,
    pub outer: f64,
}

impl Profile {
    pub fn width(&self) -> f64 {
        self.outer - self.inner
    }

    fn u(&self, r: f64) -> f64 {
        (r - self.inner) / self.width()
    }

    pub fn value(&self, r: f64) -> f64 {
        1.0 - smoothstep(self.u(r))
    }

    pub fn d1(&self, r: f64) -> f64 {
        -smoothstep_d1(self.u(r)) / self.width()
    }

    pub fn d2(&self, r: f64) -> f64 {
        let w = self.width();
        -smoothstep_d2(self.u(r)) / (w * w)
    }

    /// `sup_r |β′(r)| · r`, in closed form.
    ///
    /// With `k = inner/width`, this is `sup_u S′(u)(k + u)`, maximized where
    /// `5u² − (3 − 4k)u − 2k = 0`.
    pub fn sup_radial_slope(&self) -> f64 {
        let k = self.inner / self.width();
        let b = 3.0 - 4.0 * k;
        let u = (b + (b * b + 40.0 * k).sqrt()) / 10.0;
        smoothstep_d1(u) * (k + u)
    }
}

/// Upper bound on `sup f` over `[lo, hi]` from `n` equispaced samples and a
/// Lipschitz constant for `f`.
pub fn certified_sup(f: impl Fn(f64) -> f64, lo: f64, hi: f64, lipschitz: f64, n: usize) -> f64 {
    assert!(n >= 2 && hi > lo);
    let h = (hi - lo) / (n - 1) as f64;
    let max = (0..n)
        .map(|i| f(lo + h * i as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    max + lipschitz * h / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_max(f: impl Fn(f64) -> f64) -> f64 {
        (0..=200_000)
            .map(|i| f(i as f64 / 200_000.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn derivative_suprema_match_dense_grid() {
        assert!((grid_max(smoothstep_d1) - SUP_S1).abs() < 1e-9);
        assert!((grid_max(|u| smoothstep_d2(u).abs()) - SUP_S2).abs() < 1e-8);
        let s3 = |u: f64| (60.0 * (6.0 * u * u - 6.0 * u + 1.0)).abs();
        assert!((grid_max(s3) - SUP_S3).abs() < 1e-9);
    }

    #[test]
    fn profile_endpoints_and_smoothness() {
        let p = Profile {
            inner: 0.1,
            outer: 0.3,
        };
        assert_eq!(p.value(0.05), 1.0);
        assert_eq!(p.value(0.3), 0.0);
        assert_eq!(p.value(1.0), 0.0);
        assert_eq!(p.d1(0.1), 0.0);
        assert_eq!(p.d1(0.3), 0.0);
        assert_eq!(p.d2(0.3), 0.0);
        // β′ against central differences
        for r in [0.12, 0.2, 0.27] {
            let h = 1e-6;
            let fd = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
            assert!((fd - p.d1(r)).abs() < 1e-6);
            let fd2 = (p.d1(r + h) - p.d1(r - h)) / (2.0 * h);
            assert!((fd2 - p.d2(r)).abs() < 1e-4);
        }
    }

    #[test]
    fn radial_slope_closed_form_matches_grid() {
        for (inner, outer) in [
            (0.0, 1.0 / 3.0),
            (0.05, 1.0 / 3.0),
            (1.0 / 6.0, 1.0 / 3.0),
            (0.3, 0.31),
        ] {
            let p = Profile { inner, outer };
            let grid = grid_max(|t| {
                let r = inner + t * (outer - inner);
                p.d1(r).abs() * r
            });
            assert!(
                (p.sup_radial_slope() - grid).abs() < 1e-8 * grid.max(1.0),
                "{inner} {outer}"
            );
        }
    }

    #[test]
    fn certified_sup_dominates() {
        let f = |x: f64| (3.0 * x).sin();
        let bound = certified_sup(f, 0.0, 1.0, 3.0, 50);
        assert!(bound >= 1.0);
        assert!(bound < 1.05);
    }
}

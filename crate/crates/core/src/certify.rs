//! Distortion and displacement certificates in the Euclidean and chordal metrics.
//!
//! Sampled pair ratios give lower bounds on the isometric distortion and are
//! reported as diagnostics. Upper bounds come from derivative information:
//! a Jacobian grid with Lipschitz slack for a single map, or the analytic path
//! bounds plus the Euclidean→chordal transfer for path slices.

use rayon::prelude::*;
use serde::Serialize;

use crate::diffeo::{SmoothMap, Support};
use crate::error::{Error, Result};
use crate::geometry::{chi_dist, MobiusMap, Point, Rotation};
use crate::linalg::{self, Vector};
use crate::sampling::{self, PairSampler, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Spherical,
}

impl Metric {
    /// Distance between two points; `None` for `∞` in the Euclidean metric.
    pub fn dist(&self, x: &Point, y: &Point) -> Option<f64> {
        match self {
            Metric::Spherical => Some(chi_dist(x, y)),
            Metric::Euclidean => Some((x.as_finite()? - y.as_finite()?).norm()),
        }
    }
}

/// A map of `Sⁿ` that can be sampled.
pub trait PointMap: Sync {
    fn apply(&self, x: &Point) -> Result<Point>;
}

impl PointMap for SmoothMap {
    fn apply(&self, x: &Point) -> Result<Point> {
        Ok(self.eval_point(x))
    }
}

impl PointMap for MobiusMap {
    fn apply(&self, x: &Point) -> Result<Point> {
        Ok(MobiusMap::apply(self, x))
    }
}

impl PointMap for Rotation {
    fn apply(&self, x: &Point) -> Result<Point> {
        Ok(Rotation::apply(self, x))
    }
}

/// Adapter for closures.
pub struct FnMap<F>(pub F);

impl<F: Fn(&Point) -> Result<Point> + Sync> PointMap for FnMap<F> {
    fn apply(&self, x: &Point) -> Result<Point> {
        (self.0)(x)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DistortionCertificate {
    pub metric: Metric,
    /// Sampled `max(ratio, 1/ratio)` over point pairs; a lower bound.
    pub l_lower: f64,
    /// Certified upper bound on the isometric distortion, when derivable.
    pub l_upper: Option<f64>,
    /// Sampled `sup dist(f(x), x)`.
    pub max_disp: f64,
    /// Certified upper bound on the displacement, when derivable.
    pub disp_upper: Option<f64>,
    pub pairs: usize,
    /// Coincident or non-finite pairs that were left out.
    pub skipped: usize,
    pub seed: u64,
}

impl DistortionCertificate {
    /// Whether the certified bounds meet `1 + eps` and `eps`.
    pub fn passes(&self, eps: f64) -> bool {
        match (self.l_upper, self.disp_upper) {
            (Some(l), Some(d)) => {
                l <= 1.0 + eps && d <= eps && self.l_lower <= l * (1.0 + 1e-9) + 1e-12
            }
            _ => false,
        }
    }
}

/// Samples distance ratios of `f` over the pairs drawn by `sampler`.
///
/// The reduction is a maximum, so results do not depend on evaluation order
/// and grow monotonically with the pair count for a fixed seed.
pub fn estimate_distortion(
    f: &dyn PointMap,
    sampler: &PairSampler,
    metric: Metric,
) -> Result<DistortionCertificate> {
    let pairs = sampler.generate();
    let stats: Vec<(f64, f64, bool)> = pairs
        .par_iter()
        .map(|(x, y)| {
            let fx = f.apply(x)?;
            let fy = f.apply(y)?;
            let disp = [metric.dist(&fx, x), metric.dist(&fy, y)]
                .into_iter()
                .flatten()
                .fold(0.0, f64::max);
            match (metric.dist(x, y), metric.dist(&fx, &fy)) {
                (Some(d), Some(fd)) if d > 0.0 && fd > 0.0 => {
                    let r = fd / d;
                    Ok((r.max(1.0 / r), disp, false))
                }
                _ => Ok((1.0, disp, true)),
            }
        })
        .collect::<Result<_>>()?;
    let l_lower = stats.iter().map(|s| s.0).fold(1.0, f64::max);
    let max_disp = stats.iter().map(|s| s.1).fold(0.0, f64::max);
    let skipped = stats.iter().filter(|s| s.2).count();
    Ok(DistortionCertificate {
        metric,
        l_lower,
        l_upper: None,
        max_disp,
        disp_upper: None,
        pairs: pairs.len(),
        skipped,
        seed: sampler.seed,
    })
}

/// Certified Euclidean distortion of a ball-supported map:
/// `max(sup σ_max(Df), sup 1/σ_min(Df))` over a grid of `per_axis` nodes per
/// axis on the bounding box of the support, widened by `C·ρ` where `C` is the
/// derivative modulus slope and `ρ` the grid covering radius. Singular values
/// are 1-Lipschitz in the matrix, so the widening covers every point.
///
/// Returns `None` for unbounded supports and when the slack swallows `σ_min`.
pub fn euclidean_upper_bound(f: &SmoothMap, per_axis: usize) -> Option<f64> {
    let (center, radius) = match f.support() {
        Support::Empty => return Some(1.0),
        Support::Unbounded => return None,
        Support::Ball { center, radius } => (center.clone(), *radius),
    };
    let n = f.dim();
    let per_axis = per_axis.max(2);
    let h = 2.0 * radius / (per_axis - 1) as f64;
    let rho = h * (n as f64).sqrt() / 2.0;
    let slack = f.analytic_eta_slope() * rho;
    let total = per_axis.pow(n as u32);
    let (smax, smin) = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = center.clone();
            for k in 0..n {
                x[k] += -radius + h * (idx % per_axis) as f64;
                idx /= per_axis;
            }
            linalg::singular_range(&f.jacobian(&x))
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    let lo = smin - slack;
    (lo > 0.0).then(|| (smax + slack).max(1.0 / lo).max(1.0))
}

/// `ε′(ε) = sup_{r≥0} ε(2r + ε)/(1 + r²)`, attained at `r* = (√(ε²+4) − ε)/2`,
/// where it equals `ε/r*`.
///
/// A map moving points at most `ε` in the Euclidean metric and fixing `∞`
/// satisfies `1/(1+ε′) ≤ (1+|x|²)/(1+|g(x)|²) ≤ 1+ε′`.
pub fn spherical_transfer(eps: f64) -> Result<f64> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ε must be a finite nonnegative number, got {eps}"
        )));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    // ε/r* with 1/r* = (√(ε²+4) + ε)/2, which avoids cancellation.
    Ok(eps * ((eps * eps + 4.0).sqrt() + eps) / 2.0)
}

/// `ξ = (1 + ε_L)(1 + ε′(δ)) − 1`: a map that is `(1+ε_L)`-bi-Lipschitz in `d`
/// and moves points at most `δ` is `(1+ξ)`-bi-Lipschitz in `χ`.
pub fn xi_split(eps_distortion: f64, displacement: f64) -> Result<f64> {
    if !(eps_distortion >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ε must be nonnegative, got {eps_distortion}"
        )));
    }
    Ok((1.0 + eps_distortion) * (1.0 + spherical_transfer(displacement)?) - 1.0)
}

/// `ξ(ε) = (1 + ε)(1 + ε′(ε)) − 1`.
pub fn xi(eps: f64) -> Result<f64> {
    xi_split(eps, eps)
}

/// Certified chordal bounds for a conjugated path slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SliceBound {
    /// `‖Dφ − I‖` bound for the chart slice `φ`.
    pub kappa: f64,
    /// Euclidean distortion `1/(1 − κ)` minus one.
    pub eps_euclidean: f64,
    /// Euclidean displacement after the affine part of the conjugation.
    pub disp_euclidean: f64,
    pub eps_prime: f64,
    /// Chordal distortion bound minus one.
    pub xi: f64,
    /// Chordal displacement bound.
    pub disp_chi: f64,
}

/// Transfers chart bounds of a slice `φ` with `‖Dφ − I‖ ≤ κ` and displacement
/// `≤ disp` through a conjugation `g = C ∘ B` whose affine part scales by
/// `scale`. The similarity keeps distortion and multiplies displacement by
/// `scale`; the rotation preserves `χ`; `χ ≤ d` bounds the chordal displacement.
///
/// Returns `None` when `κ ≥ 1`.
pub fn slice_bound(kappa: f64, disp: f64, scale: f64) -> Option<SliceBound> {
    if !(kappa < 1.0) || !(kappa >= 0.0) {
        return None;
    }
    let eps_euclidean = kappa / (1.0 - kappa);
    let disp_euclidean = scale * disp;
    let eps_prime = spherical_transfer(disp_euclidean).ok()?;
    Some(SliceBound {
        kappa,
        eps_euclidean,
        disp_euclidean,
        eps_prime,
        xi: (1.0 + eps_euclidean) * (1.0 + eps_prime) - 1.0,
        disp_chi: disp_euclidean,
    })
}

/// Outcome of checking a conjugated slice `g ∘ h ∘ g⁻¹` in `χ`.
#[derive(Clone, Debug, Serialize)]
pub struct ConjugationReport {
    pub certificate: DistortionCertificate,
    /// `max |χ(C f C⁻¹ x, x) − χ(f C⁻¹x, C⁻¹x)|` over samples.
    pub isometry_error: f64,
    /// `max |d(Bx, By) − λ d(x, y)| / (λ d(x, y))` over samples.
    pub affine_error: f64,
    /// Ratio of the conjugated to the original Euclidean displacement.
    pub displacement_scale: Option<f64>,
    pub passed: bool,
}

/// Samples `g ∘ h ∘ g⁻¹` in `χ` and checks the two conjugation steps on the
/// word's primitives: the rotation `C` preserves chordal displacement and the
/// similarity `B` scales Euclidean distances by exactly `λ`.
pub fn conjugation_check(
    g: &MobiusMap,
    h: &dyn PointMap,
    region: &Region,
    pairs: usize,
    seed: u64,
) -> Result<ConjugationReport> {
    let split = g.affine_rotation_split().ok_or_else(|| {
        Error::InvalidParameter("conjugating word is not of the form C ∘ B".into())
    })?;
    let conj = FnMap(|x: &Point| Ok(g.apply(&h.apply(&g.apply_inverse(x))?)));
    let sampler = PairSampler::new(
        Region::Pushforward {
            base: Box::new(region.clone()),
            map: g.clone(),
        },
        pairs,
        seed,
    )
    .with_far_points();
    let certificate = estimate_distortion(&conj, &sampler, Metric::Spherical)?;

    let c = &split.rotation;
    let b = |x: &Vector| x * split.scale + &split.shift;
    let pts = sampling::sample_points(region, pairs.max(2), seed ^ 0x5bd1_e995);
    let mut isometry_error = 0.0_f64;
    let mut affine_error = 0.0_f64;
    let mut disp_ratio: Option<f64> = None;
    for w in pts.windows(2) {
        // Isometry step at x = C(z): χ(C h z, C z) = χ(h z, z).
        let z = &w[0];
        let hz = h.apply(z)?;
        let lhs = chi_dist(&c.apply(&hz), &c.apply(z));
        isometry_error = isometry_error.max((lhs - chi_dist(&hz, z)).abs());
        if let (Some(x), Some(y)) = (w[0].as_finite(), w[1].as_finite()) {
            let d = (x - y).norm();
            if d > 0.0 {
                let rel = ((b(x) - b(y)).norm() - split.scale * d).abs() / (split.scale * d);
                affine_error = affine_error.max(rel);
            }
            let hx = h.apply(&w[0])?;
            if let Some(hx) = hx.as_finite() {
                let d0 = (hx - x).norm();
                if d0 > 1e-6 {
                    // B h B⁻¹ at B(x) moves it by |B(hx) − B(x)|.
                    let r = (b(hx) - b(x)).norm() / d0;
                    disp_ratio = Some(disp_ratio.map_or(r, |m: f64| m.max(r)));
                }
            }
        }
    }
    let passed = isometry_error <= 1e-10 && affine_error <= 1e-10;
    Ok(ConjugationReport {
        certificate,
        isometry_error,
        affine_error,
        displacement_scale: disp_ratio,
        passed,
    })
}

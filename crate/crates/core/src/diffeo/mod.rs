//! The C¹ diffeomorphism calculus in the Euclidean chart.
//!
//! A [`SmoothMap`] bundles an evaluator with its analytic Jacobian, an
//! inversion strategy, a support descriptor and two certified constants:
//!
//! - `analytic_t ≥ 1` bounds `‖D_x f‖` and `‖D_y f⁻¹‖` everywhere;
//! - `analytic_eta_slope = C` gives `‖D_x f − D_y f‖ ≤ C |x − y|`, and the
//!   same for `f⁻¹`.
//!
//! Finite differences appear only in [`validate_jacobian`].

mod catalog;
mod newton;
pub mod profile;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{self, Matrix, Vector};
use crate::sampling::{self, Region};

pub use catalog::{
    make_bump_push, make_identity, make_spiral, make_twist, BumpPush, SpiralParams, Twist,
};
pub use newton::{newton_invert, NewtonOptions, NewtonSolution};

/// Evaluation and Jacobian of a map of `ℝⁿ`.
pub trait ChartMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> Vector;
    fn jacobian(&self, x: &Vector) -> Matrix;
}

/// Region outside of which a map is the identity.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    /// The identity map.
    Empty,
    /// Closed Euclidean ball; the map is the identity on its complement.
    Ball { center: Vector, radius: f64 },
    /// No compact support (e.g. the logarithmic spiral).
    Unbounded,
}

impl Support {
    /// Whether `x` lies strictly outside the support, where the map is exactly the identity.
    pub fn excludes(&self, x: &Vector) -> bool {
        match self {
            Support::Empty => true,
            Support::Ball { center, radius } => (x - center).norm() >= *radius,
            Support::Unbounded => false,
        }
    }

    /// Smallest ball descriptor containing both supports.
    pub fn union(&self, other: &Support) -> Support {
        match (self, other) {
            (Support::Empty, s) | (s, Support::Empty) => s.clone(),
            (Support::Unbounded, _) | (_, Support::Unbounded) => Support::Unbounded,
            (
                Support::Ball {
                    center: c1,
                    radius: r1,
                },
                Support::Ball {
                    center: c2,
                    radius: r2,
                },
            ) => {
                let d = (c2 - c1).norm();
                if d + r2 <= *r1 {
                    return self.clone();
                }
                if d + r1 <= *r2 {
                    return other.clone();
                }
                let radius = (d + r1 + r2) / 2.0;
                let center = c1 + (c2 - c1) * ((radius - r1) / d);
                Support::Ball { center, radius }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Inverse {
    Exact(Arc<dyn ChartMap>),
    Newton,
    /// `(outer ∘ inner)⁻¹ = inner⁻¹ ∘ outer⁻¹`.
    Composite {
        outer: Box<SmoothMap>,
        inner: Box<SmoothMap>,
    },
    /// Inverse of `x ↦ μ f(x/μ)`.
    Scaled {
        base: Box<SmoothMap>,
        mu: f64,
    },
}

/// A C¹ diffeomorphism of `ℝⁿ` (fixing `∞` when lifted to `Sⁿ`).
#[derive(Clone, Debug)]
pub struct SmoothMap {
    name: String,
    map: Arc<dyn ChartMap>,
    inverse: Inverse,
    support: Support,
    analytic_t: f64,
    analytic_eta_slope: f64,
    newton: NewtonOptions,
}

impl SmoothMap {
    fn with_exact_inverse(
        name: impl Into<String>,
        map: Arc<dyn ChartMap>,
        inverse: Arc<dyn ChartMap>,
        support: Support,
        analytic_t: f64,
        analytic_eta_slope: f64,
    ) -> SmoothMap {
        SmoothMap {
            name: name.into(),
            map,
            inverse: Inverse::Exact(inverse),
            support,
            analytic_t,
            analytic_eta_slope,
            newton: NewtonOptions::default(),
        }
    }

    fn with_newton_inverse(
        name: impl Into<String>,
        map: Arc<dyn ChartMap>,
        support: Support,
        analytic_t: f64,
        analytic_eta_slope: f64,
    ) -> SmoothMap {
        SmoothMap {
            name: name.into(),
            map,
            inverse: Inverse::Newton,
            support,
            analytic_t,
            analytic_eta_slope,
            newton: NewtonOptions::default(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn analytic_t(&self) -> f64 {
        self.analytic_t
    }

    pub fn analytic_eta_slope(&self) -> f64 {
        self.analytic_eta_slope
    }

    pub fn newton_options(&self) -> &NewtonOptions {
        &self.newton
    }

    pub fn has_exact_inverse(&self) -> bool {
        match &self.inverse {
            Inverse::Exact(_) => true,
            Inverse::Newton => false,
            Inverse::Composite { outer, inner } => {
                outer.has_exact_inverse() && inner.has_exact_inverse()
            }
            Inverse::Scaled { base, .. } => base.has_exact_inverse(),
        }
    }

    /// Same map with a different Newton policy for inversion.
    pub fn with_newton(mut self, opts: NewtonOptions) -> SmoothMap {
        self.newton = opts;
        self
    }

    /// Same map with replaced analytic constants. Used to build fixtures whose
    /// claimed bounds are wrong, which [`validate_jacobian`] must reject.
    pub fn with_claimed_bounds(mut self, analytic_t: f64, analytic_eta_slope: f64) -> SmoothMap {
        self.analytic_t = analytic_t;
        self.analytic_eta_slope = analytic_eta_slope;
        self
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        if self.support.excludes(x) {
            return x.clone();
        }
        self.map.eval(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        if self.support.excludes(x) {
            let n = x.len();
            return Matrix::identity(n, n);
        }
        self.map.jacobian(x)
    }

    pub fn eval_point(&self, x: &Point) -> Point {
        match x {
            Point::Finite(v) => Point::Finite(self.eval(v)),
            Point::Infinity(n) => Point::Infinity(*n),
        }
    }

    /// `f⁻¹(y)`. A map supported on a ball sends the ball onto itself, so
    /// points outside the support are returned unchanged.
    pub fn invert(&self, y: &Vector) -> Result<Vector> {
        if self.support.excludes(y) {
            return Ok(y.clone());
        }
        match &self.inverse {
            Inverse::Exact(inv) => Ok(inv.eval(y)),
            Inverse::Newton => newton_invert(self, y, &self.newton).map(|s| s.x),
            Inverse::Composite { outer, inner } => inner.invert(&outer.invert(y)?),
            Inverse::Scaled { base, mu } => Ok(base.invert(&(y / *mu))? * *mu),
        }
    }

    /// `D_y f⁻¹ = (D_{f⁻¹(y)} f)⁻¹`.
    pub fn inverse_jacobian(&self, y: &Vector) -> Result<Matrix> {
        let x = self.invert(y)?;
        let j = self.jacobian(&x);
        linalg::inverse(&j).ok_or_else(|| Error::Singular(format!("{:?}", x.as_slice())))
    }

    /// The inverse as a smooth map with the same analytic constants.
    pub fn inverse(&self) -> SmoothMap {
        let inv_map: Arc<dyn ChartMap> = match &self.inverse {
            Inverse::Exact(inv) => inv.clone(),
            _ => Arc::new(InverseMap {
                forward: self.clone(),
            }),
        };
        SmoothMap {
            name: format!("inverse({})", self.name),
            map: inv_map,
            inverse: Inverse::Exact(self.map.clone()),
            support: self.support.clone(),
            analytic_t: self.analytic_t,
            analytic_eta_slope: self.analytic_eta_slope,
            newton: self.newton.clone(),
        }
    }

    /// `x ↦ μ f(x/μ)`: conjugation by the similarity `x ↦ μx`.
    /// `T` is unchanged and the derivative modulus scales by `1/μ`.
    pub fn conjugate_by_scale(&self, mu: f64) -> Result<SmoothMap> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive, got {mu}"
            )));
        }
        let support = match &self.support {
            Support::Ball { center, radius } => Support::Ball {
                center: center * mu,
                radius: radius * mu,
            },
            s => s.clone(),
        };
        Ok(SmoothMap {
            name: format!("scaled({}, {mu})", self.name),
            map: Arc::new(Scaled {
                base: self.clone(),
                mu,
            }),
            inverse: Inverse::Scaled {
                base: Box::new(self.clone()),
                mu,
            },
            support,
            analytic_t: self.analytic_t,
            analytic_eta_slope: self.analytic_eta_slope / mu,
            newton: self.newton.clone(),
        })
    }
}

/// `f ∘ g`. The support is the smallest ball containing both supports,
/// `T` multiplies, and the derivative modulus follows the product rule
/// `C_{f∘g} ≤ C_f T_g² + T_f C_g`, taken for the map and its inverse.
pub fn compose(f: &SmoothMap, g: &SmoothMap) -> Result<SmoothMap> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: g.dim(),
        });
    }
    let (tf, tg) = (f.analytic_t, g.analytic_t);
    let (cf, cg) = (f.analytic_eta_slope, g.analytic_eta_slope);
    let eta = (cf * tg * tg + tf * cg).max(cg * tf * tf + tg * cf);
    Ok(SmoothMap {
        name: format!("{} ∘ {}", f.name, g.name),
        map: Arc::new(Composed {
            outer: f.clone(),
            inner: g.clone(),
        }),
        inverse: Inverse::Composite {
            outer: Box::new(f.clone()),
            inner: Box::new(g.clone()),
        },
        support: f.support.union(&g.support),
        analytic_t: tf * tg,
        analytic_eta_slope: eta,
        newton: f.newton.clone(),
    })
}

#[derive(Debug)]
struct Composed {
    outer: SmoothMap,
    inner: SmoothMap,
}

impl ChartMap for Composed {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &Vector) -> Vector {
        self.outer.eval(&self.inner.eval(x))
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        self.outer.jacobian(&self.inner.eval(x)) * self.inner.jacobian(x)
    }
}

#[derive(Debug)]
struct Scaled {
    base: SmoothMap,
    mu: f64,
}

impl ChartMap for Scaled {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, x: &Vector) -> Vector {
        self.base.eval(&(x / self.mu)) * self.mu
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        self.base.jacobian(&(x / self.mu))
    }
}

/// Newton-evaluated inverse. When Newton fails the best iterate is returned;
/// callers that need the failure use [`SmoothMap::invert`] on the forward map.
#[derive(Debug)]
struct InverseMap {
    forward: SmoothMap,
}

impl ChartMap for InverseMap {
    fn dim(&self) -> usize {
        self.forward.dim()
    }

    fn eval(&self, y: &Vector) -> Vector {
        match newton_invert(&self.forward, y, &self.forward.newton) {
            Ok(s) => s.x,
            Err(_) => newton::best_effort(&self.forward, y, &self.forward.newton),
        }
    }

    fn jacobian(&self, y: &Vector) -> Matrix {
        let x = self.eval(y);
        let j = self.forward.jacobian(&x);
        linalg::inverse(&j).unwrap_or_else(|| Matrix::from_element(j.nrows(), j.ncols(), f64::NAN))
    }
}

/// Outcome of checking a map's analytic Jacobian and constants on samples.
#[derive(Clone, Debug, Serialize)]
pub struct JacobianReport {
    pub map: String,
    pub samples: usize,
    pub step: f64,
    pub threshold: f64,
    pub max_deviation: f64,
    pub sampled_sup_norm: f64,
    pub sampled_sup_inverse_norm: f64,
    pub analytic_t: f64,
    pub sampled_eta_ratio: f64,
    pub analytic_eta_slope: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Central-difference step used by [`validate_jacobian`].
pub const FD_STEP: f64 = 1e-5;
/// Largest accepted deviation between analytic and central-difference Jacobians.
pub const FD_THRESHOLD: f64 = 1e-6;

/// Compares the analytic Jacobian with central differences at `samples`
/// seeded points, and checks that the shipped `analytic_t` and
/// `analytic_eta_slope` dominate their sampled counterparts.
pub fn validate_jacobian(f: &SmoothMap, samples: usize, seed: u64) -> JacobianReport {
    let n = f.dim();
    let region = match &f.support {
        Support::Ball { center, radius } => Region::Ball {
            center: center.clone(),
            radius: radius * 1.1,
        },
        Support::Empty => Region::Ball {
            center: Vector::zeros(n),
            radius: 1.0,
        },
        Support::Unbounded => Region::Annulus {
            dim: n,
            inner: 0.05,
            outer: 20.0,
        },
    };
    let points = sampling::sample_points(&region, samples, seed);
    let mut max_dev = 0.0_f64;
    let mut sup_norm = 0.0_f64;
    let mut sup_inv = 0.0_f64;
    let mut eta_ratio = 0.0_f64;
    let mut rng = sampling::rng(seed.wrapping_add(1));
    for p in &points {
        let x = p.as_finite().expect("chart regions sample finite points");
        let j = f.jacobian(x);
        let mut fd = Matrix::zeros(n, n);
        for k in 0..n {
            let e = linalg::unit(n, k) * FD_STEP;
            let col = (f.eval(&(x + &e)) - f.eval(&(x - &e))) / (2.0 * FD_STEP);
            fd.set_column(k, &col);
        }
        max_dev = max_dev.max((&j - fd).abs().max());
        let (hi, lo) = linalg::singular_range(&j);
        sup_norm = sup_norm.max(hi);
        sup_inv = sup_inv.max(1.0 / lo);
        let dir = sampling::uniform_sphere_point(&mut rng, n);
        let y = x + dir * 1e-3;
        eta_ratio = eta_ratio.max(linalg::op_norm(&(f.jacobian(&y) - &j)) / 1e-3);
    }
    for w in points.windows(2) {
        let (a, b) = (w[0].as_finite().unwrap(), w[1].as_finite().unwrap());
        let d = (a - b).norm();
        if d > 0.0 {
            eta_ratio = eta_ratio.max(linalg::op_norm(&(f.jacobian(a) - f.jacobian(b))) / d);
        }
    }
    let mut failures = Vec::new();
    if max_dev > FD_THRESHOLD {
        failures.push(format!(
            "jacobian deviates from central differences by {max_dev:e}"
        ));
    }
    let t_tol = f.analytic_t * (1.0 + 1e-12);
    if sup_norm > t_tol || sup_inv > t_tol {
        failures.push(format!(
            "sampled sup ‖Df‖ = {sup_norm}, sup ‖Df⁻¹‖ = {sup_inv} exceed analytic T = {}",
            f.analytic_t
        ));
    }
    if eta_ratio > f.analytic_eta_slope * (1.0 + 1e-9) + 1e-12 {
        failures.push(format!(
            "sampled derivative slope {eta_ratio} exceeds analytic slope {}",
            f.analytic_eta_slope
        ));
    }
    JacobianReport {
        map: f.name.clone(),
        samples,
        step: FD_STEP,
        threshold: FD_THRESHOLD,
        max_deviation: max_dev,
        sampled_sup_norm: sup_norm,
        sampled_sup_inverse_norm: sup_inv,
        analytic_t: f.analytic_t,
        sampled_eta_ratio: eta_ratio,
        analytic_eta_slope: f.analytic_eta_slope,
        passed: failures.is_empty(),
        failures,
    }
}

#[cfg(test)]
mod tests;

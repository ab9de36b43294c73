//! The propagated map `g` and the path `h_t = g⁻¹ ∘ A_t⁻¹ ∘ g ∘ A_t`.
//!
//! For `f` supported in `B₀ = B_d(0, 1/3)`, `g` equals the translated copy
//! `A_m ∘ f ∘ A_m⁻¹` on each ball `B_m = B_d(m·e₁, 1/3)` with `m ≥ 1` and is
//! the identity elsewhere, where `A_t(x) = x + t·e₁`. Then `h₀ = id`,
//! `h₁ = f`, and the transitions `h_s ∘ h_t⁻¹` obey
//!
//! ```text
//! d(h_s∘h_t⁻¹(x), x)      ≤ T(T+1)|s−t|
//! ‖D(h_s∘h_t⁻¹) − I‖      ≤ T³η(|s−t|) + T·η((T+1)|s−t|)
//! ```
//!
//! with `T` bounding `‖Dg‖`, `‖Dg⁻¹‖` and `η(δ) = Cδ` the analytic modulus.

use rayon::prelude::*;
use serde::Serialize;

use crate::diffeo::{NewtonOptions, SmoothMap, Support};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{self, Matrix, Vector};
use crate::sampling::{self, PairSampler, Region};

/// Radius of the balls `B_m`.
pub const BALL_RADIUS: f64 = 1.0 / 3.0;

/// The map `g` built from `f`.
#[derive(Clone, Debug)]
pub struct PropagatedMap {
    base: SmoothMap,
    base_inverse: SmoothMap,
    first_index: i64,
}

/// Propagates `f` along `e₁` over the balls `B_m`, `m ≥ 1`.
pub fn propagate(f: &SmoothMap) -> Result<PropagatedMap> {
    PropagatedMap::build(f, 1)
}

/// Propagation that also includes `m = 0`, so that `g = f` on `B₀`.
/// This variant gives `h₁ = id` instead of `f`; it exists as a regression
/// fixture for the index convention.
pub fn propagate_including_zero(f: &SmoothMap) -> Result<PropagatedMap> {
    PropagatedMap::build(f, 0)
}

impl PropagatedMap {
    fn build(f: &SmoothMap, first_index: i64) -> Result<PropagatedMap> {
        match f.support() {
            Support::Empty => {}
            Support::Ball { center, radius } => {
                if center.norm() + radius > BALL_RADIUS + 1e-12 {
                    return Err(Error::NotSupported(format!(
                        "{} is supported in a ball of radius {radius} about |c| = {}, not inside B_d(0, 1/3)",
                        f.name(),
                        center.norm()
                    )));
                }
            }
            Support::Unbounded => {
                return Err(Error::NotSupported(format!(
                    "{} has unbounded support",
                    f.name()
                )));
            }
        }
        if f.dim() < 1 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(PropagatedMap {
            base: f.clone(),
            base_inverse: f.inverse(),
            first_index,
        })
    }

    pub fn base(&self) -> &SmoothMap {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Same map with a different Newton policy for `g⁻¹`.
    pub fn with_newton(mut self, opts: NewtonOptions) -> PropagatedMap {
        self.base = self.base.with_newton(opts);
        self.base_inverse = self.base.inverse();
        self
    }

    /// The index `m` of the ball `B_m` containing `x`, if any.
    pub fn ball_index(&self, x: &Vector) -> Option<i64> {
        let m = x[0].round();
        if (m as i64) < self.first_index {
            return None;
        }
        let mut d2 = (x[0] - m).powi(2);
        for i in 1..x.len() {
            d2 += x[i] * x[i];
        }
        (d2 <= BALL_RADIUS * BALL_RADIUS).then_some(m as i64)
    }

    fn shifted(x: &Vector, by: f64) -> Vector {
        let mut y = x.clone();
        y[0] += by;
        y
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        match self.ball_index(x) {
            Some(m) => {
                let m = m as f64;
                Self::shifted(&self.base.eval(&Self::shifted(x, -m)), m)
            }
            None => x.clone(),
        }
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        match self.ball_index(x) {
            Some(m) => self.base.jacobian(&Self::shifted(x, -(m as f64))),
            None => Matrix::identity(x.len(), x.len()),
        }
    }

    /// `g⁻¹`, the propagation of `f⁻¹`.
    pub fn invert(&self, y: &Vector) -> Result<Vector> {
        match self.ball_index(y) {
            Some(m) => {
                let m = m as f64;
                Ok(Self::shifted(&self.base.invert(&Self::shifted(y, -m))?, m))
            }
            None => Ok(y.clone()),
        }
    }

    /// `g` on `Sⁿ`, fixing `∞`.
    pub fn eval_point(&self, x: &Point) -> Point {
        match x {
            Point::Finite(v) => Point::Finite(self.eval(v)),
            inf => inf.clone(),
        }
    }

    /// `h_t(x) = g⁻¹(g(x + t·e₁) − t·e₁)`.
    pub fn h_eval(&self, t: f64, x: &Vector) -> Result<Vector> {
        let p = self.eval(&Self::shifted(x, t));
        self.invert(&Self::shifted(&p, -t))
    }

    /// `h_t` on `Sⁿ`, fixing `∞`.
    pub fn h_eval_point(&self, t: f64, x: &Point) -> Result<Point> {
        match x {
            Point::Finite(v) => Ok(Point::Finite(self.h_eval(t, v)?)),
            inf => Ok(inf.clone()),
        }
    }

    fn transition_chain(&self, s: f64, t: f64, x: &Vector) -> Result<[Vector; 4]> {
        let p1 = self.eval(x);
        let p3 = self.invert(&Self::shifted(&p1, t))?;
        let p4 = Self::shifted(&p3, s - t);
        let p7 = self.invert(&Self::shifted(&self.eval(&p4), -s))?;
        Ok([p3, p4, p7, x.clone()])
    }

    /// `h_s ∘ h_t⁻¹ = g⁻¹ A_s⁻¹ g A_s A_t⁻¹ g⁻¹ A_t g`, with two inversions of `g`.
    pub fn transition_eval(&self, s: f64, t: f64, x: &Vector) -> Result<Vector> {
        let [_, _, p7, _] = self.transition_chain(s, t, x)?;
        Ok(p7)
    }

    /// Chain-rule Jacobian of [`Self::transition_eval`], using
    /// `D_{g(x)} g⁻¹ = (D_x g)⁻¹`.
    pub fn transition_jacobian(&self, s: f64, t: f64, x: &Vector) -> Result<Matrix> {
        Ok(self.transition(s, t, x)?.1)
    }

    /// Value and Jacobian of the transition in one pass.
    pub fn transition(&self, s: f64, t: f64, x: &Vector) -> Result<(Vector, Matrix)> {
        let [p3, p4, p7, x] = self.transition_chain(s, t, x)?;
        let inv = |p: &Vector| {
            linalg::inverse(&self.jacobian(p))
                .ok_or_else(|| Error::Singular(format!("{:?}", p.as_slice())))
        };
        let j = inv(&p7)? * self.jacobian(&p4) * inv(&p3)? * self.jacobian(&x);
        Ok((p7, j))
    }
}

/// Certified constants for `g` and a sampled modulus table for diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct PathBounds {
    /// Upper bound on `‖Dg‖` and `‖Dg⁻¹‖`.
    pub t: f64,
    /// `C` in the analytic modulus `η(δ) = Cδ`.
    pub eta_slope: f64,
    /// Nondecreasing `(δ, η̂(δ))`: sampled `sup ‖D_x g − D_y g‖` over `|x − y| ≤ δ`.
    pub eta_table: Vec<(f64, f64)>,
}

impl PathBounds {
    /// Analytic modulus of continuity `η(δ) = Cδ`.
    pub fn eta(&self, delta: f64) -> f64 {
        if delta == 0.0 {
            0.0
        } else {
            self.eta_slope * delta
        }
    }

    /// Sampled modulus, interpolated as a step function from the table.
    pub fn eta_sampled(&self, delta: f64) -> f64 {
        self.eta_table
            .iter()
            .find(|(d, _)| *d >= delta)
            .or(self.eta_table.last())
            .map_or(0.0, |(_, e)| *e)
    }
}

/// Builds [`PathBounds`] for `g`. `T` and `C` come from the base map's certified
/// constants, which propagation preserves; the `η̂` table samples `pairs`
/// point pairs on `B₀`.
pub fn bounds(g: &PropagatedMap, pairs: usize, seed: u64) -> PathBounds {
    let f = g.base();
    let t = f.analytic_t().max(g.base_inverse.analytic_t()).max(1.0);
    let eta_slope = f
        .analytic_eta_slope()
        .max(g.base_inverse.analytic_eta_slope());
    let region = Region::Ball {
        center: Vector::zeros(g.dim()),
        radius: BALL_RADIUS,
    };
    let samples: Vec<(f64, f64)> = PairSampler::new(region, pairs, seed)
        .generate()
        .into_par_iter()
        .filter_map(|(x, y)| {
            let (x, y) = (x.as_finite()?, y.as_finite()?);
            let d = (x - y).norm();
            (d > 0.0).then(|| (d, linalg::op_norm(&(f.jacobian(x) - f.jacobian(y)))))
        })
        .collect();
    let deltas: Vec<f64> = (0..=16)
        .rev()
        .map(|k| 2.0 * BALL_RADIUS / 2f64.powi(k))
        .collect();
    let mut eta_table = Vec::with_capacity(deltas.len() + 1);
    eta_table.push((0.0, 0.0));
    let mut running = 0.0_f64;
    for &delta in &deltas {
        let m = samples
            .iter()
            .filter(|(d, _)| *d <= delta)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max);
        running = running.max(m);
        eta_table.push((delta, running));
    }
    PathBounds {
        t,
        eta_slope,
        eta_table,
    }
}

/// Certified displacement and derivative bounds for one transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoreticalBounds {
    pub disp: f64,
    pub deriv: f64,
}

pub fn theoretical_bounds(b: &PathBounds, s: f64, t: f64) -> TheoreticalBounds {
    let d = (s - t).abs();
    let tt = b.t;
    TheoreticalBounds {
        disp: tt * (tt + 1.0) * d,
        deriv: tt.powi(3) * b.eta(d) + tt * b.eta((tt + 1.0) * d),
    }
}

/// Region where `h_t` can differ from the identity for `t ∈ [0, 1]`, with margin.
pub fn path_region(n: usize) -> Region {
    let mut lo = Vector::from_element(n, -0.4);
    let mut hi = Vector::from_element(n, 0.4);
    lo[0] = -0.5;
    hi[0] = 1.5;
    Region::Box { lo, hi }
}

/// One row of a transition sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub s: f64,
    pub t: f64,
    pub max_disp: f64,
    pub disp_bound: f64,
    pub max_deriv: f64,
    pub deriv_bound: f64,
}

/// Samples `‖h_s∘h_t⁻¹(x) − x‖` and `‖D(h_s∘h_t⁻¹) − I‖` over `points` for
/// each `(s, t)` and pairs them with the theoretical bounds.
pub fn sweep(
    g: &PropagatedMap,
    b: &PathBounds,
    times: &[(f64, f64)],
    points: &[Vector],
) -> Result<Vec<SweepRow>> {
    times
        .par_iter()
        .map(|&(s, t)| {
            let mut max_disp = 0.0_f64;
            let mut max_deriv = 0.0_f64;
            for x in points {
                let (y, j) = g.transition(s, t, x)?;
                max_disp = max_disp.max((y - x).norm());
                max_deriv = max_deriv.max(linalg::dist_to_identity(&j));
            }
            let th = theoretical_bounds(b, s, t);
            Ok(SweepRow {
                s,
                t,
                max_disp,
                disp_bound: th.disp,
                max_deriv,
                deriv_bound: th.deriv,
            })
        })
        .collect()
}

/// Seeded `(s, t)` pairs in `[0, 1]²` and sample points in [`path_region`].
pub fn sweep_inputs(
    n: usize,
    time_pairs: usize,
    points: usize,
    seed: u64,
) -> (Vec<(f64, f64)>, Vec<Vector>) {
    use rand::Rng;
    let mut r = sampling::rng(seed);
    let times = (0..time_pairs)
        .map(|_| (r.random::<f64>(), r.random::<f64>()))
        .collect();
    let pts = sampling::sample_points(&path_region(n), points, seed.wrapping_add(1))
        .into_iter()
        .filter_map(|p| p.as_finite().cloned())
        .collect();
    (times, pts)
}

//! Catalog maps with closed-form Jacobians and certified constants.

use std::sync::Arc;

use super::profile::{certified_sup, Profile, SUP_S1, SUP_S2, SUP_S3};
use super::{ChartMap, SmoothMap, Support};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Rotation by `θ` of the first two coordinates of `x`.
fn rotate12(x: &Vector, theta: f64) -> Vector {
    let (s, c) = theta.sin_cos();
    let mut y = x.clone();
    y[0] = c * x[0] - s * x[1];
    y[1] = s * x[0] + c * x[1];
    y
}

fn rotation12(n: usize, theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    let mut m = Matrix::identity(n, n);
    m[(0, 0)] = c;
    m[(0, 1)] = -s;
    m[(1, 0)] = s;
    m[(1, 1)] = c;
    m
}

/// `x ↦ R(θ(|x|)) x` with `R` the rotation of the first coordinate plane,
/// whose Jacobian is `R_θ + θ′(r) (R_θ J x) x̂ᵀ` with `J` the quarter turn.
fn radial_rotation_jacobian(x: &Vector, theta: f64, dtheta: f64) -> Matrix {
    let n = x.len();
    let mut j = rotation12(n, theta);
    let r = x.norm();
    if r == 0.0 || dtheta == 0.0 {
        return j;
    }
    let mut jx = Vector::zeros(n);
    jx[0] = -x[1];
    jx[1] = x[0];
    let u = rotate12(&jx, theta) * dtheta;
    j += u * (x / r).transpose();
    j
}

/// Singular-value bound for `R(I + u x̂ᵀ)` with `u ⊥ x̂` and `|u| ≤ c`.
fn shear_bound(c: f64) -> f64 {
    (c + (c * c + 4.0).sqrt()) / 2.0
}

/// Twist of the first coordinate plane with angle `a·β(|x|)`.
#[derive(Clone, Debug)]
pub struct Twist {
    dim: usize,
    amplitude: f64,
    profile: Profile,
}

impl ChartMap for Twist {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector) -> Vector {
        rotate12(x, self.amplitude * self.profile.value(x.norm()))
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        let r = x.norm();
        radial_rotation_jacobian(
            x,
            self.amplitude * self.profile.value(r),
            self.amplitude * self.profile.d1(r),
        )
    }
}

impl Twist {
    /// Certified `sup_x ‖D²f‖`, which bounds the Lipschitz constant of `Df`.
    ///
    /// Differentiating the Jacobian gives
    /// `‖D²f‖ ≤ 3|θ′| + r|θ″| + rθ′²` with `θ = aβ`, evaluated over the
    /// transition annulus by a grid plus a Lipschitz slack built from the
    /// suprema of `S′`, `S″`, `S‴`.
    fn eta_slope(&self) -> f64 {
        let a = self.amplitude.abs();
        if a == 0.0 {
            return 0.0;
        }
        let (inner, w) = (self.profile.inner, self.profile.width());
        let w2 = w * w;
        let phi = |u: f64| {
            let r = inner + w * u;
            let s1 = super::profile::smoothstep_d1(u);
            let s2 = super::profile::smoothstep_d2(u).abs();
            a * (3.0 * s1 / w + r * s2 / w2 + a * r * s1 * s1 / w2)
        };
        let r_max = inner + w;
        let lip = a
            * (3.0 * SUP_S2 / w
                + (w * SUP_S2 + r_max * SUP_S3) / w2
                + a * (w * SUP_S1 * SUP_S1 + r_max * 2.0 * SUP_S1 * SUP_S2) / w2);
        certified_sup(phi, 0.0, 1.0, lip, 8001)
    }
}

/// Rotates the first two chart coordinates by `amplitude·β(|x|)`, where `β`
/// is 1 on `[0, inner]` and 0 on `[outer, ∞)`.
pub fn make_twist(dim: usize, amplitude: f64, inner: f64, outer: f64) -> Result<SmoothMap> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "twist needs dimension ≥ 2, got {dim}"
        )));
    }
    if !(0.0 < inner && inner < outer && outer <= 1.0 / 3.0 + 1e-15) {
        return Err(Error::InvalidParameter(format!(
            "twist radii must satisfy 0 < inner < outer ≤ 1/3, got inner = {inner}, outer = {outer}"
        )));
    }
    if !amplitude.is_finite() {
        return Err(Error::InvalidParameter(
            "twist amplitude must be finite".into(),
        ));
    }
    let profile = Profile { inner, outer };
    let forward = Twist {
        dim,
        amplitude,
        profile,
    };
    let backward = Twist {
        dim,
        amplitude: -amplitude,
        profile,
    };
    let t = shear_bound(amplitude.abs() * profile.sup_radial_slope());
    let eta = forward.eta_slope();
    let support = if amplitude == 0.0 {
        Support::Empty
    } else {
        Support::Ball {
            center: Vector::zeros(dim),
            radius: outer,
        }
    };
    Ok(SmoothMap::with_exact_inverse(
        format!("twist({amplitude})"),
        Arc::new(forward),
        Arc::new(backward),
        support,
        t,
        eta,
    ))
}

/// `x ↦ x + a·β(|x|)·u` with `β` falling from 1 at the origin to 0 at `outer`.
#[derive(Clone, Debug)]
pub struct BumpPush {
    direction: Vector,
    amplitude: f64,
    profile: Profile,
}

impl ChartMap for BumpPush {
    fn dim(&self) -> usize {
        self.direction.len()
    }

    fn eval(&self, x: &Vector) -> Vector {
        x + &self.direction * (self.amplitude * self.profile.value(x.norm()))
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        let n = x.len();
        let r = x.norm();
        let mut j = Matrix::identity(n, n);
        let d = self.amplitude * self.profile.d1(r);
        if r > 0.0 && d != 0.0 {
            j += &self.direction * (x / r).transpose() * d;
        }
        j
    }
}

/// Pushes the origin to `amplitude·direction`, identity outside `B_d(0, outer)`.
///
/// Requires `|amplitude|·sup|β′| < 1` so that `Df` is nonsingular. The
/// inverse is computed by Newton.
pub fn make_bump_push(direction: &Vector, amplitude: f64, outer: f64) -> Result<SmoothMap> {
    let n = direction.len();
    if n < 1 || (direction.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "bump_push direction must be a unit vector".into(),
        ));
    }
    if !(outer > 0.0 && outer <= 1.0 / 3.0 + 1e-15) {
        return Err(Error::InvalidParameter(format!(
            "bump_push outer radius must be in (0, 1/3], got {outer}"
        )));
    }
    let c = amplitude.abs() * SUP_S1 / outer;
    if !(c < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "bump_push needs |amplitude|·sup|β′| < 1, got {c}"
        )));
    }
    let profile = Profile { inner: 0.0, outer };
    // ‖I + v x̂ᵀ‖ ≤ 1 + c and its smallest singular value is at least 1 − c.
    let t = (1.0 + c).max(1.0 / (1.0 - c));
    // The second derivative is a·u ⊗ (quadratic form with eigenvalues β″ and
    // β′/r); both are bounded by sup|S″|/R² = (10/√3)/R² since
    // sup 30u(1−u)² = 40/9 < 10/√3. The inverse picks up a factor T³.
    let c_f = amplitude.abs() * SUP_S2 / (outer * outer);
    let eta = t.powi(3) * c_f;
    let support = if amplitude == 0.0 {
        Support::Empty
    } else {
        Support::Ball {
            center: Vector::zeros(n),
            radius: outer,
        }
    };
    Ok(SmoothMap::with_newton_inverse(
        format!("bump_push({amplitude})"),
        Arc::new(BumpPush {
            direction: direction.clone(),
            amplitude,
            profile,
        }),
        support,
        t,
        eta,
    ))
}

/// The logarithmic spiral `s_k(z) = z·e^{ik log|z|}` of the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpiralParams {
    pub k: f64,
}

impl SpiralParams {
    /// Isometric distortion `L ≥ 1` with `|k| = L − 1/L`.
    pub fn distortion(&self) -> f64 {
        shear_bound(self.k.abs())
    }

    /// The twist rate with the given distortion `L ≥ 1`.
    pub fn from_distortion(l: f64) -> SpiralParams {
        SpiralParams { k: l - 1.0 / l }
    }
}

#[derive(Clone, Debug)]
struct Spiral {
    k: f64,
}

impl ChartMap for Spiral {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &Vector) -> Vector {
        let r = x.norm();
        if r == 0.0 {
            return x.clone();
        }
        rotate12(x, self.k * r.ln())
    }

    /// Not differentiable at the origin, where a NaN matrix is returned.
    fn jacobian(&self, x: &Vector) -> Matrix {
        let r = x.norm();
        if r == 0.0 {
            return Matrix::from_element(2, 2, f64::NAN);
        }
        radial_rotation_jacobian(x, self.k * r.ln(), self.k / r)
    }
}

/// Planar spiral; not compactly supported and fixing `0`, `∞` and the unit circle.
pub fn make_spiral(k: f64) -> Result<SmoothMap> {
    if !k.is_finite() {
        return Err(Error::InvalidParameter("spiral rate must be finite".into()));
    }
    let params = SpiralParams { k };
    let support = if k == 0.0 {
        Support::Empty
    } else {
        Support::Unbounded
    };
    let slope = if k == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(SmoothMap::with_exact_inverse(
        format!("spiral({k})"),
        Arc::new(Spiral { k }),
        Arc::new(Spiral { k: -k }),
        support,
        params.distortion(),
        slope,
    ))
}

#[derive(Clone, Debug)]
struct Identity {
    dim: usize,
}

impl ChartMap for Identity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector) -> Vector {
        x.clone()
    }

    fn jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::identity(self.dim, self.dim)
    }
}

pub fn make_identity(dim: usize) -> SmoothMap {
    let id: Arc<dyn ChartMap> = Arc::new(Identity { dim });
    SmoothMap::with_exact_inverse("identity", id.clone(), id, Support::Empty, 1.0, 0.0)
}

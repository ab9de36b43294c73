//! Points of `Sⁿ = ℝⁿ ∪ {∞}`, the Euclidean and chordal metrics, rotations of
//! the sphere, and Möbius words built from rotations and similarities.
//!
//! Points live in two models at once. The chart model is `ℝⁿ` plus a tag for
//! `∞`; the sphere model is the unit sphere in `ℝⁿ⁺¹` reached by inverse
//! stereographic projection from the north pole. Similarities act exactly in
//! the chart and rotations act exactly in the sphere model, so neither ever
//! has to divide by a vanishing denominator.
//!
//! With this normalization the chordal metric
//!
//! ```text
//! χ(x, y) = |x − y| / (√(1+|x|²) √(1+|y|²)),   χ(x, ∞) = 1 / √(1+|x|²)
//! ```
//!
//! is exactly half the Euclidean distance between the embedded points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// A point of `Sⁿ`. `Infinity` carries the dimension `n` of the chart.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Finite(Vector),
    Infinity(usize),
}

impl Point {
    pub fn finite(coords: &[f64]) -> Point {
        Point::Finite(Vector::from_column_slice(coords))
    }

    pub fn origin(n: usize) -> Point {
        Point::Finite(Vector::zeros(n))
    }

    pub fn infinity(n: usize) -> Point {
        Point::Infinity(n)
    }

    pub fn dim(&self) -> usize {
        match self {
            Point::Finite(v) => v.len(),
            Point::Infinity(n) => *n,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Point::Infinity(_))
    }

    pub fn as_finite(&self) -> Option<&Vector> {
        match self {
            Point::Finite(v) => Some(v),
            Point::Infinity(_) => None,
        }
    }

    /// Chart coordinates, or an error naming the operation when the point is `∞`.
    pub fn expect_finite(&self, what: &str) -> Result<&Vector> {
        self.as_finite().ok_or_else(|| {
            Error::InvalidParameter(format!(
                "{what}: point at infinity has no chart coordinates"
            ))
        })
    }
}

impl From<Vector> for Point {
    fn from(v: Vector) -> Self {
        Point::Finite(v)
    }
}

pub fn euclid_dist(x: &Vector, y: &Vector) -> f64 {
    (x - y).norm()
}

/// The chordal (spherical) metric on `Sⁿ`.
pub fn chi_dist(x: &Point, y: &Point) -> f64 {
    match (x, y) {
        (Point::Infinity(_), Point::Infinity(_)) => 0.0,
        (Point::Finite(a), Point::Infinity(_)) | (Point::Infinity(_), Point::Finite(a)) => {
            1.0 / (1.0 + a.norm_squared()).sqrt()
        }
        (Point::Finite(a), Point::Finite(b)) => {
            (a - b).norm() / ((1.0 + a.norm_squared()).sqrt() * (1.0 + b.norm_squared()).sqrt())
        }
    }
}

/// Inverse stereographic projection onto the unit sphere of `ℝⁿ⁺¹`.
/// The origin goes to the south pole and `∞` to the north pole.
pub fn embed_unit_sphere(x: &Point) -> Vector {
    match x {
        Point::Infinity(n) => {
            let mut v = Vector::zeros(n + 1);
            v[*n] = 1.0;
            v
        }
        Point::Finite(a) => {
            let n = a.len();
            let s = a.norm_squared();
            let mut v = Vector::zeros(n + 1);
            for i in 0..n {
                v[i] = 2.0 * a[i] / (1.0 + s);
            }
            v[n] = (s - 1.0) / (s + 1.0);
            v
        }
    }
}

/// Stereographic projection from the north pole; inverse of [`embed_unit_sphere`].
/// The input is renormalized, so slightly off-sphere vectors are accepted.
pub fn project_chart(v: &Vector) -> Point {
    let n = v.len() - 1;
    let v = v / v.norm();
    let top = v[n];
    let head = v.rows(0, n).into_owned();
    let h2 = head.norm_squared();
    if top > 0.0 {
        // 1 − top = |head|² / (1 + top) avoids cancellation near the north pole
        if h2 == 0.0 {
            return Point::Infinity(n);
        }
        Point::Finite(head * ((1.0 + top) / h2))
    } else {
        Point::Finite(head / (1.0 - top))
    }
}

/// Closed `χ`-ball. The radius is strictly below 1, so the ball is never all of `Sⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalBall {
    pub center: Point,
    pub radius: f64,
}

impl SphericalBall {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "spherical ball radius must lie in (0, 1), got {radius}"
            )));
        }
        Ok(SphericalBall { center, radius })
    }

    /// The `χ`-ball centred at the chart origin whose Euclidean radius is `rho`.
    pub fn from_euclidean_at_origin(n: usize, rho: f64) -> Result<Self> {
        SphericalBall::new(Point::origin(n), chi_radius_of_euclidean(rho))
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        chi_dist(&self.center, x) <= self.radius + tol
    }
}

/// Euclidean radius `ρ = r/√(1−r²)` of the `χ`-ball of radius `r` about the origin.
pub fn euclidean_radius_of_chi(r: f64) -> f64 {
    r / (1.0 - r * r).sqrt()
}

/// Inverse of [`euclidean_radius_of_chi`]: `r = ρ/√(1+ρ²)`.
pub fn chi_radius_of_euclidean(rho: f64) -> f64 {
    rho / (1.0 + rho * rho).sqrt()
}

/// The 2-plane of a single-plane rotation: `u ↦ cos(angle) u + sin(angle) v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub u: Vector,
    pub v: Vector,
    pub angle: f64,
    /// Set when the plane came from an antipodal pair and was completed with
    /// this coordinate axis of `ℝⁿ⁺¹`.
    pub antipodal_axis: Option<usize>,
}

/// A rotation of `Sⁿ`, stored as an element of `SO(n+1)` acting on the sphere model.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    matrix: Matrix,
    plane: Option<Plane>,
}

impl Rotation {
    pub fn identity(n: usize) -> Rotation {
        Rotation {
            matrix: Matrix::identity(n + 1, n + 1),
            plane: None,
        }
    }

    /// Rotation by `angle` in the plane spanned by orthonormal `u`, `v` of `ℝⁿ⁺¹`.
    pub fn in_plane(u: &Vector, v: &Vector, angle: f64) -> Result<Rotation> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                got: v.len(),
            });
        }
        if (u.norm() - 1.0).abs() > 1e-12
            || (v.norm() - 1.0).abs() > 1e-12
            || u.dot(v).abs() > 1e-12
        {
            return Err(Error::InvalidParameter(
                "rotation plane basis is not orthonormal".into(),
            ));
        }
        let m = u.len();
        let (s, c) = angle.sin_cos();
        let uu = u * u.transpose();
        let vv = v * v.transpose();
        let vu = v * u.transpose();
        let uv = u * v.transpose();
        let matrix = Matrix::identity(m, m) + (uu + vv) * (c - 1.0) + (vu - uv) * s;
        Ok(Rotation {
            matrix,
            plane: Some(Plane {
                u: u.clone(),
                v: v.clone(),
                angle,
                antipodal_axis: None,
            }),
        })
    }

    /// Rotation by `angle` in the coordinate plane `(i, j)` of the sphere model `ℝⁿ⁺¹`.
    /// For `i, j < n` this is the linear chart rotation of the same coordinates.
    pub fn coordinate_plane(n: usize, i: usize, j: usize, angle: f64) -> Result<Rotation> {
        if i > n || j > n || i == j {
            return Err(Error::InvalidParameter(format!(
                "coordinate plane ({i}, {j}) invalid for S^{n}"
            )));
        }
        Rotation::in_plane(
            &crate::linalg::unit(n + 1, i),
            &crate::linalg::unit(n + 1, j),
            angle,
        )
    }

    /// Accepts any matrix in `SO(n+1)` (checked to 1e-10).
    pub fn from_matrix(matrix: Matrix) -> Result<Rotation> {
        let m = matrix.nrows();
        if matrix.ncols() != m || m < 2 {
            return Err(Error::InvalidParameter(
                "rotation matrix must be square of size ≥ 2".into(),
            ));
        }
        let err = (matrix.transpose() * &matrix - Matrix::identity(m, m))
            .abs()
            .max();
        if err > 1e-10 || matrix.determinant() < 0.0 {
            return Err(Error::InvalidParameter("matrix is not in SO(n+1)".into()));
        }
        Ok(Rotation {
            matrix,
            plane: None,
        })
    }

    /// Chart dimension `n`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn plane(&self) -> Option<&Plane> {
        self.plane.as_ref()
    }

    /// Rotation angle for single-plane rotations (0 for the identity).
    pub fn angle(&self) -> Option<f64> {
        match &self.plane {
            Some(p) => Some(p.angle),
            None if self.is_identity(0.0) => Some(0.0),
            None => None,
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let m = self.matrix.nrows();
        (&self.matrix - Matrix::identity(m, m)).abs().max() <= tol
    }

    pub fn inverse(&self) -> Rotation {
        Rotation {
            matrix: self.matrix.transpose(),
            plane: self.plane.as_ref().map(|p| Plane {
                angle: -p.angle,
                ..p.clone()
            }),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn after(&self, other: &Rotation) -> Rotation {
        if other.is_identity(0.0) {
            return self.clone();
        }
        if self.is_identity(0.0) {
            return other.clone();
        }
        Rotation {
            matrix: &self.matrix * &other.matrix,
            plane: None,
        }
    }

    /// The single-plane rotation in the same plane with angle divided by `k`.
    pub fn fraction(&self, k: usize) -> Result<Rotation> {
        let p = self.plane.as_ref().ok_or_else(|| {
            Error::InvalidParameter("rotation is not a single-plane rotation".into())
        })?;
        let mut r = Rotation::in_plane(&p.u, &p.v, p.angle / k as f64)?;
        if let Some(pl) = r.plane.as_mut() {
            pl.antipodal_axis = p.antipodal_axis;
        }
        Ok(r)
    }

    pub fn apply_sphere(&self, v: &Vector) -> Vector {
        &self.matrix * v
    }

    pub fn apply(&self, x: &Point) -> Point {
        project_chart(&self.apply_sphere(&embed_unit_sphere(x)))
    }

    /// Chart derivative `D(proj) · R · D(embed)` at `x`; `None` when `x` or its
    /// image is a chart pole (`∞`).
    pub fn chart_jacobian(&self, x: &Point) -> Option<Matrix> {
        let a = x.as_finite()?;
        let n = a.len();
        let s = 1.0 + a.norm_squared();
        let mut d_embed = Matrix::zeros(n + 1, n);
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                d_embed[(i, j)] = 2.0 * delta / s - 4.0 * a[i] * a[j] / (s * s);
            }
        }
        for j in 0..n {
            d_embed[(n, j)] = 4.0 * a[j] / (s * s);
        }
        let w = self.apply_sphere(&embed_unit_sphere(x));
        let denom = 1.0 - w[n];
        if denom <= 1e-14 {
            return None;
        }
        let mut d_proj = Matrix::zeros(n, n + 1);
        for i in 0..n {
            d_proj[(i, i)] = 1.0 / denom;
            d_proj[(i, n)] = w[i] / (denom * denom);
        }
        Some(d_proj * &self.matrix * d_embed)
    }
}

/// Minimal rotation taking `q` to `p`: it turns the 2-plane spanned by the
/// embedded points and fixes the orthogonal complement.
///
/// Equal points give the identity. For antipodal points the plane is
/// completed with the lowest-index coordinate axis not parallel to `q`, and
/// the chosen axis is recorded in [`Plane::antipodal_axis`].
pub fn rotation_from_points(p: &Point, q: &Point) -> Result<Rotation> {
    let n = p.dim();
    if q.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: q.dim(),
        });
    }
    let target = embed_unit_sphere(p);
    let source = embed_unit_sphere(q);
    if (&target - &source).norm() <= 1e-15 {
        return Ok(Rotation::identity(n));
    }
    let c = source.dot(&target).clamp(-1.0, 1.0);
    let ortho = &target - &source * c;
    let on = ortho.norm();
    if on > 1e-12 {
        let angle = on.atan2(c);
        return Rotation::in_plane(&source, &(ortho / on), angle);
    }
    // antipodal pair
    let axis = (0..=n)
        .find(|&k| source[k].abs() < 1.0 - 1e-9)
        .expect("a unit vector in dimension ≥ 2 is parallel to at most one axis");
    let e = crate::linalg::unit(n + 1, axis);
    let w = &e - &source * source.dot(&e);
    let mut r = Rotation::in_plane(&source, &(&w / w.norm()), std::f64::consts::PI)?;
    if let Some(pl) = r.plane.as_mut() {
        pl.antipodal_axis = Some(axis);
    }
    Ok(r)
}

/// One letter of a Möbius word.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    Rotation(Rotation),
    /// `x ↦ scale·x + shift` in the chart, fixing `∞`.
    Similarity {
        scale: f64,
        shift: Vector,
    },
}

impl Primitive {
    pub fn apply(&self, x: &Point) -> Point {
        match self {
            Primitive::Rotation(r) => r.apply(x),
            Primitive::Similarity { scale, shift } => match x {
                Point::Infinity(n) => Point::Infinity(*n),
                Point::Finite(a) => Point::Finite(a * *scale + shift),
            },
        }
    }

    pub fn inverse(&self) -> Primitive {
        match self {
            Primitive::Rotation(r) => Primitive::Rotation(r.inverse()),
            Primitive::Similarity { scale, shift } => Primitive::Similarity {
                scale: 1.0 / scale,
                shift: -shift / *scale,
            },
        }
    }
}

/// Chart Jacobian of a Möbius word, or a report that the evaluation passed
/// through a chart pole and the derivative only exists in the sphere model.
#[derive(Clone, Debug, PartialEq)]
pub enum MobiusJacobian {
    Chart(Matrix),
    /// `step` is the index of the primitive whose input or output was `∞`;
    /// `sphere_matrix` is the product of the rotation matrices of the word,
    /// i.e. the derivative in the sphere model when no similarity is involved.
    SphereModel {
        step: usize,
        sphere_matrix: Matrix,
    },
}

/// A word of rotations and similarities, evaluated left to right, with its
/// inverse word cached.
#[derive(Clone, Debug, PartialEq)]
pub struct MobiusMap {
    dim: usize,
    word: Vec<Primitive>,
    inverse_word: Vec<Primitive>,
}

impl MobiusMap {
    pub fn identity(n: usize) -> MobiusMap {
        MobiusMap {
            dim: n,
            word: Vec::new(),
            inverse_word: Vec::new(),
        }
    }

    pub fn from_word(n: usize, word: Vec<Primitive>) -> Result<MobiusMap> {
        for p in &word {
            match p {
                Primitive::Rotation(r) if r.dim() != n => {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: r.dim(),
                    })
                }
                Primitive::Similarity { scale, shift } => {
                    if shift.len() != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            got: shift.len(),
                        });
                    }
                    if !(*scale > 0.0) || !scale.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "similarity scale must be positive, got {scale}"
                        )));
                    }
                }
                _ => {}
            }
        }
        let inverse_word = word.iter().rev().map(Primitive::inverse).collect();
        Ok(MobiusMap {
            dim: n,
            word,
            inverse_word,
        })
    }

    pub fn rotation(r: Rotation) -> MobiusMap {
        let n = r.dim();
        MobiusMap::from_word(n, vec![Primitive::Rotation(r)])
            .expect("dimension taken from rotation")
    }

    pub fn similarity(scale: f64, shift: Vector) -> Result<MobiusMap> {
        MobiusMap::from_word(shift.len(), vec![Primitive::Similarity { scale, shift }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn word(&self) -> &[Primitive] {
        &self.word
    }

    pub fn is_identity_word(&self) -> bool {
        self.word.is_empty()
    }

    pub fn apply(&self, x: &Point) -> Point {
        self.word.iter().fold(x.clone(), |acc, p| p.apply(&acc))
    }

    pub fn apply_inverse(&self, x: &Point) -> Point {
        self.inverse_word
            .iter()
            .fold(x.clone(), |acc, p| p.apply(&acc))
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap {
            dim: self.dim,
            word: self.inverse_word.clone(),
            inverse_word: self.word.clone(),
        }
    }

    /// The word `self` followed by `next`.
    pub fn then(&self, next: &MobiusMap) -> MobiusMap {
        let mut word = self.word.clone();
        word.extend(next.word.iter().cloned());
        let mut inverse_word = next.inverse_word.clone();
        inverse_word.extend(self.inverse_word.iter().cloned());
        MobiusMap {
            dim: self.dim,
            word,
            inverse_word,
        }
    }

    /// Chain-rule Jacobian in the chart.
    pub fn jacobian(&self, x: &Point) -> MobiusJacobian {
        let n = self.dim;
        let mut jac = Matrix::identity(n, n);
        let mut cur = x.clone();
        for (step, p) in self.word.iter().enumerate() {
            let local = match p {
                Primitive::Similarity { scale, .. } => {
                    if cur.is_infinite() {
                        None
                    } else {
                        Some(Matrix::identity(n, n) * *scale)
                    }
                }
                Primitive::Rotation(r) => r.chart_jacobian(&cur),
            };
            match local {
                Some(m) => jac = m * jac,
                None => {
                    let sphere_matrix = self
                        .word
                        .iter()
                        .filter_map(|p| match p {
                            Primitive::Rotation(r) => Some(r.matrix().clone()),
                            _ => None,
                        })
                        .fold(Matrix::identity(n + 1, n + 1), |acc, m| m * acc);
                    return MobiusJacobian::SphereModel {
                        step,
                        sphere_matrix,
                    };
                }
            }
            cur = p.apply(&cur);
        }
        MobiusJacobian::Chart(jac)
    }

    /// Splits a word of the form `similarities… rotations…` into `g = C ∘ B`
    /// with `B(x) = scale·x + shift` and `C` the product of the rotations.
    /// Returns `None` for words where a similarity follows a rotation.
    pub fn affine_rotation_split(&self) -> Option<AffineRotationSplit> {
        let n = self.dim;
        let mut scale = 1.0;
        let mut shift = Vector::zeros(n);
        let mut rotation = Rotation::identity(n);
        let mut seen_rotation = false;
        for p in &self.word {
            match p {
                Primitive::Similarity { scale: s, shift: b } => {
                    if seen_rotation {
                        return None;
                    }
                    shift = &shift * *s + b;
                    scale *= s;
                }
                Primitive::Rotation(r) => {
                    rotation = if seen_rotation {
                        r.after(&rotation)
                    } else {
                        r.clone()
                    };
                    seen_rotation = true;
                }
            }
        }
        Some(AffineRotationSplit {
            scale,
            shift,
            rotation,
        })
    }
}

/// `g = C ∘ B` with `B` affine (a similarity) and `C` a spherical isometry.
#[derive(Clone, Debug)]
pub struct AffineRotationSplit {
    pub scale: f64,
    pub shift: Vector,
    pub rotation: Rotation,
}

/// Möbius map `g` with `g(B_d(0, 1/3)) = ball`: scale the `1/3` ball to the
/// Euclidean ball `B_d(0, ρ)` equal to `B_χ(0, r)`, then rotate the origin to
/// the ball's centre.
pub fn ball_normalizer(ball: &SphericalBall) -> Result<MobiusMap> {
    if !(ball.radius > 0.0 && ball.radius < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cannot normalize a ball of radius {}",
            ball.radius
        )));
    }
    let n = ball.dim();
    let rho = euclidean_radius_of_chi(ball.radius);
    let scale = 3.0 * rho;
    let rot = rotation_from_points(&ball.center, &Point::origin(n))?;
    MobiusMap::from_word(
        n,
        vec![
            Primitive::Similarity {
                scale,
                shift: Vector::zeros(n),
            },
            Primitive::Rotation(rot),
        ],
    )
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PrimitiveRecord {
    Rotation { matrix: Vec<Vec<f64>> },
    Similarity { scale: f64, shift: Vec<f64> },
}

impl Serialize for MobiusMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let records: Vec<PrimitiveRecord> = self
            .word
            .iter()
            .map(|p| match p {
                Primitive::Rotation(r) => PrimitiveRecord::Rotation {
                    matrix: r
                        .matrix()
                        .row_iter()
                        .map(|row| row.iter().cloned().collect())
                        .collect(),
                },
                Primitive::Similarity { scale, shift } => PrimitiveRecord::Similarity {
                    scale: *scale,
                    shift: shift.iter().cloned().collect(),
                },
            })
            .collect();
        records.serialize(s)
    }
}

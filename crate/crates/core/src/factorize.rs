//! The sphere pipeline: a diffeomorphism `f` of `Sⁿ` becomes a finite list of
//! factors, each `(1+ε)`-bi-Lipschitz in `χ` and moving points by at most `ε`.
//!
//! The stages are:
//!
//! 1. pick a rotation `A` such that `A ∘ f` has a fixed point;
//! 2. split `A ∘ f = f² ∘ f¹` into maps supported on spherical balls;
//! 3. conjugate each `fⁱ` by a Möbius map `gᵢ` to a map supported in
//!    `B_d(0, 1/3)` and propagate it;
//! 4. partition each path `h_t` into certified slices, conjugated back by `gᵢ`;
//! 5. slice the rotation path from the identity to `A⁻¹`.
//!
//! The input class is restricted to rotations composed with at most two
//! maps that are already supported on balls; general maps would need an
//! interpolation step that is not implemented.

use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{self, DistortionCertificate, FnMap, Metric, PointMap, SliceBound};
use crate::diffeo::{NewtonOptions, SmoothMap, Support};
use crate::error::{Error, Result, Stage, StageExt};
use crate::geometry::{
    ball_normalizer, chi_dist, chi_radius_of_euclidean, embed_unit_sphere, project_chart,
    rotation_from_points, MobiusMap, Point, Primitive, Rotation, SphericalBall,
};
use crate::linalg::{self, Vector};
use crate::pathcore::{self, PathBounds, PropagatedMap};
use crate::sampling::{self, PairSampler, Region};

/// Where a chart map sits on the sphere: scale by `scale`, then rotate the
/// origin to `center`.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub center: Point,
    pub scale: f64,
}

impl Placement {
    pub fn origin(n: usize) -> Placement {
        Placement {
            center: Point::origin(n),
            scale: 1.0,
        }
    }
}

/// A chart map transported to the sphere: `M ∘ base ∘ M⁻¹` with `M` the placement.
#[derive(Clone, Debug)]
pub struct BallPiece {
    base: SmoothMap,
    placement: Placement,
    mobius: MobiusMap,
}

impl BallPiece {
    pub fn new(base: SmoothMap, placement: Placement) -> Result<BallPiece> {
        let n = base.dim();
        if placement.center.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: placement.center.dim(),
            });
        }
        if !(placement.scale > 0.0) || !placement.scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "placement scale must be positive, got {}",
                placement.scale
            )));
        }
        let rot = rotation_from_points(&placement.center, &Point::origin(n))?;
        let mobius = MobiusMap::from_word(
            n,
            vec![
                Primitive::Similarity {
                    scale: placement.scale,
                    shift: Vector::zeros(n),
                },
                Primitive::Rotation(rot),
            ],
        )?;
        Ok(BallPiece {
            base,
            placement,
            mobius,
        })
    }

    pub fn at_origin(base: SmoothMap) -> Result<BallPiece> {
        let n = base.dim();
        BallPiece::new(base, Placement::origin(n))
    }

    pub fn base(&self) -> &SmoothMap {
        &self.base
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    /// Radius of the chart ball about the origin containing the base support.
    fn base_radius(&self) -> Option<f64> {
        match self.base.support() {
            Support::Ball { center, radius } => Some(center.norm() + radius),
            _ => None,
        }
    }

    /// The spherical ball carrying the support; `None` for an identity base.
    pub fn support_ball(&self) -> Result<Option<SphericalBall>> {
        match self.base.support() {
            Support::Empty => Ok(None),
            Support::Unbounded => Err(Error::OutOfScope(format!(
                "{} is not supported on a ball; splitting it requires Munkres interpolation",
                self.base.name()
            ))),
            Support::Ball { .. } => {
                let r = self.base_radius().unwrap() * self.placement.scale;
                let ball =
                    SphericalBall::new(self.placement.center.clone(), chi_radius_of_euclidean(r))?;
                Ok(Some(ball))
            }
        }
    }

    pub fn eval_point(&self, x: &Point) -> Point {
        self.mobius
            .apply(&self.base.eval_point(&self.mobius.apply_inverse(x)))
    }
}

/// A diffeomorphism of `Sⁿ` in the form accepted by the pipeline:
/// `f = R ∘ P_k ∘ … ∘ P_1` with ball pieces `P_i` and a rotation `R`.
#[derive(Clone, Debug)]
pub struct SphereDiffeo {
    dim: usize,
    pieces: Vec<BallPiece>,
    rotation: Rotation,
}

impl SphereDiffeo {
    pub fn identity(n: usize) -> SphereDiffeo {
        SphereDiffeo {
            dim: n,
            pieces: Vec::new(),
            rotation: Rotation::identity(n),
        }
    }

    /// `R ∘ P_k ∘ … ∘ P_1`; `pieces` are listed in order of application.
    pub fn new(n: usize, pieces: Vec<BallPiece>, rotation: Rotation) -> Result<SphereDiffeo> {
        for p in &pieces {
            if p.base.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.base.dim(),
                });
            }
        }
        if rotation.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rotation.dim(),
            });
        }
        Ok(SphereDiffeo {
            dim: n,
            pieces,
            rotation,
        })
    }

    /// A single chart map placed at the origin.
    pub fn from_map(f: SmoothMap) -> Result<SphereDiffeo> {
        let n = f.dim();
        SphereDiffeo::new(n, vec![BallPiece::at_origin(f)?], Rotation::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[BallPiece] {
        &self.pieces
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    /// `rotation ∘ self`.
    pub fn then_rotate(&self, r: &Rotation) -> SphereDiffeo {
        SphereDiffeo {
            rotation: r.after(&self.rotation),
            ..self.clone()
        }
    }

    pub fn eval_point(&self, x: &Point) -> Point {
        let y = self.pieces.iter().fold(x.clone(), |y, p| p.eval_point(&y));
        if self.rotation.is_identity(0.0) {
            return y;
        }
        self.rotation.apply(&y)
    }
}

impl PointMap for SphereDiffeo {
    fn apply(&self, x: &Point) -> Result<Point> {
        Ok(self.eval_point(x))
    }
}

fn north_pole(n: usize) -> Vector {
    linalg::unit(n + 1, n)
}

fn fixed_residual(f: &dyn PointMap, v: &Vector) -> Result<(Point, f64)> {
    let x = project_chart(v);
    let d = chi_dist(&f.apply(&x)?, &x);
    Ok((x, d))
}

/// Tolerance on `χ(f(x), x)` for a point to count as fixed.
pub const FIXED_POINT_TOL: f64 = 1e-9;

/// Multistart search for a fixed point of `f` on `Sⁿ`.
///
/// Probes the poles, the points `±eᵢ` of the sphere model and 64 seeded
/// uniform points, then runs a pattern search in the sphere model from the
/// eight best probes. Returns a point with `χ(f(x), x) ≤ 1e-9`, if found.
pub fn find_fixed_point(f: &dyn PointMap, n: usize) -> Result<Option<Point>> {
    let mut design = vec![north_pole(n), -north_pole(n)];
    for i in 0..n {
        design.push(linalg::unit(n + 1, i));
        design.push(-linalg::unit(n + 1, i));
    }
    let mut r = sampling::rng(0x6669_7865_6470_7473);
    for _ in 0..64 {
        design.push(sampling::uniform_sphere_point(&mut r, n + 1));
    }
    let mut scored = Vec::with_capacity(design.len());
    for v in design {
        let (x, d) = fixed_residual(f, &v)?;
        if d <= FIXED_POINT_TOL {
            return Ok(Some(x));
        }
        scored.push((d, v));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (mut best, mut v) in scored.into_iter().take(8) {
        let mut step = 0.1;
        while step > 1e-13 {
            let mut improved = false;
            for k in 0..=n {
                for sign in [1.0, -1.0] {
                    let mut w = v.clone();
                    w[k] += sign * step;
                    let w = &w / w.norm();
                    let (_, d) = fixed_residual(f, &w)?;
                    if d < best {
                        best = d;
                        v = w;
                        improved = true;
                    }
                }
            }
            if best <= FIXED_POINT_TOL {
                return Ok(Some(project_chart(&v)));
            }
            if !improved {
                step /= 2.0;
            }
        }
    }
    Ok(None)
}

/// A rotation `A` such that `A ∘ f` has a fixed point: the identity if `f`
/// already has one, otherwise the rotation taking `f(p)` back to the probe
/// `p = ∞`.
pub fn fixing_rotation(f: &dyn PointMap, n: usize) -> Result<Rotation> {
    if find_fixed_point(f, n)?.is_some() {
        return Ok(Rotation::identity(n));
    }
    let p = Point::infinity(n);
    let a = rotation_from_points(&p, &f.apply(&p)?)?;
    let back = a.apply(&f.apply(&p)?);
    let err = chi_dist(&back, &p);
    if err > 1e-10 {
        return Err(Error::NonConvergence {
            best_residual: err,
            iterations: 0,
        });
    }
    Ok(a)
}

/// Splits a map without rotation part into its ball pieces `f = f² ∘ f¹`.
///
/// Pieces whose base is the identity are dropped. At most two pieces are
/// accepted, each supported on a spherical ball, and the map must be the
/// identity near some point; anything else needs the general interpolation
/// construction and is reported as out of scope.
pub fn split_supported(f: &SphereDiffeo) -> Result<Vec<(BallPiece, SphericalBall)>> {
    if !f.rotation.is_identity(1e-14) {
        return Err(Error::InvalidParameter(
            "split expects a map without rotation part".into(),
        ));
    }
    let mut out = Vec::new();
    for p in &f.pieces {
        if let Some(ball) = p.support_ball()? {
            out.push((p.clone(), ball));
        }
    }
    if out.len() > 2 {
        return Err(Error::OutOfScope(format!(
            "{} ball pieces; splitting into more than two requires Munkres interpolation",
            out.len()
        )));
    }
    // Some point must lie outside every ball: try the antipodes of the centres
    // and the coordinate points of the sphere model.
    let n = f.dim;
    let mut candidates: Vec<Point> = out
        .iter()
        .map(|(_, b)| project_chart(&-embed_unit_sphere(&b.center)))
        .collect();
    for i in 0..=n {
        candidates.push(project_chart(&linalg::unit(n + 1, i)));
        candidates.push(project_chart(&-linalg::unit(n + 1, i)));
    }
    let free = candidates.iter().any(|c| {
        out.iter()
            .all(|(_, b)| chi_dist(c, &b.center) > b.radius + 1e-9)
    });
    if !out.is_empty() && !free {
        return Err(Error::OutOfScope(
            "the ball supports cover the sample of the sphere; the map is not recognizably the identity near a point"
                .into(),
        ));
    }
    Ok(out)
}

/// Pipeline knobs.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineOptions {
    /// Sampled pairs per slice for the `L_lower` diagnostic.
    pub slice_pairs: usize,
    /// Points used for the composition residual.
    pub residual_samples: usize,
    pub seed: u64,
    pub newton: NewtonOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            slice_pairs: 32,
            residual_samples: 1000,
            seed: 7,
            newton: NewtonOptions::default(),
        }
    }
}

/// One conjugated path `pⁱ_t = gᵢ ∘ h_t ∘ gᵢ⁻¹`.
#[derive(Clone, Debug, Serialize)]
pub struct Leg {
    pub name: String,
    /// `gᵢ`, mapping `B_d(0, 1/3)` onto the piece's support ball.
    pub conjugation: MobiusMap,
    /// Scale of the affine part of `gᵢ`.
    pub scale: f64,
    pub bounds: PathBounds,
    #[serde(skip)]
    path: PropagatedMap,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    /// `gᵢ ∘ h_{t1} ∘ h_{t0}⁻¹ ∘ gᵢ⁻¹`.
    PathSlice {
        leg: usize,
        t0: f64,
        t1: f64,
        bound: SliceBound,
    },
    /// Rotation by `angle` in the plane `(u, v)` of the sphere model.
    RotationSlice {
        u: Vec<f64>,
        v: Vec<f64>,
        angle: f64,
        #[serde(skip)]
        rotation: Rotation,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorStep {
    #[serde(flatten)]
    pub kind: StepKind,
    pub certificate: DistortionCertificate,
}

/// `j(1)` rotation slices, `j(2)` slices of `p¹`, `j(3)` slices of `p²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub j1: usize,
    pub j2: usize,
    pub j3: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.j1 + self.j2 + self.j3
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Factorization {
    pub eps: f64,
    pub dim: usize,
    /// Factors in order of application.
    pub steps: Vec<FactorStep>,
    pub legs: Vec<Leg>,
    pub counts: Counts,
    /// `χ`-distance between the composed factors and `f` on sampled points.
    pub residual: f64,
    pub residual_samples: usize,
    /// A fixed point of `A ∘ f`.
    pub fixed_point: Option<Vec<f64>>,
    /// Angle of the rotation leg `A⁻¹`.
    pub rotation_angle: f64,
}

impl Factorization {
    pub fn factor_count(&self) -> usize {
        self.steps.len()
    }

    pub fn apply_step(&self, step: &FactorStep, x: &Point) -> Result<Point> {
        match &step.kind {
            StepKind::PathSlice { leg, t0, t1, .. } => {
                let l = &self.legs[*leg];
                let y = l.conjugation.apply_inverse(x);
                let z = match &y {
                    Point::Finite(v) => Point::Finite(l.path.transition_eval(*t1, *t0, v)?),
                    inf => inf.clone(),
                };
                Ok(l.conjugation.apply(&z))
            }
            StepKind::RotationSlice { rotation, .. } => Ok(rotation.apply(x)),
        }
    }

    /// `f_m ∘ … ∘ f_1 (x)`.
    pub fn apply(&self, x: &Point) -> Result<Point> {
        self.steps
            .iter()
            .try_fold(x.clone(), |y, s| self.apply_step(s, &y))
    }

    /// Region mixing uniform sphere points with the neighbourhoods of each leg's support.
    pub fn verification_region(&self) -> Region {
        let mut parts = vec![Region::Sphere { dim: self.dim }];
        for l in &self.legs {
            parts.push(Region::Pushforward {
                base: Box::new(Region::Ball {
                    center: Vector::zeros(self.dim),
                    radius: 0.4,
                }),
                map: l.conjugation.clone(),
            });
        }
        Region::Union(parts)
    }
}

impl PointMap for Factorization {
    fn apply(&self, x: &Point) -> Result<Point> {
        Factorization::apply(self, x)
    }
}

/// Chordal certificate of one rotation slice: an isometry with displacement `sin(|α|/2)`.
fn rotation_certificate(
    r: &Rotation,
    angle: f64,
    pairs: usize,
    seed: u64,
) -> Result<DistortionCertificate> {
    let n = r.dim();
    let sampler = PairSampler::new(Region::Sphere { dim: n }, pairs, seed).with_far_points();
    let mut c = certify::estimate_distortion(r, &sampler, Metric::Spherical)?;
    c.l_upper = Some(1.0);
    c.disp_upper = Some((angle.abs() / 2.0).sin());
    Ok(c)
}

/// Slices the rotation path from the identity to `A⁻¹` into
/// `⌈|θ|/(2ε)⌉` equal rotations, each moving points by at most `sin(θ/2k) ≤ ε`.
pub fn rotation_factors(
    a: &Rotation,
    eps: f64,
    pairs: usize,
    seed: u64,
) -> Result<Vec<FactorStep>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ε must be positive, got {eps}"
        )));
    }
    if a.is_identity(1e-15) {
        return Ok(Vec::new());
    }
    let target = a.inverse();
    let plane = target.plane().ok_or_else(|| {
        Error::InvalidParameter("rotation leg must be a single-plane rotation".into())
    })?;
    let theta = plane.angle.sin().atan2(plane.angle.cos());
    if theta == 0.0 {
        return Ok(Vec::new());
    }
    let k = (theta.abs() / (2.0 * eps)).ceil().max(1.0) as usize;
    let alpha = theta / k as f64;
    let slice = Rotation::in_plane(&plane.u, &plane.v, alpha)?;
    let cert = rotation_certificate(&slice, alpha, pairs, seed)?;
    Ok((0..k)
        .map(|_| FactorStep {
            kind: StepKind::RotationSlice {
                u: plane.u.iter().cloned().collect(),
                v: plane.v.iter().cloned().collect(),
                angle: alpha,
                rotation: slice.clone(),
            },
            certificate: cert.clone(),
        })
        .collect())
}

/// Smallest accepted step in the partition search.
pub const MIN_STEP: f64 = 1e-6;

/// Certified chordal bounds of the slice `[t, s]` of a leg conjugated by a
/// map whose affine part scales by `scale`.
pub fn slice_certificate_bound(b: &PathBounds, scale: f64, t: f64, s: f64) -> Option<SliceBound> {
    let th = pathcore::theoretical_bounds(b, s, t);
    certify::slice_bound(th.deriv, th.disp, scale)
}

/// Greedy partition `0 = t₁ < … < t_{j+1} = 1` of a conjugated path.
///
/// The first step inverts the displacement and derivative bounds for `ε`;
/// each step is accepted when its certified chordal distortion is at most
/// `1 + ε` and its chordal displacement at most `ε`, then the step grows by
/// 1.5. Failures halve the step; below [`MIN_STEP`] the search aborts.
pub fn partition_times(
    b: &PathBounds,
    scale: f64,
    eps: f64,
) -> Result<Vec<(f64, f64, SliceBound)>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ε must be positive, got {eps}"
        )));
    }
    let tt = b.t;
    let disp_rate = scale * tt * (tt + 1.0);
    let deriv_rate = b.eta_slope * tt * (tt * tt + tt + 1.0);
    let mut step = (eps / disp_rate)
        .min(if deriv_rate > 0.0 {
            eps / deriv_rate
        } else {
            1.0
        })
        .min(1.0);
    let mut t = 0.0;
    let mut out = Vec::new();
    while t < 1.0 {
        let s = if t + step >= 1.0 - 1e-15 {
            1.0
        } else {
            t + step
        };
        match slice_certificate_bound(b, scale, t, s) {
            Some(sb) if sb.xi <= eps && sb.disp_chi <= eps => {
                out.push((t, s, sb));
                t = s;
                step *= 1.5;
            }
            _ => {
                step /= 2.0;
                if step < MIN_STEP {
                    return Err(Error::StepUnderflow { t, step });
                }
            }
        }
    }
    Ok(out)
}

/// Partitions one leg and certifies every slice; slice diagnostics are
/// sampled in parallel after the partition is fixed.
pub fn partition_path(
    legs: &[Leg],
    leg: usize,
    eps: f64,
    pairs: usize,
    seed: u64,
) -> Result<Vec<FactorStep>> {
    let l = &legs[leg];
    if matches!(l.path.base().support(), Support::Empty) {
        return Ok(Vec::new());
    }
    let times = partition_times(&l.bounds, l.scale, eps)?;
    let n = l.path.dim();
    let region = Region::Pushforward {
        base: Box::new(pathcore::path_region(n)),
        map: l.conjugation.clone(),
    };
    times
        .into_par_iter()
        .enumerate()
        .map(|(k, (t0, t1, bound))| {
            let slice = FnMap(|x: &Point| {
                let y = l.conjugation.apply_inverse(x);
                let z = match &y {
                    Point::Finite(v) => Point::Finite(l.path.transition_eval(t1, t0, v)?),
                    inf => inf.clone(),
                };
                Ok(l.conjugation.apply(&z))
            });
            let sampler = PairSampler::new(region.clone(), pairs, seed.wrapping_add(k as u64))
                .with_far_points();
            let mut c = certify::estimate_distortion(&slice, &sampler, Metric::Spherical)?;
            c.l_upper = Some(1.0 + bound.xi);
            c.disp_upper = Some(bound.disp_chi);
            Ok(FactorStep {
                kind: StepKind::PathSlice { leg, t0, t1, bound },
                certificate: c,
            })
        })
        .collect()
}

/// Conjugates a ball piece to `B_d(0, 1/3)`: with `gᵢ = ball_normalizer(B)`,
/// `gᵢ⁻¹ ∘ M` is the similarity `x ↦ μx`, so the normalized chart map is
/// `x ↦ μ f(x/μ)`.
fn normalize_piece(
    piece: &BallPiece,
    ball: &SphericalBall,
    index: usize,
    opts: &PipelineOptions,
) -> Result<Leg> {
    let g = ball_normalizer(ball).at(Stage::Normalize)?;
    let split = g
        .affine_rotation_split()
        .ok_or_else(|| Error::InvalidParameter("normalizer is not of the form C ∘ B".into()))
        .at(Stage::Normalize)?;
    let mu = piece.placement.scale / split.scale;
    let local = piece
        .base
        .clone()
        .with_newton(opts.newton.clone())
        .conjugate_by_scale(mu)
        .at(Stage::Normalize)?;
    let path = pathcore::propagate(&local).at(Stage::Propagate)?;
    let bounds = pathcore::bounds(&path, 256, opts.seed);
    Ok(Leg {
        name: format!("p{}", index + 1),
        conjugation: g,
        scale: split.scale,
        bounds,
        path,
    })
}

/// Runs the full pipeline on `f` for the tolerance `ε`.
pub fn factorize_diffeo(
    f: &SphereDiffeo,
    eps: f64,
    opts: &PipelineOptions,
) -> Result<Factorization> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ε must be positive, got {eps}"
        )));
    }
    let n = f.dim();
    // A ∘ f = pieces: for f = R ∘ pieces take A = R⁻¹.
    let a = f.rotation.inverse();
    let af = SphereDiffeo {
        rotation: Rotation::identity(n),
        ..f.clone()
    };
    let fixed = find_fixed_point(&af, n).at(Stage::FixedPoint)?;
    if fixed.is_none() {
        return Err(
            Error::OutOfScope("A ∘ f has no detectable fixed point".into()).at(Stage::FixedPoint),
        );
    }
    let pieces = split_supported(&af).at(Stage::Split)?;
    let legs = pieces
        .iter()
        .enumerate()
        .map(|(i, (p, b))| normalize_piece(p, b, i, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut steps = Vec::new();
    let mut leg_counts = [0usize; 2];
    for i in 0..legs.len() {
        let s = partition_path(
            &legs,
            i,
            eps,
            opts.slice_pairs,
            opts.seed.wrapping_add(1000 * i as u64),
        )
        .at(Stage::Partition)?;
        leg_counts[i] = s.len();
        steps.extend(s);
    }
    let rot = rotation_factors(&a, eps, opts.slice_pairs, opts.seed).at(Stage::Rotation)?;
    let j1 = rot.len();
    let rotation_angle = rot.first().map_or(0.0, |s| match &s.kind {
        StepKind::RotationSlice { angle, .. } => angle * j1 as f64,
        _ => 0.0,
    });
    steps.extend(rot);

    let mut fac = Factorization {
        eps,
        dim: n,
        steps,
        legs,
        counts: Counts {
            j1,
            j2: leg_counts[0],
            j3: leg_counts[1],
        },
        residual: 0.0,
        residual_samples: opts.residual_samples,
        fixed_point: fixed.map(|p| embed_unit_sphere(&p).iter().cloned().collect()),
        rotation_angle,
    };
    fac.residual =
        composition_residual(f, &fac, opts.residual_samples, opts.seed).at(Stage::Verify)?;
    Ok(fac)
}

/// `max χ(F(x), f(x))` over seeded points, `F` the composed factors.
pub fn composition_residual(
    f: &SphereDiffeo,
    fac: &Factorization,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut pts = sampling::sample_points(&fac.verification_region(), samples, seed);
    pts.push(Point::infinity(f.dim()));
    let devs = pts
        .par_iter()
        .map(|x| Ok(chi_dist(&fac.apply(x)?, &f.eval_point(x))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub max_chi_deviation: f64,
    pub steps_checked: usize,
    /// Indices of steps whose certificate does not meet `1 + ε` and `ε`, or
    /// whose recorded bound does not match the recomputed one.
    pub failed_steps: Vec<usize>,
    pub passed: bool,
}

/// Deviation of the composed factors from `f` is accepted below this.
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Composes all steps at `samples` points, compares with `f` in `χ`, and
/// re-checks every step certificate.
pub fn verify_factorization(
    f: &SphereDiffeo,
    fac: &Factorization,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let max_chi_deviation = composition_residual(f, fac, samples, seed ^ 0xa5a5_a5a5)?;
    let mut failed_steps = Vec::new();
    for (i, step) in fac.steps.iter().enumerate() {
        let consistent = match &step.kind {
            StepKind::PathSlice { leg, t0, t1, bound } => {
                let l = &fac.legs[*leg];
                slice_certificate_bound(&l.bounds, l.scale, *t0, *t1).as_ref() == Some(bound)
                    && step.certificate.l_upper == Some(1.0 + bound.xi)
            }
            StepKind::RotationSlice {
                angle, rotation, ..
            } => {
                step.certificate.disp_upper == Some((angle.abs() / 2.0).sin())
                    && rotation.angle().is_some_and(|a| (a - angle).abs() < 1e-15)
            }
        };
        if !consistent || !step.certificate.passes(fac.eps) {
            failed_steps.push(i);
        }
    }
    Ok(VerificationReport {
        samples: samples + 1,
        max_chi_deviation,
        steps_checked: fac.steps.len(),
        passed: failed_steps.is_empty() && max_chi_deviation < RESIDUAL_TOL,
        failed_steps,
    })
}

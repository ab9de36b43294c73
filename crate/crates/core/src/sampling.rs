//! Seeded samplers for points and point pairs.
//!
//! Pair streams are prefix-stable: the first `k` pairs drawn for a seed do not
//! depend on how many pairs are requested, so max-type statistics computed on
//! the stream are monotone in the sample count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{embed_unit_sphere, project_chart, MobiusMap, Point};
use crate::linalg::Vector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform unit vector in `ℝᵐ`.
pub fn uniform_sphere_point<R: Rng>(rng: &mut R, m: usize) -> Vector {
    loop {
        let v = Vector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

pub fn uniform_ball<R: Rng>(rng: &mut R, center: &Vector, radius: f64) -> Vector {
    let n = center.len();
    let dir = uniform_sphere_point(rng, n);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    center + dir * r
}

/// Where sample points are drawn from.
#[derive(Clone, Debug)]
pub enum Region {
    /// Euclidean ball in the chart.
    Ball { center: Vector, radius: f64 },
    /// Shell `inner ≤ |x| ≤ outer` about the chart origin, uniform in `log |x|`.
    Annulus { dim: usize, inner: f64, outer: f64 },
    /// Axis-aligned box in the chart.
    Box { lo: Vector, hi: Vector },
    /// Uniform on `Sⁿ` (sphere model).
    Sphere { dim: usize },
    /// Image of another region under a Möbius map.
    Pushforward {
        base: std::boxed::Box<Region>,
        map: MobiusMap,
    },
    /// Each draw picks one component uniformly.
    Union(Vec<Region>),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Annulus { dim, .. } | Region::Sphere { dim } => *dim,
            Region::Box { lo, .. } => lo.len(),
            Region::Pushforward { base, .. } => base.dim(),
            Region::Union(parts) => parts.first().map(|p| p.dim()).unwrap_or(0),
        }
    }

    fn is_spherical(&self) -> bool {
        match self {
            Region::Sphere { .. } | Region::Pushforward { .. } => true,
            Region::Union(parts) => parts.iter().any(Region::is_spherical),
            _ => false,
        }
    }

    /// Characteristic length used for close pairs.
    fn scale(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } => *radius,
            Region::Annulus { outer, inner, .. } => outer - inner,
            Region::Box { lo, hi } => (hi - lo).norm(),
            Region::Sphere { .. } | Region::Pushforward { .. } | Region::Union(_) => 1.0,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point {
        match self {
            Region::Ball { center, radius } => Point::Finite(uniform_ball(rng, center, *radius)),
            Region::Annulus { dim, inner, outer } => {
                let dir = uniform_sphere_point(rng, *dim);
                let t: f64 = rng.random();
                let r = (inner.ln() + t * (outer.ln() - inner.ln())).exp();
                Point::Finite(dir * r)
            }
            Region::Box { lo, hi } => Point::Finite(Vector::from_fn(lo.len(), |i, _| {
                lo[i] + rng.random::<f64>() * (hi[i] - lo[i])
            })),
            Region::Sphere { dim } => project_chart(&uniform_sphere_point(rng, dim + 1)),
            Region::Pushforward { base, map } => map.apply(&base.sample(rng)),
            Region::Union(parts) => {
                let k = rng.random_range(0..parts.len());
                parts[k].sample(rng)
            }
        }
    }

    /// A point near `x`, at a log-uniform distance between `1e-5` and `1e-1`
    /// of the region scale. Points are perturbed in the sphere model when the
    /// region lives on the sphere, so that far chart points stay `χ`-close.
    fn perturb<R: Rng>(&self, rng: &mut R, x: &Point) -> Point {
        let t: f64 = rng.random();
        let size = 10f64.powf(-5.0 + 4.0 * t);
        match x {
            Point::Finite(a) if !self.is_spherical() => {
                let dir = uniform_sphere_point(rng, a.len());
                Point::Finite(a + dir * (size * self.scale()))
            }
            _ => {
                let v = embed_unit_sphere(x);
                let dir = uniform_sphere_point(rng, v.len());
                project_chart(&(v + dir * size))
            }
        }
    }
}

/// A prefix-stable stream of pairs over a region, optionally preceded by a
/// fixed block of pairs involving `∞` and the far shells `|x| ∈ {10, 10³}`.
#[derive(Clone, Debug)]
pub struct PairSampler {
    pub region: Region,
    pub pairs: usize,
    pub seed: u64,
    pub include_far: bool,
}

const FAR_PAIRS_PER_KIND: usize = 8;

impl PairSampler {
    pub fn new(region: Region, pairs: usize, seed: u64) -> Self {
        PairSampler {
            region,
            pairs,
            seed,
            include_far: false,
        }
    }

    pub fn with_far_points(mut self) -> Self {
        self.include_far = true;
        self
    }

    pub fn generate(&self) -> Vec<(Point, Point)> {
        let n = self.region.dim();
        let mut out = Vec::with_capacity(self.pairs + 4 * FAR_PAIRS_PER_KIND);
        if self.include_far {
            let mut far = rng(self.seed ^ 0x9e37_79b9_7f4a_7c15);
            for _ in 0..FAR_PAIRS_PER_KIND {
                out.push((Point::infinity(n), self.region.sample(&mut far)));
            }
            for shell in [10.0, 1e3] {
                for _ in 0..FAR_PAIRS_PER_KIND {
                    let p = Point::Finite(uniform_sphere_point(&mut far, n) * shell);
                    out.push((p, self.region.sample(&mut far)));
                }
                let p = Point::Finite(uniform_sphere_point(&mut far, n) * shell);
                out.push((Point::infinity(n), p));
            }
        }
        let mut r = rng(self.seed);
        let mut seen: Vec<Point> = Vec::with_capacity(self.pairs);
        for _ in 0..self.pairs {
            let x = self.region.sample(&mut r);
            let close: bool = r.random_bool(0.5);
            let y = if close || seen.is_empty() {
                self.region.perturb(&mut r, &x)
            } else {
                seen[r.random_range(0..seen.len())].clone()
            };
            seen.push(x.clone());
            out.push((x, y));
        }
        out
    }

    /// The distinct first coordinates of [`Self::generate`], used for displacement sampling.
    pub fn points(&self) -> Vec<Point> {
        self.generate().into_iter().map(|(x, _)| x).collect()
    }
}

/// `count` seeded points from a region.
pub fn sample_points(region: &Region, count: usize, seed: u64) -> Vec<Point> {
    let mut r = rng(seed);
    (0..count).map(|_| region.sample(&mut r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_stream_is_prefix_stable() {
        let region = Region::Ball {
            center: Vector::zeros(2),
            radius: 0.5,
        };
        let short = PairSampler::new(region.clone(), 50, 4)
            .with_far_points()
            .generate();
        let long = PairSampler::new(region, 500, 4)
            .with_far_points()
            .generate();
        assert_eq!(short[..], long[..short.len()]);
    }

    #[test]
    fn far_block_contains_infinity_and_shells() {
        let region = Region::Sphere { dim: 2 };
        let pairs = PairSampler::new(region, 0, 1).with_far_points().generate();
        assert!(pairs.iter().any(|(x, _)| x.is_infinite()));
        assert!(pairs
            .iter()
            .any(|(x, _)| x.as_finite().is_some_and(|v| (v.norm() - 1e3).abs() < 1e-9)));
    }

    #[test]
    fn annulus_samples_respect_radii() {
        let region = Region::Annulus {
            dim: 2,
            inner: 0.5,
            outer: 2.0,
        };
        for p in sample_points(&region, 200, 3) {
            let r = p.as_finite().unwrap().norm();
            assert!((0.5 - 1e-12..=2.0 + 1e-12).contains(&r));
        }
    }
}

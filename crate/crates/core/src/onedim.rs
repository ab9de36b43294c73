//! Factorization of bi-Lipschitz interval maps.
//!
//! An increasing C¹ map `f: [a, b] → ℝ` with `1/L ≤ f′ ≤ L` splits as
//! `f = f₂ ∘ f₁` with
//!
//! ```text
//! f₁(x) = ∫_{x₀}^{x} |f′(t)|^λ dt,   λ = log_L α,
//! ```
//!
//! so that `f₁′ = |f′|^λ ∈ [1/α, α]` and `f₂′ = f′/f₁′ ∈ [α/L, L/α]`. Peeling
//! repeatedly needs `N < log_α L + 1` factors.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolute tolerance for each cumulative quadrature table.
pub const QUADRATURE_TOL: f64 = 1e-10;
const TABLE_CELLS: usize = 256;

/// The user map `f` on `[a, b]` in its original coordinate `x`.
struct Base {
    a: f64,
    b: f64,
    eval: RealFn,
    derivative: RealFn,
}

/// A coordinate along the factorization, as a function of the original `x`.
///
/// Every intermediate coordinate has the form `φ_s(x) = ∫_{x₀}^{x} f′^s`, so a
/// factor from `φ_s` to `φ_u` has derivative `f′(x)^{u−s}` at `φ_s(x)`. This
/// keeps each evaluation to one inversion no matter how many factors are peeled.
#[derive(Clone)]
enum Coord {
    Identity,
    Primitive(Arc<Primitive>),
    Target,
}

impl Coord {
    fn exponent(&self) -> f64 {
        match self {
            Coord::Identity => 0.0,
            Coord::Primitive(p) => p.exponent,
            Coord::Target => 1.0,
        }
    }

    fn eval(&self, base: &Base, x: f64) -> f64 {
        match self {
            Coord::Identity => x,
            Coord::Primitive(p) => p.eval(x),
            Coord::Target => (base.eval)(x),
        }
    }

    fn invert(&self, base: &Base, y: f64) -> f64 {
        match self {
            Coord::Identity => y,
            Coord::Primitive(p) => p.invert(y),
            Coord::Target => {
                let x = 0.5 * (base.a + base.b);
                invert_monotone(&*base.eval, &*base.derivative, base.a, base.b, x, y)
            }
        }
    }
}

/// An increasing C¹ bi-Lipschitz map of an interval with a certified constant.
///
/// Internally the map is `to ∘ from⁻¹` for two coordinates of a base map.
#[derive(Clone)]
pub struct IntervalMap {
    base: Arc<Base>,
    from: Coord,
    to: Coord,
    lipschitz: f64,
}

impl fmt::Debug for IntervalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntervalMap")
            .field("domain", &self.domain())
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl IntervalMap {
    /// Builds a map from its evaluator, derivative and a certified `L`.
    ///
    /// The claim `1/L ≤ f′ ≤ L` is checked on a grid and rejected if violated.
    pub fn new(
        domain: (f64, f64),
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Result<IntervalMap> {
        let (a, b) = domain;
        if !(a < b) {
            return Err(Error::InvalidParameter(format!(
                "empty interval [{a}, {b}]"
            )));
        }
        if !(lipschitz >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bi-Lipschitz constant must be ≥ 1, got {lipschitz}"
            )));
        }
        let map = IntervalMap {
            base: Arc::new(Base {
                a,
                b,
                eval: Arc::new(eval),
                derivative: Arc::new(derivative),
            }),
            from: Coord::Identity,
            to: Coord::Target,
            lipschitz,
        };
        let (lo, hi) = map.derivative_range(1001);
        let slack = 1.0 + 1e-9;
        if !(lo * lipschitz * slack >= 1.0 && hi <= lipschitz * slack) {
            return Err(Error::InvalidParameter(format!(
                "derivative range [{lo}, {hi}] is not within [1/{lipschitz}, {lipschitz}]"
            )));
        }
        Ok(map)
    }

    /// `x ↦ x` on `[a, b]`.
    pub fn identity(a: f64, b: f64) -> Result<IntervalMap> {
        IntervalMap::new((a, b), |x| x, |_| 1.0, 1.0)
    }

    /// Polynomial `Σ cᵢ xⁱ` of degree at most 3. The derivative range is exact:
    /// `f′` is at most quadratic, so its extremes sit at the endpoints or at
    /// the root of `f″`.
    pub fn polynomial(coeffs: &[f64], a: f64, b: f64) -> Result<IntervalMap> {
        if coeffs.len() > 4 {
            return Err(Error::InvalidParameter(
                "polynomial interval maps support degree ≤ 3".into(),
            ));
        }
        let mut c = [0.0; 4];
        c[..coeffs.len()].copy_from_slice(coeffs);
        let f = move |x: f64| c[0] + x * (c[1] + x * (c[2] + x * c[3]));
        let df = move |x: f64| c[1] + x * (2.0 * c[2] + x * 3.0 * c[3]);
        let mut candidates = vec![a, b];
        if c[3] != 0.0 {
            let crit = -c[2] / (3.0 * c[3]);
            if a < crit && crit < b {
                candidates.push(crit);
            }
        }
        let values: Vec<f64> = candidates.iter().map(|&x| df(x)).collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(lo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "derivative must be positive, minimum is {lo}"
            )));
        }
        IntervalMap::new((a, b), f, df, hi.max(1.0 / lo))
    }

    pub fn domain(&self) -> (f64, f64) {
        (
            self.from.eval(&self.base, self.base.a),
            self.from.eval(&self.base, self.base.b),
        )
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, y: f64) -> f64 {
        let x = self.from.invert(&self.base, y);
        self.to.eval(&self.base, x)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let x = self.from.invert(&self.base, y);
        let d = (self.base.derivative)(x);
        d.powf(self.to.exponent() - self.from.exponent())
    }

    /// Minimum and maximum of `f′` on `n` equispaced nodes.
    pub fn derivative_range(&self, n: usize) -> (f64, f64) {
        let (a, b) = self.domain();
        let h = (b - a) / (n - 1) as f64;
        (0..n)
            .map(|i| self.derivative(a + h * i as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            })
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + adaptive_rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    adaptive_rec(f, a, fa, b, fb, m, fm, whole, tol, 40)
}

/// Solves `g(x) = y` for increasing `g` on `[lo, hi]`: Newton from `x`,
/// falling back to bisection whenever a step leaves the bracket.
fn invert_monotone(
    g: &dyn Fn(f64) -> f64,
    dg: &dyn Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    mut x: f64,
    y: f64,
) -> f64 {
    for _ in 0..200 {
        let r = g(x) - y;
        if r.abs() <= 1e-15 * y.abs().max(1.0) {
            break;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = x - r / dg(x);
        x = if step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// `x ↦ ∫_{x₀}^{x} f′^s` via a cumulative table of adaptive Simpson values.
struct Primitive {
    exponent: f64,
    a: f64,
    h: f64,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
    offset: f64,
    integrand: RealFn,
}

impl Primitive {
    fn new(base: &Base, exponent: f64, x0: f64) -> Primitive {
        let df = base.derivative.clone();
        let integrand: RealFn = Arc::new(move |t| df(t).abs().powf(exponent));
        let (a, b) = (base.a, base.b);
        let h = (b - a) / TABLE_CELLS as f64;
        let nodes: Vec<f64> = (0..=TABLE_CELLS).map(|i| a + h * i as f64).collect();
        let cell_tol = QUADRATURE_TOL / TABLE_CELLS as f64;
        let mut cumulative = vec![0.0];
        for w in nodes.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + adaptive_simpson(&*integrand, w[0], w[1], cell_tol));
        }
        let mut p = Primitive {
            exponent,
            a,
            h,
            nodes,
            cumulative,
            offset: 0.0,
            integrand,
        };
        p.offset = p.raw(x0);
        p
    }

    fn cell(&self, x: f64) -> usize {
        (((x - self.a) / self.h).floor().max(0.0) as usize).min(TABLE_CELLS - 1)
    }

    fn raw(&self, x: f64) -> f64 {
        let i = self.cell(x);
        self.cumulative[i]
            + adaptive_simpson(
                &*self.integrand,
                self.nodes[i],
                x,
                QUADRATURE_TOL / TABLE_CELLS as f64,
            )
    }

    fn eval(&self, x: f64) -> f64 {
        self.raw(x) - self.offset
    }

    /// Inverse by table lookup, then safeguarded Newton inside the cell.
    fn invert(&self, y: f64) -> f64 {
        let target = y + self.offset;
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&target)) {
            Ok(i) => return self.nodes[i],
            Err(i) => i.clamp(1, TABLE_CELLS) - 1,
        };
        let (lo, hi) = (self.nodes[i], self.nodes[i + 1]);
        let x = lo
            + (hi - lo) * (target - self.cumulative[i])
                / (self.cumulative[i + 1] - self.cumulative[i]);
        invert_monotone(
            &|x| self.raw(x),
            &*self.integrand,
            lo,
            hi,
            x.clamp(lo, hi),
            target,
        )
    }
}

/// Splits `f` into `(f₁, f₂)` with `f = f₂ ∘ f₁`, `f₁` α-bi-Lipschitz and
/// `f₂ = f ∘ f₁⁻¹` (L/α)-bi-Lipschitz.
///
/// `x0` is the base point of the integral; `None` takes the left endpoint.
/// A map with `L = 1` has `λ = 1` and any `α`.
pub fn factor_once(
    f: &IntervalMap,
    alpha: f64,
    x0: Option<f64>,
) -> Result<(IntervalMap, IntervalMap)> {
    let l = f.lipschitz;
    let trivial = l <= 1.0 + 1e-15;
    if !(alpha > 1.0) || (!trivial && alpha > l * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "need 1 < α ≤ L, got α = {alpha}, L = {l}"
        )));
    }
    let (a, b) = f.domain();
    let x0 = x0.unwrap_or(a);
    if !(a..=b).contains(&x0) {
        return Err(Error::InvalidParameter(format!(
            "base point {x0} outside [{a}, {b}]"
        )));
    }
    let lambda = if trivial {
        1.0
    } else {
        (alpha.ln() / l.ln()).min(1.0)
    };
    let (s_from, s_to) = (f.from.exponent(), f.to.exponent());
    let s_mid = s_from + lambda * (s_to - s_from);
    let x0_base = f.from.invert(&f.base, x0);
    let mid = Coord::Primitive(Arc::new(Primitive::new(&f.base, s_mid, x0_base)));
    let l1 = l.powf(lambda);
    let l2 = l.powf(1.0 - lambda);
    let f1 = IntervalMap {
        base: f.base.clone(),
        from: f.from.clone(),
        to: mid.clone(),
        lipschitz: l1,
    };
    let f2 = IntervalMap {
        base: f.base.clone(),
        from: mid,
        to: f.to.clone(),
        lipschitz: l2,
    };
    for (g, bound, which) in [(&f1, l1, "f₁"), (&f2, l2, "f₂")] {
        let (lo, hi) = g.derivative_range(257);
        let slack = 1.0 + 1e-9;
        if !(lo * bound * slack >= 1.0 && hi <= bound * slack) {
            return Err(Error::InvalidParameter(format!(
                "{which} derivative range [{lo}, {hi}] exceeds the certified constant {bound}"
            )));
        }
    }
    Ok((f1, f2))
}

/// Peels α-bi-Lipschitz factors until the remainder is α-bi-Lipschitz.
///
/// Returns the factors in order of application: `f = f_N ∘ … ∘ f₁`.
pub fn factor_full(f: &IntervalMap, alpha: f64) -> Result<Vec<IntervalMap>> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter(format!("need α > 1, got {alpha}")));
    }
    let mut factors = Vec::new();
    let mut rem = f.clone();
    while rem.lipschitz > alpha * (1.0 + 1e-12) {
        let (f1, f2) = factor_once(&rem, alpha, None)?;
        factors.push(f1);
        rem = f2;
    }
    factors.push(rem);
    Ok(factors)
}

/// `(f_N ∘ … ∘ f₁)(x)`.
pub fn compose_factors(factors: &[IntervalMap], x: f64) -> f64 {
    factors.iter().fold(x, |y, g| g.eval(y))
}

/// Per-factor summary for reports.
#[derive(Clone, Debug, Serialize)]
pub struct FactorSummary {
    pub index: usize,
    pub domain: (f64, f64),
    pub certified_l: f64,
    pub min_derivative: f64,
    pub max_derivative: f64,
}

pub fn summarize(factors: &[IntervalMap], grid: usize) -> Vec<FactorSummary> {
    factors
        .iter()
        .enumerate()
        .map(|(index, g)| {
            let (lo, hi) = g.derivative_range(grid);
            FactorSummary {
                index,
                domain: g.domain(),
                certified_l: g.lipschitz,
                min_derivative: lo,
                max_derivative: hi,
            }
        })
        .collect()
}

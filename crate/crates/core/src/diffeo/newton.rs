//! Damped Newton inversion with deterministic multistart.

use serde::Serialize;

use super::{SmoothMap, Support};
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NewtonOptions {
    /// Accepted residual `|f(x) − y|`.
    pub tol: f64,
    /// Iteration cap per seed.
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 60,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonSolution {
    pub x: Vector,
    pub iterations: usize,
    pub residual: f64,
}

/// Seeds after the initial guess `y`: the support center, then the center
/// displaced by half the radius along each axis.
fn seeds(f: &SmoothMap, y: &Vector) -> Vec<Vector> {
    let mut out = vec![y.clone()];
    if let Support::Ball { center, radius } = f.support() {
        out.push(center.clone());
        for i in 0..y.len() {
            let e = linalg::unit(y.len(), i) * (radius / 2.0);
            out.push(center + &e);
            out.push(center - &e);
        }
    }
    out
}

/// Runs damped Newton from one seed; returns the final iterate, its residual
/// and the iteration count.
fn run(f: &SmoothMap, y: &Vector, x0: Vector, opts: &NewtonOptions) -> NewtonSolution {
    let mut x = x0;
    let mut r = f.eval(&x) - y;
    let mut res = r.norm();
    let mut it = 0;
    while res > opts.tol && it < opts.max_iter {
        it += 1;
        let Some(dx) = linalg::solve(&f.jacobian(&x), &(-&r)) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-12 {
            let cand = &x + &dx * lambda;
            let rc = f.eval(&cand) - y;
            let rn = rc.norm();
            if rn < res {
                x = cand;
                r = rc;
                res = rn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    NewtonSolution {
        x,
        iterations: it,
        residual: res,
    }
}

/// Solves `f(x) = y` to `opts.tol`.
///
/// Starts from `x = y`; if that run stalls, retries from the support seeds.
/// Fails with [`Error::NonConvergence`] carrying the best residual seen.
pub fn newton_invert(f: &SmoothMap, y: &Vector, opts: &NewtonOptions) -> Result<NewtonSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Newton tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if f.support().excludes(y) {
        return Ok(NewtonSolution {
            x: y.clone(),
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut best: Option<NewtonSolution> = None;
    let mut total = 0;
    for seed in seeds(f, y) {
        let sol = run(f, y, seed, opts);
        total += sol.iterations;
        if sol.residual <= opts.tol {
            return Ok(NewtonSolution {
                iterations: total,
                ..sol
            });
        }
        if best.as_ref().is_none_or(|b| sol.residual < b.residual) {
            best = Some(sol);
        }
    }
    Err(Error::NonConvergence {
        best_residual: best.map_or(f64::INFINITY, |b| b.residual),
        iterations: total,
    })
}

/// Best iterate over all seeds, regardless of convergence.
pub(super) fn best_effort(f: &SmoothMap, y: &Vector, opts: &NewtonOptions) -> Vector {
    seeds(f, y)
        .into_iter()
        .map(|s| run(f, y, s, opts))
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .map(|s| s.x)
        .unwrap_or_else(|| y.clone())
}

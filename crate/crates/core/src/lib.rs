//! Constructive factorization of C¹ diffeomorphisms of the n-sphere into
//! bi-Lipschitz maps of small isometric distortion, with numerical
//! certificates for every bound used along the way.
//!
//! The sphere `Sⁿ = ℝⁿ ∪ {∞}` carries the chordal metric `χ`; maps are
//! given in the Euclidean chart and lifted to the sphere by fixing `∞`.
//!
//! Module map:
//!
//! - [`geometry`]: points, `χ`, rotations, Möbius words, ball normalization.
//! - [`diffeo`]: the smooth-map calculus and catalog maps with analytic bounds.
//! - [`onedim`]: explicit factorization of bi-Lipschitz interval maps.
//! - [`pathcore`]: the propagated map and the path `h_t` with its bounds.
//! - [`certify`]: sampled and derivative-based distortion certificates.
//! - [`factorize`]: the end-to-end sphere pipeline.
//! - [`spiralbounds`]: logarithmic spiral distortion and factor-count bounds.
//! - [`cli`]: configuration, orchestration and report emission.

pub mod certify;
pub mod cli;
pub mod diffeo;
pub mod error;
pub mod factorize;
pub mod geometry;
pub mod linalg;
pub mod onedim;
pub mod pathcore;
pub mod sampling;
pub mod spiralbounds;

pub use error::{Error, Result};
pub use geometry::{MobiusMap, Point, Rotation, SphericalBall};

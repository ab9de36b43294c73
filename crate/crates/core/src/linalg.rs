//! Small dense linear-algebra helpers shared by the chart calculus.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn unit(n: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(n);
    v[i] = 1.0;
    v
}

/// Largest and smallest singular values.
pub fn singular_range(m: &Matrix) -> (f64, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &Matrix) -> f64 {
    singular_range(m).0
}

/// `‖m − I‖` in operator norm.
pub fn dist_to_identity(m: &Matrix) -> f64 {
    let n = m.nrows();
    op_norm(&(m - Matrix::identity(n, n)))
}

pub fn inverse(m: &Matrix) -> Option<Matrix> {
    m.clone().try_inverse()
}

pub fn solve(m: &Matrix, b: &Vector) -> Option<Vector> {
    m.clone().lu().solve(b)
}

//! Closed-form 3x3 kernels. The position dimension is fixed at three, so
//! nothing here is iterative.

use nalgebra::{Matrix3, Vector3};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

/// Adjugate and determinant of a 3x3 matrix.
pub fn adjugate_det(m: &Mat3) -> (Mat3, f64) {
    let c00 = m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
    let c01 = m[(1, 2)] * m[(2, 0)] - m[(1, 0)] * m[(2, 2)];
    let c02 = m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)];
    let c10 = m[(0, 2)] * m[(2, 1)] - m[(0, 1)] * m[(2, 2)];
    let c11 = m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)];
    let c12 = m[(0, 1)] * m[(2, 0)] - m[(0, 0)] * m[(2, 1)];
    let c20 = m[(0, 1)] * m[(1, 2)] - m[(0, 2)] * m[(1, 1)];
    let c21 = m[(0, 2)] * m[(1, 0)] - m[(0, 0)] * m[(1, 2)];
    let c22 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let det = m[(0, 0)] * c00 + m[(0, 1)] * c01 + m[(0, 2)] * c02;
    // adj = transpose of the cofactor matrix
    let adj = Mat3::new(c00, c10, c20, c01, c11, c21, c02, c12, c22);
    (adj, det)
}

/// Inverse via adjugate / determinant; `None` when the determinant is zero.
pub fn inverse(m: &Mat3) -> Option<Mat3> {
    let (adj, det) = adjugate_det(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(adj / det)
}

/// Eigenvalues of a symmetric 3x3 matrix in ascending order (trigonometric
/// closed form).
pub fn sym_eigenvalues(a: &Mat3) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    if p1 == 0.0 {
        let mut d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        d.sort_by(|x, y| x.total_cmp(y));
        return d;
    }
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - Mat3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let middle = 3.0 * q - largest - smallest;
    [smallest, middle, largest]
}

/// Sum of the three principal 2x2 minors.
pub fn principal_minor_sum(m: &Mat3) -> f64 {
    (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        + (m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)])
        + (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)])
}

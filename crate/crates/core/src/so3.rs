//! Small helpers for 3×3 rotation matrices.

use nalgebra::{Matrix3, Vector3, SVD};

/// Input rotations must be orthonormal with unit determinant within this.
pub const ORTHONORMAL_TOL: f64 = 1e-5;

/// Largest deviation of `m` from a proper rotation: max of `|MᵀM − I|`
/// entries and `|det M − 1|`.
pub fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    let gram = m.transpose() * m - Matrix3::identity();
    let det_err = libm::fabs(m.determinant() - 1.0);
    gram.iter().fold(det_err, |acc, v| acc.max(libm::fabs(*v)))
}

pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    m.iter().all(|v| v.is_finite()) && orthonormality_error(m) <= tol
}

/// Nearest proper rotation in the Frobenius sense (polar projection).
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = SVD::new(*m, true, true);
    let (Some(mut u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Matrix3::identity();
    };
    if (u * v_t).determinant() < 0.0 {
        // flip the axis of the smallest singular value
        let (min_idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, s)| {
                if *s < best.1 {
                    (i, *s)
                } else {
                    best
                }
            });
        u.column_mut(min_idx).neg_mut();
    }
    u * v_t
}

/// Rotation by `angle` radians about a unit `axis` (Rodrigues).
pub fn axis_angle(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = axis.norm();
    if n == 0.0 {
        return Matrix3::identity();
    }
    let k = axis / n;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    let (s, c) = (libm::sin(angle), libm::cos(angle));
    Matrix3::identity() + kx * s + kx * kx * (1.0 - c)
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    axis_angle(Vector3::x(), angle)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    axis_angle(Vector3::y(), angle)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    axis_angle(Vector3::z(), angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn rz_quarter_turn_maps_x_to_y() {
        let r = rot_z(FRAC_PI_2);
        let v = r * Vector3::x();
        assert!((v - Vector3::y()).norm() < 1e-15);
        assert!(is_rotation(&r, 1e-12));
    }

    #[test]
    fn projection_repairs_perturbed_rotation() {
        let mut m = rot_x(0.3) * rot_y(-1.1);
        m[(0, 1)] += 1e-3;
        m[(2, 2)] *= 1.01;
        assert!(!is_rotation(&m, ORTHONORMAL_TOL));
        let r = project_to_rotation(&m);
        assert!(is_rotation(&r, 1e-12));
        assert!((r - m).norm() < 2e-2);
    }

    #[test]
    fn projection_fixes_reflections() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let r = project_to_rotation(&m);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_rotation_is_identity_map() {
        let r = rot_z(0.7) * rot_x(-0.2);
        assert!((project_to_rotation(&r) - r).norm() < 1e-12);
    }
}

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::{check_rotation, GroupElement, GroupId, LieGroup, ALGEBRA_TOL, BRANCH_MARGIN, SMALL_ANGLE};
use crate::error::{invalid, Error, Result};

/// Above this angle the rotation axis is recovered from the symmetric part of
/// `R`, which stays well conditioned near a half-turn.
const NEAR_PI: f64 = std::f64::consts::PI - 1e-2;

pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub(crate) fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `(sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3)`
pub(crate) fn rodrigues_coeffs(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        let half = (0.5 * theta).sin();
        (theta.sin() / theta, 2.0 * half * half / t2, (theta - theta.sin()) / (t2 * theta))
    }
}

pub(crate) fn exp_so3(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let (a, b, _) = rodrigues_coeffs(theta);
    let k = skew(w);
    Matrix3::identity() + k * a + k * k * b
}

/// Left Jacobian `V(w)`, mapping the translational twist part to the SE(3)
/// translation.
pub(crate) fn left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let (_, b, c) = rodrigues_coeffs(theta);
    let k = skew(w);
    Matrix3::identity() + k * b + k * k * c
}

pub(crate) fn left_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let coeff = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half * half.cos() / half.sin()) / (theta * theta)
    };
    let k = skew(w);
    Matrix3::identity() - k * 0.5 + k * k * coeff
}

/// Rotation angle in `[0, pi]` together with `vee(R - R^T) / 2 = sin(t) a`.
fn angle_and_skew(r: &Matrix3<f64>) -> (f64, Vector3<f64>) {
    let w = unskew(&(r - r.transpose())) * 0.5;
    let c = 0.5 * (r.trace() - 1.0);
    (w.norm().atan2(c), w)
}

/// Unit axis for angles near pi from `R + R^T = 2 cos(t) I + 2 (1 - cos t) a a^T`.
fn axis_near_pi(r: &Matrix3<f64>, theta: f64, w: &Vector3<f64>) -> Vector3<f64> {
    let c = theta.cos();
    let outer = ((r + r.transpose()) * 0.5 - Matrix3::identity() * c) / (1.0 - c);
    let i = (0..3)
        .max_by(|&a, &b| outer[(a, a)].total_cmp(&outer[(b, b)]))
        .unwrap_or(0);
    let mut axis = outer.column(i) / outer[(i, i)].max(0.0).sqrt();
    axis.normalize_mut();
    // The skew part carries the sign unless the rotation is an exact half-turn.
    if w.norm() > 1e-14 && axis.dot(w) < 0.0 {
        axis = -axis;
    }
    axis
}

pub(crate) fn log_so3(r: &Matrix3<f64>, strict: bool) -> Result<Vector3<f64>> {
    let (theta, w) = angle_and_skew(r);
    if strict && std::f64::consts::PI - theta < BRANCH_MARGIN {
        return Err(Error::BranchAmbiguity { angle: theta, margin: BRANCH_MARGIN });
    }
    if theta < SMALL_ANGLE {
        return Ok(w * (1.0 + theta * theta / 6.0));
    }
    if theta > NEAR_PI {
        return Ok(axis_near_pi(r, theta, &w) * theta);
    }
    Ok(w * (theta / w.norm()))
}

pub(crate) fn to_vec3(v: &DVector<f64>, offset: usize) -> Vector3<f64> {
    Vector3::new(v[offset], v[offset + 1], v[offset + 2])
}

/// Special orthogonal group SO(3); tangent coordinates are angular velocity.
#[derive(Clone, Copy, Debug, Default)]
pub struct So3;

impl So3 {
    pub fn element(r: Matrix3<f64>) -> GroupElement {
        GroupElement::new_unchecked(GroupId::SO3, DMatrix::from_column_slice(3, 3, r.as_slice()))
    }
}

impl LieGroup for So3 {
    fn id(&self) -> GroupId {
        GroupId::SO3
    }

    fn dim(&self) -> usize {
        3
    }

    fn matrix_size(&self) -> usize {
        3
    }

    fn hat(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_tangent(v)?;
        let k = skew(&to_vec3(v, 0));
        Ok(DMatrix::from_column_slice(3, 3, k.as_slice()))
    }

    fn vee(&self, m: &DMatrix<f64>) -> Result<DVector<f64>> {
        if m.nrows() != 3 || m.ncols() != 3 {
            return Err(invalid("so(3) matrix must be 3x3"));
        }
        let asym = (m + m.transpose()).amax();
        if asym > ALGEBRA_TOL {
            return Err(invalid(format!("matrix is not skew-symmetric (violation {asym:e})")));
        }
        Ok(DVector::from_vec(vec![m[(2, 1)], m[(0, 2)], m[(1, 0)]]))
    }

    fn exp(&self, v: &DVector<f64>) -> Result<GroupElement> {
        self.check_tangent(v)?;
        Ok(So3::element(exp_so3(&to_vec3(v, 0))))
    }

    fn log(&self, x: &GroupElement) -> Result<DVector<f64>> {
        self.check_member(x)?;
        let w = log_so3(&x.rotation(), true)?;
        Ok(DVector::from_column_slice(w.as_slice()))
    }

    fn log_resolved(&self, x: &GroupElement) -> Result<DVector<f64>> {
        self.check_member(x)?;
        let w = log_so3(&x.rotation(), false)?;
        Ok(DVector::from_column_slice(w.as_slice()))
    }

    fn adjoint(&self, x: &GroupElement) -> Result<DMatrix<f64>> {
        self.check_member(x)?;
        Ok(x.matrix().clone())
    }

    fn ad(&self, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.hat(xi)
    }

    fn validate(&self, x: &GroupElement) -> Result<()> {
        self.check_member(x)?;
        check_rotation(&x.rotation())
    }

    fn inverse(&self, a: &GroupElement) -> Result<GroupElement> {
        self.check_member(a)?;
        Ok(GroupElement::new_unchecked(GroupId::SO3, a.matrix().transpose()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn v3(x: f64, y: f64, z: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y, z])
    }

    #[test]
    fn hat_of_zero_is_zero() {
        assert_eq!(So3.hat(&v3(0.0, 0.0, 0.0)).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn hat_matches_cross_product_matrix() {
        let m = So3.hat(&v3(1.0, 2.0, 3.0)).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0]);
        assert_eq!(m, expected);
        assert_eq!(So3.vee(&m).unwrap(), v3(1.0, 2.0, 3.0));
    }

    #[test]
    fn hat_rejects_wrong_length() {
        assert!(matches!(So3.hat(&DVector::zeros(6)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn vee_rejects_non_skew() {
        let mut m = So3.hat(&v3(1.0, 2.0, 3.0)).unwrap();
        m[(0, 1)] += 1e-6;
        assert!(matches!(So3.vee(&m), Err(Error::InvalidArgument(_))));
        assert_eq!(So3.vee(&DMatrix::zeros(3, 3)).unwrap(), v3(0.0, 0.0, 0.0));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(So3.exp(&v3(0.0, 0.0, 0.0)).unwrap(), So3.identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = So3.exp(&v3(0.0, 0.0, FRAC_PI_2)).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((r.matrix() - &expected).amax() < 1e-15);
        let w = So3.log(&r).unwrap();
        assert!((w - v3(0.0, 0.0, FRAC_PI_2)).amax() < 1e-15);
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(So3.log(&So3.identity()).unwrap(), v3(0.0, 0.0, 0.0));
    }

    #[test]
    fn log_refuses_half_turn_but_resolved_log_picks_positive_axis() {
        let r = So3.exp(&v3(0.0, 0.0, PI)).unwrap();
        assert!(matches!(So3.log(&r), Err(Error::BranchAmbiguity { .. })));
        let w = So3.log_resolved(&r).unwrap();
        assert!((w - v3(0.0, 0.0, PI)).amax() < 1e-12);

        let exact = So3::element(Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0));
        let w = So3.log_resolved(&exact).unwrap();
        assert!((w - v3(0.0, 0.0, PI)).amax() < 1e-15);

        // Axis sign follows the skew part when it is resolvable.
        let r = So3.exp(&v3(0.0, -(PI - 1e-9), 0.0)).unwrap();
        let w = So3.log_resolved(&r).unwrap();
        assert!((w - v3(0.0, -(PI - 1e-9), 0.0)).amax() < 1e-8);
    }

    #[test]
    fn near_pi_log_is_accurate() {
        let axis = Vector3::new(0.3, -0.5, 0.8).normalize();
        for theta in [PI - 0.1, PI - 1e-3, PI - 1e-5] {
            let w = axis * theta;
            let r = exp_so3(&w);
            let back = log_so3(&r, true).unwrap();
            assert!((back - w).amax() < 1e-9, "theta {theta}");
        }
    }

    #[test]
    fn small_angle_matches_first_order() {
        let w = Vector3::new(1.0, -2.0, 0.5).normalize() * 1e-8;
        let r = exp_so3(&w);
        let first = Matrix3::identity() + skew(&w);
        assert!((r - first).amax() < 1e-15);
    }

    #[test]
    fn left_jacobian_inverse_is_inverse() {
        for w in [Vector3::new(0.1, 0.2, -0.3), Vector3::new(1.0, -2.0, 0.5), Vector3::new(1e-9, 0.0, 0.0)] {
            let prod = left_jacobian(&w) * left_jacobian_inv(&w);
            assert!((prod - Matrix3::identity()).amax() < 1e-12);
        }
    }
}

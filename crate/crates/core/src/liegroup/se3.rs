use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};

use super::so3::{exp_so3, left_jacobian, left_jacobian_inv, log_so3, skew, to_vec3};
use super::{check_rotation, GroupElement, GroupId, LieGroup, ALGEBRA_TOL};
use crate::error::{invalid, Result};

/// Special Euclidean group SE(3) in 4x4 homogeneous form.
///
/// Twists are ordered `[omega; v]`: angular velocity first, then linear
/// velocity, both in the body frame.
#[derive(Clone, Copy, Debug, Default)]
pub struct Se3;

impl Se3 {
    pub fn element(r: Matrix3<f64>, p: Vector3<f64>) -> GroupElement {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&p);
        GroupElement::new_unchecked(GroupId::SE3, DMatrix::from_column_slice(4, 4, m.as_slice()))
    }

    fn split(x: &GroupElement) -> (Matrix3<f64>, Vector3<f64>) {
        let m = x.matrix();
        (m.fixed_view::<3, 3>(0, 0).into_owned(), m.fixed_view::<3, 1>(0, 3).into_owned())
    }

    fn log_impl(&self, x: &GroupElement, strict: bool) -> Result<DVector<f64>> {
        self.check_member(x)?;
        let (r, p) = Self::split(x);
        let w = log_so3(&r, strict)?;
        let v = left_jacobian_inv(&w) * p;
        Ok(DVector::from_vec(vec![w.x, w.y, w.z, v.x, v.y, v.z]))
    }
}

fn block6(tl: &Matrix3<f64>, tr: &Matrix3<f64>, bl: &Matrix3<f64>, br: &Matrix3<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(6, 6);
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(tl);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(tr);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(bl);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(br);
    m
}

impl LieGroup for Se3 {
    fn id(&self) -> GroupId {
        GroupId::SE3
    }

    fn dim(&self) -> usize {
        6
    }

    fn matrix_size(&self) -> usize {
        4
    }

    fn hat(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_tangent(v)?;
        let mut m = DMatrix::zeros(4, 4);
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&to_vec3(v, 0)));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&to_vec3(v, 3));
        Ok(m)
    }

    fn vee(&self, m: &DMatrix<f64>) -> Result<DVector<f64>> {
        if m.nrows() != 4 || m.ncols() != 4 {
            return Err(invalid("se(3) matrix must be 4x4"));
        }
        let rot = m.fixed_view::<3, 3>(0, 0);
        let asym = (rot + rot.transpose()).amax();
        let bottom = m.row(3).amax();
        if asym > ALGEBRA_TOL || bottom > ALGEBRA_TOL {
            return Err(invalid(format!(
                "matrix is not in se(3) (skew violation {asym:e}, bottom row {bottom:e})"
            )));
        }
        Ok(DVector::from_vec(vec![m[(2, 1)], m[(0, 2)], m[(1, 0)], m[(0, 3)], m[(1, 3)], m[(2, 3)]]))
    }

    fn exp(&self, v: &DVector<f64>) -> Result<GroupElement> {
        self.check_tangent(v)?;
        let w = to_vec3(v, 0);
        let r = exp_so3(&w);
        let p = left_jacobian(&w) * to_vec3(v, 3);
        Ok(Se3::element(r, p))
    }

    fn log(&self, x: &GroupElement) -> Result<DVector<f64>> {
        self.log_impl(x, true)
    }

    fn log_resolved(&self, x: &GroupElement) -> Result<DVector<f64>> {
        self.log_impl(x, false)
    }

    fn adjoint(&self, x: &GroupElement) -> Result<DMatrix<f64>> {
        self.check_member(x)?;
        let (r, p) = Self::split(x);
        Ok(block6(&r, &Matrix3::zeros(), &(skew(&p) * r), &r))
    }

    fn ad(&self, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_tangent(xi)?;
        let w = skew(&to_vec3(xi, 0));
        let v = skew(&to_vec3(xi, 3));
        Ok(block6(&w, &Matrix3::zeros(), &v, &w))
    }

    fn validate(&self, x: &GroupElement) -> Result<()> {
        self.check_member(x)?;
        let m = x.matrix();
        if m[(3, 0)] != 0.0 || m[(3, 1)] != 0.0 || m[(3, 2)] != 0.0 || m[(3, 3)] != 1.0 {
            return Err(invalid("SE(3) element bottom row must be [0 0 0 1]"));
        }
        check_rotation(&x.rotation())
    }

    fn inverse(&self, a: &GroupElement) -> Result<GroupElement> {
        self.check_member(a)?;
        let (r, p) = Self::split(a);
        let rt = r.transpose();
        Ok(Se3::element(rt, -(rt * p)))
    }
}

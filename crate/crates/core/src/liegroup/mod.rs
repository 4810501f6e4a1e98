//! Matrix Lie groups.
//!
//! A group is used through the object-safe [`LieGroup`] trait so the solver can
//! be handed any registered group at runtime. Elements are plain square
//! matrices tagged with the id of the group they belong to; tangent vectors
//! are `DVector<f64>` of length [`LieGroup::dim`].
//!
//! Two groups ship: [`So3`] (n = 3) and [`Se3`] (n = 6, twists ordered
//! `[omega; v]`).

mod euler;
mod se3;
mod so3;

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{invalid, Error, Result};

pub use euler::{euler_xyz, euler_xyz_lenient, rot_x_deg, rot_y_deg, rot_z_deg, rotation_from_euler_xyz_deg};
pub use se3::Se3;
pub use so3::{skew, So3};

/// Tolerance on `R^T R = I` and `det R = 1` for a valid rotation block.
pub const ROTATION_TOL: f64 = 1e-9;
/// Skew-symmetry tolerance used by `vee`.
pub const ALGEBRA_TOL: f64 = 1e-8;
/// Principal-branch margin: `log` refuses rotations closer than this to pi.
pub const BRANCH_MARGIN: f64 = 1e-6;
/// Below this rotation angle the sinc-like coefficients switch to Taylor series.
pub const SMALL_ANGLE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupId(pub &'static str);

impl GroupId {
    pub const SO3: GroupId = GroupId("SO3");
    pub const SE3: GroupId = GroupId("SE3");
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

/// A configuration on some matrix Lie group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    group: GroupId,
    matrix: DMatrix<f64>,
}

impl GroupElement {
    /// Wraps a matrix without checking group membership. Use
    /// [`LieGroup::validate`] when the matrix comes from outside.
    pub fn new_unchecked(group: GroupId, matrix: DMatrix<f64>) -> Self {
        Self { group, matrix }
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Top-left 3x3 block (the rotation for SO(3) and SE(3)).
    pub fn rotation(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Translation column of a 4x4 homogeneous element.
    pub fn translation(&self) -> Option<Vector3<f64>> {
        (self.matrix.nrows() == 4).then(|| self.matrix.fixed_view::<3, 1>(0, 3).into_owned())
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|v| v.is_finite())
    }
}

/// Generic matrix Lie group behaviour.
///
/// Implementations must be pure: every method is a function of its arguments.
pub trait LieGroup: Send + Sync + fmt::Debug {
    fn id(&self) -> GroupId;

    /// Dimension `n` of the algebra.
    fn dim(&self) -> usize;

    /// Side length of the matrix representation.
    fn matrix_size(&self) -> usize;

    fn hat(&self, v: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn vee(&self, m: &DMatrix<f64>) -> Result<DVector<f64>>;

    fn exp(&self, v: &DVector<f64>) -> Result<GroupElement>;

    /// Principal logarithm. Fails with [`Error::BranchAmbiguity`] when the
    /// rotation angle is within [`BRANCH_MARGIN`] of pi.
    fn log(&self, x: &GroupElement) -> Result<DVector<f64>>;

    /// Logarithm that is total on valid elements. Agrees with [`LieGroup::log`]
    /// wherever that succeeds; at a half-turn the rotation axis sign is taken
    /// from the skew part when it is resolvable and otherwise chosen so the
    /// largest-magnitude axis component is positive.
    fn log_resolved(&self, x: &GroupElement) -> Result<DVector<f64>>;

    /// Matrix of the adjoint action, `hat(Ad_X v) = X hat(v) X^-1`.
    fn adjoint(&self, x: &GroupElement) -> Result<DMatrix<f64>>;

    /// Matrix of the algebra adjoint, `hat(ad_xi eta) = [hat(xi), hat(eta)]`.
    fn ad(&self, xi: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn coad(&self, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.ad(xi)?.transpose())
    }

    /// Left Jacobian `sum_k ad_v^k / (k+1)!`, so that
    /// `exp(v + dv) ~ exp(J_l dv) exp(v)`. Evaluated as a block of the
    /// exponential of `[[ad_v, I], [0, 0]]`.
    fn left_jacobian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut aug = DMatrix::zeros(2 * n, 2 * n);
        aug.view_mut((0, 0), (n, n)).copy_from(&self.ad(v)?);
        aug.view_mut((0, n), (n, n)).fill_with_identity();
        Ok(aug.exp().view((0, n), (n, n)).into_owned())
    }

    /// `J_r(v) = J_l(-v)`, so that `exp(v + dv) ~ exp(v) exp(J_r dv)` and
    /// `log(exp(v) exp(e)) ~ v + J_r(v)^-1 e`.
    fn right_jacobian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.left_jacobian(&-v)
    }

    /// Checks group membership invariants.
    fn validate(&self, x: &GroupElement) -> Result<()>;

    fn identity(&self) -> GroupElement {
        let k = self.matrix_size();
        GroupElement::new_unchecked(self.id(), DMatrix::identity(k, k))
    }

    fn compose(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.check_member(a)?;
        self.check_member(b)?;
        Ok(GroupElement::new_unchecked(self.id(), &a.matrix * &b.matrix))
    }

    fn inverse(&self, a: &GroupElement) -> Result<GroupElement> {
        self.check_member(a)?;
        let inv = a
            .matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular group element".into()))?;
        Ok(GroupElement::new_unchecked(self.id(), inv))
    }

    /// `a^-1 b`, the right-trivialized difference used for error states.
    fn between(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.compose(&self.inverse(a)?, b)
    }

    /// Tag and shape check only; see [`LieGroup::validate`] for the full check.
    fn check_member(&self, x: &GroupElement) -> Result<()> {
        if x.group != self.id() {
            return Err(invalid(format!("element of {} used with {}", x.group, self.id())));
        }
        let k = self.matrix_size();
        if x.matrix.nrows() != k || x.matrix.ncols() != k {
            return Err(invalid(format!(
                "{} element must be {k}x{k}, got {}x{}",
                self.id(),
                x.matrix.nrows(),
                x.matrix.ncols()
            )));
        }
        Ok(())
    }

    fn check_tangent(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(invalid(format!(
                "{} tangent vector must have length {}, got {}",
                self.id(),
                self.dim(),
                v.len()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    let ortho = (r.transpose() * r - Matrix3::identity()).norm();
    if !ortho.is_finite() || ortho > ROTATION_TOL {
        return Err(invalid(format!("rotation block is not orthonormal (|R^T R - I| = {ortho:e})")));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOL {
        return Err(invalid(format!("rotation block has determinant {det}")));
    }
    Ok(())
}

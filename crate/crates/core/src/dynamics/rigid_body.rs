use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use super::{LinearizedTwist, TwistModel};
use crate::error::{invalid, Result};
use crate::liegroup::{skew, GroupId, LieGroup, Se3};

#[derive(Clone, Debug, PartialEq)]
pub struct RigidBodyParams {
    inertia: Matrix3<f64>,
    mass: f64,
}

impl RigidBodyParams {
    /// Body-frame inertia must be symmetric positive definite, mass positive.
    pub fn new(inertia: Matrix3<f64>, mass: f64) -> Result<Self> {
        if (inertia - inertia.transpose()).amax() > 1e-12 {
            return Err(invalid("inertia must be symmetric"));
        }
        let min_eig = SymmetricEigen::new(inertia).eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(invalid(format!("inertia must be positive definite (min eigenvalue {min_eig})")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(invalid(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { inertia, mass })
    }

    pub fn inertia(&self) -> &Matrix3<f64> {
        &self.inertia
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `J_b = blockdiag(I_b, m I_3)`.
    pub fn generalized_inertia(&self) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(6, 6);
        j.view_mut((0, 0), (3, 3)).copy_from(&self.inertia);
        j.view_mut((3, 3), (3, 3)).fill_diagonal(self.mass);
        j
    }

    fn generalized_inertia_inv(&self) -> DMatrix<f64> {
        let inv = self.inertia.try_inverse().expect("inertia validated as positive definite");
        let mut j = DMatrix::zeros(6, 6);
        j.view_mut((0, 0), (3, 3)).copy_from(&inv);
        j.view_mut((3, 3), (3, 3)).fill_diagonal(1.0 / self.mass);
        j
    }
}

fn split(xi: &DVector<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (Vector3::new(xi[0], xi[1], xi[2]), Vector3::new(xi[3], xi[4], xi[5]))
}

fn check_six(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.len() != 6 {
        return Err(invalid(format!("{what} must have length 6, got {}", v.len())));
    }
    Ok(())
}

/// Forced Euler-Poincare dynamics `J_b dxi/dt = ad*_xi J_b xi + u`.
pub fn twist_derivative(params: &RigidBodyParams, xi: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_six(xi, "twist")?;
    check_six(u, "input")?;
    let (w, v) = split(xi);
    let (tau, force) = split(u);
    let i_inv = params.inertia.try_inverse().expect("inertia validated as positive definite");
    let dw = i_inv * ((params.inertia * w).cross(&w) + tau);
    let dv = v.cross(&w) + force / params.mass;
    Ok(DVector::from_vec(vec![dw.x, dw.y, dw.z, dv.x, dv.y, dv.z]))
}

/// `[[(I_b w)^, m v^], [m v^, 0]]`, the derivative of `ad*_(.) J_b xi`.
fn momentum_block(params: &RigidBodyParams, xi: &DVector<f64>) -> DMatrix<f64> {
    let (w, v) = split(xi);
    let hw = skew(&(params.inertia * w));
    let hv = skew(&(v * params.mass));
    let mut m = DMatrix::zeros(6, 6);
    m.view_mut((0, 0), (3, 3)).copy_from(&hw);
    m.view_mut((0, 3), (3, 3)).copy_from(&hv);
    m.view_mut((3, 0), (3, 3)).copy_from(&hv);
    m
}

pub fn linearize_twist(params: &RigidBodyParams, xi: &DVector<f64>) -> Result<LinearizedTwist> {
    check_six(xi, "twist")?;
    let j = params.generalized_inertia();
    let j_inv = params.generalized_inertia_inv();
    let coad = Se3.coad(xi)?;
    let mom = momentum_block(params, xi);
    let gamma = &j_inv * coad * &j + &j_inv * &mom;
    let b = -(&j_inv * &mom * xi);
    Ok(LinearizedTwist { gamma, lambda: j_inv, b })
}

/// Fully actuated rigid body on SE(3) with body-frame wrench input
/// `[torque; force]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidBody {
    params: RigidBodyParams,
    /// Constant body wrench added to every input; `None` reproduces the
    /// unforced Euler-Poincare model.
    bias: Option<DVector<f64>>,
}

impl RigidBody {
    pub fn new(params: RigidBodyParams) -> Self {
        Self { params, bias: None }
    }

    pub fn with_bias_wrench(mut self, wrench: DVector<f64>) -> Result<Self> {
        check_six(&wrench, "bias wrench")?;
        self.bias = Some(wrench);
        Ok(self)
    }

    pub fn params(&self) -> &RigidBodyParams {
        &self.params
    }
}

impl TwistModel for RigidBody {
    fn name(&self) -> &'static str {
        "rigid_body"
    }

    fn group(&self) -> GroupId {
        GroupId::SE3
    }

    fn twist_dim(&self) -> usize {
        6
    }

    fn input_dim(&self) -> usize {
        6
    }

    fn twist_derivative(&self, xi: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.bias {
            Some(w) => {
                check_six(u, "input")?;
                twist_derivative(&self.params, xi, &(u + w))
            }
            None => twist_derivative(&self.params, xi, u),
        }
    }

    fn linearize(&self, xi: &DVector<f64>, _u: &DVector<f64>) -> Result<LinearizedTwist> {
        let mut lin = linearize_twist(&self.params, xi)?;
        if let Some(w) = &self.bias {
            lin.b += &lin.lambda * w;
        }
        Ok(lin)
    }
}

/// Free rotor on SO(3): `I_b dw/dt = I_b w x w + tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidRotor {
    inertia: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
}

impl RigidRotor {
    pub fn new(params: &RigidBodyParams) -> Self {
        let inertia = *params.inertia();
        Self { inertia, inertia_inv: inertia.try_inverse().expect("inertia validated as positive definite") }
    }
}

fn to_dmatrix(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

impl TwistModel for RigidRotor {
    fn name(&self) -> &'static str {
        "rigid_rotor"
    }

    fn group(&self) -> GroupId {
        GroupId::SO3
    }

    fn twist_dim(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        3
    }

    fn twist_derivative(&self, xi: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        if xi.len() != 3 || u.len() != 3 {
            return Err(invalid("rotor twist and input must have length 3"));
        }
        let w = Vector3::new(xi[0], xi[1], xi[2]);
        let tau = Vector3::new(u[0], u[1], u[2]);
        let dw = self.inertia_inv * ((self.inertia * w).cross(&w) + tau);
        Ok(DVector::from_column_slice(dw.as_slice()))
    }

    fn linearize(&self, xi: &DVector<f64>, _u: &DVector<f64>) -> Result<LinearizedTwist> {
        if xi.len() != 3 {
            return Err(invalid("rotor twist must have length 3"));
        }
        let w = Vector3::new(xi[0], xi[1], xi[2]);
        let mom = skew(&(self.inertia * w));
        let gamma = self.inertia_inv * (-skew(&w) * self.inertia + mom);
        let b = -(self.inertia_inv * mom * w);
        Ok(LinearizedTwist {
            gamma: to_dmatrix(&gamma),
            lambda: to_dmatrix(&self.inertia_inv),
            b: DVector::from_column_slice(b.as_slice()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> RigidBodyParams {
        RigidBodyParams::new(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)), 1.5).unwrap()
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(RigidBodyParams::new(Matrix3::identity(), 0.0).is_err());
        assert!(RigidBodyParams::new(-Matrix3::identity(), 1.0).is_err());
        let mut asym = Matrix3::identity();
        asym[(0, 1)] = 0.1;
        assert!(RigidBodyParams::new(asym, 1.0).is_err());
    }

    #[test]
    fn rest_is_equilibrium() {
        let z = DVector::zeros(6);
        assert_eq!(twist_derivative(&params(), &z, &z).unwrap(), z);
    }

    #[test]
    fn pure_forcing_at_rest() {
        let p = params();
        let z = DVector::zeros(6);
        for i in 0..6 {
            let mut u = DVector::zeros(6);
            u[i] = 1.0;
            let d = twist_derivative(&p, &z, &u).unwrap();
            let expected = p.generalized_inertia_inv().column(i).into_owned();
            assert!((d - expected).amax() < 1e-15);
        }
    }

    #[test]
    fn matches_coadjoint_matrix_form() {
        let p = params();
        let xi = DVector::from_vec(vec![0.4, -0.3, 1.1, 0.2, 0.9, -0.7]);
        let u = DVector::from_vec(vec![0.1, 0.2, 0.3, -0.4, 0.5, -0.6]);
        let j = p.generalized_inertia();
        let expected = p.generalized_inertia_inv() * (Se3.coad(&xi).unwrap() * &j * &xi + &u);
        assert!((twist_derivative(&p, &xi, &u).unwrap() - expected).amax() < 1e-14);
    }

    #[test]
    fn linearization_at_rest() {
        let p = params();
        let lin = linearize_twist(&p, &DVector::zeros(6)).unwrap();
        assert_eq!(lin.gamma, DMatrix::zeros(6, 6));
        assert_eq!(lin.b, DVector::zeros(6));
        assert_eq!(lin.lambda, p.generalized_inertia_inv());
    }

    #[test]
    fn bias_wrench_shifts_input() {
        let p = params();
        let bias = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.0, -9.81 * 1.5]);
        let model = RigidBody::new(p.clone()).with_bias_wrench(bias.clone()).unwrap();
        let z = DVector::zeros(6);
        let d = model.twist_derivative(&z, &z).unwrap();
        assert!((d[5] + 9.81).abs() < 1e-12);
        assert!(RigidBody::new(p).with_bias_wrench(DVector::zeros(3)).is_err());
    }

    #[test]
    fn rotor_agrees_with_rigid_body_rotation_block() {
        let p = params();
        let rotor = RigidRotor::new(&p);
        let xi6 = DVector::from_vec(vec![0.4, -0.3, 1.1, 0.0, 0.0, 0.0]);
        let xi3 = DVector::from_vec(vec![0.4, -0.3, 1.1]);
        let lin6 = linearize_twist(&p, &xi6).unwrap();
        let lin3 = rotor.linearize(&xi3, &DVector::zeros(3)).unwrap();
        assert!((lin6.gamma.view((0, 0), (3, 3)) - &lin3.gamma).amax() < 1e-14);
        let d6 = twist_derivative(&p, &xi6, &DVector::zeros(6)).unwrap();
        let d3 = rotor.twist_derivative(&xi3, &DVector::zeros(3)).unwrap();
        assert!((d6.rows(0, 3) - d3).amax() < 1e-15);
    }
}

//! Equations of motion on the tangent bundle and their error-state
//! linearization.
//!
//! The configuration evolves as `dX/dt = X hat(xi)` and the twist as
//! `dxi/dt = f(xi, u)`, where `f` is supplied by a [`TwistModel`].

mod discretize;
mod rigid_body;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::liegroup::{GroupElement, GroupId, LieGroup};

pub use discretize::{Discretizer, Euler, SemiImplicit, ZeroOrderHold};
pub use rigid_body::{linearize_twist, twist_derivative, RigidBody, RigidBodyParams, RigidRotor};

/// Twists with any component above this magnitude abort a rollout.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Twist dynamics `f(xi, u)` for a system evolving on a matrix Lie group.
pub trait TwistModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Group the configuration lives on.
    fn group(&self) -> GroupId;

    fn twist_dim(&self) -> usize;

    fn input_dim(&self) -> usize;

    fn twist_derivative(&self, xi: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// Jacobians of `f` about `(xi, u)`.
    fn linearize(&self, xi: &DVector<f64>, u: &DVector<f64>) -> Result<LinearizedTwist>;
}

/// `dxi/dt ~ gamma xi + lambda u + b` about a nominal twist.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedTwist {
    pub gamma: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    /// Affine drift. Reported for diagnostics only: the error-state model
    /// is linear about the nominal and carries no drift term.
    pub b: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub config: GroupElement,
    pub twist: DVector<f64>,
}

impl State {
    pub fn new(config: GroupElement, twist: DVector<f64>) -> Self {
        Self { config, twist }
    }

    pub fn at_rest(group: &dyn LieGroup, config: GroupElement) -> Self {
        Self { config, twist: DVector::zeros(group.dim()) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub inputs: Vec<DVector<f64>>,
    pub dt: f64,
}

impl Trajectory {
    /// Number of control steps `N`.
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn check(&self, group: &dyn LieGroup) -> Result<()> {
        if self.states.len() != self.inputs.len() + 1 {
            return Err(invalid(format!(
                "trajectory has {} states for {} inputs",
                self.states.len(),
                self.inputs.len()
            )));
        }
        for s in &self.states {
            group.validate(&s.config)?;
            group.check_tangent(&s.twist)?;
        }
        Ok(())
    }
}

/// Continuous (or discretized) error-state system `x' = A x + B u` with
/// `x = [psi; dxi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Step used for discretization, `None` for the continuous form.
    pub dt: Option<f64>,
}

impl PerturbedSystem {
    pub fn is_discretized(&self) -> bool {
        self.dt.is_some()
    }
}

/// Assembles `A = [[-ad_xi, I], [0, gamma]]`, `B = [[0], [lambda]]`.
pub fn perturbed_system(group: &dyn LieGroup, xi: &DVector<f64>, lin: &LinearizedTwist) -> Result<PerturbedSystem> {
    let n = group.dim();
    let m = lin.lambda.ncols();
    if lin.gamma.shape() != (n, n) || lin.lambda.nrows() != n {
        return Err(invalid("linearization does not match the group dimension"));
    }
    let ad = group.ad(xi)?;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&(-ad));
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, n), (n, n)).copy_from(&lin.gamma);
    let mut b = DMatrix::zeros(2 * n, m);
    b.view_mut((n, 0), (n, m)).copy_from(&lin.lambda);
    Ok(PerturbedSystem { a, b, dt: None })
}

/// Divergence guard applied to every rolled-out state.
pub fn check_finite(xi: &DVector<f64>, config: &GroupElement, step: usize) -> Result<()> {
    let bad = xi.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT);
    if bad || !config.is_finite() {
        return Err(Error::Divergence { step });
    }
    Ok(())
}

/// One explicit step: `xi' = xi + f(xi, u) dt`, then `X' = X exp(xi' dt)`.
pub fn step(
    group: &dyn LieGroup,
    model: &dyn TwistModel,
    state: &State,
    u: &DVector<f64>,
    dt: f64,
) -> Result<State> {
    let twist = &state.twist + model.twist_derivative(&state.twist, u)? * dt;
    let config = group.compose(&state.config, &group.exp(&(&twist * dt))?)?;
    Ok(State { config, twist })
}

/// Integrates from `x0` under `inputs`, advancing the configuration with the
/// freshly updated twist.
pub fn rollout(
    group: &dyn LieGroup,
    model: &dyn TwistModel,
    x0: &State,
    inputs: &[DVector<f64>],
    dt: f64,
) -> Result<Trajectory> {
    if inputs.is_empty() {
        return Err(invalid("rollout needs at least one input"));
    }
    if !(dt > 0.0) {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    check_finite(&x0.twist, &x0.config, 0)?;
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(x0.clone());
    for (k, u) in inputs.iter().enumerate() {
        let next = step(group, model, &states[k], u, dt)?;
        check_finite(&next.twist, &next.config, k + 1)?;
        states.push(next);
    }
    Ok(Trajectory { states, inputs: inputs.to_vec(), dt })
}

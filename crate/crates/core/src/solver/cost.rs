use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::constraints::{penalty_matrix, ConstraintSet, Knot, MultiplierState};
use crate::dynamics::{State, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::liegroup::LieGroup;

/// Quadratic weights on the goal error `[psi; dxi]` and on the input.
#[derive(Clone, Debug, PartialEq)]
pub struct CostWeights {
    s_v: DMatrix<f64>,
    s_q: DMatrix<f64>,
    s_u: DMatrix<f64>,
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<f64> {
    if !m.is_square() {
        return Err(invalid(format!("{name} must be square")));
    }
    if (m - m.transpose()).amax() > 1e-12 {
        return Err(invalid(format!("{name} must be symmetric")));
    }
    Ok(SymmetricEigen::new(m.clone()).eigenvalues.min())
}

impl CostWeights {
    /// `s_v` (terminal) and `s_u` must be positive definite, `s_q` positive
    /// semidefinite.
    pub fn new(s_v: DMatrix<f64>, s_q: DMatrix<f64>, s_u: DMatrix<f64>) -> Result<Self> {
        if check_symmetric(&s_v, "S_V")? <= 0.0 {
            return Err(invalid("S_V must be positive definite"));
        }
        if check_symmetric(&s_q, "S_Q")? < -1e-12 {
            return Err(invalid("S_Q must be positive semidefinite"));
        }
        if check_symmetric(&s_u, "S_U")? <= 0.0 {
            return Err(invalid("S_U must be positive definite"));
        }
        if s_v.shape() != s_q.shape() {
            return Err(invalid("S_V and S_Q must have the same size"));
        }
        Ok(Self { s_v, s_q, s_u })
    }

    /// Scalar multiples of the identity.
    pub fn diagonal(state_dim: usize, input_dim: usize, v: f64, q: f64, u: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(state_dim, state_dim) * v,
            DMatrix::identity(state_dim, state_dim) * q,
            DMatrix::identity(input_dim, input_dim) * u,
        )
    }

    pub fn s_v(&self) -> &DMatrix<f64> {
        &self.s_v
    }

    pub fn s_q(&self) -> &DMatrix<f64> {
        &self.s_q
    }

    pub fn s_u(&self) -> &DMatrix<f64> {
        &self.s_u
    }

    pub fn state_dim(&self) -> usize {
        self.s_v.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.s_u.nrows()
    }

    pub fn terminal(&self, dx: &DVector<f64>) -> f64 {
        0.5 * dx.dot(&(&self.s_v * dx))
    }

    pub fn running(&self, dx: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * dx.dot(&(&self.s_q * dx)) + 0.5 * u.dot(&(&self.s_u * u))
    }
}

/// Error of `current` relative to `goal`, `[log(X_g^-1 X); xi - xi_g]`.
///
/// The configuration part is computed as `-log(X^-1 X_g)`, which agrees with
/// `log(X_g^-1 X)` away from half-turns. At an exact half-turn the branch is
/// resolved on the offset toward the goal, so the solver starts by rotating
/// in the positive sense of the resolved axis.
pub fn goal_error(group: &dyn LieGroup, goal: &State, current: &State) -> Result<DVector<f64>> {
    let n = group.dim();
    if goal.twist.len() != n || current.twist.len() != n {
        return Err(invalid("twist dimension does not match the group"));
    }
    let psi = -group.log_resolved(&group.between(&current.config, &goal.config)?)?;
    let mut dx = DVector::zeros(2 * n);
    dx.rows_mut(0, n).copy_from(&psi);
    dx.rows_mut(n, n).copy_from(&(&current.twist - &goal.twist));
    Ok(dx)
}

/// Derivative of [`goal_error`] with respect to the local error state
/// `[psi; dxi]` of the current state: `blockdiag(J_r(psi_g)^-1, I)`.
pub fn goal_error_jacobian(group: &dyn LieGroup, dx: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = group.dim();
    let psi = dx.rows(0, n).into_owned();
    let jr_inv = group
        .right_jacobian(&psi)?
        .try_inverse()
        .ok_or_else(|| Error::Numeric("right Jacobian of the goal error is singular".into()))?;
    let mut e = DMatrix::identity(2 * n, 2 * n);
    e.view_mut((0, 0), (n, n)).copy_from(&jr_inv);
    Ok(e)
}

/// Error of `current` relative to a nominal state, `[log(X^-1 X_bar); xi_bar - xi]`.
pub fn state_error(group: &dyn LieGroup, nominal: &State, current: &State) -> Result<DVector<f64>> {
    let n = group.dim();
    let psi = group.log_resolved(&group.between(&nominal.config, &current.config)?)?;
    let mut dx = DVector::zeros(2 * n);
    dx.rows_mut(0, n).copy_from(&psi);
    dx.rows_mut(n, n).copy_from(&(&current.twist - &nominal.twist));
    Ok(dx)
}

/// First and second derivatives of the running cost.
#[derive(Clone, Debug, PartialEq)]
pub struct CostDerivatives {
    pub lx: DVector<f64>,
    pub lu: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub luu: DMatrix<f64>,
    pub lux: DMatrix<f64>,
}

pub fn cost_derivatives(dx: &DVector<f64>, u: &DVector<f64>, weights: &CostWeights) -> CostDerivatives {
    CostDerivatives {
        lx: weights.s_q() * dx,
        lu: weights.s_u() * u,
        lxx: weights.s_q().clone(),
        luu: weights.s_u().clone(),
        lux: DMatrix::zeros(u.len(), dx.len()),
    }
}

/// `(lambda + 1/2 I_mu g)^T g`.
pub fn penalty_term(g: &DVector<f64>, lambda: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    let i_mu = penalty_matrix(g, lambda, mu);
    (lambda + 0.5 * i_mu * g).dot(g)
}

/// Augmented Lagrangian of a trajectory plus the constraint values of each
/// knot (`values[N]` is the terminal stack).
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianEval {
    pub cost: f64,
    pub values: Vec<DVector<f64>>,
}

pub fn augmented_lagrangian(
    traj: &Trajectory,
    goal: &State,
    weights: &CostWeights,
    constraints: &ConstraintSet,
    mult: &MultiplierState,
) -> Result<LagrangianEval> {
    let group = constraints.group();
    let horizon = traj.horizon();
    if mult.lambda.len() != horizon + 1 {
        return Err(invalid("multipliers do not match the horizon"));
    }
    let mut cost = 0.0;
    let mut values = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let state = &traj.states[k];
        let input = traj.inputs.get(k);
        let dx = goal_error(group, goal, state)?;
        cost += match input {
            Some(u) => weights.running(&dx, u),
            None => weights.terminal(&dx),
        };
        let g = constraints.values(&Knot { config: &state.config, twist: &state.twist, input })?;
        if g.len() > 0 {
            cost += penalty_term(&g, &mult.lambda[k], &mult.mu_for(g.len()));
        }
        values.push(g);
    }
    if !cost.is_finite() {
        return Err(Error::Divergence { step: horizon });
    }
    Ok(LagrangianEval { cost, values })
}

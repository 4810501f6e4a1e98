use nalgebra::{DMatrix, DVector};

use super::cost::{augmented_lagrangian, cost_derivatives, goal_error, goal_error_jacobian, state_error, CostDerivatives};
use super::{Policy, Solver};
use crate::constraints::{penalty_matrix, Knot, MultiplierState};
use crate::dynamics::{check_finite, perturbed_system, step, State, Trajectory};
use crate::error::{Error, Result};

/// Local quadratic model of one running knot, AL terms included.
#[derive(Clone, Debug)]
pub(crate) struct KnotModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    lx: DVector<f64>,
    lu: DVector<f64>,
    lxx: DMatrix<f64>,
    luu: DMatrix<f64>,
    lux: DMatrix<f64>,
}

/// Expansion of the whole horizon about a nominal trajectory.
#[derive(Clone, Debug)]
pub(crate) struct Expansion {
    knots: Vec<KnotModel>,
    vx: DVector<f64>,
    vxx: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct BackwardPass {
    pub policy: Policy,
    /// `sum_k d^T Q_u + 1/2 d^T Q_uu d`.
    pub expected_decrease: f64,
    /// Regularization that made every `Q_uu + rho I` positive definite.
    pub rho: f64,
    /// Largest `|Q_u|` component over the horizon.
    pub max_qu: f64,
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// `None` when the candidate rollout diverged.
    pub trajectory: Option<Trajectory>,
    /// Augmented Lagrangian of the candidate, infinite on divergence.
    pub cost: f64,
    pub values: Vec<DVector<f64>>,
}

/// Adds `c^T (lambda + I_mu g)` and `c^T I_mu c` style terms.
struct AlTerms {
    grad_x: DVector<f64>,
    grad_u: DVector<f64>,
    hxx: DMatrix<f64>,
    huu: DMatrix<f64>,
    hux: DMatrix<f64>,
}

fn al_terms(
    g: &DVector<f64>,
    jac_x: &DMatrix<f64>,
    jac_u: &DMatrix<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
) -> AlTerms {
    let i_mu = penalty_matrix(g, lambda, mu);
    let weight = lambda + &i_mu * g;
    let ix = &i_mu * jac_x;
    AlTerms {
        grad_x: jac_x.tr_mul(&weight),
        grad_u: jac_u.tr_mul(&weight),
        hxx: jac_x.tr_mul(&ix),
        huu: jac_u.tr_mul(&(&i_mu * jac_u)),
        hux: jac_u.tr_mul(&ix),
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

impl Solver {
    pub(crate) fn expand(&self, traj: &Trajectory, mult: &MultiplierState) -> Result<Expansion> {
        let p = &self.problem;
        let group = p.group.as_ref();
        let horizon = traj.horizon();
        let mut knots = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let state = &traj.states[k];
            let u = &traj.inputs[k];
            let dx = goal_error(group, &p.goal, state)?;
            let lin = p.model.linearize(&state.twist, u)?;
            let sys = self.discretizer.discretize(&perturbed_system(group, &state.twist, &lin)?, traj.dt)?;
            let mut d = self.chain_goal(cost_derivatives(&dx, u, &p.weights), &dx)?;
            if !p.constraints.is_empty() {
                let knot = Knot { config: &state.config, twist: &state.twist, input: Some(u) };
                let eval = p.constraints.evaluate(&knot, self.jacobian.as_ref(), &lin)?;
                let t = al_terms(&eval.values, &eval.jac_x, &eval.jac_u, &mult.lambda[k], &mult.mu_for(eval.values.len()));
                d.lx += t.grad_x;
                d.lu += t.grad_u;
                d.lxx += t.hxx;
                d.luu += t.huu;
                d.lux += t.hux;
            }
            knots.push(KnotModel { a: sys.a, b: sys.b, lx: d.lx, lu: d.lu, lxx: d.lxx, luu: d.luu, lux: d.lux });
        }

        let last = &traj.states[horizon];
        let dx = goal_error(group, &p.goal, last)?;
        let (mut vx, mut vxx) = (p.weights.s_v() * &dx, p.weights.s_v().clone());
        if self.config.exact_goal_gradient {
            let e = goal_error_jacobian(group, &dx)?;
            vx = e.tr_mul(&vx);
            vxx = e.tr_mul(&(vxx * &e));
        }
        if p.constraints.rows(true) > 0 {
            let zero_u = DVector::zeros(p.model.input_dim());
            let lin = p.model.linearize(&last.twist, &zero_u)?;
            let knot = Knot { config: &last.config, twist: &last.twist, input: None };
            let eval = p.constraints.evaluate(&knot, self.jacobian.as_ref(), &lin)?;
            let t = al_terms(&eval.values, &eval.jac_x, &eval.jac_u, &mult.lambda[horizon], &mult.mu_for(eval.values.len()));
            vx += t.grad_x;
            vxx += t.hxx;
        }
        Ok(Expansion { knots, vx, vxx })
    }

    /// Maps state derivatives taken in goal-error coordinates onto the local
    /// error state (Gauss-Newton: curvature of the map itself is dropped).
    fn chain_goal(&self, mut d: CostDerivatives, dx: &DVector<f64>) -> Result<CostDerivatives> {
        if self.config.exact_goal_gradient {
            let e = goal_error_jacobian(self.problem.group.as_ref(), dx)?;
            d.lx = e.tr_mul(&d.lx);
            d.lxx = e.tr_mul(&(&d.lxx * &e));
            d.lux = &d.lux * &e;
        }
        Ok(d)
    }

    /// One Riccati-like sweep at fixed `rho`; `None` when some regularized
    /// `Q_uu` is not positive definite.
    fn sweep(expansion: &Expansion, rho: f64) -> Option<BackwardPass> {
        let horizon = expansion.knots.len();
        let mut gains = vec![DMatrix::zeros(0, 0); horizon];
        let mut feedforwards = vec![DVector::zeros(0); horizon];
        let mut vx = expansion.vx.clone();
        let mut vxx = expansion.vxx.clone();
        let mut expected = 0.0;
        let mut max_qu: f64 = 0.0;
        for k in (0..horizon).rev() {
            let m = &expansion.knots[k];
            let vxx_a = &vxx * &m.a;
            let qx = &m.lx + m.a.tr_mul(&vx);
            let qu = &m.lu + m.b.tr_mul(&vx);
            let qxx = &m.lxx + m.a.tr_mul(&vxx_a);
            let mut quu = &m.luu + m.b.tr_mul(&(&vxx * &m.b));
            symmetrize(&mut quu);
            let qux = &m.lux + m.b.tr_mul(&vxx_a);

            let mut reg = quu.clone();
            for i in 0..reg.nrows() {
                reg[(i, i)] += rho;
            }
            let chol = reg.cholesky()?;
            let gain = -chol.solve(&qux);
            let ff = -chol.solve(&qu);
            if !gain.iter().chain(ff.iter()).all(|v| v.is_finite()) {
                return None;
            }

            let quu_d = &quu * &ff;
            vx = &qx + gain.tr_mul(&quu_d) + gain.tr_mul(&qu) + qux.tr_mul(&ff);
            vxx = &qxx + gain.tr_mul(&(&quu * &gain)) + gain.tr_mul(&qux) + qux.tr_mul(&gain);
            symmetrize(&mut vxx);
            expected += ff.dot(&qu) + 0.5 * ff.dot(&quu_d);
            max_qu = max_qu.max(qu.amax());
            gains[k] = gain;
            feedforwards[k] = ff;
        }
        Some(BackwardPass { policy: Policy { gains, feedforwards }, expected_decrease: expected, rho, max_qu })
    }

    /// Backward pass, escalating `rho` until every regularized `Q_uu` is
    /// positive definite.
    pub fn backward_pass(&self, traj: &Trajectory, mult: &MultiplierState, rho: f64) -> Result<BackwardPass> {
        let expansion = self.expand(traj, mult)?;
        let mut rho = rho;
        loop {
            if let Some(pass) = Self::sweep(&expansion, rho) {
                return Ok(pass);
            }
            rho = self.next_rho(rho);
            if rho > self.config.rho_max {
                return Err(Error::IllConditioned { rho });
            }
        }
    }

    pub(crate) fn next_rho(&self, rho: f64) -> f64 {
        (rho * self.config.rho_factor).max(self.config.rho_min)
    }

    /// Closed-loop rollout `u = u_bar + K dx + alpha d` about `nominal`.
    pub fn forward_pass(
        &self,
        nominal: &Trajectory,
        policy: &Policy,
        alpha: f64,
        mult: &MultiplierState,
    ) -> Result<ForwardPass> {
        let p = &self.problem;
        let group = p.group.as_ref();
        let horizon = nominal.horizon();
        let mut states: Vec<State> = Vec::with_capacity(horizon + 1);
        let mut inputs = Vec::with_capacity(horizon);
        states.push(nominal.states[0].clone());
        let diverged = ForwardPass { trajectory: None, cost: f64::INFINITY, values: Vec::new() };
        for k in 0..horizon {
            let dx = state_error(group, &nominal.states[k], &states[k])?;
            let u = &nominal.inputs[k] + &policy.gains[k] * dx + &policy.feedforwards[k] * alpha;
            // Dimensions were validated up front, so any failure here comes
            // from non-finite values produced by a runaway candidate.
            let next = match step(group, p.model.as_ref(), &states[k], &u, nominal.dt) {
                Ok(s) if check_finite(&s.twist, &s.config, k + 1).is_ok() => s,
                _ => return Ok(diverged),
            };
            inputs.push(u);
            states.push(next);
        }
        let traj = Trajectory { states, inputs, dt: nominal.dt };
        match augmented_lagrangian(&traj, &p.goal, &p.weights, &p.constraints, mult) {
            Ok(eval) => Ok(ForwardPass { trajectory: Some(traj), cost: eval.cost, values: eval.values }),
            Err(Error::Divergence { .. }) => Ok(diverged),
            Err(e) => Err(e),
        }
    }
}

//! Augmented-Lagrangian DDP on a matrix Lie group.
//!
//! The inner loop alternates backward passes in the local error-state
//! coordinates with closed-loop forward rollouts on the manifold; the outer
//! loop updates multipliers and penalties until the constraints hold.

mod cost;
mod passes;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constraints::{max_violation, ConstraintSet, JacobianMode, MultiplierSchedule, MultiplierState};
use crate::dynamics::{rollout, Discretizer, State, Trajectory, TwistModel};
use crate::error::{invalid, Error, Result};
use crate::liegroup::LieGroup;
use crate::registry::Registry;

pub use cost::{
    augmented_lagrangian, cost_derivatives, goal_error, goal_error_jacobian, penalty_term, state_error, CostDerivatives, CostWeights,
    LagrangianEval,
};
pub use passes::{BackwardPass, ForwardPass};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Inner convergence threshold on `|L_A - L_A_prev|`.
    pub tol: f64,
    pub rho0: f64,
    /// First nonzero value used when escalating from `rho0 = 0`.
    pub rho_min: f64,
    pub rho_factor: f64,
    pub rho_max: f64,
    pub alpha_factor: f64,
    pub alpha_min: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    /// Outer loop stops once the worst constraint value drops below this.
    pub constraint_tol: f64,
    /// Inner loop also stops when every feedforward is below this.
    pub feedforward_tol: f64,
    pub lambda0: f64,
    pub mu0: f64,
    pub gamma: f64,
    pub mu_max: f64,
    /// Chain the cost gradient through the exact derivative of the goal
    /// error. When off, the goal error is treated as if it were the local
    /// error coordinate (identity Jacobian).
    pub exact_goal_gradient: bool,
    pub jacobian: String,
    pub discretization: String,
    pub multiplier_schedule: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            rho0: 0.0,
            rho_min: 1e-6,
            rho_factor: 10.0,
            rho_max: 1e10,
            alpha_factor: 0.5,
            alpha_min: 1e-4,
            max_inner_iters: 200,
            max_outer_iters: 10,
            constraint_tol: 1e-4,
            feedforward_tol: 1e-10,
            lambda0: 0.0,
            mu0: 1.0,
            gamma: 10.0,
            mu_max: 1e8,
            exact_goal_gradient: true,
            jacobian: "numeric".into(),
            discretization: "euler".into(),
            multiplier_schedule: "per_step".into(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.tol > 0.0, "tol must be positive"),
            (self.rho0 >= 0.0, "rho0 must be nonnegative"),
            (self.rho_min > 0.0, "rho_min must be positive"),
            (self.rho_factor > 1.0, "rho_factor must exceed 1"),
            (self.rho_max >= self.rho_min, "rho_max must be at least rho_min"),
            (self.alpha_factor > 0.0 && self.alpha_factor < 1.0, "alpha_factor must lie in (0, 1)"),
            (self.alpha_min > 0.0 && self.alpha_min <= 1.0, "alpha_min must lie in (0, 1]"),
            (self.max_inner_iters >= 1, "max_inner_iters must be at least 1"),
            (self.max_outer_iters >= 1, "max_outer_iters must be at least 1"),
            (self.constraint_tol > 0.0, "constraint_tol must be positive"),
            (self.feedforward_tol >= 0.0, "feedforward_tol must be nonnegative"),
            (self.lambda0 >= 0.0, "lambda0 must be nonnegative"),
            (self.mu0 > 0.0, "mu0 must be positive"),
            (self.gamma > 1.0, "gamma must exceed 1"),
            (self.mu_max >= self.mu0, "mu_max must be at least mu0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(invalid(msg));
            }
        }
        Ok(())
    }
}

/// Everything that defines one trajectory-optimization problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub group: Arc<dyn LieGroup>,
    pub model: Arc<dyn TwistModel>,
    pub initial: State,
    pub goal: State,
    pub horizon: usize,
    pub dt: f64,
    pub weights: CostWeights,
    pub constraints: ConstraintSet,
    /// Initial nominal inputs; zeros when `None`.
    pub initial_inputs: Option<Vec<DVector<f64>>>,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        let n = self.group.dim();
        let m = self.model.input_dim();
        if self.model.group() != self.group.id() {
            return Err(invalid(format!("model `{}` lives on {}, not {}", self.model.name(), self.model.group(), self.group.id())));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if self.weights.state_dim() != 2 * n || self.weights.input_dim() != m {
            return Err(invalid("cost weight sizes do not match the state and input dimensions"));
        }
        if self.constraints.input_dim() != m || self.constraints.group().id() != self.group.id() {
            return Err(invalid("constraint set does not match the problem"));
        }
        for s in [&self.initial, &self.goal] {
            self.group.validate(&s.config)?;
            self.group.check_tangent(&s.twist)?;
        }
        if let Some(u) = &self.initial_inputs {
            if u.len() != self.horizon || u.iter().any(|v| v.len() != m) {
                return Err(invalid(format!("initial inputs must be {} vectors of length {m}", self.horizon)));
            }
        }
        Ok(())
    }

    pub fn initial_inputs(&self) -> Vec<DVector<f64>> {
        self.initial_inputs
            .clone()
            .unwrap_or_else(|| vec![DVector::zeros(self.model.input_dim()); self.horizon])
    }
}

/// Affine controller `du = K dx + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub gains: Vec<DMatrix<f64>>,
    pub feedforwards: Vec<DVector<f64>>,
}

impl Policy {
    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    pub fn max_feedforward(&self) -> f64 {
        self.feedforwards.iter().map(|d| d.amax()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
    IllConditioned,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::Diverged => "diverged",
            Status::IllConditioned => "ill_conditioned",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One inner iteration (a backward pass plus its line search).
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub outer: usize,
    pub inner: usize,
    /// Augmented Lagrangian after the iteration (unchanged if rejected).
    pub cost: f64,
    /// Step size accepted, 0 when the line search failed.
    pub alpha: f64,
    pub rho: f64,
    pub max_violation: f64,
    pub expected_decrease: f64,
    pub accepted: bool,
}

/// State at the end of one outer iteration, before the multiplier update.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterRecord {
    pub outer: usize,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub cost: f64,
    pub max_violation: f64,
    pub lambda_min: f64,
    pub mu_max: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub trajectory: Trajectory,
    /// Gains about the final trajectory.
    pub policy: Policy,
    pub multipliers: MultiplierState,
    pub iterations: Vec<IterationRecord>,
    pub outer: Vec<OuterRecord>,
    pub status: Status,
    /// Plain cost (no AL terms) of the final trajectory.
    pub final_cost: f64,
    pub max_violation: f64,
    /// Human-readable reason for a non-converged status.
    pub message: Option<String>,
}

impl SolveResult {
    /// Augmented Lagrangian after each accepted inner iteration.
    pub fn cost_history(&self) -> Vec<f64> {
        self.iterations.iter().filter(|r| r.accepted).map(|r| r.cost).collect()
    }

    pub fn max_violation_history(&self) -> Vec<f64> {
        self.outer.iter().map(|o| o.max_violation).collect()
    }

    pub fn inner_iterations(&self) -> usize {
        self.iterations.len()
    }
}

/// A problem bound to resolved strategies.
#[derive(Clone, Debug)]
pub struct Solver {
    pub problem: Problem,
    pub config: SolverConfig,
    jacobian: Arc<dyn JacobianMode>,
    discretizer: Arc<dyn Discretizer>,
    schedule: Arc<dyn MultiplierSchedule>,
}

enum Inner {
    Converged,
    Exhausted,
}

impl Solver {
    pub fn new(problem: Problem, config: SolverConfig, registry: &Registry) -> Result<Self> {
        problem.validate()?;
        config.validate()?;
        let jacobian = registry.jacobian(&config.jacobian)?;
        let discretizer = registry.discretizer(&config.discretization)?;
        let schedule = registry.schedule(&config.multiplier_schedule)?;
        Ok(Self { problem, config, jacobian, discretizer, schedule })
    }

    pub fn jacobian_mode(&self) -> &dyn JacobianMode {
        self.jacobian.as_ref()
    }

    pub fn initial_multipliers(&self) -> Result<MultiplierState> {
        let c = &self.config;
        MultiplierState::new(
            self.problem.horizon,
            self.problem.constraints.rows(false),
            self.problem.constraints.rows(true),
            c.lambda0,
            c.mu0,
            c.gamma,
            c.mu_max,
        )
    }

    /// Zero-input (or supplied-input) rollout used as the first nominal.
    pub fn initial_trajectory(&self) -> Result<Trajectory> {
        let p = &self.problem;
        rollout(p.group.as_ref(), p.model.as_ref(), &p.initial, &p.initial_inputs(), p.dt)
    }

    pub fn lagrangian(&self, traj: &Trajectory, mult: &MultiplierState) -> Result<LagrangianEval> {
        let p = &self.problem;
        augmented_lagrangian(traj, &p.goal, &p.weights, &p.constraints, mult)
    }

    /// Plain quadratic cost without constraint terms.
    pub fn task_cost(&self, traj: &Trajectory) -> Result<f64> {
        let p = &self.problem;
        let group = p.group.as_ref();
        let mut total = 0.0;
        for (k, s) in traj.states.iter().enumerate() {
            let dx = goal_error(group, &p.goal, s)?;
            total += match traj.inputs.get(k) {
                Some(u) => p.weights.running(&dx, u),
                None => p.weights.terminal(&dx),
            };
        }
        Ok(total)
    }

    fn inner_loop(
        &self,
        outer: usize,
        traj: &mut Trajectory,
        cost: &mut f64,
        violation: &mut f64,
        mult: &MultiplierState,
        log: &mut Vec<IterationRecord>,
    ) -> Result<Inner> {
        let c = &self.config;
        let mut rho = c.rho0;
        for inner in 0..c.max_inner_iters {
            let bp = self.backward_pass(traj, mult, rho)?;
            rho = bp.rho;
            let mut record = IterationRecord {
                outer,
                inner,
                cost: *cost,
                alpha: 0.0,
                rho,
                max_violation: *violation,
                expected_decrease: bp.expected_decrease,
                accepted: false,
            };
            if bp.policy.max_feedforward() < c.feedforward_tol {
                log.push(record);
                return Ok(Inner::Converged);
            }

            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha >= c.alpha_min {
                let fp = self.forward_pass(traj, &bp.policy, alpha, mult)?;
                if fp.cost < *cost {
                    accepted = Some(fp);
                    break;
                }
                alpha *= c.alpha_factor;
            }

            match accepted {
                Some(fp) => {
                    let decrease = *cost - fp.cost;
                    *traj = fp.trajectory.expect("finite cost implies a trajectory");
                    *cost = fp.cost;
                    *violation = max_violation(&fp.values);
                    record.cost = *cost;
                    record.alpha = alpha;
                    record.max_violation = *violation;
                    record.accepted = true;
                    log.push(record);
                    rho = c.rho0;
                    if decrease < c.tol {
                        return Ok(Inner::Converged);
                    }
                }
                None => {
                    log.push(record);
                    rho = self.next_rho(rho);
                    // No descent even with heavy regularization: the nominal
                    // is a local minimum to working precision.
                    if rho > c.rho_max {
                        return Ok(Inner::Converged);
                    }
                }
            }
        }
        Ok(Inner::Exhausted)
    }

    pub fn solve(&self) -> Result<SolveResult> {
        let c = &self.config;
        let mut mult = self.initial_multipliers()?;
        let mut traj = match self.initial_trajectory() {
            Ok(t) => t,
            Err(Error::Divergence { step }) => {
                return Err(invalid(format!("initial rollout diverged at step {step}")));
            }
            Err(e) => return Err(e),
        };
        let eval = self.lagrangian(&traj, &mult)?;
        let mut cost = eval.cost;
        let mut violation = max_violation(&eval.values);
        let mut log = Vec::new();
        let mut outer_log = Vec::new();
        let mut status = Status::MaxIters;
        let mut message = None;

        for outer in 0..c.max_outer_iters {
            let before = log.len();
            let inner = match self.inner_loop(outer, &mut traj, &mut cost, &mut violation, &mult, &mut log) {
                Ok(r) => r,
                Err(Error::IllConditioned { rho }) => {
                    status = Status::IllConditioned;
                    message = Some(format!("regularization reached {rho:e}"));
                    break;
                }
                Err(Error::Divergence { step }) => {
                    status = Status::Diverged;
                    message = Some(format!("diverged at step {step}"));
                    break;
                }
                Err(e) => return Err(e),
            };
            let eval = self.lagrangian(&traj, &mult)?;
            let values = eval.values;
            violation = max_violation(&values);
            let inner_converged = matches!(inner, Inner::Converged);
            outer_log.push(OuterRecord {
                outer,
                inner_iterations: log.len() - before,
                inner_converged,
                cost,
                max_violation: violation,
                lambda_min: mult.lambda.iter().flat_map(|l| l.iter().copied()).fold(f64::INFINITY, f64::min),
                mu_max: mult.mu.iter().copied().fold(0.0, f64::max),
            });
            if violation < c.constraint_tol {
                if inner_converged {
                    status = Status::Converged;
                } else {
                    message = Some(format!("inner loop hit {} iterations", c.max_inner_iters));
                }
                break;
            }
            if outer + 1 == c.max_outer_iters {
                message = Some(format!("constraint violation {violation:e} after {} outer iterations", c.max_outer_iters));
                break;
            }
            mult = self.schedule.update(&mult, &values);
            cost = self.lagrangian(&traj, &mult)?.cost;
        }

        let policy = match self.backward_pass(&traj, &mult, c.rho0) {
            Ok(bp) => bp.policy,
            Err(Error::IllConditioned { rho }) => {
                status = Status::IllConditioned;
                message = Some(format!("final backward pass needed rho {rho:e}"));
                let m = self.problem.model.input_dim();
                let n2 = 2 * self.problem.group.dim();
                Policy {
                    gains: vec![DMatrix::zeros(m, n2); self.problem.horizon],
                    feedforwards: vec![DVector::zeros(m); self.problem.horizon],
                }
            }
            Err(e) => return Err(e),
        };
        let final_cost = self.task_cost(&traj)?;
        Ok(SolveResult {
            trajectory: traj,
            policy,
            multipliers: mult,
            iterations: log,
            outer: outer_log,
            status,
            final_cost,
            max_violation: violation,
            message,
        })
    }
}

/// Solves with strategies resolved from the default registry.
pub fn solve(problem: Problem, config: SolverConfig) -> Result<SolveResult> {
    Solver::new(problem, config, &Registry::default())?.solve()
}

//! Monte-Carlo evaluation of a solved trajectory under additive twist noise,
//! executed either open loop or with the solver's feedback gains.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::{check_finite, State, Trajectory, TwistModel};
use crate::error::{invalid, Error, Result};
use crate::liegroup::LieGroup;
use crate::solver::{state_error, Policy};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of the per-step twist disturbance.
    pub sigma_w: f64,
    pub base_seed: u64,
}

impl NoiseModel {
    pub fn new(sigma_w: f64, base_seed: u64) -> Result<Self> {
        if !(sigma_w >= 0.0) || !sigma_w.is_finite() {
            return Err(invalid(format!("sigma_w must be nonnegative, got {sigma_w}")));
        }
        Ok(Self { sigma_w, base_seed })
    }

    /// Independent stream for one sample.
    fn rng(&self, sample_index: usize) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.base_seed);
        rng.set_stream(sample_index as u64);
        rng
    }
}

/// Which twist advances the configuration in a noisy step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConfigUpdate {
    /// `X' = X exp(xi' dt)` with the updated twist, the ordering the solver
    /// uses, so a noiseless run reproduces the nominal exactly.
    #[default]
    UpdatedTwist,
    /// `X' = X exp(xi dt)` with the pre-step twist.
    CurrentTwist,
}

/// The nominal solution a policy is executed around.
#[derive(Clone, Copy, Debug)]
pub struct Nominal<'a> {
    pub trajectory: &'a Trajectory,
    pub policy: &'a Policy,
}

/// How inputs are chosen while executing a nominal under disturbance.
pub trait ExecutionMode: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn control(&self, group: &dyn LieGroup, k: usize, state: &State, nominal: Nominal<'_>) -> Result<DVector<f64>>;
}

/// Replays the nominal inputs.
#[derive(Clone, Copy, Debug, Default)]
pub struct OpenLoop;

impl ExecutionMode for OpenLoop {
    fn name(&self) -> &'static str {
        "open"
    }

    fn control(&self, _group: &dyn LieGroup, k: usize, _state: &State, nominal: Nominal<'_>) -> Result<DVector<f64>> {
        nominal
            .trajectory
            .inputs
            .get(k)
            .cloned()
            .ok_or_else(|| invalid(format!("step {k} is past the horizon")))
    }
}

/// `u = u*_k + K_k [log(X*_k^-1 X); dxi]`. With `full_state` off the twist
/// error block is zero and only the configuration error is fed back.
#[derive(Clone, Copy, Debug)]
pub struct Feedback {
    pub full_state: bool,
}

impl Default for Feedback {
    fn default() -> Self {
        Self { full_state: true }
    }
}

impl ExecutionMode for Feedback {
    fn name(&self) -> &'static str {
        if self.full_state {
            "fb"
        } else {
            "fb_config"
        }
    }

    fn control(&self, group: &dyn LieGroup, k: usize, state: &State, nominal: Nominal<'_>) -> Result<DVector<f64>> {
        feedback_control(group, k, state, nominal, self.full_state)
    }
}

pub fn feedback_control(
    group: &dyn LieGroup,
    k: usize,
    state: &State,
    nominal: Nominal<'_>,
    full_state: bool,
) -> Result<DVector<f64>> {
    let traj = nominal.trajectory;
    if k >= traj.horizon() || k >= nominal.policy.horizon() {
        return Err(invalid(format!("step {k} is past the horizon")));
    }
    let star = &traj.states[k];
    let n = group.dim();
    let psi = group.log(&group.between(&star.config, &state.config)?)?;
    let mut dx = DVector::zeros(2 * n);
    dx.rows_mut(0, n).copy_from(&psi);
    if full_state {
        dx.rows_mut(n, n).copy_from(&(&state.twist - &star.twist));
    }
    Ok(&traj.inputs[k] + &nominal.policy.gains[k] * dx)
}

/// Executes the nominal under `xi' = xi + f(xi, u) dt + sigma_w w`,
/// `w ~ N(0, I)`, with a noise stream fixed by `(base_seed, sample_index)`.
pub fn stochastic_rollout(
    group: &dyn LieGroup,
    model: &dyn TwistModel,
    nominal: Nominal<'_>,
    noise: &NoiseModel,
    sample_index: usize,
    mode: &dyn ExecutionMode,
    update: ConfigUpdate,
) -> Result<Trajectory> {
    let traj = nominal.trajectory;
    let dt = traj.dt;
    let n = group.dim();
    let mut rng = noise.rng(sample_index);
    let mut states = Vec::with_capacity(traj.states.len());
    let mut inputs = Vec::with_capacity(traj.horizon());
    states.push(traj.states[0].clone());
    for k in 0..traj.horizon() {
        let cur: &State = &states[k];
        let u = mode.control(group, k, cur, nominal)?;
        let mut twist = &cur.twist + model.twist_derivative(&cur.twist, &u)? * dt;
        if noise.sigma_w > 0.0 {
            for i in 0..n {
                let w: f64 = rng.sample(StandardNormal);
                twist[i] += noise.sigma_w * w;
            }
        }
        let advance = match update {
            ConfigUpdate::UpdatedTwist => &twist * dt,
            ConfigUpdate::CurrentTwist => &cur.twist * dt,
        };
        let config = group.compose(&cur.config, &group.exp(&advance)?)?;
        check_finite(&twist, &config, k + 1)?;
        inputs.push(u);
        states.push(State { config, twist });
    }
    Ok(Trajectory { states, inputs, dt })
}

/// Per-step mean and variance of the error state over the surviving samples.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloStats {
    pub mode: String,
    pub mean: Vec<DVector<f64>>,
    /// Unbiased sample variance.
    pub variance: Vec<DVector<f64>>,
    pub sample_count: usize,
    /// Samples excluded because they diverged or hit a logarithm branch.
    pub dropped: usize,
}

impl MonteCarloStats {
    /// Trace of the terminal error-state covariance.
    pub fn terminal_trace(&self) -> f64 {
        self.variance.last().map_or(0.0, |v| v.sum())
    }
}

/// Streaming mean/variance accumulator.
#[derive(Clone, Debug)]
struct Welford {
    count: usize,
    mean: Vec<DVector<f64>>,
    m2: Vec<DVector<f64>>,
}

impl Welford {
    fn new(steps: usize, dim: usize) -> Self {
        Self { count: 0, mean: vec![DVector::zeros(dim); steps], m2: vec![DVector::zeros(dim); steps] }
    }

    fn push(&mut self, sample: &[DVector<f64>]) {
        self.count += 1;
        let c = self.count as f64;
        for (k, x) in sample.iter().enumerate() {
            let delta = x - &self.mean[k];
            self.mean[k] += &delta / c;
            let delta2 = x - &self.mean[k];
            self.m2[k] += delta.component_mul(&delta2);
        }
    }
}

/// Runs `n_samples` noisy executions in parallel and reduces them in sample
/// order, so the statistics do not depend on thread scheduling.
pub fn monte_carlo(
    group: &dyn LieGroup,
    model: &dyn TwistModel,
    nominal: Nominal<'_>,
    noise: &NoiseModel,
    n_samples: usize,
    mode: &dyn ExecutionMode,
    update: ConfigUpdate,
) -> Result<MonteCarloStats> {
    if n_samples < 2 {
        return Err(invalid("Monte-Carlo needs at least 2 samples"));
    }
    let errors: Vec<Option<Vec<DVector<f64>>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let run = stochastic_rollout(group, model, nominal, noise, i, mode, update).ok()?;
            run.states
                .iter()
                .zip(&nominal.trajectory.states)
                .map(|(s, star)| state_error(group, star, s).ok())
                .collect()
        })
        .collect();

    let steps = nominal.trajectory.states.len();
    let mut acc = Welford::new(steps, 2 * group.dim());
    let mut dropped = 0;
    for sample in &errors {
        match sample {
            Some(e) => acc.push(e),
            None => dropped += 1,
        }
    }
    if acc.count == 0 {
        return Err(Error::EmptyStats);
    }
    let denom = (acc.count.max(2) - 1) as f64;
    let variance = acc.m2.iter().map(|m| (m / denom).map(|v| v.max(0.0))).collect();
    Ok(MonteCarloStats {
        mode: mode.name().to_string(),
        mean: acc.mean,
        variance,
        sample_count: acc.count,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{rollout, RigidBody, RigidBodyParams};
    use crate::liegroup::Se3;
    use nalgebra::{DMatrix, Matrix3};

    fn setup() -> (RigidBody, Trajectory, Policy) {
        let model = RigidBody::new(RigidBodyParams::new(Matrix3::identity(), 1.0).unwrap());
        let x0 = State::new(Se3.identity(), DVector::from_vec(vec![0.0, 0.0, 0.5, 0.2, 0.0, 0.0]));
        let inputs = vec![DVector::from_vec(vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.1]); 20];
        let traj = rollout(&Se3, &model, &x0, &inputs, 0.01).unwrap();
        let mut gain = DMatrix::zeros(6, 12);
        for i in 0..6 {
            gain[(i, i)] = -2.0;
            gain[(i, i + 6)] = -3.0;
        }
        let policy = Policy { gains: vec![gain; 20], feedforwards: vec![DVector::zeros(6); 20] };
        (model, traj, policy)
    }

    #[test]
    fn noiseless_runs_reproduce_nominal() {
        let (model, traj, policy) = setup();
        let nominal = Nominal { trajectory: &traj, policy: &policy };
        let noise = NoiseModel::new(0.0, 7).unwrap();
        for mode in [&OpenLoop as &dyn ExecutionMode, &Feedback::default()] {
            let run = stochastic_rollout(&Se3, &model, nominal, &noise, 3, mode, ConfigUpdate::UpdatedTwist).unwrap();
            assert_eq!(run, traj, "{}", mode.name());
        }
    }

    #[test]
    fn on_nominal_feedback_is_feedforward() {
        let (_, traj, policy) = setup();
        let nominal = Nominal { trajectory: &traj, policy: &policy };
        let u = feedback_control(&Se3, 4, &traj.states[4], nominal, true).unwrap();
        assert_eq!(u, traj.inputs[4]);
        assert!(feedback_control(&Se3, 20, &traj.states[4], nominal, true).is_err());
    }

    #[test]
    fn feedback_is_linear_in_the_log_error() {
        let (_, traj, policy) = setup();
        let nominal = Nominal { trajectory: &traj, policy: &policy };
        let v = DVector::from_vec(vec![1e-3, -2e-3, 5e-4, 1e-3, 0.0, -1e-3]);
        let correction = |scale: f64| {
            let config = Se3.compose(&traj.states[2].config, &Se3.exp(&(&v * scale)).unwrap()).unwrap();
            let s = State::new(config, traj.states[2].twist.clone());
            feedback_control(&Se3, 2, &s, nominal, false).unwrap() - &traj.inputs[2]
        };
        let mut dx = DVector::zeros(12);
        dx.rows_mut(0, 6).copy_from(&v);
        assert!((correction(1.0) - &policy.gains[2] * dx).amax() < 1e-10);
        assert!((correction(2.0) - correction(1.0) * 2.0).amax() < 1e-10);
    }

    #[test]
    fn same_seed_same_sample() {
        let (model, traj, policy) = setup();
        let nominal = Nominal { trajectory: &traj, policy: &policy };
        let noise = NoiseModel::new(0.01, 11).unwrap();
        let a = stochastic_rollout(&Se3, &model, nominal, &noise, 5, &OpenLoop, ConfigUpdate::CurrentTwist).unwrap();
        let b = stochastic_rollout(&Se3, &model, nominal, &noise, 5, &OpenLoop, ConfigUpdate::CurrentTwist).unwrap();
        let c = stochastic_rollout(&Se3, &model, nominal, &noise, 6, &OpenLoop, ConfigUpdate::CurrentTwist).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_stats_are_zero() {
        let (model, traj, policy) = setup();
        let nominal = Nominal { trajectory: &traj, policy: &policy };
        let noise = NoiseModel::new(0.0, 1).unwrap();
        let stats = monte_carlo(&Se3, &model, nominal, &noise, 4, &Feedback::default(), ConfigUpdate::UpdatedTwist).unwrap();
        assert_eq!(stats.sample_count, 4);
        assert!(stats.variance.iter().all(|v| v.amax() == 0.0));
        assert!(monte_carlo(&Se3, &model, nominal, &noise, 1, &OpenLoop, ConfigUpdate::UpdatedTwist).is_err());
    }

    #[test]
    fn rejects_negative_sigma() {
        assert!(NoiseModel::new(-1.0, 0).is_err());
    }
}

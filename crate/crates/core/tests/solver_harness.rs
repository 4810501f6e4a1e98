use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use lieddp::constraints::{ConstraintSet, ConstraintSpec};
use lieddp::dynamics::{RigidBody, RigidBodyParams, State};
use lieddp::harness::{monte_carlo, stochastic_rollout, ConfigUpdate, Feedback, Nominal, NoiseModel, OpenLoop};
use lieddp::liegroup::{rot_z_deg, LieGroup, Se3};
use lieddp::solver::{solve, CostWeights, Problem, SolveResult, SolverConfig, Status};

fn problem(obstacle: bool) -> Problem {
    let group: Arc<dyn LieGroup> = Arc::new(Se3);
    let specs = if obstacle {
        vec![ConstraintSpec::Obstacle { center: Vector3::new(0.5, 0.5, 0.5), radius: 0.6 }]
    } else {
        vec![]
    };
    Problem {
        group: group.clone(),
        model: Arc::new(RigidBody::new(RigidBodyParams::new(Matrix3::identity(), 1.0).unwrap())),
        initial: State::at_rest(&Se3, Se3.identity()),
        goal: State::at_rest(&Se3, Se3::element(rot_z_deg(90.0), Vector3::new(1.0, 1.0, 1.0))),
        horizon: 30,
        dt: 0.1,
        weights: CostWeights::diagonal(12, 6, 100.0, 5e-5, 1e-3).unwrap(),
        constraints: ConstraintSet::new(group, 6, specs).unwrap(),
        initial_inputs: None,
    }
}

fn solved(obstacle: bool) -> SolveResult {
    let r = solve(problem(obstacle), SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Converged);
    r
}

#[test]
fn accepted_cost_decreases_within_each_outer_iteration() {
    for obstacle in [false, true] {
        let r = solved(obstacle);
        for pair in r.iterations.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.outer == b.outer {
                assert!(b.cost <= a.cost, "outer {}: {} then {}", a.outer, a.cost, b.cost);
                if !b.accepted {
                    assert_eq!(b.cost, a.cost);
                }
            }
        }
    }
}

#[test]
fn multipliers_stay_nonnegative_and_penalties_capped() {
    let r = solved(true);
    assert!(r.multipliers.lambda.iter().flat_map(|l| l.iter()).all(|&v| v >= 0.0));
    assert!(r.multipliers.mu.iter().all(|&m| m <= r.multipliers.mu_max));
    assert!(r.outer.iter().all(|o| o.lambda_min >= 0.0 || o.lambda_min.is_infinite()));
    assert!(r.max_violation < 1e-4);
}

#[test]
fn solves_are_deterministic() {
    let (a, b) = (solved(true), solved(true));
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn terminal_state_reaches_goal() {
    let r = solved(false);
    let p = problem(false);
    let last = r.trajectory.states.last().unwrap();
    let err = Se3.log(&Se3.between(&p.goal.config, &last.config).unwrap()).unwrap();
    assert!(err.norm() < 0.05 && last.twist.norm() < 0.05);
}

fn nominal_parts() -> (Problem, SolveResult) {
    (problem(true), solved(true))
}

#[test]
fn noiseless_execution_reproduces_the_nominal() {
    let (p, r) = nominal_parts();
    let nominal = Nominal { trajectory: &r.trajectory, policy: &r.policy };
    let noise = NoiseModel::new(0.0, 1).unwrap();
    for mode in [&OpenLoop as &dyn lieddp::harness::ExecutionMode, &Feedback::default()] {
        let run = stochastic_rollout(&Se3, p.model.as_ref(), nominal, &noise, 0, mode, ConfigUpdate::UpdatedTwist).unwrap();
        assert_eq!(run.states, r.trajectory.states);
        let stats = monte_carlo(&Se3, p.model.as_ref(), nominal, &noise, 4, mode, ConfigUpdate::UpdatedTwist).unwrap();
        assert!(stats.variance.iter().all(|v| v.amax() == 0.0));
    }
}

#[test]
fn same_seed_and_index_give_the_same_sample() {
    let (p, r) = nominal_parts();
    let nominal = Nominal { trajectory: &r.trajectory, policy: &r.policy };
    let noise = NoiseModel::new(1e-3, 9).unwrap();
    let run = |i| stochastic_rollout(&Se3, p.model.as_ref(), nominal, &noise, i, &OpenLoop, ConfigUpdate::UpdatedTwist).unwrap();
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn statistics_do_not_depend_on_thread_count() {
    let (p, r) = nominal_parts();
    let nominal = Nominal { trajectory: &r.trajectory, policy: &r.policy };
    let noise = NoiseModel::new(1e-3, 5).unwrap();
    let go = || monte_carlo(&Se3, p.model.as_ref(), nominal, &noise, 64, &Feedback::default(), ConfigUpdate::UpdatedTwist).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(go);
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(go);
    assert_eq!(single, many);
}

#[test]
fn variance_scales_with_noise_squared() {
    let (p, r) = nominal_parts();
    let nominal = Nominal { trajectory: &r.trajectory, policy: &r.policy };
    let trace = |sigma: f64| {
        let noise = NoiseModel::new(sigma, 11).unwrap();
        monte_carlo(&Se3, p.model.as_ref(), nominal, &noise, 400, &OpenLoop, ConfigUpdate::UpdatedTwist).unwrap().terminal_trace()
    };
    let ratio = trace(2e-4) / trace(1e-4);
    assert!((ratio - 4.0).abs() <= 0.8, "ratio {ratio}");
}

#[test]
fn feedback_reduces_terminal_variance() {
    let (p, r) = nominal_parts();
    let nominal = Nominal { trajectory: &r.trajectory, policy: &r.policy };
    let noise = NoiseModel::new(1e-3, 3).unwrap();
    let stats = |mode: &dyn lieddp::harness::ExecutionMode| {
        monte_carlo(&Se3, p.model.as_ref(), nominal, &noise, 200, mode, ConfigUpdate::UpdatedTwist).unwrap()
    };
    let open = stats(&OpenLoop);
    let fb = stats(&Feedback::default());
    assert!(fb.terminal_trace() * 1.2 <= open.terminal_trace());
    let (vo, vf) = (open.variance.last().unwrap(), fb.variance.last().unwrap());
    assert!(vf.iter().zip(vo.iter()).all(|(f, o)| f < o), "{vf} vs {vo}");
    assert_eq!(open.sample_count, 200);
}

#[test]
fn current_twist_update_differs_from_updated_twist() {
    let (p, r) = nominal_parts();
    let nominal = Nominal { trajectory: &r.trajectory, policy: &r.policy };
    let noise = NoiseModel::new(0.0, 0).unwrap();
    let run = stochastic_rollout(&Se3, p.model.as_ref(), nominal, &noise, 0, &OpenLoop, ConfigUpdate::CurrentTwist).unwrap();
    assert_eq!(run.states[0], r.trajectory.states[0]);
    // The first step advances with the zero initial twist.
    assert_eq!(run.states[1].config, r.trajectory.states[0].config);
    assert_eq!(run.states[1].twist, r.trajectory.states[1].twist);
}

use std::path::PathBuf;

use lieddp::constraints::ConstraintSpec;
use lieddp_cli::{load_scenario, parse_scenario, CliError};
use lieddp::registry::Registry;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

const MINIMAL: &str = r#"{
  "group": "SE3", "horizon": 5, "dt": 0.1,
  "initial": {}, "goal": { "position": [1, 0, 0] },
  "weights": { "terminal": 1, "running": 0, "input": 1 }
}"#;

fn field_error(text: &str) -> String {
    let s = parse_scenario(text).unwrap();
    match s.build(&Registry::default()) {
        Err(CliError::Field { field, .. }) => field,
        other => panic!("expected a field error, got {other:?}"),
    }
}

#[test]
fn shipped_fixtures_load() {
    for name in ["se3_unconstrained.json", "se3_constrained.json", "se3_simple30.json", "se3_disturbance.json"] {
        load_scenario(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn constrained_fixture_carries_the_experiment_values() {
    let s = load_scenario(&fixture("se3_constrained.json")).unwrap();
    let built = s.build(&Registry::default()).unwrap();
    assert_eq!((built.problem.horizon, built.problem.dt), (300, 0.01));
    let specs = built.problem.constraints.specs();
    let radii: Vec<f64> = specs
        .iter()
        .filter_map(|c| match c {
            ConstraintSpec::Obstacle { radius, .. } => Some(*radius),
            _ => None,
        })
        .collect();
    assert_eq!(radii, vec![0.5, 0.25, 0.2, 0.3]);
    let bounds = specs.iter().filter(|c| matches!(c, ConstraintSpec::VelocityBound { bound, .. } if bound.abs() == 1.4)).count();
    assert_eq!(bounds, 6);
    assert_eq!(specs.iter().filter(|c| matches!(c, ConstraintSpec::ConfigAvoidance { .. })).count(), 1);
    let w = &built.problem.weights;
    assert_eq!((w.s_v()[(0, 0)], w.s_q()[(0, 0)], w.s_u()[(0, 0)]), (100.0, 0.00005, 0.001));
}

#[test]
fn disturbance_fixture_has_noise() {
    let s = load_scenario(&fixture("se3_disturbance.json")).unwrap();
    let built = s.build(&Registry::default()).unwrap();
    assert_eq!(built.noise.unwrap().sigma_w, 0.001);
    assert_eq!(built.samples, Some(1000));
    assert!(s.full_state_feedback);
}

#[test]
fn minimal_scenario_gets_defaults() {
    let s = parse_scenario(MINIMAL).unwrap();
    let built = s.build(&Registry::default()).unwrap();
    assert!(built.problem.constraints.is_empty());
    assert_eq!(built.config, lieddp::solver::SolverConfig::default());
    assert_eq!(built.problem.initial.twist.len(), 6);
    assert!(s.full_state_feedback);
    assert!(built.noise.is_none());
}

#[test]
fn negative_radius_names_the_field() {
    let text = MINIMAL.replace(
        r#""weights""#,
        r#""constraints": [{ "type": "obstacle", "center": [0, 0, 0], "radius": -0.5 }], "weights""#,
    );
    assert_eq!(field_error(&text), "constraints[0].radius");
}

#[test]
fn bad_velocity_axis_names_the_field() {
    let text = MINIMAL.replace(
        r#""weights""#,
        r#""constraints": [{ "type": "velocity_limit", "axes": [0, 9], "value": 1 }], "weights""#,
    );
    assert_eq!(field_error(&text), "constraints[0].axes");
}

#[test]
fn nonpositive_dt_and_unknown_strategy_name_the_field() {
    assert_eq!(field_error(&MINIMAL.replace("0.1", "0")), "dt");
    let text = MINIMAL.replace(r#""weights""#, r#""solver": { "multiplier_schedule": "nope" }, "weights""#);
    assert_eq!(field_error(&text), "solver.multiplier_schedule");
}

#[test]
fn unknown_fields_are_rejected_with_a_path() {
    let text = MINIMAL.replace(r#""initial": {}"#, r#""initial": { "colour": 1 }"#);
    match parse_scenario(&text) {
        Err(CliError::Parse { path, line, .. }) => {
            assert_eq!(path, "initial.colour");
            assert_eq!(line, 3);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(parse_scenario(&MINIMAL.replace("\"horizon\"", "\"horizn\"")).is_err());
}

#[test]
fn axis_angle_and_euler_agree() {
    let euler = MINIMAL.replace(r#""goal": {"#, r#""goal": { "rotation": { "euler_xyz_deg": [0, 0, 90] },"#);
    let axis = MINIMAL.replace(r#""goal": {"#, r#""goal": { "rotation": { "axis_angle": { "axis": [0, 0, 2], "angle_deg": 90 } },"#);
    let a = parse_scenario(&euler).unwrap().build(&Registry::default()).unwrap();
    let b = parse_scenario(&axis).unwrap().build(&Registry::default()).unwrap();
    assert!((a.problem.goal.config.matrix() - b.problem.goal.config.matrix()).amax() < 1e-15);
}

#[test]
fn full_weight_matrices_are_accepted_and_checked() {
    let mut rows = vec![vec![0.0; 6]; 6];
    for (i, r) in rows.iter_mut().enumerate() {
        r[i] = 2.0;
    }
    let json = serde_json::to_string(&rows).unwrap();
    let text = MINIMAL.replace(r#""input": 1"#, &format!(r#""input": {json}"#));
    let built = parse_scenario(&text).unwrap().build(&Registry::default()).unwrap();
    assert_eq!(built.problem.weights.s_u()[(5, 5)], 2.0);
    let text = MINIMAL.replace(r#""input": 1"#, r#""input": [[1, 0], [0, 1]]"#);
    assert_eq!(field_error(&text), "weights.input");
}

#[test]
fn so3_scenarios_use_the_rotor_model() {
    let text = r#"{
      "group": "SO3", "horizon": 10, "dt": 0.1,
      "initial": {}, "goal": { "rotation": { "euler_xyz_deg": [0, 0, 45] } },
      "weights": { "terminal": 10, "running": 0, "input": 0.01 }
    }"#;
    let built = parse_scenario(text).unwrap().build(&Registry::default()).unwrap();
    assert_eq!(lieddp::liegroup::LieGroup::dim(built.problem.group.as_ref()), 3);
    assert_eq!(built.problem.model.name(), "rigid_rotor");
    let bad = text.replace(r#""initial": {}"#, r#""initial": { "position": [0, 0, 0] }"#);
    assert_eq!(field_error(&bad), "initial.position");
}

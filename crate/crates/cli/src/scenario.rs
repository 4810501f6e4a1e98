//! JSON scenario schema. Every object rejects unknown fields.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Unit, Vector3};
use serde::Deserialize;

use lieddp::constraints::{ConstraintSet, ConstraintSpec, Direction};
use lieddp::dynamics::{RigidBodyParams, State};
use lieddp::harness::{ConfigUpdate, NoiseModel};
use lieddp::liegroup::{rotation_from_euler_xyz_deg, GroupElement, GroupId, LieGroup, Se3, So3};
use lieddp::registry::Registry;
use lieddp::solver::{CostWeights, Problem, SolverConfig};

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    /// `"SE3"` or `"SO3"`.
    pub group: String,
    /// Twist model name, defaults to the group's rigid-body model.
    #[serde(default)]
    pub model: Option<String>,
    pub horizon: usize,
    pub dt: f64,
    #[serde(default)]
    pub body: Body,
    pub initial: StateSpec,
    pub goal: StateSpec,
    pub weights: Weights,
    #[serde(default)]
    pub constraints: Vec<ConstraintEntry>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    /// Feed the twist error through the gains as well as the configuration
    /// error when executing the feedback policy.
    #[serde(default = "default_true")]
    pub full_state_feedback: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Body {
    /// Diagonal of the body-frame inertia.
    pub inertia: [f64; 3],
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Body {
    fn default() -> Self {
        Self { inertia: [1.0; 3], mass: 1.0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Rotation {
    EulerXyzDeg([f64; 3]),
    AxisAngle { axis: [f64; 3], angle_deg: f64 },
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::EulerXyzDeg([0.0; 3])
    }
}

impl Rotation {
    fn matrix(&self, field: &str) -> Result<Matrix3<f64>, CliError> {
        match self {
            Rotation::EulerXyzDeg(a) => {
                if !a.iter().all(|v| v.is_finite()) {
                    return Err(CliError::field(field, "angles must be finite"));
                }
                Ok(rotation_from_euler_xyz_deg(*a))
            }
            Rotation::AxisAngle { axis, angle_deg } => {
                let v = Vector3::from(*axis);
                if !(v.norm() > 0.0) || !angle_deg.is_finite() {
                    return Err(CliError::field(field, "axis must be nonzero and the angle finite"));
                }
                Ok(*nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(v), angle_deg.to_radians()).matrix())
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    #[serde(default)]
    pub rotation: Rotation,
    /// `[omega; v]`, zero when absent.
    #[serde(default)]
    pub twist: Option<Vec<f64>>,
}

/// Either `s I` or a full square matrix given by rows.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Weight {
    fn matrix(&self, dim: usize, field: &str) -> Result<DMatrix<f64>, CliError> {
        match self {
            Weight::Scalar(s) => Ok(DMatrix::identity(dim, dim) * *s),
            Weight::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(CliError::field(field, format!("expected a {dim}x{dim} matrix")));
                }
                Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    /// `S_V`, on the terminal goal error.
    pub terminal: Weight,
    /// `S_Q`, on the running goal error.
    pub running: Weight,
    /// `S_U`.
    pub input: Weight,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Upper,
    Lower,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintEntry {
    Obstacle {
        center: [f64; 3],
        radius: f64,
    },
    UnsafeConfiguration {
        #[serde(default)]
        rotation: Rotation,
        #[serde(default)]
        position: Option<[f64; 3]>,
        radius: f64,
        /// Tangent coordinates the distance is measured over, all by default.
        #[serde(default)]
        axes: Option<Vec<usize>>,
    },
    VelocityBound {
        axis: usize,
        side: BoundSide,
        value: f64,
    },
    /// Symmetric bound `|omega_i| <= value` on every listed twist axis.
    VelocityLimit {
        axes: Vec<usize>,
        value: f64,
    },
    InputBound {
        min: Vec<f64>,
        max: Vec<f64>,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub tol: Option<f64>,
    pub max_inner_iters: Option<usize>,
    pub max_outer_iters: Option<usize>,
    pub constraint_tol: Option<f64>,
    pub lambda0: Option<f64>,
    pub mu0: Option<f64>,
    pub gamma: Option<f64>,
    pub mu_max: Option<f64>,
    pub rho0: Option<f64>,
    pub rho_max: Option<f64>,
    pub alpha_min: Option<f64>,
    pub exact_goal_gradient: Option<bool>,
    pub jacobian: Option<String>,
    pub discretization: Option<String>,
    pub multiplier_schedule: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ConfigUpdateSpec {
    #[default]
    UpdatedTwist,
    CurrentTwist,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma_w: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub config_update: ConfigUpdateSpec,
}

/// A scenario resolved against the registry.
#[derive(Clone, Debug)]
pub struct Built {
    pub problem: Problem,
    pub config: SolverConfig,
    pub noise: Option<NoiseModel>,
    pub samples: Option<usize>,
    pub config_update: ConfigUpdate,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Parse { path, line: inner.line(), column: inner.column(), message: inner.to_string() }
    })?;
    Ok(scenario)
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let scenario = parse_scenario(&text)?;
    scenario.build(&Registry::default())?;
    Ok(scenario)
}

fn vec3(v: &[f64; 3], field: &str) -> Result<Vector3<f64>, CliError> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(CliError::field(field, "values must be finite"));
    }
    Ok(Vector3::from(*v))
}

fn element(group: GroupId, rotation: Matrix3<f64>, position: Option<&[f64; 3]>, field: &str) -> Result<GroupElement, CliError> {
    if group == GroupId::SE3 {
        let p = match position {
            Some(p) => vec3(p, &format!("{field}.position"))?,
            None => Vector3::zeros(),
        };
        Ok(Se3::element(rotation, p))
    } else {
        if position.is_some() {
            return Err(CliError::field(&format!("{field}.position"), "SO3 states carry no position"));
        }
        Ok(So3::element(rotation))
    }
}

impl Scenario {
    fn state(&self, group: &dyn LieGroup, spec: &StateSpec, field: &str) -> Result<State, CliError> {
        let r = spec.rotation.matrix(&format!("{field}.rotation"))?;
        let config = element(group.id(), r, spec.position.as_ref(), field)?;
        let twist = match &spec.twist {
            None => DVector::zeros(group.dim()),
            Some(t) => {
                if t.len() != group.dim() || !t.iter().all(|v| v.is_finite()) {
                    return Err(CliError::field(&format!("{field}.twist"), format!("expected {} finite values", group.dim())));
                }
                DVector::from_column_slice(t)
            }
        };
        Ok(State::new(config, twist))
    }

    fn constraint(&self, group: &dyn LieGroup, m: usize, i: usize, entry: &ConstraintEntry) -> Result<Vec<ConstraintSpec>, CliError> {
        let at = |name: &str| format!("constraints[{i}].{name}");
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::field(&at(name), format!("must be positive, got {v}")))
            }
        };
        let axis_ok = |a: usize, name: &str| {
            if a < group.dim() {
                Ok(a)
            } else {
                Err(CliError::field(&at(name), format!("axis {a} out of range for {}", group.id().0)))
            }
        };
        Ok(match entry {
            ConstraintEntry::Obstacle { center, radius } => {
                if group.id() != GroupId::SE3 {
                    return Err(CliError::field(&at("type"), "obstacles need SE3"));
                }
                vec![ConstraintSpec::Obstacle { center: vec3(center, &at("center"))?, radius: positive(*radius, "radius")? }]
            }
            ConstraintEntry::UnsafeConfiguration { rotation, position, radius, axes } => {
                let r = rotation.matrix(&at("rotation"))?;
                let center = element(group.id(), r, position.as_ref(), &format!("constraints[{i}]"))?;
                let axes = match axes {
                    Some(a) if a.is_empty() => return Err(CliError::field(&at("axes"), "must not be empty")),
                    Some(a) => a.iter().map(|&x| axis_ok(x, "axes")).collect::<Result<Vec<_>, _>>()?,
                    None => (0..group.dim()).collect(),
                };
                vec![ConstraintSpec::ConfigAvoidance { center, radius: positive(*radius, "radius")?, axes, radii: None }]
            }
            ConstraintEntry::VelocityBound { axis, side, value } => {
                if !value.is_finite() {
                    return Err(CliError::field(&at("value"), "must be finite"));
                }
                let direction = match side {
                    BoundSide::Upper => Direction::Upper,
                    BoundSide::Lower => Direction::Lower,
                };
                vec![ConstraintSpec::VelocityBound { axis: axis_ok(*axis, "axis")?, bound: *value, direction }]
            }
            ConstraintEntry::VelocityLimit { axes, value } => {
                let value = positive(*value, "value")?;
                let mut out = Vec::new();
                for &a in axes {
                    let axis = axis_ok(a, "axes")?;
                    out.push(ConstraintSpec::VelocityBound { axis, bound: value, direction: Direction::Upper });
                    out.push(ConstraintSpec::VelocityBound { axis, bound: -value, direction: Direction::Lower });
                }
                out
            }
            ConstraintEntry::InputBound { min, max } => {
                if min.len() != m {
                    return Err(CliError::field(&at("min"), format!("expected {m} values")));
                }
                if max.len() != m {
                    return Err(CliError::field(&at("max"), format!("expected {m} values")));
                }
                if min.iter().zip(max).any(|(lo, hi)| !(lo <= hi)) {
                    return Err(CliError::field(&at("max"), "must be >= min componentwise"));
                }
                vec![ConstraintSpec::InputBound { min: DVector::from_column_slice(min), max: DVector::from_column_slice(max) }]
            }
        })
    }

    fn solver_config(&self) -> SolverConfig {
        let o = &self.solver;
        let mut c = SolverConfig::default();
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { c.$f = v; } )* };
        }
        apply!(
            tol,
            max_inner_iters,
            max_outer_iters,
            constraint_tol,
            lambda0,
            mu0,
            gamma,
            mu_max,
            rho0,
            rho_max,
            alpha_min,
            exact_goal_gradient,
            jacobian,
            discretization,
            multiplier_schedule
        );
        c
    }

    /// Resolves names and builds the solver problem, naming the offending
    /// field on any validation failure.
    pub fn build(&self, registry: &Registry) -> Result<Built, CliError> {
        let group = registry.group(&self.group).map_err(|e| CliError::field("group", e.to_string()))?;
        if self.horizon < 1 {
            return Err(CliError::field("horizon", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CliError::field("dt", format!("must be positive, got {}", self.dt)));
        }
        let inertia = Matrix3::from_diagonal(&vec3(&self.body.inertia, "body.inertia")?);
        let params = RigidBodyParams::new(inertia, self.body.mass).map_err(|e| CliError::field("body", e.to_string()))?;
        let model_name = self.model.clone().unwrap_or_else(|| {
            if group.id() == GroupId::SE3 { "rigid_body" } else { "rigid_rotor" }.to_string()
        });
        let model = registry.model(&model_name, &params).map_err(|e| CliError::field("model", e.to_string()))?;
        if model.group() != group.id() {
            return Err(CliError::field("model", format!("`{model_name}` does not match group {}", group.id().0)));
        }
        let initial = self.state(group.as_ref(), &self.initial, "initial")?;
        let goal = self.state(group.as_ref(), &self.goal, "goal")?;

        let n = 2 * group.dim();
        let m = model.input_dim();
        let weights = CostWeights::new(
            self.weights.terminal.matrix(n, "weights.terminal")?,
            self.weights.running.matrix(n, "weights.running")?,
            self.weights.input.matrix(m, "weights.input")?,
        )
        .map_err(|e| CliError::field("weights", e.to_string()))?;

        let mut specs = Vec::new();
        for (i, entry) in self.constraints.iter().enumerate() {
            specs.extend(self.constraint(group.as_ref(), m, i, entry)?);
        }
        let constraints =
            ConstraintSet::new(group.clone(), m, specs).map_err(|e| CliError::field("constraints", e.to_string()))?;

        let config = self.solver_config();
        config.validate().map_err(|e| CliError::field("solver", e.to_string()))?;
        registry.jacobian(&config.jacobian).map_err(|e| CliError::field("solver.jacobian", e.to_string()))?;
        registry
            .discretizer(&config.discretization)
            .map_err(|e| CliError::field("solver.discretization", e.to_string()))?;
        registry
            .schedule(&config.multiplier_schedule)
            .map_err(|e| CliError::field("solver.multiplier_schedule", e.to_string()))?;

        let (noise, samples, config_update) = match &self.noise {
            None => (None, None, ConfigUpdate::default()),
            Some(ns) => {
                let model = NoiseModel::new(ns.sigma_w, ns.seed).map_err(|e| CliError::field("noise.sigma_w", e.to_string()))?;
                if ns.samples.is_some_and(|s| s < 2) {
                    return Err(CliError::field("noise.samples", "must be at least 2"));
                }
                let update = match ns.config_update {
                    ConfigUpdateSpec::UpdatedTwist => ConfigUpdate::UpdatedTwist,
                    ConfigUpdateSpec::CurrentTwist => ConfigUpdate::CurrentTwist,
                };
                (Some(model), ns.samples, update)
            }
        };

        let problem = Problem {
            group: group as Arc<dyn LieGroup>,
            model,
            initial,
            goal,
            horizon: self.horizon,
            dt: self.dt,
            weights,
            constraints,
            initial_inputs: None,
        };
        problem.validate().map_err(|e| CliError::field("scenario", e.to_string()))?;
        Ok(Built { problem, config, noise, samples, config_update })
    }
}

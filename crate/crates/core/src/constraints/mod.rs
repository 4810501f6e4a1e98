//! Inequality constraints `g <= 0` and their first-order expansions in the
//! local error-state coordinates `[psi; dxi]`.
//!
//! Rows of a stacked evaluation are always ordered configuration
//! constraints, then velocity bounds, then input bounds. The terminal knot
//! has no input, so its stack omits the input rows.

mod jacobian;
mod multipliers;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::dynamics::LinearizedTwist;
use crate::error::{invalid, Result};
use crate::liegroup::{GroupElement, GroupId, LieGroup};

pub use jacobian::{JacobianMode, NumericJacobian, PaperJacobian, FD_STEP};
pub use multipliers::{
    max_violation, penalty_matrix, update_multipliers, HorizonMax, MultiplierSchedule, MultiplierState, PerStep,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Upper,
    Lower,
}

impl Direction {
    /// Sign `beta`: -1 for an upper bound, +1 for a lower bound.
    pub fn beta(self) -> f64 {
        match self {
            Direction::Upper => -1.0,
            Direction::Lower => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintSpec {
    /// Bound on one twist component.
    VelocityBound { axis: usize, bound: f64, direction: Direction },
    /// Keep the tangent-space distance `log(X^-1 X_c)` outside a ball of
    /// `radius` (or an ellipsoid with per-axis `radii`), measured over the
    /// selected `axes` only.
    ConfigAvoidance { center: GroupElement, radius: f64, axes: Vec<usize>, radii: Option<Vec<f64>> },
    /// Position-only sphere for SE(3). The center carries no orientation; it
    /// is taken to share the current orientation, so the translational part
    /// of `log(X^-1 X_c)` is the body-frame offset `R^T (p_c - p)` and its norm
    /// is the Euclidean clearance.
    Obstacle { center: Vector3<f64>, radius: f64 },
    /// `u_min <= u <= u_max`, two rows per input component.
    InputBound { min: DVector<f64>, max: DVector<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Configuration,
    Velocity,
    Input,
}

impl ConstraintSpec {
    fn kind(&self) -> Kind {
        match self {
            ConstraintSpec::ConfigAvoidance { .. } | ConstraintSpec::Obstacle { .. } => Kind::Configuration,
            ConstraintSpec::VelocityBound { .. } => Kind::Velocity,
            ConstraintSpec::InputBound { .. } => Kind::Input,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            ConstraintSpec::InputBound { min, .. } => 2 * min.len(),
            _ => 1,
        }
    }

    pub fn is_input(&self) -> bool {
        self.kind() == Kind::Input
    }

    pub fn validate(&self, group: &dyn LieGroup, input_dim: usize) -> Result<()> {
        match self {
            ConstraintSpec::VelocityBound { axis, bound, .. } => {
                if *axis >= group.dim() {
                    return Err(invalid(format!("velocity axis {axis} out of range for {}", group.id())));
                }
                if !bound.is_finite() {
                    return Err(invalid("velocity bound must be finite"));
                }
            }
            ConstraintSpec::ConfigAvoidance { center, radius, axes, radii } => {
                group.validate(center)?;
                if !(*radius > 0.0) {
                    return Err(invalid(format!("radius must be positive, got {radius}")));
                }
                if axes.is_empty() || axes.iter().any(|&a| a >= group.dim()) {
                    return Err(invalid("avoidance axes must be non-empty and within the group dimension"));
                }
                if let Some(r) = radii {
                    if r.len() != axes.len() || r.iter().any(|v| !(*v > 0.0)) {
                        return Err(invalid("ellipsoid radii must be positive, one per axis"));
                    }
                }
            }
            ConstraintSpec::Obstacle { center, radius } => {
                if group.id() != GroupId::SE3 {
                    return Err(invalid("position obstacles need SE(3)"));
                }
                if !(*radius > 0.0) {
                    return Err(invalid(format!("radius must be positive, got {radius}")));
                }
                if !center.iter().all(|v| v.is_finite()) {
                    return Err(invalid("obstacle center must be finite"));
                }
            }
            ConstraintSpec::InputBound { min, max } => {
                if min.len() != input_dim || max.len() != input_dim {
                    return Err(invalid(format!("input bounds must have length {input_dim}")));
                }
                if min.iter().zip(max.iter()).any(|(lo, hi)| !(lo <= hi)) {
                    return Err(invalid("input bounds need min <= max componentwise"));
                }
            }
        }
        Ok(())
    }
}

/// `g = beta (bound - xi[axis])`, so `g <= 0` is feasible.
pub fn eval_velocity_bound(axis: usize, bound: f64, direction: Direction, xi: &DVector<f64>) -> Result<f64> {
    if axis >= xi.len() {
        return Err(invalid(format!("velocity axis {axis} out of range for a {}-vector", xi.len())));
    }
    Ok(direction.beta() * (bound - xi[axis]))
}

/// Margin value and `weighted`, which is `d g / d psi_c` up to a factor of
/// -2 and zero outside the selected axes.
fn avoidance_margin(psi: &DVector<f64>, radius: f64, axes: &[usize], radii: Option<&[f64]>) -> (f64, DVector<f64>) {
    let mut weighted = DVector::zeros(psi.len());
    let g = match radii {
        None => {
            let mut sq = 0.0;
            for &a in axes {
                sq += psi[a] * psi[a];
                weighted[a] = psi[a];
            }
            radius * radius - sq
        }
        Some(r) => {
            let mut sq = 0.0;
            for (&a, &ra) in axes.iter().zip(r) {
                sq += (psi[a] / ra).powi(2);
                weighted[a] = psi[a] / (ra * ra);
            }
            1.0 - sq
        }
    };
    (g, weighted)
}

/// Configuration avoidance `g = r^2 - |psi_c|^2` with `psi_c = log(X^-1 X_c)`.
pub fn eval_config_avoidance(
    group: &dyn LieGroup,
    spec: &ConstraintSpec,
    x: &GroupElement,
) -> Result<(f64, DVector<f64>)> {
    let (g, psi, _) = config_terms(group, spec, x, true)?;
    Ok((g, psi))
}

/// `strict` selects the principal logarithm, which refuses half-turn
/// offsets; otherwise the half-turn branch is resolved deterministically so
/// the solver never aborts on an antipodal configuration.
fn config_terms(
    group: &dyn LieGroup,
    spec: &ConstraintSpec,
    x: &GroupElement,
    strict: bool,
) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    match spec {
        ConstraintSpec::ConfigAvoidance { center, radius, axes, radii } => {
            let offset = group.between(x, center)?;
            let psi = if strict { group.log(&offset)? } else { group.log_resolved(&offset)? };
            let (g, w) = avoidance_margin(&psi, *radius, axes, radii.as_deref());
            Ok((g, psi, w))
        }
        ConstraintSpec::Obstacle { center, radius } => {
            let p = x.translation().ok_or_else(|| invalid("position obstacles need SE(3)"))?;
            let offset = x.rotation().transpose() * (center - p);
            let psi = DVector::from_vec(vec![0.0, 0.0, 0.0, offset.x, offset.y, offset.z]);
            let (g, w) = avoidance_margin(&psi, *radius, &[3, 4, 5], None);
            Ok((g, psi, w))
        }
        _ => Err(invalid("not a configuration constraint")),
    }
}

/// `[u - u_max; u_min - u]`.
pub fn eval_input_bound(min: &DVector<f64>, max: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    if u.len() != min.len() || u.len() != max.len() {
        return Err(invalid("input bound dimension mismatch"));
    }
    let m = u.len();
    let mut g = DVector::zeros(2 * m);
    for i in 0..m {
        g[i] = u[i] - max[i];
        g[m + i] = min[i] - u[i];
    }
    Ok(g)
}

/// Where a constraint stack is evaluated. `input` is `None` at the terminal
/// knot.
#[derive(Clone, Copy, Debug)]
pub struct Knot<'a> {
    pub config: &'a GroupElement,
    pub twist: &'a DVector<f64>,
    pub input: Option<&'a DVector<f64>>,
}

/// Stacked values and Jacobians with respect to the error state and input.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintEval {
    pub values: DVector<f64>,
    pub jac_x: DMatrix<f64>,
    pub jac_u: DMatrix<f64>,
}

/// An ordered, validated list of constraints on one group.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    group: Arc<dyn LieGroup>,
    input_dim: usize,
    specs: Vec<ConstraintSpec>,
}

impl ConstraintSet {
    pub fn new(group: Arc<dyn LieGroup>, input_dim: usize, mut specs: Vec<ConstraintSpec>) -> Result<Self> {
        for s in &specs {
            s.validate(group.as_ref(), input_dim)?;
        }
        specs.sort_by_key(ConstraintSpec::kind);
        Ok(Self { group, input_dim, specs })
    }

    pub fn empty(group: Arc<dyn LieGroup>, input_dim: usize) -> Self {
        Self { group, input_dim, specs: Vec::new() }
    }

    pub fn specs(&self) -> &[ConstraintSpec] {
        &self.specs
    }

    pub fn group(&self) -> &dyn LieGroup {
        self.group.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Row count of a running (`terminal == false`) or terminal stack.
    pub fn rows(&self, terminal: bool) -> usize {
        self.active_specs(terminal).map(ConstraintSpec::rows).sum()
    }

    fn active_specs(&self, terminal: bool) -> impl Iterator<Item = &ConstraintSpec> {
        self.specs.iter().filter(move |s| !(terminal && s.is_input()))
    }

    /// Constraint values at a knot.
    pub fn values(&self, knot: &Knot<'_>) -> Result<DVector<f64>> {
        let terminal = knot.input.is_none();
        let mut out = DVector::zeros(self.rows(terminal));
        let mut row = 0;
        for spec in self.active_specs(terminal) {
            match spec {
                ConstraintSpec::VelocityBound { axis, bound, direction } => {
                    out[row] = eval_velocity_bound(*axis, *bound, *direction, knot.twist)?;
                }
                ConstraintSpec::ConfigAvoidance { .. } | ConstraintSpec::Obstacle { .. } => {
                    out[row] = config_terms(self.group.as_ref(), spec, knot.config, false)?.0;
                }
                ConstraintSpec::InputBound { min, max } => {
                    let u = knot.input.expect("input rows only in running stacks");
                    let g = eval_input_bound(min, max, u)?;
                    out.rows_mut(row, g.len()).copy_from(&g);
                }
            }
            row += spec.rows();
        }
        Ok(out)
    }

    /// Values and Jacobians using the given Jacobian mode. `lin` is the twist
    /// linearization at the knot (only some modes use it).
    pub fn evaluate(&self, knot: &Knot<'_>, mode: &dyn JacobianMode, lin: &LinearizedTwist) -> Result<ConstraintEval> {
        mode.evaluate(self, knot, lin)
    }
}

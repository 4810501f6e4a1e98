use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::{config_terms, ConstraintEval, ConstraintSet, ConstraintSpec, Knot};
use crate::dynamics::LinearizedTwist;
use crate::error::Result;

/// Central-difference step for [`NumericJacobian`].
pub const FD_STEP: f64 = 1e-6;

/// How the constraint Jacobians with respect to `[psi; dxi]` and `u` are
/// formed.
pub trait JacobianMode: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn evaluate(&self, set: &ConstraintSet, knot: &Knot<'_>, lin: &LinearizedTwist) -> Result<ConstraintEval>;
}

/// Central differences through on-manifold perturbations
/// `X exp(eps e_i)`, `xi + eps e_i`, `u + eps e_i`.
#[derive(Clone, Copy, Debug)]
pub struct NumericJacobian {
    pub step: f64,
}

impl Default for NumericJacobian {
    fn default() -> Self {
        Self { step: FD_STEP }
    }
}

impl JacobianMode for NumericJacobian {
    fn name(&self) -> &'static str {
        "numeric"
    }

    fn evaluate(&self, set: &ConstraintSet, knot: &Knot<'_>, _lin: &LinearizedTwist) -> Result<ConstraintEval> {
        let group = set.group();
        let n = group.dim();
        let m = set.input_dim();
        let values = set.values(knot)?;
        let p = values.len();
        let mut jac_x = DMatrix::zeros(p, 2 * n);
        let mut jac_u = DMatrix::zeros(p, m);
        if p == 0 {
            return Ok(ConstraintEval { values, jac_x, jac_u });
        }
        let h = self.step;
        let scale = 0.5 / h;
        let has_config = set.specs().iter().any(|s| {
            matches!(s, ConstraintSpec::ConfigAvoidance { .. } | ConstraintSpec::Obstacle { .. })
        });
        let has_velocity = set.specs().iter().any(|s| matches!(s, ConstraintSpec::VelocityBound { .. }));

        if has_config {
            for i in 0..n {
                let mut e = DVector::zeros(n);
                e[i] = h;
                let plus = group.compose(knot.config, &group.exp(&e)?)?;
                let minus = group.compose(knot.config, &group.exp(&(-e))?)?;
                let gp = set.values(&Knot { config: &plus, ..*knot })?;
                let gm = set.values(&Knot { config: &minus, ..*knot })?;
                jac_x.set_column(i, &((gp - gm) * scale));
            }
        }
        if has_velocity {
            for i in 0..n {
                let mut plus = knot.twist.clone();
                plus[i] += h;
                let mut minus = knot.twist.clone();
                minus[i] -= h;
                let gp = set.values(&Knot { twist: &plus, ..*knot })?;
                let gm = set.values(&Knot { twist: &minus, ..*knot })?;
                jac_x.set_column(n + i, &((gp - gm) * scale));
            }
        }
        if let Some(u) = knot.input {
            if set.specs().iter().any(ConstraintSpec::is_input) {
                for i in 0..m {
                    let mut plus = u.clone();
                    plus[i] += h;
                    let mut minus = u.clone();
                    minus[i] -= h;
                    let gp = set.values(&Knot { input: Some(&plus), ..*knot })?;
                    let gm = set.values(&Knot { input: Some(&minus), ..*knot })?;
                    jac_u.set_column(i, &((gp - gm) * scale));
                }
            }
        }
        Ok(ConstraintEval { values, jac_x, jac_u })
    }
}

/// Analytic rows in the printed block form: a configuration row is
/// `[-2 (ad_xi psi_c)^T, 2 psi_c^T]` and a velocity row is
/// `[0, beta (gamma dxi_b)^T]` with input block `beta (lambda^T dxi_b)^T`,
/// where `dxi_b` is the bound offset on the constrained axis.
#[derive(Clone, Copy, Debug, Default)]
pub struct PaperJacobian;

impl JacobianMode for PaperJacobian {
    fn name(&self) -> &'static str {
        "paper"
    }

    fn evaluate(&self, set: &ConstraintSet, knot: &Knot<'_>, lin: &LinearizedTwist) -> Result<ConstraintEval> {
        let group = set.group();
        let n = group.dim();
        let m = set.input_dim();
        let terminal = knot.input.is_none();
        let values = set.values(knot)?;
        let p = values.len();
        let mut jac_x = DMatrix::zeros(p, 2 * n);
        let mut jac_u = DMatrix::zeros(p, m);
        let ad = group.ad(knot.twist)?;
        let mut row = 0;
        for spec in set.specs().iter().filter(|s| !(terminal && s.is_input())) {
            match spec {
                ConstraintSpec::ConfigAvoidance { .. } | ConstraintSpec::Obstacle { .. } => {
                    let (_, _, weighted) = config_terms(group, spec, knot.config, false)?;
                    let coupling = &ad * &weighted * -2.0;
                    jac_x.view_mut((row, 0), (1, n)).copy_from(&coupling.transpose());
                    jac_x.view_mut((row, n), (1, n)).copy_from(&(weighted.transpose() * 2.0));
                }
                ConstraintSpec::VelocityBound { axis, bound, direction } => {
                    let mut offset = DVector::zeros(n);
                    offset[*axis] = bound - knot.twist[*axis];
                    let beta = direction.beta();
                    let gx = (&lin.gamma * &offset) * beta;
                    let gu = (lin.lambda.transpose() * &offset) * beta;
                    jac_x.view_mut((row, n), (1, n)).copy_from(&gx.transpose());
                    if !terminal {
                        jac_u.view_mut((row, 0), (1, m)).copy_from(&gu.transpose());
                    }
                }
                ConstraintSpec::InputBound { min, .. } => {
                    let k = min.len();
                    jac_u.view_mut((row, 0), (k, k)).fill_with_identity();
                    jac_u.view_mut((row + k, 0), (k, k)).copy_from(&(-DMatrix::<f64>::identity(k, k)));
                }
            }
            row += spec.rows();
        }
        Ok(ConstraintEval { values, jac_x, jac_u })
    }
}

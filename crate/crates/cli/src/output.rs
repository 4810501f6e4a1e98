//! File formats written by the command line tool.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use lieddp::dynamics::{State, Trajectory};
use lieddp::harness::MonteCarloStats;
use lieddp::liegroup::{euler_xyz_lenient, GroupElement, LieGroup};
use lieddp::solver::{IterationRecord, Policy};

use crate::CliError;

pub const TRAJECTORY_HEADER: &str = "k,t,px,py,pz,phi_deg,theta_deg,psi_deg,wx,wy,wz,vx,vy,vz,u1,u2,u3,u4,u5,u6,gimbal";

/// 17 significant digits, scientific notation, '.' separator.
pub fn fmt_f64(x: f64) -> String {
    // Adding +0.0 folds negative zero into zero.
    format!("{:.16e}", x + 0.0)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Renders a trajectory as CSV. Positions are empty for SO(3) and the
/// terminal row has empty inputs. `gimbal` is 1 on rows whose pitch sits at
/// gimbal lock; their angles still come from the rotation matrix.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for (k, state) in traj.states.iter().enumerate() {
        let mut row: Vec<String> = vec![k.to_string(), fmt_f64(k as f64 * traj.dt)];
        match state.config.translation() {
            Some(p) => row.extend(p.iter().map(|v| fmt_f64(*v))),
            None => row.extend(std::iter::repeat_n(String::new(), 3)),
        }
        let (angles, gimbal) = euler_xyz_lenient(&state.config.rotation());
        row.extend(angles.iter().map(|v| fmt_f64(*v)));
        for i in 0..6 {
            row.push(state.twist.get(i).map(|v| fmt_f64(*v)).unwrap_or_default());
        }
        let u = traj.inputs.get(k);
        for i in 0..6 {
            row.push(u.and_then(|u| u.get(i)).map(|v| fmt_f64(*v)).unwrap_or_default());
        }
        row.push(if gimbal { "1" } else { "0" }.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn export_trajectory(traj: &Trajectory, path: &Path) -> Result<(), CliError> {
    write_file(path, &trajectory_csv(traj))
}

pub fn convergence_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,outer,inner,cost,alpha,rho,max_violation,expected_decrease,accepted\n");
    for (i, r) in records.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{},{}",
            r.outer,
            r.inner,
            fmt_f64(r.cost),
            fmt_f64(r.alpha),
            fmt_f64(r.rho),
            fmt_f64(r.max_violation),
            fmt_f64(r.expected_decrease),
            u8::from(r.accepted)
        );
    }
    out
}

/// Long-format statistics: one row per `(k, dim)`.
pub fn montecarlo_csv(stats: &MonteCarloStats) -> String {
    let mut out = String::from("k,dim,mean,variance\n");
    for (k, (mean, var)) in stats.mean.iter().zip(&stats.variance).enumerate() {
        for d in 0..mean.len() {
            let _ = writeln!(out, "{k},{d},{},{}", fmt_f64(mean[d]), fmt_f64(var[d]));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub status: String,
    pub final_cost: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// Largest inner-iteration count of any single outer iteration.
    pub max_inner_per_outer: usize,
    pub max_violation: f64,
    pub terminal_config_error: f64,
    pub terminal_twist_error: f64,
    pub jacobian: String,
    pub message: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MonteCarloSummary {
    pub mode: String,
    pub samples: usize,
    pub dropped: usize,
    pub sigma_w: f64,
    pub seed: u64,
    pub terminal_trace: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModeComparison {
    pub open_terminal_trace: f64,
    pub fb_terminal_trace: f64,
    /// `fb / open`.
    pub ratio: f64,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Solved trajectory plus gains, stored so Monte-Carlo runs can reuse them.
/// Floats round-trip exactly through JSON.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NominalFile {
    pub group: String,
    pub dt: f64,
    /// Row-major homogeneous matrices.
    pub configs: Vec<Vec<f64>>,
    pub twists: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    /// Row-major `m x 2n` gains.
    pub gains: Vec<Vec<f64>>,
    pub feedforwards: Vec<Vec<f64>>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl NominalFile {
    pub fn new(group: &dyn LieGroup, traj: &Trajectory, policy: &Policy) -> Self {
        Self {
            group: group.id().0.to_string(),
            dt: traj.dt,
            configs: traj.states.iter().map(|s| row_major(s.config.matrix())).collect(),
            twists: traj.states.iter().map(|s| s.twist.as_slice().to_vec()).collect(),
            inputs: traj.inputs.iter().map(|u| u.as_slice().to_vec()).collect(),
            gains: policy.gains.iter().map(row_major).collect(),
            feedforwards: policy.feedforwards.iter().map(|d| d.as_slice().to_vec()).collect(),
        }
    }

    /// Rebuilds the trajectory and policy, checking them against `group`.
    pub fn restore(&self, group: &dyn LieGroup, input_dim: usize) -> Result<(Trajectory, Policy), CliError> {
        let bad = |msg: &str| CliError::Nominal(msg.to_string());
        if self.group != group.id().0 {
            return Err(bad("nominal was solved on a different group"));
        }
        let n = group.dim();
        let side = group.matrix_size();
        let horizon = self.inputs.len();
        if self.configs.len() != horizon + 1
            || self.twists.len() != horizon + 1
            || self.gains.len() != horizon
            || self.feedforwards.len() != horizon
        {
            return Err(bad("inconsistent horizon"));
        }
        let mut states = Vec::with_capacity(horizon + 1);
        for (c, t) in self.configs.iter().zip(&self.twists) {
            if c.len() != side * side || t.len() != n {
                return Err(bad("state has the wrong size"));
            }
            let config = GroupElement::new_unchecked(group.id(), DMatrix::from_row_slice(side, side, c));
            group.validate(&config).map_err(|e| CliError::Nominal(e.to_string()))?;
            states.push(State::new(config, DVector::from_column_slice(t)));
        }
        let check = |v: &Vec<f64>, len: usize| if v.len() == len { Ok(()) } else { Err(bad("input or gain has the wrong size")) };
        let mut inputs = Vec::with_capacity(horizon);
        let mut gains = Vec::with_capacity(horizon);
        let mut feedforwards = Vec::with_capacity(horizon);
        for k in 0..horizon {
            check(&self.inputs[k], input_dim)?;
            check(&self.gains[k], input_dim * 2 * n)?;
            check(&self.feedforwards[k], input_dim)?;
            inputs.push(DVector::from_column_slice(&self.inputs[k]));
            gains.push(DMatrix::from_row_slice(input_dim, 2 * n, &self.gains[k]));
            feedforwards.push(DVector::from_column_slice(&self.feedforwards[k]));
        }
        if !(self.dt > 0.0) {
            return Err(bad("time step must be positive"));
        }
        Ok((Trajectory { states, inputs, dt: self.dt }, Policy { gains, feedforwards }))
    }
}

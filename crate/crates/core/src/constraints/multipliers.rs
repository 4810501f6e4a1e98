use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Lagrange multipliers and penalty weights for the augmented Lagrangian.
///
/// `lambda[k]` holds the multipliers of knot `k` (`k = 0..=N`); the terminal
/// knot has fewer rows because it carries no input constraints. `mu` is
/// indexed by running-stack row and shared by all knots.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierState {
    pub lambda: Vec<DVector<f64>>,
    pub mu: DVector<f64>,
    pub gamma: f64,
    pub mu_max: f64,
}

impl MultiplierState {
    pub fn new(
        horizon: usize,
        running_rows: usize,
        terminal_rows: usize,
        lambda0: f64,
        mu0: f64,
        gamma: f64,
        mu_max: f64,
    ) -> Result<Self> {
        if terminal_rows > running_rows {
            return Err(invalid("terminal stack cannot have more rows than the running stack"));
        }
        if !(lambda0 >= 0.0) || !(mu0 > 0.0) || !(gamma > 1.0) || !(mu_max >= mu0) {
            return Err(invalid(format!(
                "need lambda0 >= 0, mu0 > 0, gamma > 1 and mu_max >= mu0 (got {lambda0}, {mu0}, {gamma}, {mu_max})"
            )));
        }
        let mut lambda = vec![DVector::from_element(running_rows, lambda0); horizon];
        lambda.push(DVector::from_element(terminal_rows, lambda0));
        Ok(Self { lambda, mu: DVector::from_element(running_rows, mu0), gamma, mu_max })
    }

    pub fn lambda_at(&self, k: usize) -> &DVector<f64> {
        &self.lambda[k]
    }

    /// Penalty weights for a stack of `rows` rows (terminal stacks use the
    /// leading rows).
    pub fn mu_for(&self, rows: usize) -> DVector<f64> {
        self.mu.rows(0, rows).into_owned()
    }

    fn grown_mu(&self) -> DVector<f64> {
        self.mu.map(|m| (m * self.gamma).min(self.mu_max))
    }
}

/// Diagonal active-set matrix: entry `i` is zero when `g_i < 0` and
/// `lambda_i = 0`, otherwise `mu_i`. A constraint sitting exactly on its
/// boundary with zero multiplier counts as active.
pub fn penalty_matrix(g: &DVector<f64>, lambda: &DVector<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
    let diag = DVector::from_iterator(
        g.len(),
        (0..g.len()).map(|i| if g[i] < 0.0 && lambda[i] == 0.0 { 0.0 } else { mu[i] }),
    );
    DMatrix::from_diagonal(&diag)
}

/// Largest constraint value across all knots, floored at zero.
pub fn max_violation(values: &[DVector<f64>]) -> f64 {
    values.iter().flat_map(|v| v.iter().copied()).fold(0.0, f64::max)
}

/// Multiplier update applied between inner solves.
pub trait MultiplierSchedule: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// `values[k]` are the constraint values of knot `k` on the converged
    /// trajectory.
    fn update(&self, mult: &MultiplierState, values: &[DVector<f64>]) -> MultiplierState;
}

/// Time-invariant multipliers: each row's value is aggregated over the
/// horizon by its worst (largest) violation, `lambda+ = max(0, lambda + mu g)`,
/// and every knot receives the same multiplier.
#[derive(Clone, Copy, Debug, Default)]
pub struct HorizonMax;

impl MultiplierSchedule for HorizonMax {
    fn name(&self) -> &'static str {
        "horizon_max"
    }

    fn update(&self, mult: &MultiplierState, values: &[DVector<f64>]) -> MultiplierState {
        let rows = mult.mu.len();
        let mut worst = DVector::from_element(rows, f64::NEG_INFINITY);
        for v in values {
            for i in 0..v.len() {
                worst[i] = worst[i].max(v[i]);
            }
        }
        let base = &mult.lambda[0];
        let updated = DVector::from_iterator(
            rows,
            (0..rows).map(|i| {
                let lam = base.get(i).copied().unwrap_or(0.0);
                if worst[i].is_finite() {
                    (lam + mult.mu[i] * worst[i]).max(0.0)
                } else {
                    lam
                }
            }),
        );
        let lambda = mult.lambda.iter().map(|l| updated.rows(0, l.len()).into_owned()).collect();
        MultiplierState { lambda, mu: mult.grown_mu(), gamma: mult.gamma, mu_max: mult.mu_max }
    }
}

/// Per-knot multipliers, `lambda_k+ = max(0, lambda_k + mu g_k)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PerStep;

impl MultiplierSchedule for PerStep {
    fn name(&self) -> &'static str {
        "per_step"
    }

    fn update(&self, mult: &MultiplierState, values: &[DVector<f64>]) -> MultiplierState {
        let lambda = mult
            .lambda
            .iter()
            .zip(values)
            .map(|(l, g)| DVector::from_iterator(l.len(), (0..l.len()).map(|i| (l[i] + mult.mu[i] * g[i]).max(0.0))))
            .collect();
        MultiplierState { lambda, mu: mult.grown_mu(), gamma: mult.gamma, mu_max: mult.mu_max }
    }
}

/// Horizon-aggregated update (see [`HorizonMax`]).
pub fn update_multipliers(mult: &MultiplierState, values: &[DVector<f64>]) -> MultiplierState {
    HorizonMax.update(mult, values)
}

use std::fmt;

use nalgebra::DMatrix;

use super::PerturbedSystem;
use crate::error::{invalid, Result};

/// Turns the continuous error-state system into a per-step map
/// `x_{k+1} = A_k x_k + B_k u_k`.
pub trait Discretizer: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn discretize(&self, sys: &PerturbedSystem, dt: f64) -> Result<PerturbedSystem>;
}

fn check(sys: &PerturbedSystem, dt: f64) -> Result<()> {
    if sys.is_discretized() {
        return Err(invalid("system is already discretized"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// First-order Euler: `A_k = I + A dt`, `B_k = B dt`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Euler;

impl Discretizer for Euler {
    fn name(&self) -> &'static str {
        "euler"
    }

    fn discretize(&self, sys: &PerturbedSystem, dt: f64) -> Result<PerturbedSystem> {
        check(sys, dt)?;
        let k = sys.a.nrows();
        Ok(PerturbedSystem {
            a: DMatrix::identity(k, k) + &sys.a * dt,
            b: &sys.b * dt,
            dt: Some(dt),
        })
    }
}

/// Zero-order hold through the exponential of `[[A, B], [0, 0]] dt`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroOrderHold;

impl Discretizer for ZeroOrderHold {
    fn name(&self) -> &'static str {
        "zoh"
    }

    fn discretize(&self, sys: &PerturbedSystem, dt: f64) -> Result<PerturbedSystem> {
        check(sys, dt)?;
        let (k, m) = (sys.a.nrows(), sys.b.ncols());
        let mut aug = DMatrix::zeros(k + m, k + m);
        aug.view_mut((0, 0), (k, k)).copy_from(&(&sys.a * dt));
        aug.view_mut((0, k), (k, m)).copy_from(&(&sys.b * dt));
        let e = aug.exp();
        Ok(PerturbedSystem {
            a: e.view((0, 0), (k, k)).into_owned(),
            b: e.view((0, k), (k, m)).into_owned(),
            dt: Some(dt),
        })
    }
}

/// Euler step on the twist followed by a configuration step driven by the
/// updated twist, the same ordering the rollout integrator uses. Exact for
/// linear twist dynamics on a vector space.
#[derive(Clone, Copy, Debug, Default)]
pub struct SemiImplicit;

impl Discretizer for SemiImplicit {
    fn name(&self) -> &'static str {
        "semi_implicit"
    }

    fn discretize(&self, sys: &PerturbedSystem, dt: f64) -> Result<PerturbedSystem> {
        let euler = Euler.discretize(sys, dt)?;
        let n = sys.a.nrows() / 2;
        let m = sys.b.ncols();
        // psi' = psi + dt (A_tl psi + A_tr xi'), with xi' from the Euler rows.
        let coupling = sys.a.view((0, n), (n, n)) * dt;
        let vel_rows = euler.a.rows(n, n).into_owned();
        let vel_b = euler.b.rows(n, n).into_owned();
        let mut a = euler.a;
        let mut top = a.view((0, 0), (n, 2 * n)).into_owned();
        top.view_mut((0, n), (n, n)).fill(0.0);
        top += &coupling * vel_rows;
        a.view_mut((0, 0), (n, 2 * n)).copy_from(&top);
        let mut b = euler.b;
        b.view_mut((0, 0), (n, m)).copy_from(&(coupling * vel_b));
        Ok(PerturbedSystem { a, b, dt: Some(dt) })
    }
}

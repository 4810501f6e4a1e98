//! Test-only fixtures: the translation group R^n, a linear twist model and
//! independent oracles (dense matrix exponential, Riccati recursion, batch QP).

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use lieddp::constraints::ConstraintSet;
use lieddp::dynamics::{LinearizedTwist, State, TwistModel};
use lieddp::liegroup::{GroupElement, GroupId, LieGroup};
use lieddp::solver::{CostWeights, Problem, SolverConfig};
use lieddp::{Error, Result};

pub const EUCLID: GroupId = GroupId("R3");

/// Translations of R^3 as `[[I, x], [0, 1]]`. Abelian, so `ad = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Euclid;

impl LieGroup for Euclid {
    fn id(&self) -> GroupId {
        EUCLID
    }

    fn dim(&self) -> usize {
        3
    }

    fn matrix_size(&self) -> usize {
        4
    }

    fn hat(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_tangent(v)?;
        let mut m = DMatrix::zeros(4, 4);
        m.view_mut((0, 3), (3, 1)).copy_from(v);
        Ok(m)
    }

    fn vee(&self, m: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(m.view((0, 3), (3, 1)).column(0).into_owned())
    }

    fn exp(&self, v: &DVector<f64>) -> Result<GroupElement> {
        Ok(GroupElement::new_unchecked(EUCLID, DMatrix::identity(4, 4) + self.hat(v)?))
    }

    fn log(&self, x: &GroupElement) -> Result<DVector<f64>> {
        self.check_member(x)?;
        Ok(x.matrix().view((0, 3), (3, 1)).column(0).into_owned())
    }

    fn log_resolved(&self, x: &GroupElement) -> Result<DVector<f64>> {
        self.log(x)
    }

    fn adjoint(&self, _x: &GroupElement) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(3, 3))
    }

    fn ad(&self, _xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(3, 3))
    }

    fn validate(&self, x: &GroupElement) -> Result<()> {
        self.check_member(x)?;
        let mut expect = x.matrix().clone();
        expect.view_mut((0, 3), (3, 1)).fill(0.0);
        if (expect - DMatrix::identity(4, 4)).amax() > 0.0 {
            return Err(Error::InvalidArgument("not a translation".into()));
        }
        Ok(())
    }
}

pub fn point(x: [f64; 3]) -> GroupElement {
    Euclid.exp(&DVector::from_column_slice(&x)).unwrap()
}

/// `dxi/dt = G xi + L u`.
#[derive(Clone, Debug)]
pub struct LinearTwist {
    pub g: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

impl TwistModel for LinearTwist {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn group(&self) -> GroupId {
        EUCLID
    }

    fn twist_dim(&self) -> usize {
        self.g.nrows()
    }

    fn input_dim(&self) -> usize {
        self.l.ncols()
    }

    fn twist_derivative(&self, xi: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.g * xi + &self.l * u)
    }

    fn linearize(&self, _xi: &DVector<f64>, _u: &DVector<f64>) -> Result<LinearizedTwist> {
        Ok(LinearizedTwist { gamma: self.g.clone(), lambda: self.l.clone(), b: DVector::zeros(3) })
    }
}

pub fn linear_model() -> LinearTwist {
    LinearTwist {
        g: DMatrix::from_row_slice(3, 3, &[-0.3, 0.2, 0.0, 0.1, -0.5, 0.4, 0.0, -0.2, -0.1]),
        l: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.3, 0.8, -0.2, 0.5]),
    }
}

pub fn lqr_weights() -> CostWeights {
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.4, 0.3, 0.2, 0.1, 0.05]));
    let mut qf = DMatrix::from_diagonal(&DVector::from_vec(vec![30.0, 20.0, 25.0, 5.0, 4.0, 3.0]));
    qf[(0, 3)] = 1.0;
    qf[(3, 0)] = 1.0;
    let r = DMatrix::from_row_slice(2, 2, &[0.2, 0.05, 0.05, 0.1]);
    CostWeights::new(qf, q, r).unwrap()
}

pub const LQR_HORIZON: usize = 40;
pub const LQR_DT: f64 = 0.05;

/// A linear-quadratic problem embedded in the solver's interfaces.
pub fn lqr_problem() -> Problem {
    let group: Arc<dyn LieGroup> = Arc::new(Euclid);
    let model = linear_model();
    Problem {
        group: group.clone(),
        model: Arc::new(model),
        initial: State::new(point([0.2, -0.1, 0.4]), DVector::from_vec(vec![0.1, 0.0, -0.2])),
        goal: State::new(point([1.0, 0.5, -0.5]), DVector::zeros(3)),
        horizon: LQR_HORIZON,
        dt: LQR_DT,
        weights: lqr_weights(),
        constraints: ConstraintSet::empty(group, 2),
        initial_inputs: None,
    }
}

/// The discretization matching the rollout exactly on this model.
pub fn lqr_config() -> SolverConfig {
    SolverConfig { discretization: "semi_implicit".into(), ..SolverConfig::default() }
}

/// Exact one-step map of `xi' = xi + dt (G xi + L u)`, `x' = x + dt xi'`
/// on `z = [x; xi]`, written out by hand.
pub fn lqr_step_matrices(model: &LinearTwist, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let i3 = DMatrix::<f64>::identity(3, 3);
    let vel = &i3 + &model.g * dt;
    let mut a = DMatrix::zeros(6, 6);
    a.view_mut((0, 0), (3, 3)).copy_from(&i3);
    a.view_mut((0, 3), (3, 3)).copy_from(&(&vel * dt));
    a.view_mut((3, 3), (3, 3)).copy_from(&vel);
    let mut b = DMatrix::zeros(6, 2);
    b.view_mut((0, 0), (3, 2)).copy_from(&(&model.l * (dt * dt)));
    b.view_mut((3, 0), (3, 2)).copy_from(&(&model.l * dt));
    (a, b)
}

/// Textbook backward Riccati recursion; returns `K_k` with `du = K_k dz`.
pub fn riccati_gains(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    qf: &DMatrix<f64>,
    horizon: usize,
) -> Vec<DMatrix<f64>> {
    let mut p = qf.clone();
    let mut gains = vec![DMatrix::zeros(0, 0); horizon];
    for k in (0..horizon).rev() {
        let s = r + b.transpose() * &p * b;
        let k_gain = -s.clone().try_inverse().unwrap() * b.transpose() * &p * a;
        let acl = a + b * &k_gain;
        p = q + k_gain.transpose() * r * &k_gain + acl.transpose() * &p * &acl;
        p = (&p + p.transpose()) * 0.5;
        gains[k] = k_gain;
    }
    gains
}

/// Minimizer of the stacked quadratic program over all inputs, by a single
/// dense solve. Returns the inputs and the optimal cost.
pub fn batch_optimum(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    qf: &DMatrix<f64>,
    z0: &DVector<f64>,
    zg: &DVector<f64>,
    horizon: usize,
) -> (Vec<DVector<f64>>, f64) {
    let nz = a.nrows();
    let m = b.ncols();
    let nu = m * horizon;
    // z_k = Phi_k z0 + sum_j<k Psi_kj u_j
    let mut phi = vec![DMatrix::identity(nz, nz)];
    for k in 0..horizon {
        phi.push(a * &phi[k]);
    }
    let block = |k: usize| {
        let mut s = DMatrix::zeros(nz, nu);
        for j in 0..k {
            let mut t = b.clone();
            for _ in 0..(k - 1 - j) {
                t = a * t;
            }
            s.view_mut((0, j * m), (nz, m)).copy_from(&t);
        }
        s
    };
    let mut h = DMatrix::zeros(nu, nu);
    let mut g = DVector::zeros(nu);
    let mut c0 = 0.0;
    for k in 0..=horizon {
        let w = if k == horizon { qf } else { q };
        let s = block(k);
        let off = &phi[k] * z0 - zg;
        h += s.transpose() * w * &s;
        g += s.transpose() * w * &off;
        c0 += 0.5 * off.dot(&(w * &off));
    }
    for k in 0..horizon {
        let mut v = h.view_mut((k * m, k * m), (m, m));
        v += r;
    }
    let u = -h.clone().cholesky().unwrap().solve(&g);
    let cost = c0 + g.dot(&u) + 0.5 * u.dot(&(&h * &u));
    let inputs = (0..horizon).map(|k| u.rows(k * m, m).into_owned()).collect();
    (inputs, cost)
}

/// Scaling-and-squaring Taylor exponential, independent of the library.
pub fn dense_expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = m.iter().map(|v| v.abs()).sum::<f64>();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.1 {
        s += 1;
    }
    let a = m / 2f64.powi(s);
    let n = m.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Stacked error coordinates `[x - x_g; xi - xi_g]` on R^3.
pub fn stacked(state: &State) -> DVector<f64> {
    let x = Euclid.log(&state.config).unwrap();
    let mut z = DVector::zeros(6);
    z.rows_mut(0, 3).copy_from(&x);
    z.rows_mut(3, 3).copy_from(&state.twist);
    z
}

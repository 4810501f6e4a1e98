//! Euler angles in the `R_x(phi) R_y(theta) R_z(psi)` order, degrees.
//!
//! Only used for scenario input and reporting; states are always rotation
//! matrices.

use nalgebra::Matrix3;

use crate::error::{Error, Result};

/// Pitch magnitudes at or beyond `90 - GIMBAL_MARGIN` degrees are degenerate.
const GIMBAL_MARGIN_DEG: f64 = 1e-6;

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90.
fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let quarter = deg / 90.0;
    if quarter.fract() == 0.0 && quarter.abs() < 1e15 {
        match (quarter as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

pub fn rot_x_deg(deg: f64) -> Matrix3<f64> {
    let (s, c) = sin_cos_deg(deg);
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y_deg(deg: f64) -> Matrix3<f64> {
    let (s, c) = sin_cos_deg(deg);
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z_deg(deg: f64) -> Matrix3<f64> {
    let (s, c) = sin_cos_deg(deg);
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rotation_from_euler_xyz_deg(angles: [f64; 3]) -> Matrix3<f64> {
    rot_x_deg(angles[0]) * rot_y_deg(angles[1]) * rot_z_deg(angles[2])
}

/// Euler angles `(phi, theta, psi)` in degrees plus a flag that is set when
/// the pitch is at gimbal lock. In the degenerate case `phi` is set to zero
/// and the remaining rotation is attributed to `psi`.
pub fn euler_xyz_lenient(r: &Matrix3<f64>) -> ([f64; 3], bool) {
    let sin_theta = r[(0, 2)].clamp(-1.0, 1.0);
    let theta = sin_theta.asin();
    let degenerate = theta.to_degrees().abs() >= 90.0 - GIMBAL_MARGIN_DEG;
    if degenerate {
        // R_y(+-90) R_z(psi) leaves psi in the lower-left 2x2 block.
        let psi = r[(1, 0)].atan2(r[(1, 1)]);
        return ([0.0, theta.to_degrees(), psi.to_degrees()], true);
    }
    let phi = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let psi = (-r[(0, 1)]).atan2(r[(0, 0)]);
    ([phi.to_degrees(), theta.to_degrees(), psi.to_degrees()], false)
}

pub fn euler_xyz(r: &Matrix3<f64>) -> Result<[f64; 3]> {
    match euler_xyz_lenient(r) {
        (angles, false) => Ok(angles),
        (angles, true) => Err(Error::DegenerateAngles { pitch_deg: angles[1] }),
    }
}

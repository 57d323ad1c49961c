//! Coordinate transforms, angle wrapping, error norms and the gain margin.
//!
//! The target sits at the origin facing `+x`. A vehicle at `(x, y)` with
//! heading `theta` has polar angle `delta = mod(atan2(y, x), 2pi) - pi` and
//! line-of-sight angle `gamma = mod(atan2(y, x) - theta, 2pi) - pi`. Every
//! angle produced here lies in `[-pi, pi)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Distance kept from the poles of `tan` (at `|gamma| = pi/2`, and at
/// `|delta| = pi` for the half-angle norms).
pub const ANGLE_EPS: f64 = 1e-9;

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut r = (angle + PI).rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        r = 0.0;
    }
    r - PI
}

/// `mod(angle, 2pi) - pi`, the shifted wrap used by the polar transforms.
fn mod_tau_minus_pi(angle: f64) -> f64 {
    let mut r = angle.rem_euclid(TAU);
    if r >= TAU {
        r = 0.0;
    }
    r - PI
}

/// Smallest signed difference `a - b` on the circle.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianPose {
    pub x: f64,
    pub y: f64,
    /// Heading, wrapped to `[-pi, pi)`.
    pub theta: f64,
}

impl CartesianPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }
}

/// Polar state `(rho, delta, gamma)` of the vehicle relative to the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub rho: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl PolarState {
    pub const fn new(rho: f64, delta: f64, gamma: f64) -> Self {
        Self { rho, delta, gamma }
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.delta.is_finite() && self.gamma.is_finite()
    }
}

/// Which error norm a law's certificate is stated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorNormVariant {
    /// `sqrt(delta^2 + tan^2 gamma)`
    Euclid,
    /// `sqrt(4 tan^2(delta/2) + tan^2 gamma)`
    Half4,
    /// `sqrt(tan^2(delta/2) + tan^2 gamma)`
    Half1,
}

pub fn cart_to_polar(pose: CartesianPose) -> Result<PolarState> {
    let CartesianPose { x, y, theta } = pose;
    if x == 0.0 && y == 0.0 {
        return Err(Error::DegenerateOrigin);
    }
    let bearing = y.atan2(x);
    Ok(PolarState {
        rho: x.hypot(y),
        delta: mod_tau_minus_pi(bearing),
        gamma: mod_tau_minus_pi(bearing - theta),
    })
}

/// Inverse of [`cart_to_polar`]: `x = -rho cos delta`, `y = -rho sin delta`,
/// `theta = wrap(delta - gamma)`.
pub fn polar_to_cart(state: PolarState) -> CartesianPose {
    let (sin_d, cos_d) = state.delta.sin_cos();
    CartesianPose::new(
        -state.rho * cos_d,
        -state.rho * sin_d,
        state.delta - state.gamma,
    )
}

pub(crate) fn check_los(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma.abs() < FRAC_PI_2 - ANGLE_EPS {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "line-of-sight angle {gamma} is not inside (-pi/2, pi/2)"
        )))
    }
}

pub(crate) fn check_half_angle(delta: f64) -> Result<()> {
    if delta.is_finite() && delta.abs() < PI - ANGLE_EPS {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "polar angle {delta} is not inside (-pi, pi)"
        )))
    }
}

pub fn error_norm(delta: f64, gamma: f64, variant: ErrorNormVariant) -> Result<f64> {
    check_los(gamma)?;
    if !delta.is_finite() {
        return Err(Error::Domain(format!("polar angle {delta} is not finite")));
    }
    let tan_g = gamma.tan();
    let squared = match variant {
        ErrorNormVariant::Euclid => delta * delta,
        ErrorNormVariant::Half4 => {
            check_half_angle(delta)?;
            let t = (0.5 * delta).tan();
            4.0 * t * t
        }
        ErrorNormVariant::Half1 => {
            check_half_angle(delta)?;
            let t = (0.5 * delta).tan();
            t * t
        }
    };
    Ok((squared + tan_g * tan_g).sqrt())
}

/// `M(s) = 1 + s^2/2 + s sqrt(1 + s^2/4)`.
///
/// `M(s)^2` is the condition number of `[[1 + s^2, s], [s, 1]]`, the matrix
/// relating `delta^2 + zeta^2` to `delta^2 + tan^2 gamma`.
pub fn gain_margin(s: f64) -> f64 {
    debug_assert!(s >= 0.0);
    1.0 + 0.5 * s * s + s * (1.0 + 0.25 * s * s).sqrt()
}

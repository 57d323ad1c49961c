//! The five steering laws.
//!
//! Every law steers through `omega = (v/rho)(sin gamma + cos^3 gamma * omega_bar)`,
//! where the intermediate control `omega_bar` and the backstepping variable
//! `zeta` depend on the law:
//!
//! | law | `zeta` | `omega_bar` |
//! |-----|--------|-------------|
//! | backstepping, decelerating | `tan g + c1 d` | `(1 + c1 c2) d + (c1 + c2) tan g` |
//! | smooth | `tan g + c1 d / rho` | `d + (c1 (tan g + d) + c2 zeta) / rho` |
//! | no front crossing | `tan g + c1 sin d / rho` | `2 tan(d/2)(1 + tan^2(d/2)) + (c1 (cos d tan g + sin d) + c2 zeta) / rho` |
//! | curb safe | `tan g + c1 sin d / rho` | `(c1 (sin d + cos d tan g) + c2 (1 + rho^2)(1 + tan^2(d/2))^2 zeta) / rho` |
//!
//! The `rho` entering any of these formulas is first clipped from below by
//! the law's `rho_floor`; the integrated state is never clipped.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::Inputs;
use crate::geometry::{
    check_half_angle, check_los, error_norm, gain_margin, ErrorNormVariant, PolarState, ANGLE_EPS,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "THM1_BACKSTEP")]
    Thm1Backstep,
    #[serde(rename = "THM2_SMOOTH")]
    Thm2Smooth,
    #[serde(rename = "THM3_NOFRONT")]
    Thm3NoFront,
    #[serde(rename = "THM4_DECEL")]
    Thm4Decel,
    #[serde(rename = "THM5_CURBSAFE")]
    Thm5CurbSafe,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Thm1Backstep,
        Variant::Thm2Smooth,
        Variant::Thm3NoFront,
        Variant::Thm4Decel,
        Variant::Thm5CurbSafe,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Thm1Backstep => "THM1_BACKSTEP",
            Variant::Thm2Smooth => "THM2_SMOOTH",
            Variant::Thm3NoFront => "THM3_NOFRONT",
            Variant::Thm4Decel => "THM4_DECEL",
            Variant::Thm5CurbSafe => "THM5_CURBSAFE",
        }
    }

    /// Short name used in scenario files and on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            Variant::Thm1Backstep => "thm1",
            Variant::Thm2Smooth => "thm2",
            Variant::Thm3NoFront => "thm3",
            Variant::Thm4Decel => "thm4",
            Variant::Thm5CurbSafe => "thm5",
        }
    }

    /// The error norm this law's envelopes are stated in.
    pub fn error_norm(self) -> ErrorNormVariant {
        match self {
            Variant::Thm1Backstep | Variant::Thm2Smooth | Variant::Thm4Decel => {
                ErrorNormVariant::Euclid
            }
            Variant::Thm3NoFront => ErrorNormVariant::Half4,
            Variant::Thm5CurbSafe => ErrorNormVariant::Half1,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| s.eq_ignore_ascii_case(v.short_name()) || s.eq_ignore_ascii_case(v.label()))
            .ok_or_else(|| Error::Parse(format!("unknown control law `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    /// Speed gain, decelerating law only.
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Speed exponent `v = c0 rho^(n/(n+1))`, decelerating law only.
    pub n: u32,
}

/// A steering law together with its gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLaw {
    pub variant: Variant,
    pub gains: Gains,
    /// Constant forward speed. Unused by the decelerating law.
    pub speed: f64,
    /// Lower clip applied to `rho` inside the feedback formulas.
    pub rho_floor: f64,
}

impl ControlLaw {
    fn fixed_speed(variant: Variant, v: f64, c1: f64, c2: f64) -> Self {
        Self {
            variant,
            gains: Gains {
                c0: 0.0,
                c1,
                c2,
                n: 0,
            },
            speed: v,
            rho_floor: 0.0,
        }
    }

    pub fn backstepping(v: f64, c1: f64, c2: f64) -> Self {
        Self::fixed_speed(Variant::Thm1Backstep, v, c1, c2)
    }

    pub fn smooth(v: f64, c1: f64, c2: f64) -> Self {
        Self::fixed_speed(Variant::Thm2Smooth, v, c1, c2)
    }

    pub fn no_front_crossing(v: f64, c1: f64, c2: f64) -> Self {
        Self::fixed_speed(Variant::Thm3NoFront, v, c1, c2)
    }

    pub fn decelerating(c0: f64, c1: f64, c2: f64, n: u32) -> Self {
        Self {
            variant: Variant::Thm4Decel,
            gains: Gains { c0, c1, c2, n },
            speed: 0.0,
            rho_floor: 0.0,
        }
    }

    pub fn curb_safe(v: f64, c1: f64, c2: f64) -> Self {
        Self::fixed_speed(Variant::Thm5CurbSafe, v, c1, c2)
    }

    pub fn with_rho_floor(mut self, floor: f64) -> Self {
        self.rho_floor = floor;
        self
    }

    /// `min(c1, c2)`.
    pub fn min_gain(&self) -> f64 {
        self.gains.c1.min(self.gains.c2)
    }

    /// Forward speed commanded at distance `rho` (already clipped).
    pub fn speed_at(&self, rho: f64) -> f64 {
        match self.variant {
            Variant::Thm4Decel => decel_speed(rho, self.gains.c0, self.gains.n),
            _ => self.speed,
        }
    }

    /// Largest speed along a run starting at `rho0`.
    pub fn max_speed(&self, rho0: f64) -> f64 {
        self.speed_at(rho0)
    }

    /// Checks the gain conditions and the initial-state domain of the law.
    /// The error names the violated condition.
    pub fn validate(&self, state0: &PolarState) -> Result<()> {
        let bad = |reason: String| Error::InvalidGains {
            variant: self.variant,
            reason,
        };
        let Gains { c0, c1, c2, n } = self.gains;
        if !(c1.is_finite() && c2.is_finite()) {
            return Err(bad("gains must be finite".into()));
        }
        if !(self.rho_floor >= 0.0) {
            return Err(bad(format!("rho_floor = {} must be >= 0", self.rho_floor)));
        }
        if self.variant != Variant::Thm4Decel && !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(bad(format!("forward speed v = {} must be > 0", self.speed)));
        }
        match self.variant {
            Variant::Thm1Backstep => {
                if !(self.min_gain() > 1.0) {
                    return Err(bad(format!("requires min(c1, c2) > 1, got c1 = {c1}, c2 = {c2}")));
                }
            }
            Variant::Thm2Smooth | Variant::Thm3NoFront => {
                if !(self.min_gain() > 0.0) {
                    return Err(bad(format!("requires min(c1, c2) > 0, got c1 = {c1}, c2 = {c2}")));
                }
            }
            Variant::Thm4Decel => {
                if n == 0 {
                    return Err(bad("requires a positive integer n".into()));
                }
                if !(c0 > 0.0 && c0.is_finite()) {
                    return Err(bad(format!("requires c0 > 0, got c0 = {c0}")));
                }
                let lower = 1.0 / (n as f64 + 1.0);
                if !(self.min_gain() > lower) {
                    return Err(bad(format!(
                        "requires min(c1, c2) > 1/(n+1) = {lower}, got c1 = {c1}, c2 = {c2}"
                    )));
                }
            }
            Variant::Thm5CurbSafe => {
                if !(c2 > 0.0) {
                    return Err(bad(format!("requires c2 > 0, got c2 = {c2}")));
                }
            }
        }

        if !(state0.rho > 0.0 && state0.rho.is_finite()) {
            return Err(Error::Domain(format!("initial distance {} must be > 0", state0.rho)));
        }
        check_los(state0.gamma)?;
        if !state0.delta.is_finite() {
            return Err(Error::Domain("initial polar angle is not finite".into()));
        }
        match self.variant {
            Variant::Thm3NoFront => check_half_angle(state0.delta)?,
            Variant::Thm5CurbSafe => {
                let bound = c1_lower_bound_thm5(state0)?;
                if !(c1 > bound) {
                    return Err(bad(format!(
                        "requires c1 > max(0, -rho0 tan(gamma0)/sin(delta0)) = {bound}, got c1 = {c1}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Feedback inputs at `state`, with the domain of the law checked.
    pub fn inputs(&self, state: &PolarState) -> Result<Inputs> {
        let clipped = self.clipped(state);
        if !(clipped.rho > 0.0) {
            return Err(Error::Domain(format!(
                "distance {} must be > 0 after clipping",
                clipped.rho
            )));
        }
        check_los(state.gamma)?;
        if matches!(self.variant, Variant::Thm3NoFront | Variant::Thm5CurbSafe) {
            check_half_angle(state.delta)?;
        }
        Ok(self.feedback(state))
    }

    /// Feedback inputs without domain checks. Used inside integrator stages.
    pub(crate) fn feedback(&self, state: &PolarState) -> Inputs {
        let s = self.clipped(state);
        let v = self.speed_at(s.rho);
        let view = self.zeta_view_clipped(&s);
        Inputs {
            v,
            omega: steer(&s, v, view.omega_bar),
        }
    }

    fn clipped(&self, state: &PolarState) -> PolarState {
        PolarState {
            rho: clip_rho(state.rho, self.rho_floor),
            ..*state
        }
    }

    /// Backstepping variable and intermediate control at `state`.
    pub fn zeta_view(&self, state: &PolarState) -> ZetaView {
        self.zeta_view_clipped(&self.clipped(state))
    }

    fn zeta_view_clipped(&self, s: &PolarState) -> ZetaView {
        let Gains { c1, c2, .. } = self.gains;
        match self.variant {
            Variant::Thm1Backstep | Variant::Thm4Decel => zeta_backstep(s, c1, c2),
            Variant::Thm2Smooth => zeta_smooth(s, c1, c2),
            Variant::Thm3NoFront => zeta_no_front(s, c1, c2),
            Variant::Thm5CurbSafe => zeta_curb_safe(s, c1, c2),
        }
    }

    /// Initial error norm in the law's own variant.
    pub fn initial_error(&self, state0: &PolarState) -> Result<f64> {
        error_norm(state0.delta, state0.gamma, self.variant.error_norm())
    }
}

impl fmt::Display for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Gains { c0, c1, c2, n } = self.gains;
        match self.variant {
            Variant::Thm4Decel => write!(
                f,
                "{}(c0={c0}, c1={c1}, c2={c2}, n={n}, rho_floor={})",
                self.variant, self.rho_floor
            ),
            _ => write!(
                f,
                "{}(v={}, c1={c1}, c2={c2}, rho_floor={})",
                self.variant, self.speed, self.rho_floor
            ),
        }
    }
}

/// Transformed error and intermediate control; derived from the state on
/// every call, never integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaView {
    pub zeta: f64,
    pub omega_bar: f64,
}

fn zeta_backstep(s: &PolarState, c1: f64, c2: f64) -> ZetaView {
    let tan_g = s.gamma.tan();
    let zeta = tan_g + c1 * s.delta;
    ZetaView {
        zeta,
        omega_bar: c2 * zeta + s.delta + c1 * tan_g,
    }
}

fn zeta_smooth(s: &PolarState, c1: f64, c2: f64) -> ZetaView {
    let tan_g = s.gamma.tan();
    let zeta = tan_g + c1 * s.delta / s.rho;
    ZetaView {
        zeta,
        omega_bar: s.delta + (c1 * (tan_g + s.delta) + c2 * zeta) / s.rho,
    }
}

fn zeta_no_front(s: &PolarState, c1: f64, c2: f64) -> ZetaView {
    let tan_g = s.gamma.tan();
    let (sin_d, cos_d) = s.delta.sin_cos();
    let half = (0.5 * s.delta).tan();
    let zeta = tan_g + c1 * sin_d / s.rho;
    ZetaView {
        zeta,
        omega_bar: (1.0 + half * half) * 2.0 * half
            + (c1 * (cos_d * tan_g + sin_d) + c2 * zeta) / s.rho,
    }
}

fn zeta_curb_safe(s: &PolarState, c1: f64, c2: f64) -> ZetaView {
    let tan_g = s.gamma.tan();
    let (sin_d, cos_d) = s.delta.sin_cos();
    let half = (0.5 * s.delta).tan();
    let sec2 = 1.0 + half * half;
    let zeta = tan_g + c1 * sin_d / s.rho;
    ZetaView {
        zeta,
        omega_bar: (c1 * (sin_d + cos_d * tan_g) + c2 * (1.0 + s.rho * s.rho) * sec2 * sec2 * zeta)
            / s.rho,
    }
}

fn steer(s: &PolarState, v: f64, omega_bar: f64) -> f64 {
    let (sin_g, cos_g) = s.gamma.sin_cos();
    v / s.rho * (sin_g + cos_g * cos_g * cos_g * omega_bar)
}

fn decel_speed(rho: f64, c0: f64, n: u32) -> f64 {
    let n = n as f64;
    c0 * rho.max(0.0).powf(n / (n + 1.0))
}

fn check_state(state: &PolarState) -> Result<()> {
    if !(state.rho > 0.0) {
        return Err(Error::Domain(format!("distance {} must be > 0", state.rho)));
    }
    check_los(state.gamma)?;
    if !state.delta.is_finite() {
        return Err(Error::Domain("polar angle is not finite".into()));
    }
    Ok(())
}

/// Backstepping steering law in expanded form:
/// `omega = (v/rho){sin g + cos^2 g [cos g (1 + c1 c2) d + (c1 + c2) sin g]}`.
pub fn omega_thm1(state: &PolarState, v: f64, c1: f64, c2: f64) -> Result<f64> {
    check_state(state)?;
    let PolarState { rho, delta, gamma } = *state;
    let (sin_g, cos_g) = gamma.sin_cos();
    Ok(v / rho
        * (sin_g + cos_g * cos_g * (cos_g * (1.0 + c1 * c2) * delta + (c1 + c2) * sin_g)))
}

pub fn omega_thm2(state: &PolarState, v: f64, c1: f64, c2: f64) -> Result<f64> {
    check_state(state)?;
    Ok(steer(state, v, zeta_smooth(state, c1, c2).omega_bar))
}

pub fn omega_thm3(state: &PolarState, v: f64, c1: f64, c2: f64) -> Result<f64> {
    check_state(state)?;
    check_half_angle(state.delta)?;
    Ok(steer(state, v, zeta_no_front(state, c1, c2).omega_bar))
}

/// Decelerating law: `v = c0 rho^(n/(n+1))` with the backstepping steering.
pub fn control_thm4(state: &PolarState, c0: f64, c1: f64, c2: f64, n: u32) -> Result<Inputs> {
    check_state(state)?;
    let v = decel_speed(state.rho, c0, n);
    Ok(Inputs {
        v,
        omega: omega_thm1(state, v, c1, c2)?,
    })
}

/// Curb-safe law. Accepts `delta` anywhere in `(-pi, pi)` so that rounding
/// just below zero does not abort a run; keeping `delta >= 0` is the law's
/// job and is checked by the certificates.
pub fn omega_thm5(state: &PolarState, v: f64, c1: f64, c2: f64) -> Result<f64> {
    check_state(state)?;
    check_half_angle(state.delta)?;
    Ok(steer(state, v, zeta_curb_safe(state, c1, c2).omega_bar))
}

/// Strict lower bound on `c1` for the curb-safe law:
/// `max(0, -rho0 tan(gamma0) / sin(delta0))`.
pub fn c1_lower_bound_thm5(state0: &PolarState) -> Result<f64> {
    if !(state0.delta > 0.0 && state0.delta < PI - ANGLE_EPS) {
        return Err(Error::Domain(format!(
            "curb-safe law needs delta0 in (0, pi), got {}",
            state0.delta
        )));
    }
    check_los(state0.gamma)?;
    let sin_d = state0.delta.sin();
    if sin_d == 0.0 {
        return Err(Error::Domain("sin(delta0) = 0".into()));
    }
    Ok((-state0.rho * state0.gamma.tan() / sin_d).max(0.0))
}

/// Default curb-safe `c1`: one above the strict lower bound.
pub fn default_c1_thm5(state0: &PolarState) -> Result<f64> {
    Ok(c1_lower_bound_thm5(state0)? + 1.0)
}

/// `sqrt(2) (1 + max(c1 c2, c1 + c2))`, the gain bounding `|omega rho| / v`
/// by the error norm for the backstepping steering.
pub fn steering_gain(c1: f64, c2: f64) -> f64 {
    SQRT_2 * (1.0 + (c1 * c2).max(c1 + c2))
}

/// Forward speed that keeps the backstepping law's `|omega|` within
/// `omega_limit` for the whole run from `state0`.
pub fn velocity_for_omega_limit(
    omega_limit: f64,
    state0: &PolarState,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if !(omega_limit > 0.0) {
        return Err(Error::Domain(format!("omega limit {omega_limit} must be > 0")));
    }
    if !(c1.min(c2) > 1.0) {
        return Err(Error::InvalidGains {
            variant: Variant::Thm1Backstep,
            reason: format!("requires min(c1, c2) > 1, got c1 = {c1}, c2 = {c2}"),
        });
    }
    let b0 = error_norm(state0.delta, state0.gamma, ErrorNormVariant::Euclid)?;
    if b0 == 0.0 {
        return Err(Error::Domain(
            "initial error is zero: every forward speed respects the limit".into(),
        ));
    }
    Ok(omega_limit * state0.rho / b0 / (gain_margin(c1) * steering_gain(c1, c2)))
}

pub fn clip_rho(rho: f64, floor: f64) -> f64 {
    rho.max(floor)
}

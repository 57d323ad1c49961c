//! Comparison-lemma harnesses and the Lyapunov rate check.
//!
//! Derivatives with respect to `rho` are estimated by centered differences
//! over consecutive samples. A differential inequality `dV/drho >= rhs` is
//! taken to hold at an interior sample when the centered slope is at least
//! `rhs - tol`, with `tol = FD_FACTOR * h * L`, where `h` is the half-width
//! of the stencil in `rho` and `L = |s_back - s_fwd| / h` is the local
//! second-derivative estimate from the one-sided slopes. A round-off floor is
//! added on top.

use crate::dynamics::Trajectory;
use crate::{Error, Result};

use super::{ENVELOPE_ABS, ENVELOPE_REL};

pub const FD_FACTOR: f64 = 10.0;

/// Centered slope at the middle of three `(rho, V)` points and its
/// finite-difference tolerance. `None` if `rho` is not strictly decreasing.
pub fn fd_tolerance(prev: (f64, f64), mid: (f64, f64), next: (f64, f64)) -> Option<(f64, f64)> {
    let back = prev.0 - mid.0;
    let fwd = mid.0 - next.0;
    if !(back > 0.0 && fwd > 0.0) {
        return None;
    }
    let s_back = (prev.1 - mid.1) / back;
    let s_fwd = (mid.1 - next.1) / fwd;
    let centered = (prev.1 - next.1) / (back + fwd);
    let half = 0.5 * (back + fwd);
    let curvature = (s_back - s_fwd).abs() / half;
    let roundoff = 8.0 * f64::EPSILON * (prev.1.abs() + mid.1.abs() + next.1.abs()) / half;
    Some((centered, FD_FACTOR * half * curvature + roundoff))
}

/// Gain order in the comparison lemma.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainOrder {
    /// `dV/drho >= (a/rho) V` implies `V(rho) <= V(rho0) (rho/rho0)^a`.
    Linear,
    /// `dV/drho >= (a/rho^2) V` implies `V(rho) <= V(rho0) exp(a (1/rho0 - 1/rho))`.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaVerdict {
    /// Whether the conclusion held at every sample.
    pub holds: bool,
    /// Supremum of `lhs - rhs` of the conclusion.
    pub worst_slack: f64,
    pub worst_index: usize,
}

fn conclude(pairs: impl Iterator<Item = (usize, f64, f64)>) -> LemmaVerdict {
    let mut v = LemmaVerdict {
        holds: true,
        worst_slack: f64::NEG_INFINITY,
        worst_index: 0,
    };
    for (i, lhs, rhs) in pairs {
        let slack = lhs - rhs;
        if !(slack <= ENVELOPE_ABS + ENVELOPE_REL * rhs.abs()) {
            v.holds = false;
        }
        if slack > v.worst_slack || slack.is_nan() {
            v.worst_slack = slack;
            v.worst_index = i;
        }
    }
    v
}

/// Checks the comparison lemma on a sampled `(rho, V)` trace ordered in time
/// (so `rho` strictly decreasing). The hypothesis is tested at every interior
/// sample; if it fails anywhere the conclusion is not asserted and
/// [`Error::HypothesisNotMet`] is returned.
pub fn lemma1_check(samples: &[(f64, f64)], a: f64, order: GainOrder) -> Result<LemmaVerdict> {
    if samples.is_empty() {
        return Err(Error::Domain("empty trace".into()));
    }
    if !(a > 0.0) {
        return Err(Error::Domain(format!("lemma gain a = {a} must be > 0")));
    }
    let (rho0, v0) = samples[0];
    for (i, w) in samples.windows(2).enumerate() {
        if !(w[1].0 < w[0].0) {
            return Err(Error::Domain(format!(
                "rho must be strictly decreasing (samples {i} and {})",
                i + 1
            )));
        }
    }
    if !(samples.last().unwrap().0 > 0.0) {
        return Err(Error::Domain("rho must stay positive".into()));
    }
    let gain = |rho: f64| match order {
        GainOrder::Linear => a / rho,
        GainOrder::Quadratic => a / (rho * rho),
    };
    for i in 1..samples.len().saturating_sub(1) {
        let (rho, v) = samples[i];
        let (slope, tol) = fd_tolerance(samples[i - 1], samples[i], samples[i + 1])
            .expect("monotonicity checked above");
        let rhs = gain(rho) * v;
        if slope < rhs - tol {
            return Err(Error::HypothesisNotMet {
                index: i,
                detail: format!("dV/drho ~ {slope:e} < {rhs:e} - {tol:e} at rho = {rho}"),
            });
        }
    }
    let envelope = |rho: f64| match order {
        GainOrder::Linear => v0 * (rho / rho0).powf(a),
        GainOrder::Quadratic => v0 * (a * (1.0 / rho0 - 1.0 / rho)).exp(),
    };
    Ok(conclude(
        samples
            .iter()
            .enumerate()
            .map(|(i, &(rho, v))| (i, v, envelope(rho))),
    ))
}

/// Comparison functions: continuous, strictly increasing, zero at zero.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassK {
    /// `gain * s`
    Linear { gain: f64 },
    /// `gain * s^exponent`
    Power { gain: f64, exponent: f64 },
    /// `factor * inner(s)`
    Scaled { factor: f64, inner: Box<ClassK> },
}

impl ClassK {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ClassK::Linear { gain } => gain * s,
            ClassK::Power { gain, exponent } => gain * s.powf(*exponent),
            ClassK::Scaled { factor, inner } => factor * inner.eval(s),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ClassK::Linear { gain } => *gain > 0.0,
            ClassK::Power { gain, exponent } => *gain > 0.0 && *exponent > 0.0,
            ClassK::Scaled { factor, inner } => {
                inner.validate()?;
                *factor > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("{self:?} is not a class-K function")))
        }
    }

    /// `alpha(0) = 0` and strict increase on a uniform grid of `[0, 1]`.
    pub fn is_class_k_on_grid(&self, points: usize) -> bool {
        if self.eval(0.0) != 0.0 {
            return false;
        }
        let mut prev = 0.0;
        (1..=points).all(|k| {
            let y = self.eval(k as f64 / points as f64);
            let up = y > prev;
            prev = y;
            up
        })
    }
}

/// Checks the linear-arrival lemma on a constant-speed trajectory: if
/// `cos gamma > 0` and `tan^2 gamma <= alpha(rho/rho0)` at every sample then
/// `rho(t) <= rho0 (1 - t/t1)` with `t1 = (rho0/v) sqrt(1 + alpha(1))`.
pub fn lemma2_check(traj: &Trajectory, alpha: &ClassK) -> Result<LemmaVerdict> {
    alpha.validate()?;
    let active = traj.active();
    let v = active
        .first()
        .map(|s| s.inputs.v)
        .ok_or_else(|| Error::Domain("no samples before cutoff".into()))?;
    if !(v > 0.0) || active.iter().any(|s| s.inputs.v != v) {
        return Err(Error::Domain("forward speed must be constant and positive".into()));
    }
    let rho0 = traj.initial().state.rho;
    for (i, s) in traj.samples.iter().enumerate() {
        let cos_g = s.state.gamma.cos();
        let tan_g = s.state.gamma.tan();
        let bound = alpha.eval(s.state.rho / rho0);
        if !(cos_g > 0.0) || tan_g * tan_g > bound + ENVELOPE_ABS + ENVELOPE_REL * bound {
            return Err(Error::HypothesisNotMet {
                index: i,
                detail: format!(
                    "tan^2(gamma) = {:e} exceeds alpha(rho/rho0) = {bound:e} at t = {}",
                    tan_g * tan_g,
                    s.t
                ),
            });
        }
    }
    let t1 = lemma2_t1(rho0, v, alpha);
    Ok(conclude(traj.samples.iter().enumerate().map(|(i, s)| {
        (i, s.state.rho, rho0 * (1.0 - s.t / t1).max(0.0))
    })))
}

/// `t1 = (rho0/v) sqrt(1 + alpha(1))`.
pub fn lemma2_t1(rho0: f64, v: f64, alpha: &ClassK) -> f64 {
    rho0 / v * (1.0 + alpha.eval(1.0)).sqrt()
}

/// Finite-difference check of `dV/drho >= 2 c_min V / rho` for
/// `V = delta^2 + zeta^2`, `zeta = tan gamma + c1 delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovRate {
    pub interior: usize,
    pub violations: usize,
    /// Largest `rhs - slope - tol`; `<= 0` when no sample violates.
    pub worst_excess: f64,
    pub worst_time: f64,
    /// Largest `rhs - slope` with no tolerance, floored at zero.
    pub max_raw_deficit: f64,
}

impl LyapunovRate {
    pub fn pass_fraction(&self) -> f64 {
        if self.interior == 0 {
            1.0
        } else {
            1.0 - self.violations as f64 / self.interior as f64
        }
    }
}

pub fn lyapunov_rate(traj: &Trajectory, c1: f64, c2: f64) -> LyapunovRate {
    let c_min = c1.min(c2);
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|s| {
            let d = s.state.delta;
            let zeta = s.state.gamma.tan() + c1 * d;
            (s.state.rho, d * d + zeta * zeta)
        })
        .collect();
    let mut out = LyapunovRate {
        interior: 0,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_time: 0.0,
        max_raw_deficit: 0.0,
    };
    for i in 1..pts.len().saturating_sub(1) {
        out.interior += 1;
        let t = traj.samples[i].t;
        let Some((slope, tol)) = fd_tolerance(pts[i - 1], pts[i], pts[i + 1]) else {
            out.violations += 1;
            out.worst_excess = f64::INFINITY;
            out.worst_time = t;
            continue;
        };
        let rhs = 2.0 * c_min * pts[i].1 / pts[i].0;
        let deficit = rhs - slope;
        out.max_raw_deficit = out.max_raw_deficit.max(deficit);
        if deficit > tol {
            out.violations += 1;
        }
        if deficit - tol > out.worst_excess {
            out.worst_excess = deficit - tol;
            out.worst_time = t;
        }
    }
    out
}

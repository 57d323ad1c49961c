//! Sample-wise verification of the guarantees each law comes with.
//!
//! A [`CertificateReport`] lists named checks. Exact checks compare the
//! trajectory against closed-form envelopes whose constants are known
//! (backstepping and decelerating laws, and the safety invariants). For the
//! smooth, no-front-crossing and curb-safe laws the decay constants are not
//! available in closed form; for those the report fits them from the run and
//! records shape checks instead.
//!
//! Every envelope inequality `lhs <= rhs` is accepted when
//! `lhs - rhs <= ENVELOPE_ABS + ENVELOPE_REL * |rhs|`, which absorbs the
//! integration error at the default step.

mod fit;
mod lemmas;

use std::f64::consts::PI;
use std::fmt;

use crate::controllers::{steering_gain, ControlLaw, Variant};
use crate::dynamics::{Termination, Trajectory};
use crate::geometry::{error_norm, gain_margin, ErrorNormVariant, PolarState};
use crate::{Error, Result};

pub use fit::{fit_decay, DecayFit};
pub use lemmas::{
    fd_tolerance, lemma1_check, lemma2_check, lemma2_t1, lyapunov_rate, ClassK, GainOrder,
    LemmaVerdict, LyapunovRate, FD_FACTOR,
};

pub const ENVELOPE_ABS: f64 = 1e-6;
pub const ENVELOPE_REL: f64 = 1e-4;
/// Fraction of interior samples that must satisfy the Lyapunov rate
/// inequality within the finite-difference tolerance.
pub const LYAPUNOV_PASS_FRACTION: f64 = 0.999;

/// Arrival-time bound of the backstepping law:
/// `t1 = (rho0 / v) sqrt(1 + M(c1)^2 B0^2)`.
pub fn t1_thm1(rho0: f64, v: f64, c1: f64, b0: f64) -> f64 {
    let m = gain_margin(c1);
    rho0 / v * (1.0 + m * m * b0 * b0).sqrt()
}

/// Arrival-time bound of the decelerating law:
/// `t1 = (n + 1) rho0^(1/(n+1)) / c0 * sqrt(1 + M(c1)^2 B0^2)`.
pub fn t1_thm4(rho0: f64, c0: f64, n: u32, c1: f64, b0: f64) -> f64 {
    let np1 = n as f64 + 1.0;
    let m = gain_margin(c1);
    np1 * rho0.powf(1.0 / np1) / c0 * (1.0 + m * m * b0 * b0).sqrt()
}

/// Companion constant `a = sqrt(2)(1 + max(c1 c2, c1 + c2)) M(c1)` of the
/// decelerating law's steering envelope.
pub fn thm4_steering_constant(c1: f64, c2: f64) -> f64 {
    steering_gain(c1, c2) * gain_margin(c1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckClass {
    /// Closed-form envelope or invariant with known constants.
    Exact,
    /// Qualitative conclusion checked with fitted or substituted constants.
    Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub class: CheckClass,
    pub passed: bool,
    /// Supremum of `lhs - rhs` over the samples.
    pub worst_slack: f64,
    pub worst_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedConstants {
    /// Overflows to infinity for steep decays; `ln_n1` stays exact.
    pub n1: f64,
    pub ln_n1: f64,
    pub beta1: f64,
    pub n2: f64,
    pub ln_n2: f64,
    pub beta2: f64,
    /// RMS residual of the log-linear fit of the error norm.
    pub residual_b: f64,
    /// RMS residual of the log-linear fit of the steering rate.
    pub residual_omega: f64,
    /// Horizon `t1` the fit was made against.
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub theorem: Variant,
    pub checks: Vec<Check>,
    pub fitted: Option<FittedConstants>,
    pub overall: bool,
}

impl CertificateReport {
    fn new(theorem: Variant, checks: Vec<Check>, fitted: Option<FittedConstants>) -> Self {
        let overall = checks.iter().all(|c| c.passed);
        Self {
            theorem,
            checks,
            fitted,
            overall,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Structured text: header lines, then one line per check with name,
    /// verdict, worst slack and the time it occurred.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        writeln!(f, "theorem {}", self.theorem)?;
        writeln!(f, "overall {}", verdict(self.overall))?;
        if let Some(c) = &self.fitted {
            writeln!(
                f,
                "fitted ln_n1={:.9e} beta1={:.9e} ln_n2={:.9e} beta2={:.9e} residual_b={:.9e} residual_omega={:.9e} t1={:.9e}",
                c.ln_n1, c.beta1, c.ln_n2, c.beta2, c.residual_b, c.residual_omega, c.t1
            )?;
        }
        for c in &self.checks {
            let class = match c.class {
                CheckClass::Exact => "exact",
                CheckClass::Shape => "shape",
            };
            writeln!(
                f,
                "check {} {} {:.9e} {:.9e} {}",
                c.name,
                verdict(c.passed),
                c.worst_slack,
                c.worst_time,
                class
            )?;
        }
        Ok(())
    }
}

/// Running supremum of `lhs - rhs` with the envelope tolerance.
struct Envelope {
    name: &'static str,
    class: CheckClass,
    passed: bool,
    worst_slack: f64,
    worst_time: f64,
}

impl Envelope {
    fn new(name: &'static str, class: CheckClass) -> Self {
        Self {
            name,
            class,
            passed: true,
            worst_slack: f64::NEG_INFINITY,
            worst_time: 0.0,
        }
    }

    fn observe(&mut self, t: f64, lhs: f64, rhs: f64) {
        let slack = lhs - rhs;
        if !(slack <= ENVELOPE_ABS + ENVELOPE_REL * rhs.abs()) {
            self.passed = false;
        }
        if slack > self.worst_slack || slack.is_nan() {
            self.worst_slack = slack;
            self.worst_time = t;
        }
    }

    fn finish(self) -> Check {
        Check {
            name: self.name.to_string(),
            class: self.class,
            passed: self.passed,
            worst_slack: self.worst_slack,
            worst_time: self.worst_time,
        }
    }
}

/// Remaining fraction `1 - t/t1`, floored at zero.
fn remaining(t: f64, t1: f64) -> f64 {
    (1.0 - t / t1).max(0.0)
}

fn error_at(state: &PolarState, variant: ErrorNormVariant) -> f64 {
    error_norm(state.delta, state.gamma, variant).unwrap_or(f64::INFINITY)
}

fn arrival_check(traj: &Trajectory, t1: f64, class: CheckClass) -> Check {
    let t_end = match (traj.terminated, traj.cutoff_time) {
        (Termination::CutoffReached, Some(t)) => t,
        _ => f64::INFINITY,
    };
    Check {
        name: "arrival_before_t1".into(),
        class,
        passed: t_end <= t1,
        worst_slack: t_end - t1,
        worst_time: traj.last().t,
    }
}

/// Evaluates every check that applies to `law` at every sample of `traj`.
pub fn check_trajectory(traj: &Trajectory, law: &ControlLaw) -> Result<CertificateReport> {
    if traj.law != *law {
        return Err(Error::MismatchedLaw {
            expected: law.to_string(),
            found: traj.law.to_string(),
        });
    }
    let s0 = traj.initial().state;
    law.validate(&s0)?;
    Ok(match law.variant {
        Variant::Thm1Backstep => check_backstepping(traj, law),
        Variant::Thm4Decel => check_decelerating(traj, law),
        Variant::Thm2Smooth | Variant::Thm3NoFront | Variant::Thm5CurbSafe => {
            check_fitted(traj, law)
        }
    })
}

fn lyapunov_check(traj: &Trajectory, law: &ControlLaw) -> Check {
    let rate = lyapunov_rate(traj, law.gains.c1, law.gains.c2);
    Check {
        name: "lyapunov_rate".into(),
        class: CheckClass::Exact,
        passed: rate.pass_fraction() >= LYAPUNOV_PASS_FRACTION,
        worst_slack: rate.worst_excess,
        worst_time: rate.worst_time,
    }
}

fn check_backstepping(traj: &Trajectory, law: &ControlLaw) -> CertificateReport {
    let s0 = traj.initial().state;
    let (rho0, v) = (s0.rho, law.speed);
    let (c1, c2) = (law.gains.c1, law.gains.c2);
    let c_min = law.min_gain();
    let b0 = error_at(&s0, ErrorNormVariant::Euclid);
    let m = gain_margin(c1);
    let t1 = t1_thm1(rho0, v, c1, b0);
    let omega_scale = v / rho0 * steering_gain(c1, c2) * m * b0;

    let mut rho_env = Envelope::new("rho_linear_envelope", CheckClass::Exact);
    let mut b_env = Envelope::new("error_norm_envelope", CheckClass::Exact);
    let mut w_env = Envelope::new("omega_envelope", CheckClass::Exact);
    for s in &traj.samples {
        let r = remaining(s.t, t1);
        rho_env.observe(s.t, s.state.rho, rho0 * r);
        let b = error_at(&s.state, ErrorNormVariant::Euclid);
        b_env.observe(s.t, b * b, m * m * r.powf(2.0 * c_min) * b0 * b0);
        w_env.observe(s.t, s.inputs.omega.abs(), omega_scale * r.powf(c_min - 1.0));
    }
    let checks = vec![
        rho_env.finish(),
        b_env.finish(),
        w_env.finish(),
        lyapunov_check(traj, law),
        arrival_check(traj, t1, CheckClass::Exact),
    ];
    CertificateReport::new(law.variant, checks, None)
}

fn check_decelerating(traj: &Trajectory, law: &ControlLaw) -> CertificateReport {
    let s0 = traj.initial().state;
    let rho0 = s0.rho;
    let g = law.gains;
    let np1 = g.n as f64 + 1.0;
    let c_min = law.min_gain();
    let b0 = error_at(&s0, ErrorNormVariant::Euclid);
    let m = gain_margin(g.c1);
    let t1 = t1_thm4(rho0, g.c0, g.n, g.c1, b0);
    let a = thm4_steering_constant(g.c1, g.c2);
    let v0 = g.c0 * rho0.powf(g.n as f64 / np1);
    let omega_scale = g.c0 * a * m * b0 / rho0.powf(1.0 / np1);

    let mut rho_env = Envelope::new("rho_power_envelope", CheckClass::Exact);
    let mut b_env = Envelope::new("error_norm_envelope", CheckClass::Exact);
    let mut v_env = Envelope::new("speed_envelope", CheckClass::Exact);
    let mut w_env = Envelope::new("omega_envelope", CheckClass::Exact);
    for s in &traj.samples {
        let r = remaining(s.t, t1);
        rho_env.observe(s.t, s.state.rho, rho0 * r.powf(np1));
        let b = error_at(&s.state, ErrorNormVariant::Euclid);
        b_env.observe(s.t, b, m * b0 * r.powf(np1 * c_min));
        v_env.observe(s.t, s.inputs.v, v0 * r.powf(g.n as f64));
        w_env.observe(s.t, s.inputs.omega.abs(), omega_scale * r.powf(np1 * c_min - 1.0));
    }
    let checks = vec![
        rho_env.finish(),
        b_env.finish(),
        v_env.finish(),
        w_env.finish(),
        lyapunov_check(traj, law),
        arrival_check(traj, t1, CheckClass::Exact),
    ];
    CertificateReport::new(law.variant, checks, None)
}

/// Smooth, no-front-crossing and curb-safe laws: the backstepping `t1` stands
/// in for the law's own arrival bound, `(N, beta)` are fitted, and the
/// safety invariants are checked exactly.
fn check_fitted(traj: &Trajectory, law: &ControlLaw) -> CertificateReport {
    let s0 = traj.initial().state;
    let rho0 = s0.rho;
    let norm = law.variant.error_norm();
    let b0_euclid = error_at(&s0, ErrorNormVariant::Euclid);
    let t1 = t1_thm1(rho0, law.speed, law.gains.c1, b0_euclid);
    let b0 = error_at(&s0, norm);
    // factor multiplying B0 in the steering envelope
    let omega_factor = match law.variant {
        Variant::Thm3NoFront => 1.0 + b0 * b0,
        Variant::Thm5CurbSafe => 1.0 + b0.powi(4),
        _ => 1.0,
    };

    let mut checks = Vec::new();
    let mut rho_env = Envelope::new("rho_linear_envelope", CheckClass::Shape);
    for s in &traj.samples {
        rho_env.observe(s.t, s.state.rho, rho0 * remaining(s.t, t1));
    }
    checks.push(rho_env.finish());

    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let b_ratio: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| {
            let b = error_at(&s.state, norm);
            b * b / (b0 * b0)
        })
        .collect();
    let w_ratio: Vec<f64> = traj
        .active()
        .iter()
        .map(|s| s.inputs.omega.abs() / (law.speed * omega_factor * b0))
        .collect();
    let fit_b = fit_decay(&times, &b_ratio, t1);
    let fit_w = fit_decay(&times[..w_ratio.len()], &w_ratio, t1);

    let fitted = match (fit_b, fit_w) {
        (Some(fb), Some(fw)) => {
            let ok = |f: &DecayFit| f.beta >= 0.0 && f.ln_n.is_finite();
            checks.push(Check {
                name: "decay_fit".into(),
                class: CheckClass::Shape,
                passed: ok(&fb) && ok(&fw),
                worst_slack: -fb.beta.min(fw.beta),
                worst_time: 0.0,
            });
            Some(FittedConstants {
                n1: fb.n,
                ln_n1: fb.ln_n,
                beta1: fb.beta,
                n2: fw.n,
                ln_n2: fw.ln_n,
                beta2: fw.beta,
                residual_b: fb.residual,
                residual_omega: fw.residual,
                t1,
            })
        }
        // zero initial error: nothing to decay
        _ => None,
    };

    checks.push(arrival_check(traj, t1, CheckClass::Shape));

    match law.variant {
        Variant::Thm3NoFront => {
            // |delta| < pi  <=>  the track stays off {y = 0, x > 0}
            let mut env = Envelope::new("front_line_invariant", CheckClass::Exact);
            let mut strict = true;
            for s in &traj.samples {
                let a = s.state.delta.abs();
                strict &= a < PI;
                env.observe(s.t, a, PI);
            }
            let mut c = env.finish();
            c.passed = strict;
            checks.push(c);
        }
        Variant::Thm5CurbSafe => {
            // delta in [0, pi)  <=>  y <= 0
            let mut lower = Envelope::new("half_plane_invariant", CheckClass::Exact);
            let mut strict = true;
            for s in &traj.samples {
                strict &= s.state.delta >= 0.0 && s.state.delta < PI;
                lower.observe(s.t, -s.state.delta, 0.0);
            }
            let mut c = lower.finish();
            c.passed = strict;
            checks.push(c);
        }
        _ => {}
    }
    CertificateReport::new(law.variant, checks, fitted)
}

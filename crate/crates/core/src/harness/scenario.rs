//! Scenario files: a versioned TOML document holding one or more runs.
//!
//! ```toml
//! schema = 1
//! title = "backstepping from three headings"
//! outputs = ["csv", "svg", "report"]
//! plots = ["XY_TRACK", "OMEGA_VS_T"]
//!
//! [[scenario]]
//! name = "red"
//! cutoff_rho = 0.01
//! step = 1e-3
//! horizon = "auto"
//! initial = { rho = 1.0, delta = 0.0, gamma = "-pi/2.5" }
//! law = { kind = "thm1", v = 0.5, c1 = 1.01, c2 = 5.0 }
//! ```
//!
//! Angles accept either a number or a small arithmetic expression in `pi`.
//! Resolution turns the file into [`Scenario`] values, applying defaults and
//! rejecting gains that violate the law's conditions.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::{default_c1_thm5, velocity_for_omega_limit, ControlLaw, Variant};
use crate::dynamics::{auto_horizon, default_step};
use crate::geometry::{cart_to_polar, CartesianPose, PolarState};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Either a plain number or an expression such as `"-pi/2.5"` or `"5*pi/6"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Value(f64),
    Expr(String),
}

impl AngleSpec {
    pub fn value(&self) -> Result<f64> {
        match self {
            AngleSpec::Value(v) => Ok(*v),
            AngleSpec::Expr(s) => parse_angle(s),
        }
    }
}

impl From<f64> for AngleSpec {
    fn from(v: f64) -> Self {
        AngleSpec::Value(v)
    }
}

/// Evaluates `[sign] factor (('*' | '/') factor)*` where a factor is a
/// decimal number or `pi`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("cannot read angle `{text}`"));
    let s = text.trim();
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let factor = |f: &str| -> Result<f64> {
        let f = f.trim();
        if f.eq_ignore_ascii_case("pi") {
            Ok(std::f64::consts::PI)
        } else if let Some(k) = f.strip_suffix("pi").filter(|k| !k.is_empty()) {
            k.trim().parse::<f64>().map(|k| k * std::f64::consts::PI).map_err(|_| bad())
        } else {
            f.parse::<f64>().map_err(|_| bad())
        }
    };
    let mut value = None;
    let mut op = '*';
    let mut start = 0;
    for (i, c) in body.char_indices().chain([(body.len(), '*')]) {
        if c != '*' && c != '/' {
            continue;
        }
        let f = factor(&body[start..i])?;
        value = Some(match (value, op) {
            (None, _) => f,
            (Some(v), '*') => v * f,
            (Some(v), _) => v / f,
        });
        op = c;
        start = i + 1;
    }
    let v = sign * value.ok_or_else(bad)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// A number, or the word `auto` for a value derived from the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Word(String),
}

impl AutoOr {
    fn resolve(&self, what: &str, auto: impl FnOnce() -> Result<f64>) -> Result<f64> {
        match self {
            AutoOr::Value(v) => Ok(*v),
            AutoOr::Word(w) if w == "auto" => auto(),
            AutoOr::Word(w) => Err(Error::Parse(format!("{what}: expected a number or \"auto\", got `{w}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSpec {
    pub rho: f64,
    pub delta: AngleSpec,
    pub gamma: AngleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub x: f64,
    pub y: f64,
    pub theta: AngleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    /// `thm1` .. `thm5`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    /// Steering-rate limit from which the backstepping law's speed is derived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    pub c1: AutoOr,
    pub c2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_floor: Option<f64>,
}

impl LawSpec {
    /// Parses the command-line form `thm1,c1=1.01,c2=5,v=0.5`.
    pub fn parse_inline(text: &str) -> Result<Self> {
        let mut parts = text.split(',').map(str::trim);
        let kind = parts.next().filter(|k| !k.is_empty()).ok_or_else(|| Error::Parse("empty law".into()))?;
        kind.parse::<Variant>()?;
        let mut spec = LawSpec {
            kind: kind.to_string(),
            v: None,
            omega_limit: None,
            c0: None,
            c1: AutoOr::Word(String::new()),
            c2: f64::NAN,
            n: None,
            rho_floor: None,
        };
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{part}`")))?;
            let num = || {
                value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{key}: cannot read `{value}`")))
            };
            match key.trim() {
                "v" => spec.v = Some(num()?),
                "omega_limit" => spec.omega_limit = Some(num()?),
                "c0" => spec.c0 = Some(num()?),
                "c1" if value.trim() == "auto" => spec.c1 = AutoOr::Word("auto".into()),
                "c1" => spec.c1 = AutoOr::Value(num()?),
                "c2" => spec.c2 = num()?,
                "n" => {
                    spec.n = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|_| Error::Parse(format!("n: cannot read `{value}`")))?,
                    )
                }
                "rho_floor" => spec.rho_floor = Some(num()?),
                other => return Err(Error::Parse(format!("unknown law parameter `{other}`"))),
            }
        }
        if matches!(&spec.c1, AutoOr::Word(w) if w.is_empty()) {
            return Err(Error::Parse("law needs c1".into()));
        }
        if spec.c2.is_nan() {
            return Err(Error::Parse("law needs c2".into()));
        }
        Ok(spec)
    }

    /// Builds the law for a run starting at `state0` and checks its gain
    /// conditions there.
    pub fn resolve(&self, state0: &PolarState, cutoff_rho: f64) -> Result<ControlLaw> {
        let variant: Variant = self.kind.parse()?;
        let c1 = self.c1.resolve("c1", || match variant {
            Variant::Thm5CurbSafe => default_c1_thm5(state0),
            _ => Err(Error::Parse(format!("c1 = \"auto\" is only defined for thm5, not {}", self.kind))),
        })?;
        let c2 = self.c2;
        let invalid = |reason: &str| Error::InvalidGains {
            variant,
            reason: reason.to_string(),
        };
        let law = match variant {
            Variant::Thm4Decel => {
                if self.v.is_some() || self.omega_limit.is_some() {
                    return Err(invalid("the decelerating law sets its own speed; give c0 and n instead of v"));
                }
                let c0 = self.c0.ok_or_else(|| invalid("missing c0"))?;
                let n = self.n.ok_or_else(|| invalid("missing n"))?;
                ControlLaw::decelerating(c0, c1, c2, n)
            }
            _ => {
                if self.c0.is_some() || self.n.is_some() {
                    return Err(invalid("c0 and n only apply to the decelerating law"));
                }
                let v = match (self.v, self.omega_limit) {
                    (Some(v), None) => v,
                    (None, Some(limit)) if variant == Variant::Thm1Backstep => {
                        velocity_for_omega_limit(limit, state0, c1, c2)?
                    }
                    (None, Some(_)) => return Err(invalid("omega_limit is only supported by thm1")),
                    (Some(_), Some(_)) => return Err(invalid("give either v or omega_limit, not both")),
                    (None, None) => return Err(invalid("missing v")),
                };
                match variant {
                    Variant::Thm1Backstep => ControlLaw::backstepping(v, c1, c2),
                    Variant::Thm2Smooth => ControlLaw::smooth(v, c1, c2),
                    Variant::Thm3NoFront => ControlLaw::no_front_crossing(v, c1, c2),
                    _ => ControlLaw::curb_safe(v, c1, c2),
                }
            }
        };
        let law = law.with_rho_floor(self.rho_floor.unwrap_or(cutoff_rho));
        law.validate(state0)?;
        Ok(law)
    }

    /// Fully numeric description of an already resolved law.
    pub fn from_law(law: &ControlLaw) -> Self {
        let decel = law.variant == Variant::Thm4Decel;
        LawSpec {
            kind: law.variant.short_name().to_string(),
            v: (!decel).then_some(law.speed),
            omega_limit: None,
            c0: decel.then_some(law.gains.c0),
            c1: AutoOr::Value(law.gains.c1),
            c2: law.gains.c2,
            n: decel.then_some(law.gains.n),
            rho_floor: Some(law.rho_floor),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub cutoff_rho: f64,
    /// Seconds, or `auto` for ten times the arrival bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<AutoOr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<PolarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pose: Option<PoseSpec>,
    pub law: LawSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Artifact {
    Csv,
    Svg,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlotKind {
    XyTrack,
    OmegaVsT,
    AnglesVsT,
    VVsT,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::XyTrack,
        PlotKind::OmegaVsT,
        PlotKind::AnglesVsT,
        PlotKind::VVsT,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            PlotKind::XyTrack => "xy_track",
            PlotKind::OmegaVsT => "omega_vs_t",
            PlotKind::AnglesVsT => "angles_vs_t",
            PlotKind::VVsT => "v_vs_t",
        }
    }
}

fn default_outputs() -> Vec<Artifact> {
    vec![Artifact::Csv, Artifact::Svg, Artifact::Report]
}

fn default_plots() -> Vec<PlotKind> {
    vec![PlotKind::XyTrack, PlotKind::OmegaVsT]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Artifact>,
    #[serde(default = "default_plots")]
    pub plots: Vec<PlotKind>,
    pub scenario: Vec<ScenarioSpec>,
}

/// Command-line overrides applied to every scenario of a file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub step: Option<f64>,
    pub cutoff_rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Polar(PolarState),
    Pose(CartesianPose),
}

impl InitialState {
    pub fn polar(&self) -> Result<PolarState> {
        match *self {
            InitialState::Polar(s) => Ok(s),
            InitialState::Pose(p) => cart_to_polar(p),
        }
    }
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub initial: InitialState,
    pub law: ControlLaw,
    pub step: f64,
    pub cutoff_rho: f64,
    pub horizon: f64,
}

impl Scenario {
    pub fn state0(&self) -> PolarState {
        self.initial.polar().expect("validated at load")
    }

    /// Numeric spec that resolves back to exactly this scenario.
    pub fn to_spec(&self) -> ScenarioSpec {
        let (initial, initial_pose) = match self.initial {
            InitialState::Polar(s) => (
                Some(PolarSpec {
                    rho: s.rho,
                    delta: s.delta.into(),
                    gamma: s.gamma.into(),
                }),
                None,
            ),
            InitialState::Pose(p) => (
                None,
                Some(PoseSpec {
                    x: p.x,
                    y: p.y,
                    theta: p.theta.into(),
                }),
            ),
        };
        ScenarioSpec {
            name: self.name.clone(),
            step: Some(self.step),
            cutoff_rho: self.cutoff_rho,
            horizon: Some(AutoOr::Value(self.horizon)),
            initial,
            initial_pose,
            law: LawSpec::from_law(&self.law),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.state0();
        write!(
            f,
            "{} from (rho, delta, gamma) = ({}, {}, {}) under {}",
            self.name, s.rho, s.delta, s.gamma, self.law
        )
    }
}

impl ScenarioSpec {
    pub fn resolve(&self, overrides: &Overrides) -> Result<Scenario> {
        let ctx = |e: Error| match e {
            Error::Parse(m) => Error::Parse(format!("scenario `{}`: {m}", self.name)),
            Error::Domain(m) => Error::Domain(format!("scenario `{}`: {m}", self.name)),
            Error::InvalidGains { variant, reason } => Error::InvalidGains {
                variant,
                reason: format!("scenario `{}`: {reason}", self.name),
            },
            other => other,
        };
        self.resolve_inner(overrides).map_err(ctx)
    }

    fn resolve_inner(&self, overrides: &Overrides) -> Result<Scenario> {
        let initial = match (&self.initial, &self.initial_pose) {
            (Some(p), None) => InitialState::Polar(PolarState::new(p.rho, p.delta.value()?, p.gamma.value()?)),
            (None, Some(p)) => InitialState::Pose(CartesianPose::new(p.x, p.y, p.theta.value()?)),
            _ => {
                return Err(Error::Parse(
                    "give exactly one of `initial` and `initial_pose`".into(),
                ))
            }
        };
        let state0 = initial.polar()?;
        if !(state0.rho > 0.0 && state0.is_finite()) {
            return Err(Error::Domain(format!("initial distance {} must be > 0", state0.rho)));
        }
        let cutoff_rho = overrides.cutoff_rho.unwrap_or(self.cutoff_rho);
        if !(cutoff_rho > 0.0 && cutoff_rho.is_finite()) {
            return Err(Error::Domain(format!("cutoff_rho {cutoff_rho} must be > 0")));
        }
        let law = self.law.resolve(&state0, cutoff_rho)?;
        let step = overrides
            .step
            .or(self.step)
            .unwrap_or_else(|| default_step(&law, &state0, cutoff_rho));
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain(format!("step {step} must be > 0")));
        }
        let horizon = match &self.horizon {
            None => auto_horizon(&law, &state0)?,
            Some(h) => h.resolve("horizon", || auto_horizon(&law, &state0))?,
        };
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon {horizon} must be finite and >= 0")));
        }
        Ok(Scenario {
            name: self.name.clone(),
            initial,
            law,
            step,
            cutoff_rho,
            horizon,
        })
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.schema != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema {} (this build reads schema {SCHEMA_VERSION})",
                file.schema
            )));
        }
        let mut names = std::collections::HashSet::new();
        for s in &file.scenario {
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::Parse(format!(
                    "scenario name `{}` must be non-empty and use only letters, digits, `_` and `-`",
                    s.name
                )));
            }
            if !names.insert(s.name.as_str()) {
                return Err(Error::Parse(format!("duplicate scenario name `{}`", s.name)));
            }
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Resolves every scenario; the first invalid one aborts with its
    /// diagnostic.
    pub fn resolve(&self, overrides: &Overrides) -> Result<Vec<Scenario>> {
        self.scenario.iter().map(|s| s.resolve(overrides)).collect()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

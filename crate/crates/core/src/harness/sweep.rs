//! Grid sweeps over initial angles, gains and speed.
//!
//! ```toml
//! schema = 1
//! workers = 4
//!
//! [base]
//! name = "thm1"
//! cutoff_rho = 0.01
//! initial = { rho = 1, delta = 0, gamma = 0 }
//! law = { kind = "thm1", v = 0.5, c1 = 1.01, c2 = 5 }
//!
//! [grid]
//! delta0 = [0, "pi/2", "-pi/2"]
//! gamma0 = ["pi/3", "-pi/3"]
//! ```
//!
//! Points are the cross product of the listed axes in the order
//! `delta0, gamma0, c1, c2, v`, the last axis varying fastest. A grid with
//! no axes has no points.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::CertificateReport;
use crate::harness::run_scenario;
use crate::harness::scenario::{AngleSpec, AutoOr, Overrides, Scenario, ScenarioSpec, SCHEMA_VERSION};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<Vec<AngleSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<Vec<AngleSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<Vec<AutoOr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    /// Worker threads; defaults to one per core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub base: ScenarioSpec,
    #[serde(default)]
    pub grid: Grid,
}

/// The axis values of one grid point; `None` where the axis is absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridPoint {
    pub delta0: Option<AngleSpec>,
    pub gamma0: Option<AngleSpec>,
    pub c1: Option<AutoOr>,
    pub c2: Option<f64>,
    pub v: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum PointOutcome {
    /// The point failed load-time validation.
    Skipped { reason: String },
    /// The run itself errored, e.g. a domain guard tripped.
    Errored { scenario: Box<Scenario>, reason: String },
    Completed {
        scenario: Box<Scenario>,
        report: CertificateReport,
        parking_time: Option<f64>,
        max_abs_omega: f64,
        min_delta: f64,
        max_delta: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub index: usize,
    pub name: String,
    pub point: GridPoint,
    pub outcome: PointOutcome,
}

impl SweepRow {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, PointOutcome::Completed { report, .. } if report.overall)
    }

    pub fn scenario(&self) -> Option<&Scenario> {
        match &self.outcome {
            PointOutcome::Skipped { .. } => None,
            PointOutcome::Errored { scenario, .. } | PointOutcome::Completed { scenario, .. } => Some(scenario),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    /// Fraction of grid points whose certificate passed; 1 for an empty grid.
    pub fn pass_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.rows.iter().filter(|r| r.passed()).count() as f64 / self.rows.len() as f64
    }

    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(SweepRow::passed)
    }

    /// One CSV row per grid point, in grid order.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record([
            "index",
            "name",
            "delta0",
            "gamma0",
            "c1",
            "c2",
            "v",
            "status",
            "parking_time",
            "max_abs_omega",
            "min_delta",
            "max_delta",
            "failed_checks",
            "reason",
        ])
        .expect("in-memory write");
        let num = |x: f64| format!("{x:.16e}");
        for r in &self.rows {
            let (d0, g0, c1, c2, v) = match r.scenario() {
                Some(s) => {
                    let st = s.state0();
                    let l = &s.law;
                    (num(st.delta), num(st.gamma), num(l.gains.c1), num(l.gains.c2), num(l.speed))
                }
                None => Default::default(),
            };
            let mut rec = vec![r.index.to_string(), r.name.clone(), d0, g0, c1, c2, v];
            match &r.outcome {
                PointOutcome::Skipped { reason } => {
                    rec.extend(["SKIPPED".into(), String::new(), String::new(), String::new(), String::new(), String::new(), reason.clone()]);
                }
                PointOutcome::Errored { reason, .. } => {
                    rec.extend(["ERROR".into(), String::new(), String::new(), String::new(), String::new(), String::new(), reason.clone()]);
                }
                PointOutcome::Completed {
                    report,
                    parking_time,
                    max_abs_omega,
                    min_delta,
                    max_delta,
                    ..
                } => {
                    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                    rec.extend([
                        if report.overall { "PASS" } else { "FAIL" }.to_string(),
                        parking_time.map(num).unwrap_or_default(),
                        num(*max_abs_omega),
                        num(*min_delta),
                        num(*max_delta),
                        failed.join(";"),
                        String::new(),
                    ]);
                }
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Human-readable digest.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let count = |f: fn(&PointOutcome) -> bool| self.rows.iter().filter(|r| f(&r.outcome)).count();
        let _ = writeln!(s, "points {}", self.rows.len());
        let _ = writeln!(s, "passed {}", self.rows.iter().filter(|r| r.passed()).count());
        let _ = writeln!(s, "skipped {}", count(|o| matches!(o, PointOutcome::Skipped { .. })));
        let _ = writeln!(s, "errored {}", count(|o| matches!(o, PointOutcome::Errored { .. })));
        let _ = writeln!(s, "pass_fraction {:.6}", self.pass_fraction());
        for r in self.rows.iter().filter(|r| !r.passed()) {
            let why = match &r.outcome {
                PointOutcome::Skipped { reason } => format!("skipped: {reason}"),
                PointOutcome::Errored { reason, .. } => format!("error: {reason}"),
                PointOutcome::Completed { report, .. } => {
                    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                    format!("failed: {}", failed.join(", "))
                }
            };
            let _ = writeln!(s, "point {} {} {why}", r.index, r.name);
        }
        s
    }
}

impl Grid {
    fn axes_present(&self) -> bool {
        self.delta0.is_some() || self.gamma0.is_some() || self.c1.is_some() || self.c2.is_some() || self.v.is_some()
    }

    /// Number of grid points, known before anything runs.
    pub fn len(&self) -> usize {
        if !self.axes_present() {
            return 0;
        }
        fn n<T>(axis: &Option<Vec<T>>) -> usize {
            axis.as_ref().map_or(1, Vec::len)
        }
        n(&self.delta0) * n(&self.gamma0) * n(&self.c1) * n(&self.c2) * n(&self.v)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<GridPoint> {
        if self.is_empty() {
            return Vec::new();
        }
        fn axis<T: Clone>(a: &Option<Vec<T>>) -> Vec<Option<T>> {
            match a {
                Some(v) => v.iter().cloned().map(Some).collect(),
                None => vec![None],
            }
        }
        let mut out = Vec::with_capacity(self.len());
        for d in axis(&self.delta0) {
            for g in axis(&self.gamma0) {
                for c1 in axis(&self.c1) {
                    for c2 in axis(&self.c2) {
                        for v in axis(&self.v) {
                            out.push(GridPoint {
                                delta0: d.clone(),
                                gamma0: g.clone(),
                                c1: c1.clone(),
                                c2,
                                v,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

impl GridPoint {
    /// The base scenario with this point's values substituted.
    pub fn apply(&self, base: &ScenarioSpec, name: String) -> Result<ScenarioSpec> {
        let mut spec = base.clone();
        spec.name = name;
        if self.delta0.is_some() || self.gamma0.is_some() {
            let init = spec
                .initial
                .as_mut()
                .ok_or_else(|| Error::Parse("a grid over delta0 or gamma0 needs a polar `initial` state".into()))?;
            if let Some(d) = &self.delta0 {
                init.delta = d.clone();
            }
            if let Some(g) = &self.gamma0 {
                init.gamma = g.clone();
            }
        }
        if let Some(c1) = &self.c1 {
            spec.law.c1 = c1.clone();
        }
        if let Some(c2) = self.c2 {
            spec.law.c2 = c2;
        }
        if let Some(v) = self.v {
            spec.law.v = Some(v);
            spec.law.omega_limit = None;
        }
        Ok(spec)
    }
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if spec.schema != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema {} (this build reads schema {SCHEMA_VERSION})",
                spec.schema
            )));
        }
        if spec.workers == Some(0) {
            return Err(Error::Parse("workers must be >= 1".into()));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn run_point(index: usize, point: GridPoint, spec: &SweepSpec, overrides: &Overrides) -> SweepRow {
    let name = format!("{}_{index:04}", spec.base.name);
    let resolved = point.apply(&spec.base, name.clone()).and_then(|s| s.resolve(overrides));
    let outcome = match resolved {
        Err(e) => PointOutcome::Skipped { reason: e.to_string() },
        Ok(scenario) => match run_scenario(&scenario) {
            Err(e) => PointOutcome::Errored {
                scenario: Box::new(scenario),
                reason: e.to_string(),
            },
            Ok((traj, report)) => {
                let deltas = traj.samples.iter().map(|s| s.state.delta);
                let min_delta = deltas.clone().fold(f64::INFINITY, f64::min);
                let max_delta = deltas.fold(f64::NEG_INFINITY, f64::max);
                PointOutcome::Completed {
                    scenario: Box::new(scenario),
                    parking_time: traj.cutoff_time,
                    max_abs_omega: traj.max_abs_omega(),
                    min_delta,
                    max_delta,
                    report,
                }
            }
        },
    };
    SweepRow {
        index,
        name,
        point,
        outcome,
    }
}

/// Runs every grid point on `workers` threads (the spec's own count, or one
/// per core, when `None`). Rows come back in grid order whatever the
/// completion order; a failing point never stops the sweep.
pub fn run_sweep(spec: &SweepSpec, overrides: &Overrides, workers: Option<usize>) -> Result<SweepSummary> {
    let points = spec.grid.points();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers.or(spec.workers) {
        if n == 0 {
            return Err(Error::Domain("workers must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Domain(format!("cannot start workers: {e}")))?;
    let rows = pool.install(|| {
        points
            .into_par_iter()
            .enumerate()
            .map(|(i, p)| run_point(i, p, spec, overrides))
            .collect()
    });
    Ok(SweepSummary { rows })
}

/// Writes `summary.csv`, `summary.txt` and one re-runnable scenario file per
/// resolved point under `points/`.
pub fn write_sweep(summary: &SweepSummary, dir: &Path) -> Result<()> {
    let points = dir.join("points");
    std::fs::create_dir_all(&points).map_err(|e| Error::io(&points, e))?;
    let write = |path: &Path, text: String| std::fs::write(path, text).map_err(|e| Error::io(path, e));
    write(&dir.join("summary.csv"), summary.to_csv())?;
    write(&dir.join("summary.txt"), summary.to_text())?;
    for row in &summary.rows {
        if let Some(s) = row.scenario() {
            write(&points.join(format!("{}.toml", row.name)), point_file(s)?)?;
        }
    }
    Ok(())
}

/// A single-scenario file with every value numeric.
pub fn point_file(scenario: &Scenario) -> Result<String> {
    crate::harness::scenario::ScenarioFile {
        schema: SCHEMA_VERSION,
        title: None,
        note: None,
        outputs: vec![
            crate::harness::scenario::Artifact::Csv,
            crate::harness::scenario::Artifact::Report,
        ],
        plots: Vec::new(),
        scenario: vec![scenario.to_spec()],
    }
    .to_toml()
}

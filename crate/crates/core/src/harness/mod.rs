//! Scenario files, figure presets, sweeps and output artifacts.

pub mod plot;
pub mod scenario;
pub mod sweep;
pub mod trace;

use std::path::{Path, PathBuf};

use crate::certificates::{check_trajectory, CertificateReport};
use crate::dynamics::{integrate, Trajectory};
use crate::{Error, Result};

pub use plot::{emit_svg, Track};
pub use scenario::{Artifact, Overrides, PlotKind, Scenario, ScenarioFile};
pub use sweep::{run_sweep, SweepSpec, SweepSummary};
pub use trace::emit_csv;

/// Figure presets shipped with the crate, as `(name, file contents)`.
pub const PRESETS: [(&str, &str); 5] = [
    ("fig1", include_str!("../../presets/fig1.toml")),
    ("fig2", include_str!("../../presets/fig2.toml")),
    ("fig3", include_str!("../../presets/fig3.toml")),
    ("fig4", include_str!("../../presets/fig4.toml")),
    ("fig5", include_str!("../../presets/fig5.toml")),
];

pub fn preset(name: &str) -> Result<ScenarioFile> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Parse(format!("unknown preset `{name}` (expected fig1 .. fig5)")))?;
    ScenarioFile::parse(text)
}

/// Integrates a scenario and certifies the result.
pub fn run_scenario(scenario: &Scenario) -> Result<(Trajectory, CertificateReport)> {
    let traj = integrate(
        scenario.state0(),
        &scenario.law,
        scenario.step,
        scenario.cutoff_rho,
        scenario.horizon,
    )?;
    let report = check_trajectory(&traj, &scenario.law)?;
    Ok((traj, report))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    pub report: CertificateReport,
}

impl RunOutcome {
    /// The certificate report preceded by a line naming the scenario.
    pub fn report_text(&self) -> String {
        format!("scenario {}\n{}", self.scenario.name, self.report)
    }
}

/// Runs every scenario of a file in order.
pub fn run_file(file: &ScenarioFile, overrides: &Overrides) -> Result<Vec<RunOutcome>> {
    file.resolve(overrides)?
        .into_iter()
        .map(|scenario| {
            let (trajectory, report) = run_scenario(&scenario)?;
            Ok(RunOutcome {
                scenario,
                trajectory,
                report,
            })
        })
        .collect()
}

/// Writes the artifacts a file asks for: `<scenario>.csv`,
/// `<scenario>.report.txt` and one `<plot>.svg` per plot kind holding every
/// scenario of the file. Returns the written paths in order.
pub fn write_outputs(file: &ScenarioFile, outcomes: &[RunOutcome], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for o in outcomes {
        if file.outputs.contains(&Artifact::Csv) {
            let p = dir.join(format!("{}.csv", o.scenario.name));
            emit_csv(&o.trajectory, &p)?;
            written.push(p);
        }
        if file.outputs.contains(&Artifact::Report) {
            let p = dir.join(format!("{}.report.txt", o.scenario.name));
            std::fs::write(&p, o.report_text()).map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
    }
    if file.outputs.contains(&Artifact::Svg) && !outcomes.is_empty() {
        let tracks: Vec<Track> = outcomes
            .iter()
            .map(|o| Track {
                label: &o.scenario.name,
                traj: &o.trajectory,
            })
            .collect();
        for kind in &file.plots {
            let p = dir.join(format!("{}.svg", kind.file_stem()));
            emit_svg(&tracks, *kind, &p)?;
            written.push(p);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            let f = preset(name).unwrap();
            assert!(!f.scenario.is_empty(), "{name}");
            f.resolve(&Overrides::default()).unwrap();
        }
        assert!(preset("fig6").is_err());
    }

    #[test]
    fn degenerate_run_is_a_straight_line() {
        let text = r#"
schema = 1
[[scenario]]
name = "line"
cutoff_rho = 0.01
step = 0.01
initial = { rho = 1, delta = 0, gamma = 0 }
law = { kind = "thm1", v = 0.5, c1 = 2, c2 = 2 }
"#;
        let out = run_file(&ScenarioFile::parse(text).unwrap(), &Overrides::default()).unwrap();
        let traj = &out[0].trajectory;
        for s in traj.active() {
            assert!((s.state.rho - (1.0 - 0.5 * s.t)).abs() < 1e-12);
            assert_eq!(s.inputs.omega, 0.0);
        }
        assert!(out[0].report.overall);
    }
}

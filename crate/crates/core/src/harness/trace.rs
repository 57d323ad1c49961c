//! CSV export and import of trajectories.

use std::path::Path;

use crate::controllers::ControlLaw;
use crate::dynamics::{Clock, Inputs, Sample, Termination, Trajectory};
use crate::geometry::{polar_to_cart, PolarState};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 9] = ["t", "rho", "delta", "gamma", "v", "omega", "x", "y", "theta"];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per sample, every value with 17 significant digits.
pub fn csv_string(traj: &Trajectory) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for s in &traj.samples {
        let p = polar_to_cart(s.state);
        let row = [
            s.t,
            s.state.rho,
            s.state.delta,
            s.state.gamma,
            s.inputs.v,
            s.inputs.omega,
            p.x,
            p.y,
            p.theta,
        ];
        w.write_record(row.map(num)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn emit_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(traj)).map_err(|e| Error::io(path, e))
}

/// Reads samples written by [`emit_csv`] (or any file with the same header).
pub fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_samples(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_samples(text: &str) -> Result<Vec<Sample>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!(
            "header must be `{}`",
            CSV_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let mut v = [0.0; 6];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = rec[k]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: cannot read {} = `{}`", i + 1, CSV_HEADER[k], &rec[k])))?;
        }
        out.push(Sample {
            t: v[0],
            state: PolarState::new(v[1], v[2], v[3]),
            inputs: Inputs { v: v[4], omega: v[5] },
        });
    }
    Ok(out)
}

/// Rebuilds a trajectory from recorded samples so it can be certified.
/// A final sample at or below `cutoff_rho` with both inputs zero is taken as
/// the shutdown sample.
pub fn trajectory_from_samples(samples: Vec<Sample>, law: &ControlLaw, cutoff_rho: f64) -> Result<Trajectory> {
    let Some(last) = samples.last().copied() else {
        return Err(Error::Domain("trace has no samples".into()));
    };
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::Domain("trace times must be strictly increasing".into()));
    }
    let step = if samples.len() > 1 { samples[1].t - samples[0].t } else { 0.0 };
    let stopped = samples.len() > 1
        && last.state.rho <= cutoff_rho
        && last.inputs.v == 0.0
        && last.inputs.omega == 0.0;
    Ok(Trajectory {
        law: *law,
        samples,
        cutoff_time: stopped.then_some(last.t),
        cutoff_rho,
        step,
        clock: Clock::Physical,
        terminated: if stopped {
            Termination::CutoffReached
        } else {
            Termination::Horizon
        },
    })
}

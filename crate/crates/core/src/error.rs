use std::path::PathBuf;

use crate::controllers::Variant;
use crate::dynamics::{Sample, Trajectory};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("pose at the origin has no polar representation")]
    DegenerateOrigin,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid gains for {variant}: {reason}")]
    InvalidGains { variant: Variant, reason: String },

    #[error("guard tripped at t = {t}: {reason}", t = .0.sample.t, reason = .0.reason)]
    GuardTripped(Box<GuardTrip>),

    #[error("trajectory was produced by {found}, not by {expected}")]
    MismatchedLaw { expected: String, found: String },

    #[error("hypothesis not met at sample {index}: {detail}")]
    HypothesisNotMet { index: usize, detail: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Parse(String),
}

/// The sample at which integration stopped on a domain violation, together
/// with everything integrated up to (and including) that sample.
#[derive(Debug, Clone)]
pub struct GuardTrip {
    pub sample: Sample,
    pub reason: String,
    pub trajectory: Trajectory,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

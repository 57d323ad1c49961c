//! Deadbeat parking of the Dubins vehicle.
//!
//! The vehicle is described in polar coordinates about a target fixed at the
//! origin and facing `+x`: distance `rho`, polar angle `delta` and
//! line-of-sight angle `gamma`. Five steering laws drive all three to zero in
//! finite time. Each closed-loop run can be checked sample by sample against
//! the closed-form envelopes the laws guarantee.
//!
//! - [`geometry`]: pose/state transforms, angle wrapping, error norms.
//! - [`dynamics`]: kinematics, fixed-step integration with cutoff.
//! - [`controllers`]: the steering laws and gain helpers.
//! - [`certificates`]: envelope checks and comparison-lemma harnesses.
//! - [`harness`]: scenario files, presets, sweeps, CSV/SVG/report output.

pub mod certificates;
pub mod controllers;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod harness;

pub use error::{Error, GuardTrip, Result};

//! Simulation toolkit for planar-pad electrical impedance sensing of a
//! fluid-filled organ behind the abdominal wall.
//!
//! The crate covers the full in-silico loop:
//!
//! * meshing simple body-like domains (discs, cylinders) and placing an
//!   ellipsoidal conductive inclusion of a given volume ([`geometry`]),
//! * draping a rectangular electrode grid onto the domain surface and
//!   perturbing it the way a handheld pad moves between sessions
//!   ([`electrodes`]),
//! * enumerating and down-selecting four-electrode drive/sense channels
//!   ([`channels`]),
//! * solving the conduction forward problem and its sensitivity
//!   ([`forward`]),
//! * one-step regularised difference imaging ([`inverse`]),
//! * and reducing frames to features, scores and cross-validated
//!   classifications ([`analysis`]).
//!
//! Everything downstream of a seed is deterministic: the same inputs give
//! bitwise-identical outputs, which the CLI (`eitpad`) relies on for
//! reproducible experiment runs.
//!
//! Coordinates and lengths are millimetres, conductivities S/m, currents
//! amperes, voltages volts. The conversion happens once, inside the FEM
//! assembly.

pub mod analysis;
pub mod channels;
pub mod config;
pub mod electrodes;
pub mod error;
pub mod forward;
pub mod frames;
pub mod geometry;
pub mod inverse;
pub mod perturb;
pub mod report;
pub mod surface;
pub mod vec3;

pub use error::{Error, Result};

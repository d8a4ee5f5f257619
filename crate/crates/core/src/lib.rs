//! Toolkit for super-resolution analysis of sparse tactile skins.
//!
//! A skin embeds a few discrete sensor units (taxels) in an elastic medium;
//! contact force spreads through the medium, so every taxel responds to a
//! neighborhood rather than a point. The curves of constant taxel value in
//! (distance, force) space, the taxel value isolines (TVIs), determine how
//! precisely contact position and force can be recovered from noisy
//! readings. This crate provides:
//!
//! - [`model`]: the parametric forward response and its isolines.
//! - [`geometry`]: isoline intersections, uncertainty bands (sigma_P,
//!   sigma_F), feasible regions and sensitivity maps.
//! - [`superres`]: super-resolution factor (Omega) formulas and two-contact
//!   discriminability analysis.
//! - [`synth`]: synthetic indentation scans with seeded, counter-based noise.
//! - [`calib`]: isoline extraction and parameter fitting from scan data.
//! - [`infer`]: a from-scratch MLP regressor for the inverse problem plus a
//!   Monte-Carlo least-squares oracle.
//! - [`report`]: CSV and SVG emission for the command-line front end.

pub mod calib;
pub mod error;
pub mod geometry;
pub mod infer;
pub mod model;
pub mod report;
pub mod superres;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    mean_readings, noisy_readings, noisy_readings_stream, AttenuationModel, ContactEvent,
    NoiseModel, TaxelLayout,
};

//! Light-field denoising through anisotropic parallax analysis.
//!
//! The pipeline averages a noisy light field along each angular axis,
//! transfers the resulting directional detail onto the fully averaged view
//! with a guided filter, and feeds those residual features to a synthesis
//! network that predicts every view. A second, per-view network then restores
//! view-dependent energy from a Gaussian-smoothed copy of each view.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod features;
pub mod io;
pub mod lf;
pub mod metrics;
pub mod nets;
pub mod nn;
pub mod noise;
pub mod real;
pub mod seed;
pub mod selftest;
pub mod toy;

pub use error::{Error, Result};
pub use lf::{Image, LightField, Plane, Sai, Stack};

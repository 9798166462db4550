//! Desk-scale perception-oriented stereo super-resolution.
//!
//! The pipeline: synthesize stereo scenes with exact disparity, degrade them
//! through a parametric catalog, label every distorted version with rankMOS
//! (rank aggregation over several quality voters), train a three-branch
//! stereo quality-assessment network on those labels, and finally use the
//! frozen network's first-layer features as an extra training constraint for
//! a small stereo super-resolution network.

pub mod degradation;
pub mod diagnostics;
pub mod error;
mod parallel;
pub mod pssr;
pub mod quality;
pub mod rankmos;
pub mod rng;
pub mod srqa_net;
pub mod stereo_image;
pub mod tensorgrad;

pub use error::{Error, Result};
pub use tensorgrad::{Graph, ParamSet, Tensor, Var};

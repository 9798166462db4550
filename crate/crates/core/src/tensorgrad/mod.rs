//! Minimal reverse-mode automatic differentiation over dense `f64` tensors:
//! the handful of operations the quality-assessment and super-resolution
//! networks need, an Adam optimizer, and a finite-difference checker.

mod adam;
mod conv;
mod gradcheck;
mod graph;
mod params;
mod tensor;
pub mod weights;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport};
pub use graph::{Graph, GraphOp, Var};
pub use params::{BoundParams, ParamSet};
pub use tensor::Tensor;

/// Leaky-ReLU negative slope used by both networks.
pub const LEAKY_SLOPE: f64 = 0.1;

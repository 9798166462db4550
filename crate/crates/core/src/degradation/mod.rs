//! Distorted stereo pairs: resampling, Gaussian blur, additive noise, the
//! BI/BD degradation pipelines and the parametric distortion catalog.

mod catalog;
mod filters;
mod pipeline;
mod resize;

pub use catalog::{build_catalog, Catalog, CatalogConfig};
pub use filters::{add_noise, gaussian_blur, gaussian_kernel, BD_KERNEL_SIZE};
pub use pipeline::{
    crop_to_multiple, degrade, distorted_version, restore_naive, DegradationSpec, ALLOWED_SCALES,
    MAX_NOISE_LEVEL,
};
pub use resize::{axis_weights, keys_kernel, resize, resize_bicubic, Upsampler, KEYS_A};

//! Reference quality metrics (PSNR, SSIM), stereo difference maps, block
//! matching disparity and endpoint error.

mod disparity;
mod metrics;

pub use crate::stereo_image::DisparityMap;
pub use disparity::{block_match_disparity, epe};
pub use metrics::{diff_map, mse, psnr, ssim, MetricResult, Polarity, PSNR_CAP_DB, SSIM_SIGMA, SSIM_WINDOW};

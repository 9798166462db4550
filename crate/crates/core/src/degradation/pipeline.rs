use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::stereo_image::{Image, StereoPair};

use super::filters::{add_noise, gaussian_blur, BD_KERNEL_SIZE};
use super::resize::{resize, Upsampler};

/// Scale factors a degradation may use.
pub const ALLOWED_SCALES: [usize; 6] = [2, 3, 4, 5, 6, 8];
pub const MAX_NOISE_LEVEL: f64 = 30.0;

/// One distortion recipe: blur → bicubic downscale → noise, then a naive
/// upsampler back to the original resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub scale: usize,
    pub blur_sigma: f64,
    /// Noise standard deviation on the 8-bit scale.
    pub noise_level: f64,
    pub upsampler: Upsampler,
    pub seed: u64,
}

impl DegradationSpec {
    /// Bicubic downscaling only.
    pub fn bi(scale: usize) -> Self {
        Self {
            scale,
            blur_sigma: 0.0,
            noise_level: 0.0,
            upsampler: Upsampler::Bicubic,
            seed: 0,
        }
    }

    /// 15×15 Gaussian blur with the given sigma, then bicubic downscaling.
    pub fn bd(scale: usize, sigma: f64) -> Self {
        Self {
            blur_sigma: sigma,
            ..Self::bi(scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !ALLOWED_SCALES.contains(&self.scale) {
            return Err(Error::invalid(format!(
                "scale {} not in {ALLOWED_SCALES:?}",
                self.scale
            )));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::invalid(format!("blur sigma {} must be >= 0", self.blur_sigma)));
        }
        if !(0.0..=MAX_NOISE_LEVEL).contains(&self.noise_level) {
            return Err(Error::invalid(format!(
                "noise level {} outside [0, {MAX_NOISE_LEVEL}]",
                self.noise_level
            )));
        }
        Ok(())
    }

    /// Short human-readable tag, e.g. `x2_s0.7_n15_bicubic`.
    pub fn label(&self) -> String {
        format!(
            "x{}_s{}_n{}_{}",
            self.scale,
            self.blur_sigma,
            self.noise_level,
            self.upsampler.as_str()
        )
    }
}

fn degrade_view(img: &Image, spec: &DegradationSpec, seed: u64) -> Result<Image> {
    let blurred = gaussian_blur(img, spec.blur_sigma, BD_KERNEL_SIZE)?;
    let lr = resize(
        &blurred,
        img.width() / spec.scale,
        img.height() / spec.scale,
        Upsampler::Bicubic,
    )?;
    add_noise(&lr, spec.noise_level, seed)
}

/// Produce the low-resolution pair. Both views see the same recipe; their
/// noise streams are split from the recipe seed.
pub fn degrade(pair: &StereoPair, spec: &DegradationSpec) -> Result<StereoPair> {
    spec.validate()?;
    if !pair.width().is_multiple_of(spec.scale) || !pair.height().is_multiple_of(spec.scale) {
        return Err(Error::invalid(format!(
            "{}x{} is not divisible by scale {}; crop first",
            pair.width(),
            pair.height(),
            spec.scale
        )));
    }
    StereoPair::new(
        degrade_view(&pair.left, spec, derive_seed(spec.seed, &[0]))?,
        degrade_view(&pair.right, spec, derive_seed(spec.seed, &[1]))?,
    )
}

/// Upsample a low-resolution pair back by `spec.scale` with the recipe's upsampler.
pub fn restore_naive(lr: &StereoPair, spec: &DegradationSpec) -> Result<StereoPair> {
    let (w, h) = (lr.width() * spec.scale, lr.height() * spec.scale);
    StereoPair::new(
        resize(&lr.left, w, h, spec.upsampler)?,
        resize(&lr.right, w, h, spec.upsampler)?,
    )
}

/// The distorted full-resolution version of `pair` under `spec`.
pub fn distorted_version(pair: &StereoPair, spec: &DegradationSpec) -> Result<StereoPair> {
    restore_naive(&degrade(pair, spec)?, spec)
}

/// Largest top-left crop whose dimensions are multiples of `scale`.
pub fn crop_to_multiple(pair: &StereoPair, scale: usize) -> Result<StereoPair> {
    let w = pair.width() / scale * scale;
    let h = pair.height() / scale * scale;
    pair.crop(0, 0, w, h)
}

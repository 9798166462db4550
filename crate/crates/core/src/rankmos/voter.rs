use crate::error::Result;
use crate::quality::{block_match_disparity, diff_map, epe, ssim, Polarity};
use crate::stereo_image::StereoPair;

/// A deterministic quality scorer contributing raw scores to rankMOS.
pub trait Voter: Sync {
    fn name(&self) -> &str;
    fn polarity(&self) -> Polarity;
    fn score(&self, distorted: &StereoPair, reference: &StereoPair) -> Result<f64>;
}

/// Spatial quality: mean SSIM of the two views against the reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpatialVoter;

impl Voter for SpatialVoter {
    fn name(&self) -> &str {
        "spatial_ssim"
    }

    fn polarity(&self) -> Polarity {
        Polarity::HigherBetter
    }

    fn score(&self, distorted: &StereoPair, reference: &StereoPair) -> Result<f64> {
        let l = ssim(&distorted.left, &reference.left)?.value;
        let r = ssim(&distorted.right, &reference.right)?.value;
        Ok(0.5 * (l + r))
    }
}

/// Stereo consistency: negative mean absolute difference between the
/// difference maps of the distorted and reference pairs.
#[derive(Debug, Clone, Copy, Default)]
pub struct StereoVoter;

impl Voter for StereoVoter {
    fn name(&self) -> &str {
        "stereo_diffmap"
    }

    fn polarity(&self) -> Polarity {
        Polarity::HigherBetter
    }

    fn score(&self, distorted: &StereoPair, reference: &StereoPair) -> Result<f64> {
        crate::quality::mse(&distorted.left, &reference.left)?; // shape check
        let a = diff_map(distorted);
        let b = diff_map(reference);
        let mad = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
        Ok(0.0 - mad)
    }
}

/// Practicality: endpoint error between block-matching disparity of the
/// distorted pair and that of the reference pair.
#[derive(Debug, Clone, Copy)]
pub struct PracticalityVoter {
    pub window: usize,
    pub max_search: usize,
}

impl Default for PracticalityVoter {
    fn default() -> Self {
        Self {
            window: 7,
            max_search: 16,
        }
    }
}

impl Voter for PracticalityVoter {
    fn name(&self) -> &str {
        "practicality_epe"
    }

    fn polarity(&self) -> Polarity {
        Polarity::LowerBetter
    }

    fn score(&self, distorted: &StereoPair, reference: &StereoPair) -> Result<f64> {
        let est = block_match_disparity(distorted, self.window, self.max_search)?;
        let gt = block_match_disparity(reference, self.window, self.max_search)?;
        Ok(epe(&est, &gt)?.value)
    }
}

/// The three metric voters: spatial, stereo and practicality.
pub fn builtin_voters() -> Vec<Box<dyn Voter>> {
    vec![
        Box::new(SpatialVoter),
        Box::new(StereoVoter),
        Box::new(PracticalityVoter::default()),
    ]
}

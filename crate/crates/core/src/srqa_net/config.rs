use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stereo_image::DEFAULT_PATCH_SIZE;

/// What the three branches see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QAMode {
    /// The distorted pair itself.
    #[default]
    NoReference,
    /// Per-view difference between the distorted and reference pairs.
    FullReference,
}

/// Architecture of the three-branch quality network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QAConfig {
    /// Output channels of each branch conv layer; its length is the depth.
    pub widths: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub head_hidden: usize,
    pub slope: f64,
    pub patch_size: usize,
    pub in_channels: usize,
    /// Upper and lower branches use one set of weights.
    pub share_branches: bool,
    pub mode: QAMode,
    /// Initial bias of the final dense layer (centre of the label range).
    pub output_bias: f64,
}

impl Default for QAConfig {
    fn default() -> Self {
        Self {
            widths: vec![16, 32, 64, 64],
            kernel: 3,
            stride: 2,
            head_hidden: 64,
            slope: crate::tensorgrad::LEAKY_SLOPE,
            patch_size: DEFAULT_PATCH_SIZE,
            in_channels: 3,
            share_branches: false,
            mode: QAMode::NoReference,
            output_bias: 5.5,
        }
    }
}

impl QAConfig {
    /// Two layers of widths 4 and 8 on 16×16 patches, for gradient checks.
    pub fn tiny() -> Self {
        Self {
            widths: vec![4, 8],
            head_hidden: 6,
            patch_size: 16,
            ..Self::default()
        }
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn first_width(&self) -> usize {
        self.widths[0]
    }

    pub fn pad(&self) -> usize {
        self.kernel / 2
    }

    /// Spatial side after `layers` strided convs.
    pub fn side_after(&self, layers: usize) -> usize {
        let mut s = self.patch_size;
        for _ in 0..layers {
            s = (s + 2 * self.pad() - self.kernel) / self.stride + 1;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::invalid("QA widths must be a non-empty list of positive sizes"));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::invalid(format!("QA kernel {} must be odd", self.kernel)));
        }
        if self.stride == 0 || self.head_hidden == 0 {
            return Err(Error::invalid("QA stride and head width must be positive"));
        }
        if !(self.in_channels == 1 || self.in_channels == 3) {
            return Err(Error::invalid(format!("QA input channels {} not 1 or 3", self.in_channels)));
        }
        if self.patch_size < self.kernel || self.side_after(self.depth()) == 0 {
            return Err(Error::invalid(format!("patch size {} too small", self.patch_size)));
        }
        if !self.slope.is_finite() || !self.output_bias.is_finite() {
            return Err(Error::invalid("QA slope and output bias must be finite"));
        }
        Ok(())
    }
}

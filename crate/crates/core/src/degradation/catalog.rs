use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;

use super::pipeline::DegradationSpec;
use super::resize::Upsampler;

/// Axes of the cartesian-product catalog; serialized as the catalog JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogConfig {
    pub scales: Vec<usize>,
    pub blur_sigmas: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub upsamplers: Vec<Upsampler>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CatalogConfig {
    /// 3 scales × 3 blur levels × 3 noise levels × bicubic = 27 versions.
    fn default() -> Self {
        Self {
            scales: vec![2, 3, 4],
            blur_sigmas: vec![0.0, 0.7, 1.2],
            noise_levels: vec![0.0, 15.0, 30.0],
            upsamplers: vec![Upsampler::Bicubic],
            seed: 0,
        }
    }
}

/// Ordered set of distortion recipes. Version `j` means the same recipe for
/// every reference; only the noise seed depends on the reference index.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    specs: Vec<DegradationSpec>,
    seed: u64,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[DegradationSpec] {
        &self.specs
    }

    /// Recipe for reference `i`, version `j`, with its seed derived from
    /// (catalog seed, i, j) so evaluation order cannot matter.
    pub fn spec_for(&self, reference: usize, version: usize) -> DegradationSpec {
        DegradationSpec {
            seed: derive_seed(self.seed, &[reference as u64, version as u64]),
            ..self.specs[version]
        }
    }
}

/// Cartesian product in the order scale → blur → noise → upsampler.
pub fn build_catalog(config: &CatalogConfig) -> Result<Catalog> {
    if config.scales.is_empty()
        || config.blur_sigmas.is_empty()
        || config.noise_levels.is_empty()
        || config.upsamplers.is_empty()
    {
        return Err(Error::invalid("catalog config has an empty axis"));
    }
    let mut specs = Vec::new();
    for &scale in &config.scales {
        for &blur_sigma in &config.blur_sigmas {
            for &noise_level in &config.noise_levels {
                for &upsampler in &config.upsamplers {
                    let spec = DegradationSpec {
                        scale,
                        blur_sigma,
                        noise_level,
                        upsampler,
                        seed: 0,
                    };
                    spec.validate()?;
                    specs.push(spec);
                }
            }
        }
    }
    Ok(Catalog {
        specs,
        seed: config.seed,
    })
}

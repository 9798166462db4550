use serde::{Deserialize, Serialize};

use crate::degradation::{resize, Upsampler};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::srqa_net::pair_from_tensors;
use crate::stereo_image::StereoPair;
use crate::tensorgrad::{BoundParams, Graph, ParamSet, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SRConfig {
    /// Width of every trunk layer; the last one is the feature handed to IQP.
    pub width: usize,
    pub kernel: usize,
    pub slope: f64,
    pub channels: usize,
}

impl Default for SRConfig {
    fn default() -> Self {
        Self {
            width: 16,
            kernel: 3,
            slope: crate::tensorgrad::LEAKY_SLOPE,
            channels: 3,
        }
    }
}

impl SRConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.kernel.is_multiple_of(2) || !(self.channels == 1 || self.channels == 3) {
            return Err(Error::invalid(format!(
                "SR config needs width > 0, odd kernel and 1 or 3 channels (got {}, {}, {})",
                self.width, self.kernel, self.channels
            )));
        }
        Ok(())
    }

    fn pad(&self) -> usize {
        self.kernel / 2
    }
}

pub fn sr_param_layout(cfg: &SRConfig) -> Vec<(String, Vec<usize>)> {
    let (k, w, c) = (cfg.kernel, cfg.width, cfg.channels);
    vec![
        ("trunk.conv1.w".into(), vec![w, c, k, k]),
        ("trunk.conv1.b".into(), vec![w]),
        // layer 2 sees its own view's features next to the other view's
        ("trunk.conv2.w".into(), vec![w, 2 * w, k, k]),
        ("trunk.conv2.b".into(), vec![w]),
        ("trunk.conv3.w".into(), vec![w, w, k, k]),
        ("trunk.conv3.b".into(), vec![w]),
        ("recon.w".into(), vec![c, w, k, k]),
        ("recon.b".into(), vec![c]),
    ]
}

/// Toy stereo SR network: a shared per-view trunk with cross-view exchange
/// at layer 2, and a residual reconstruction on top of bicubic upsampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SRModel {
    config: SRConfig,
    params: ParamSet,
}

impl SRModel {
    /// He-initialized trunk; the reconstruction layer starts at zero so the
    /// untrained model reproduces bicubic upsampling exactly.
    pub fn new(config: SRConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitMix64::new(seed);
        let gain = 2.0 / (1.0 + config.slope * config.slope);
        let mut params = ParamSet::new();
        for (name, shape) in sr_param_layout(&config) {
            let t = if name.starts_with("trunk") && name.ends_with(".w") {
                let fan_in: usize = shape[1..].iter().product();
                Tensor::randn(&shape, (gain / fan_in as f64).sqrt(), &mut rng)
            } else {
                Tensor::zeros(&shape)
            };
            params.insert(name, t);
        }
        Ok(Self { config, params })
    }

    pub fn from_params(config: SRConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let layout = sr_param_layout(&config);
        if layout.len() != params.len() {
            return Err(Error::invalid(format!(
                "SR checkpoint has {} tensors, config expects {}",
                params.len(),
                layout.len()
            )));
        }
        for (name, shape) in &layout {
            let t = params.get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::shape(
                    "SR checkpoint",
                    format!("'{name}' has shape {:?}, expected {shape:?}", t.shape()),
                ));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &SRConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}

/// Output and last-layer features of both views, `[N, ·, H, W]` each.
#[derive(Debug, Clone, Copy)]
pub struct SRGraph {
    pub sr_left: Var,
    pub sr_right: Var,
    pub f_left: Var,
    pub f_right: Var,
}

/// Build the network on bicubic-upsampled views `[N, C, H, W]`.
pub fn build_sr(cfg: &SRConfig, g: &mut Graph, p: &BoundParams, up_left: Var, up_right: Var) -> Result<SRGraph> {
    let pad = cfg.pad();
    let conv = |g: &mut Graph, name: &str, x: Var| -> Result<Var> {
        let y = g.conv2d(x, p.var(&format!("{name}.w")), p.var(&format!("{name}.b")), 1, pad)?;
        Ok(g.leaky_relu(y, cfg.slope))
    };
    let half = g.constant(Tensor::full(g.shape(up_left), 0.5));
    let xl = g.subtract(up_left, half)?;
    let xr = g.subtract(up_right, half)?;
    let h1l = conv(g, "trunk.conv1", xl)?;
    let h1r = conv(g, "trunk.conv1", xr)?;
    let cl = g.concat_channels(&[h1l, h1r])?;
    let cr = g.concat_channels(&[h1r, h1l])?;
    let h2l = conv(g, "trunk.conv2", cl)?;
    let h2r = conv(g, "trunk.conv2", cr)?;
    let f_left = conv(g, "trunk.conv3", h2l)?;
    let f_right = conv(g, "trunk.conv3", h2r)?;
    let (rw, rb) = (p.var("recon.w"), p.var("recon.b"));
    let res_l = g.conv2d(f_left, rw, rb, 1, pad)?;
    let res_r = g.conv2d(f_right, rw, rb, 1, pad)?;
    Ok(SRGraph {
        sr_left: g.add(up_left, res_l)?,
        sr_right: g.add(up_right, res_r)?,
        f_left,
        f_right,
    })
}

/// Bicubic-upsampled views of a batch of low-resolution pairs.
pub fn upsample_batch(lr: &[&StereoPair], scale: usize) -> Result<(Tensor, Tensor)> {
    let first = lr.first().ok_or_else(|| Error::invalid("empty SR batch"))?;
    let (w, h, c) = (first.width() * scale, first.height() * scale, first.channels());
    let mut left = Vec::with_capacity(lr.len() * c * w * h);
    let mut right = Vec::with_capacity(lr.len() * c * w * h);
    for (i, p) in lr.iter().enumerate() {
        if p.width() * scale != w || p.height() * scale != h || p.channels() != c {
            return Err(Error::shape("SR batch", format!("pair {i} differs in size from pair 0")));
        }
        left.extend_from_slice(resize(&p.left, w, h, Upsampler::Bicubic)?.data());
        right.extend_from_slice(resize(&p.right, w, h, Upsampler::Bicubic)?.data());
    }
    let shape = [lr.len(), c, h, w];
    Ok((Tensor::new(&shape, left)?, Tensor::new(&shape, right)?))
}

/// Upscaling factors the SR network supports.
pub const SR_SCALES: [usize; 3] = [2, 3, 4];

fn check_scale(scale: usize) -> Result<()> {
    if !SR_SCALES.contains(&scale) {
        return Err(Error::invalid(format!("scale {scale} is not supported")));
    }
    Ok(())
}

/// Super-resolved pair (clamped to [0, 1]) with each view's last-layer
/// features at output resolution.
#[derive(Debug, Clone)]
pub struct SROutput {
    pub pair: StereoPair,
    pub f_left: Tensor,
    pub f_right: Tensor,
    /// Unclamped network output.
    pub raw_left: Tensor,
    pub raw_right: Tensor,
}

pub fn sr_forward(model: &SRModel, lr_pair: &StereoPair, scale: usize) -> Result<SROutput> {
    check_scale(scale)?;
    if lr_pair.channels() != model.config().channels {
        return Err(Error::shape(
            "sr_forward",
            format!("{} channels, model expects {}", lr_pair.channels(), model.config().channels),
        ));
    }
    let (ul, ur) = upsample_batch(&[lr_pair], scale)?;
    let mut g = Graph::new();
    let p = model.params().bind(&mut g, false);
    let (l, r) = (g.constant(ul), g.constant(ur));
    let out = build_sr(model.config(), &mut g, &p, l, r)?;
    let raw_left = g.value(out.sr_left).clone();
    let raw_right = g.value(out.sr_right).clone();
    Ok(SROutput {
        pair: pair_from_tensors(&raw_left, &raw_right)?,
        f_left: g.value(out.f_left).clone(),
        f_right: g.value(out.f_right).clone(),
        raw_left,
        raw_right,
    })
}

/// Super-resolve a pair, returning only the clamped images.
pub fn super_resolve(model: &SRModel, lr_pair: &StereoPair, scale: usize) -> Result<StereoPair> {
    Ok(sr_forward(model, lr_pair, scale)?.pair)
}

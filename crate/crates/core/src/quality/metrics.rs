use std::fmt;

use serde::{Deserialize, Serialize};

use crate::degradation::gaussian_kernel;
use crate::error::{Error, Result};
use crate::stereo_image::{Image, StereoPair};

/// Value reported by PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Which direction of a score means better quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    HigherBetter,
    LowerBetter,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::HigherBetter => "higher-better",
            Polarity::LowerBetter => "lower-better",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    pub value: f64,
    pub polarity: Polarity,
}

impl MetricResult {
    pub fn new(name: impl Into<String>, value: f64, polarity: Polarity) -> Self {
        Self {
            name: name.into(),
            value,
            polarity,
        }
    }

    /// `name,value,polarity`
    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.name, self.value, self.polarity)
    }
}

fn check_same(op: &'static str, a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::shape(
            op,
            format!(
                "{}x{}x{} vs {}x{}x{}",
                a.width(),
                a.height(),
                a.channels(),
                b.width(),
                b.height(),
                b.channels()
            ),
        ));
    }
    Ok(())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_same("mse", a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.data().len() as f64)
}

/// Peak signal-to-noise ratio for unit peak, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Image, b: &Image) -> Result<MetricResult> {
    let m = mse(a, b)?;
    let v = if m == 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / m).log10()).min(PSNR_CAP_DB)
    };
    Ok(MetricResult::new("psnr", v, Polarity::HigherBetter))
}

/// 'valid'-mode separable filtering of a single plane.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().enumerate().map(|(t, wt)| wt * src[y * w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(t, wt)| wt * tmp[(y + t) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean single-scale SSIM (11×11 Gaussian window, σ = 1.5, K1 = 0.01,
/// K2 = 0.03, unit dynamic range) on BT.601 luma.
pub fn ssim(a: &Image, b: &Image) -> Result<MetricResult> {
    check_same("ssim", a, b)?;
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    let (x, y) = (a.luma(), b.luma());
    let (w, h) = (a.width(), a.height());
    let k = gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW)?;
    let xs = x.data();
    let ys = y.data();
    let xx: Vec<f64> = xs.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = ys.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xs.iter().zip(ys).map(|(p, q)| p * q).collect();
    let (mx, _, _) = filter_valid(xs, w, h, &k);
    let (my, _, _) = filter_valid(ys, w, h, &k);
    let (exx, _, _) = filter_valid(&xx, w, h, &k);
    let (eyy, _, _) = filter_valid(&yy, w, h, &k);
    let (exy, _, _) = filter_valid(&xy, w, h, &k);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = exx[i] - ux * ux;
        let vy = eyy[i] - uy * uy;
        let cxy = exy[i] - ux * uy;
        total += ((2.0 * ux * uy + SSIM_C1) * (2.0 * cxy + SSIM_C2))
            / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2));
    }
    Ok(MetricResult::new("ssim", total / mx.len() as f64, Polarity::HigherBetter))
}

/// Left minus right, unshifted, values in [−1, 1].
pub fn diff_map(pair: &StereoPair) -> Vec<f64> {
    pair.left
        .data()
        .iter()
        .zip(pair.right.data())
        .map(|(l, r)| l - r)
        .collect()
}

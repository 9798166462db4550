//! Separable resampling with center-aligned sampling and edge clamping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stereo_image::Image;

/// Keys cubic convolution parameter.
pub const KEYS_A: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Upsampler {
    Nearest,
    Bilinear,
    Bicubic,
}

impl Upsampler {
    pub fn as_str(self) -> &'static str {
        match self {
            Upsampler::Nearest => "nearest",
            Upsampler::Bilinear => "bilinear",
            Upsampler::Bicubic => "bicubic",
        }
    }
}

impl std::str::FromStr for Upsampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Upsampler::Nearest),
            "bilinear" => Ok(Upsampler::Bilinear),
            "bicubic" => Ok(Upsampler::Bicubic),
            _ => Err(Error::invalid(format!("unknown upsampler '{s}'"))),
        }
    }
}

pub fn keys_kernel(x: f64) -> f64 {
    let a = KEYS_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source position of output sample `d` when mapping `input` samples onto `output`.
fn source_coord(d: usize, input: usize, output: usize) -> f64 {
    (d as f64 + 0.5) * (input as f64 / output as f64) - 0.5
}

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Per-output-sample (source index, weight) taps along one axis.
pub fn axis_weights(method: Upsampler, input: usize, output: usize) -> Vec<Vec<(usize, f64)>> {
    (0..output)
        .map(|d| {
            let s = source_coord(d, input, output);
            match method {
                Upsampler::Nearest => {
                    let i = ((d as f64 + 0.5) * input as f64 / output as f64).floor() as isize;
                    vec![(clamp_index(i, input), 1.0)]
                }
                Upsampler::Bilinear => {
                    let i0 = s.floor();
                    let t = s - i0;
                    let i0 = i0 as isize;
                    vec![(clamp_index(i0, input), 1.0 - t), (clamp_index(i0 + 1, input), t)]
                }
                Upsampler::Bicubic => {
                    let i0 = s.floor() as isize;
                    (i0 - 1..=i0 + 2)
                        .map(|i| (clamp_index(i, input), keys_kernel(s - i as f64)))
                        .collect()
                }
            }
        })
        .collect()
}

pub fn resize(img: &Image, out_w: usize, out_h: usize, method: Upsampler) -> Result<Image> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("resize target must be at least 1x1"));
    }
    let (w, h) = (img.width(), img.height());
    let wx = axis_weights(method, w, out_w);
    let wy = axis_weights(method, h, out_h);
    let mut out = Vec::with_capacity(out_w * out_h * img.channels());
    let mut rows = vec![0.0; h * out_w];
    for c in 0..img.channels() {
        let p = img.plane(c);
        for y in 0..h {
            let src = &p[y * w..(y + 1) * w];
            for (x, taps) in wx.iter().enumerate() {
                rows[y * out_w + x] = taps.iter().map(|&(i, wt)| wt * src[i]).sum();
            }
        }
        for taps in &wy {
            for x in 0..out_w {
                let v: f64 = taps.iter().map(|&(i, wt)| wt * rows[i * out_w + x]).sum();
                out.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Image::new(out_w, out_h, img.channels(), out)
}

pub fn resize_bicubic(img: &Image, out_w: usize, out_h: usize) -> Result<Image> {
    resize(img, out_w, out_h, Upsampler::Bicubic)
}

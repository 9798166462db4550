//! Synthetic stereo scenes: a textured background at disparity 0 plus
//! fronto-parallel textured rectangles at integer disparities.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

use super::image::{DisparityMap, Image, StereoPair};

/// One rectangle, in left-view coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectSpec {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub disparity: usize,
    /// Seed of the rectangle's own texture.
    pub texture_seed: u64,
}

/// Bilinearly interpolated lattice noise in [0, 1].
fn value_noise(rng: &mut SplitMix64, w: usize, h: usize, cell: usize) -> Vec<f64> {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.next_f64()).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let fy = y as f64 / cell as f64;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        for x in 0..w {
            let fx = x as f64 / cell as f64;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let l = |yy: usize, xx: usize| lattice[yy * gw + xx];
            let top = l(y0, x0) * (1.0 - tx) + l(y0, x0 + 1) * tx;
            let bottom = l(y0 + 1, x0) * (1.0 - tx) + l(y0 + 1, x0 + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Multi-octave colored texture, planar `channels × h × w`.
fn texture(seed: u64, w: usize, h: usize, channels: usize) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let base: Vec<f64> = (0..channels).map(|_| rng.uniform(0.2, 0.8)).collect();
    let coarse = value_noise(&mut rng, w, h, 16);
    let mid = value_noise(&mut rng, w, h, 5);
    let mut out = Vec::with_capacity(channels * w * h);
    for &b in &base {
        let fine = value_noise(&mut rng, w, h, 2);
        for i in 0..w * h {
            let v = b + 0.35 * (coarse[i] - 0.5) + 0.3 * (mid[i] - 0.5) + 0.3 * (fine[i] - 0.5);
            out.push(v.clamp(0.0, 1.0));
        }
    }
    out
}

/// Render a scene with explicit rectangles. Rectangles are painted far to
/// near (ascending disparity, then list order), so nearer surfaces occlude
/// farther ones consistently in both views.
pub fn render_scene(seed: u64, width: usize, height: usize, channels: usize, rects: &[RectSpec]) -> Result<StereoPair> {
    for r in rects {
        if r.x + r.width > width || r.y + r.height > height || r.width == 0 || r.height == 0 {
            return Err(Error::invalid(format!("rectangle {r:?} outside {width}x{height}")));
        }
        if r.disparity > r.x {
            return Err(Error::invalid(format!(
                "rectangle at x={} cannot shift left by {}",
                r.x, r.disparity
            )));
        }
    }
    let bg = texture(derive_seed(seed, &[0]), width, height, channels);
    let mut left = bg.clone();
    let mut right = bg;
    let mut disp = vec![0.0; width * height];
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by_key(|&i| (rects[i].disparity, i));
    let plane = width * height;
    for i in order {
        let r = rects[i];
        let tex = texture(r.texture_seed, r.width, r.height, channels);
        for c in 0..channels {
            for ty in 0..r.height {
                for tx in 0..r.width {
                    let v = tex[(c * r.height + ty) * r.width + tx];
                    let y = r.y + ty;
                    left[c * plane + y * width + r.x + tx] = v;
                    right[c * plane + y * width + r.x + tx - r.disparity] = v;
                }
            }
        }
        for y in r.y..r.y + r.height {
            for x in r.x..r.x + r.width {
                disp[y * width + x] = r.disparity as f64;
            }
        }
    }
    StereoPair::new(
        Image::new(width, height, channels, left)?,
        Image::new(width, height, channels, right)?,
    )?
    .with_disparity(DisparityMap::dense(width, height, disp)?)
}

/// Random rectangle layout for [`gen_scene`].
pub fn random_rects(seed: u64, width: usize, height: usize, n_shapes: usize, max_disparity: usize) -> Vec<RectSpec> {
    let mut rng = SplitMix64::new(derive_seed(seed, &[1]));
    (0..n_shapes)
        .map(|k| {
            let disparity = 1 + rng.below(max_disparity.max(1));
            let rw = (width / 6 + rng.below(width / 6 + 1)).max(1).min(width - disparity);
            let rh = (height / 6 + rng.below(height / 6 + 1)).clamp(1, height);
            let x = disparity + rng.below(width - disparity - rw + 1);
            let y = rng.below(height - rh + 1);
            RectSpec {
                x,
                y,
                width: rw,
                height: rh,
                disparity,
                texture_seed: derive_seed(seed, &[2, k as u64]),
            }
        })
        .collect()
}

/// Deterministic RGB stereo scene with exact left-referenced disparity.
pub fn gen_scene(seed: u64, width: usize, height: usize, n_shapes: usize, max_disparity: usize) -> Result<StereoPair> {
    if max_disparity * 4 >= width {
        return Err(Error::invalid(format!(
            "max_disparity {max_disparity} must be below width/4 ({width}/4)"
        )));
    }
    if width < 8 || height < 8 {
        return Err(Error::invalid("scenes must be at least 8x8"));
    }
    let rects = random_rects(seed, width, height, n_shapes, max_disparity);
    render_scene(seed, width, height, 3, &rects)
}

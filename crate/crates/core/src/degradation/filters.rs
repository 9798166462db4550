use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::stereo_image::Image;

/// Kernel size of the blur-downscale (BD) degradation.
pub const BD_KERNEL_SIZE: usize = 15;

/// Normalized 1-D Gaussian taps of odd length `ksize`.
pub fn gaussian_kernel(sigma: f64, ksize: usize) -> Result<Vec<f64>> {
    if ksize.is_multiple_of(2) {
        return Err(Error::invalid(format!("Gaussian kernel size must be odd, got {ksize}")));
    }
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::invalid(format!("blur sigma must be >= 0, got {sigma}")));
    }
    let r = (ksize / 2) as isize;
    if sigma == 0.0 {
        let mut k = vec![0.0; ksize];
        k[r as usize] = 1.0;
        return Ok(k);
    }
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / z).collect())
}

/// Separable Gaussian blur with edge clamping; `sigma == 0` is the identity.
pub fn gaussian_blur(img: &Image, sigma: f64, ksize: usize) -> Result<Image> {
    let k = gaussian_kernel(sigma, ksize)?;
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let r = (ksize / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut out = Vec::with_capacity(img.data().len());
    let mut tmp = vec![0.0; w * h];
    for c in 0..img.channels() {
        let p = img.plane(c);
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = k
                    .iter()
                    .enumerate()
                    .map(|(t, wt)| wt * p[y * w + clamp(x as isize + t as isize - r, w)])
                    .sum();
            }
        }
        for y in 0..h {
            for x in 0..w {
                let v: f64 = k
                    .iter()
                    .enumerate()
                    .map(|(t, wt)| wt * tmp[clamp(y as isize + t as isize - r, h) * w + x])
                    .sum();
                out.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Image::new(w, h, img.channels(), out)
}

/// Additive white Gaussian noise with standard deviation `level / 255`,
/// clipped to [0, 1].
pub fn add_noise(img: &Image, level: f64, seed: u64) -> Result<Image> {
    if level < 0.0 || !level.is_finite() {
        return Err(Error::invalid(format!("noise level must be >= 0, got {level}")));
    }
    if level == 0.0 {
        return Ok(img.clone());
    }
    let std = level / 255.0;
    let mut rng = SplitMix64::new(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| (v + std * rng.normal()).clamp(0.0, 1.0))
        .collect();
    Image::new(img.width(), img.height(), img.channels(), data)
}

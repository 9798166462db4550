use crate::error::{Error, Result};
use crate::stereo_image::{DisparityMap, StereoPair};

use super::metrics::{MetricResult, Polarity};

/// Integer disparity by sum-of-absolute-differences block matching on luma.
///
/// For each left-view pixel the window is compared against the right view
/// shifted by d = 0..=max_search pixels to the left; the smallest SAD wins
/// and ties go to the smaller disparity. Pixels whose window or full search
/// range leaves the image are marked invalid (value 0).
pub fn block_match_disparity(pair: &StereoPair, window: usize, max_search: usize) -> Result<DisparityMap> {
    if window.is_multiple_of(2) || window == 0 {
        return Err(Error::invalid(format!("block-matching window must be odd, got {window}")));
    }
    let (w, h) = (pair.width(), pair.height());
    if max_search >= w {
        return Err(Error::invalid(format!("max_search {max_search} must be below width {w}")));
    }
    let r = window / 2;
    let left = pair.left.luma();
    let right = pair.right.luma();
    let (l, rt) = (left.data(), right.data());

    let mut best = vec![f64::INFINITY; w * h];
    let mut best_d = vec![0usize; w * h];
    let mut cost = vec![0.0; w * h];
    let mut row_sum = vec![0.0; w * h];
    for d in 0..=max_search {
        for y in 0..h {
            for x in 0..w {
                cost[y * w + x] = if x >= d {
                    (l[y * w + x] - rt[y * w + x - d]).abs()
                } else {
                    0.0
                };
            }
        }
        for y in 0..h {
            for x in r..w.saturating_sub(r) {
                row_sum[y * w + x] = cost[y * w + x - r..=y * w + x + r].iter().sum();
            }
        }
        for y in r..h.saturating_sub(r) {
            for x in (r + max_search)..w.saturating_sub(r) {
                let sad: f64 = (y - r..=y + r).map(|yy| row_sum[yy * w + x]).sum();
                if sad < best[y * w + x] {
                    best[y * w + x] = sad;
                    best_d[y * w + x] = d;
                }
            }
        }
    }
    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for y in r..h.saturating_sub(r) {
        for x in (r + max_search)..w.saturating_sub(r) {
            values[y * w + x] = best_d[y * w + x] as f64;
            valid[y * w + x] = true;
        }
    }
    DisparityMap::new(w, h, values, valid)
}

/// Mean absolute disparity error over pixels valid in both maps.
pub fn epe(est: &DisparityMap, gt: &DisparityMap) -> Result<MetricResult> {
    if est.width() != gt.width() || est.height() != gt.height() {
        return Err(Error::shape(
            "epe",
            format!("{}x{} vs {}x{}", est.width(), est.height(), gt.width(), gt.height()),
        ));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..est.values().len() {
        if est.valid()[i] && gt.valid()[i] {
            sum += (est.values()[i] - gt.values()[i]).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("EPE has no pixel valid in both maps"));
    }
    Ok(MetricResult::new("epe", sum / n as f64, Polarity::LowerBetter))
}

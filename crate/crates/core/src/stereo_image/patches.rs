use crate::error::{Error, Result};

use super::image::StereoPair;

pub const DEFAULT_PATCH_SIZE: usize = 120;

/// Regular grid of square patch anchors covering an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub size: usize,
    pub stride: usize,
    /// (row, col) of each patch's top-left corner, row-major.
    pub anchors: Vec<(usize, usize)>,
}

/// Anchors along one axis: multiples of `stride`, with one final anchor
/// clamped so the last patch ends exactly at the border.
fn axis_anchors(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..)
        .map(|k| k * stride)
        .take_while(|&a| a + size <= extent)
        .collect();
    let last = extent - size;
    if *out.last().expect("size <= extent") != last {
        out.push(last);
    }
    out
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, size: usize, stride: usize) -> Result<Self> {
        if size == 0 || stride == 0 {
            return Err(Error::invalid("patch size and stride must be positive"));
        }
        if size > width || size > height {
            return Err(Error::invalid(format!(
                "patch size {size} exceeds image {width}x{height}"
            )));
        }
        let rows = axis_anchors(height, size, stride);
        let cols = axis_anchors(width, size, stride);
        let anchors = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .collect();
        Ok(Self {
            size,
            stride,
            anchors,
        })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Crop both views (and disparity) at every grid anchor.
pub fn extract_patches(pair: &StereoPair, size: usize, stride: usize) -> Result<Vec<StereoPair>> {
    let grid = PatchGrid::new(pair.width(), pair.height(), size, stride)?;
    grid.anchors
        .iter()
        .map(|&(r, c)| pair.crop(c, r, size, size))
        .collect()
}

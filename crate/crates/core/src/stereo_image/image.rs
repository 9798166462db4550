use crate::error::{Error, Result};
use crate::tensorgrad::Tensor;

/// Planar image with values in [0, 1], laid out (channel, row, column).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("images have 1 or 3 channels, got {channels}")));
        }
        if width * height * channels != data.len() {
            return Err(Error::shape(
                "image",
                format!(
                    "{width}x{height}x{channels} needs {} values, got {}",
                    width * height * channels,
                    data.len()
                ),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Like [`Image::new`] but clamps every value into [0, 1].
    pub fn from_clamped(width: usize, height: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels]).expect("valid dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Sub-rectangle copy.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if x0 + w > self.width || y0 + h > self.height || w == 0 || h == 0 {
            return Err(Error::shape(
                "crop",
                format!("{w}x{h} at ({x0},{y0}) exceeds {}x{}", self.width, self.height),
            ));
        }
        let mut out = Vec::with_capacity(w * h * self.channels);
        for c in 0..self.channels {
            let p = self.plane(c);
            for y in y0..y0 + h {
                out.extend_from_slice(&p[y * self.width + x0..y * self.width + x0 + w]);
            }
        }
        Image::new(w, h, self.channels, out)
    }

    /// ITU-R BT.601 luma; grayscale images are returned as-is.
    pub fn luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.width * self.height;
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        let data = (0..n).map(|i| 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]).collect();
        Image::new(self.width, self.height, 1, data).expect("same dims")
    }

    /// A `[1, C, H, W]` tensor view of the pixels.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[1, self.channels, self.height, self.width], self.data.clone()).expect("dims")
    }

    /// Build an image from one sample of a `[N, C, H, W]` tensor, clamping into [0, 1].
    pub fn from_tensor(t: &Tensor, sample: usize) -> Result<Image> {
        let (n, c, h, w) = t.dims4()?;
        if sample >= n {
            return Err(Error::shape("from_tensor", format!("sample {sample} of {n}")));
        }
        let len = c * h * w;
        Image::from_clamped(w, h, c, t.data()[sample * len..(sample + 1) * len].to_vec())
    }
}

/// Per-pixel disparity (in pixels, referenced to the left view) with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != width * height || valid.len() != width * height {
            return Err(Error::shape(
                "disparity",
                format!("{width}x{height} map with {} values / {} flags", values.len(), valid.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    /// A fully valid map.
    pub fn dense(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(width, height, values, vec![true; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn is_valid(&self, y: usize, x: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<DisparityMap> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::shape("crop", "disparity window out of bounds"));
        }
        let mut values = Vec::with_capacity(w * h);
        let mut valid = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let r = y * self.width + x0..y * self.width + x0 + w;
            values.extend_from_slice(&self.values[r.clone()]);
            valid.extend_from_slice(&self.valid[r]);
        }
        DisparityMap::new(w, h, values, valid)
    }
}

/// Left/right views of one scene, optionally with left-referenced ground-truth disparity.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoPair {
    pub left: Image,
    pub right: Image,
    pub disparity_gt: Option<DisparityMap>,
}

impl StereoPair {
    pub fn new(left: Image, right: Image) -> Result<Self> {
        if !left.same_shape(&right) {
            return Err(Error::shape(
                "stereo pair",
                format!(
                    "left {}x{}x{} vs right {}x{}x{}",
                    left.width(),
                    left.height(),
                    left.channels(),
                    right.width(),
                    right.height(),
                    right.channels()
                ),
            ));
        }
        Ok(Self {
            left,
            right,
            disparity_gt: None,
        })
    }

    pub fn with_disparity(mut self, d: DisparityMap) -> Result<Self> {
        if d.width() != self.width() || d.height() != self.height() {
            return Err(Error::shape(
                "stereo pair",
                format!(
                    "disparity {}x{} vs views {}x{}",
                    d.width(),
                    d.height(),
                    self.width(),
                    self.height()
                ),
            ));
        }
        self.disparity_gt = Some(d);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.left.width()
    }

    pub fn height(&self) -> usize {
        self.left.height()
    }

    pub fn channels(&self) -> usize {
        self.left.channels()
    }

    /// Views exchanged; any disparity is dropped since it is left-referenced.
    pub fn swapped(&self) -> StereoPair {
        StereoPair {
            left: self.right.clone(),
            right: self.left.clone(),
            disparity_gt: None,
        }
    }

    /// The same rectangle of both views (and of the disparity, if any).
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<StereoPair> {
        let mut p = StereoPair::new(self.left.crop(x0, y0, w, h)?, self.right.crop(x0, y0, w, h)?)?;
        if let Some(d) = &self.disparity_gt {
            p.disparity_gt = Some(d.crop(x0, y0, w, h)?);
        }
        Ok(p)
    }
}

//! Binary PPM (`P6`, and `P5` for grayscale) and single-channel PFM (`Pf`).

use std::path::Path;

use crate::error::{Error, Result};

use super::image::{DisparityMap, Image};

fn fmt_err(format: &'static str, offset: usize, detail: impl Into<String>) -> Error {
    Error::Format {
        format,
        offset,
        detail: detail.into(),
    }
}

/// Reads whitespace-separated ASCII header tokens, skipping `#` comments.
struct Header<'a> {
    buf: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Header<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.buf.len() && !self.buf[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(fmt_err(self.format, start, format!("missing {what}")));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .map_err(|_| fmt_err(self.format, start, format!("{what} is not ASCII")))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        self.skip_space();
        let at = self.pos;
        self.token(what)?
            .parse()
            .map_err(|_| fmt_err(self.format, at, format!("invalid {what}")))
    }

    /// Consume the single whitespace byte that ends a header.
    fn end(&mut self) -> Result<usize> {
        match self.buf.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(fmt_err(self.format, self.pos, "header not terminated by whitespace")),
        }
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let mut h = Header {
        buf: bytes,
        pos: 0,
        format: "PPM",
    };
    let channels = match h.token("magic")? {
        "P6" => 3,
        "P5" => 1,
        m => return Err(fmt_err("PPM", 0, format!("unsupported magic '{m}'"))),
    };
    let width: usize = h.number("width")?;
    let height: usize = h.number("height")?;
    let at = h.pos;
    let maxval: u32 = h.number("maxval")?;
    if maxval != 255 {
        return Err(fmt_err("PPM", at, format!("maxval {maxval} unsupported, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(fmt_err("PPM", at, "zero image dimension"));
    }
    let start = h.end()?;
    let need = width * height * channels;
    let payload = &bytes[start..];
    if payload.len() < need {
        return Err(fmt_err(
            "PPM",
            bytes.len(),
            format!("truncated payload: {} of {need} bytes", payload.len()),
        ));
    }
    // Interleaved on disk, planar in memory.
    let n = width * height;
    let mut data = vec![0.0; need];
    for (i, px) in payload[..need].chunks_exact(channels).enumerate() {
        for (c, &b) in px.iter().enumerate() {
            data[c * n + i] = f64::from(b) / 255.0;
        }
    }
    Image::new(width, height, channels, data)
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    let n = img.width() * img.height();
    out.reserve(n * img.channels());
    for i in 0..n {
        for c in 0..img.channels() {
            out.push((img.data()[c * n + i].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

pub fn load_ppm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn save_ppm(img: &Image, path: &Path) -> Result<()> {
    std::fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

/// Decode a `Pf` file. Non-finite samples mark invalid pixels.
pub fn decode_pfm(bytes: &[u8]) -> Result<DisparityMap> {
    let mut h = Header {
        buf: bytes,
        pos: 0,
        format: "PFM",
    };
    match h.token("magic")? {
        "Pf" => {}
        "PF" => return Err(fmt_err("PFM", 0, "three-channel PFM is not a disparity map")),
        m => return Err(fmt_err("PFM", 0, format!("unsupported magic '{m}'"))),
    }
    let width: usize = h.number("width")?;
    let height: usize = h.number("height")?;
    let at = h.pos;
    let scale: f64 = h.number("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(fmt_err("PFM", at, "scale must be a nonzero number"));
    }
    let little = scale < 0.0;
    let start = h.end()?;
    let need = width * height * 4;
    let payload = &bytes[start..];
    if payload.len() < need {
        return Err(fmt_err(
            "PFM",
            bytes.len(),
            format!("truncated payload: {} of {need} bytes", payload.len()),
        ));
    }
    let mut values = vec![0.0; width * height];
    let mut valid = vec![false; width * height];
    // Rows are stored bottom to top.
    for (row_idx, row) in payload[..need].chunks_exact(width * 4).enumerate() {
        let y = height - 1 - row_idx;
        for (x, b) in row.chunks_exact(4).enumerate() {
            let raw: [u8; 4] = b.try_into().expect("4 bytes");
            let v = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            if v.is_finite() {
                values[y * width + x] = f64::from(v);
                valid[y * width + x] = true;
            }
        }
    }
    DisparityMap::new(width, height, values, valid)
}

/// Encode as little-endian `Pf` (scale −1). Invalid pixels are written as +inf.
pub fn encode_pfm(d: &DisparityMap) -> Vec<u8> {
    let (w, h) = (d.width(), d.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            let v = if d.is_valid(y, x) {
                d.get(y, x) as f32
            } else {
                f32::INFINITY
            };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load_pfm(path: &Path) -> Result<DisparityMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes)
}

pub fn save_pfm(d: &DisparityMap, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pfm(d)).map_err(|e| Error::io(path, e))
}

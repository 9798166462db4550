//! Convolution kernels: im2col followed by a single-threaded GEMM, so the
//! summation order is fixed and results are reproducible bit for bit.

use crate::error::{Error, Result};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub n: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Result<Self> {
        let (n, c_in, h, w) = input.dims4()?;
        let (c_out, wc_in, kh, kw) = match weight.shape()[..] {
            [a, b, c, d] => (a, b, c, d),
            _ => {
                return Err(Error::shape(
                    "conv2d",
                    format!("weight must be rank 4, got {:?}", weight.shape()),
                ))
            }
        };
        if wc_in != c_in {
            return Err(Error::shape(
                "conv2d",
                format!("input channels: input has {c_in}, weight expects {wc_in}"),
            ));
        }
        if kh != kw || kh % 2 == 0 {
            return Err(Error::shape(
                "conv2d",
                format!("kernel size: expected odd square kernel, got {kh}x{kw}"),
            ));
        }
        if bias.shape() != [c_out] {
            return Err(Error::shape(
                "conv2d",
                format!("bias length: expected [{c_out}], got {:?}", bias.shape()),
            ));
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d stride must be positive"));
        }
        if h + 2 * pad < kh {
            return Err(Error::shape(
                "conv2d",
                format!("height: {h} + 2*{pad} is smaller than kernel {kh}"),
            ));
        }
        if w + 2 * pad < kw {
            return Err(Error::shape(
                "conv2d",
                format!("width: {w} + 2*{pad} is smaller than kernel {kw}"),
            ));
        }
        Ok(Self {
            n,
            c_in,
            h,
            w,
            c_out,
            k: kh,
            stride,
            pad,
            out_h: (h + 2 * pad - kh) / stride + 1,
            out_w: (w + 2 * pad - kw) / stride + 1,
        })
    }

    fn patch_len(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn out_pixels(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Unfold one sample `(C, H, W)` into a `(C*k*k, OH*OW)` column matrix.
fn im2col(g: &ConvGeometry, src: &[f64], col: &mut [f64]) {
    let p = g.out_pixels();
    for c in 0..g.c_in {
        let plane = &src[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = ((c * g.k + ky) * g.k + kx) * p;
                let dst = &mut col[row..row + p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Fold a column matrix back, accumulating into `dst` `(C, H, W)`.
fn col2im_add(g: &ConvGeometry, col: &[f64], dst: &mut [f64]) {
    let p = g.out_pixels();
    for c in 0..g.c_in {
        let plane = &mut dst[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = ((c * g.k + ky) * g.k + kx) * p;
                let src = &col[row..row + p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst_row[ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `c (m×n) = beta*c + a (m×k) · b (k×n)`; strides given as (row, col).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slice lengths checked above cover every index the strides reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn conv2d_forward(
    g: &ConvGeometry,
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
) -> Tensor {
    let kk = g.patch_len();
    let p = g.out_pixels();
    let in_len = g.c_in * g.h * g.w;
    let out_len = g.c_out * p;
    let mut out = vec![0.0; g.n * out_len];
    let mut col = vec![0.0; kk * p];
    for s in 0..g.n {
        im2col(g, &input.data()[s * in_len..(s + 1) * in_len], &mut col);
        let dst = &mut out[s * out_len..(s + 1) * out_len];
        for (co, chunk) in dst.chunks_exact_mut(p).enumerate() {
            chunk.fill(bias.data()[co]);
        }
        gemm(g.c_out, kk, p, weight.data(), (kk, 1), &col, (p, 1), 1.0, dst);
    }
    Tensor::new(&[g.n, g.c_out, g.out_h, g.out_w], out).expect("conv output shape")
}

pub(crate) struct ConvGrads {
    pub input: Option<Vec<f64>>,
    pub weight: Option<Vec<f64>>,
    pub bias: Option<Vec<f64>>,
}

pub(crate) fn conv2d_backward(
    g: &ConvGeometry,
    input: &Tensor,
    weight: &Tensor,
    grad_out: &[f64],
    need: (bool, bool, bool),
) -> ConvGrads {
    let kk = g.patch_len();
    let p = g.out_pixels();
    let in_len = g.c_in * g.h * g.w;
    let out_len = g.c_out * p;
    let mut d_input = need.0.then(|| vec![0.0; g.n * in_len]);
    let mut d_weight = need.1.then(|| vec![0.0; g.c_out * kk]);
    let mut d_bias = need.2.then(|| vec![0.0; g.c_out]);
    let mut col = vec![0.0; kk * p];
    for s in 0..g.n {
        let go = &grad_out[s * out_len..(s + 1) * out_len];
        if let Some(db) = d_bias.as_mut() {
            for (co, chunk) in go.chunks_exact(p).enumerate() {
                db[co] += chunk.iter().sum::<f64>();
            }
        }
        if let Some(dw) = d_weight.as_mut() {
            im2col(g, &input.data()[s * in_len..(s + 1) * in_len], &mut col);
            // dW (Cout×K) += dOut (Cout×P) · colᵀ (P×K)
            gemm(g.c_out, p, kk, go, (p, 1), &col, (1, p), 1.0, dw);
        }
        if let Some(dx) = d_input.as_mut() {
            // dcol (K×P) = Wᵀ (K×Cout) · dOut (Cout×P)
            gemm(kk, g.c_out, p, weight.data(), (1, kk), go, (p, 1), 0.0, &mut col);
            col2im_add(g, &col, &mut dx[s * in_len..(s + 1) * in_len]);
        }
    }
    ConvGrads {
        input: d_input,
        weight: d_weight,
        bias: d_bias,
    }
}

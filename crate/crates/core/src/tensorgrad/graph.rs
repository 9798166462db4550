//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in creation order, which is a topological order, so
//! `backward` is a single reverse sweep over the tape.

use crate::error::{Error, Result};

use super::conv::{conv2d_backward, conv2d_forward, ConvGeometry};
use super::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The operation that produced a node, with the references backward needs.
#[derive(Debug, Clone)]
pub enum GraphOp {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        pad: usize,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    LeakyRelu {
        input: Var,
        slope: f64,
    },
    Add(Var, Var),
    Subtract(Var, Var),
    ConcatChannels(Vec<Var>),
    SliceChannels {
        input: Var,
        start: usize,
        len: usize,
    },
    Crop {
        input: Var,
        top: usize,
        left: usize,
    },
    GlobalAvgPool(Var),
    AvgPool2(Var),
    Mse(Var, Var),
    ScalarCombine(Vec<(f64, Var)>),
}

impl GraphOp {
    pub fn name(&self) -> &'static str {
        match self {
            GraphOp::Leaf => "leaf",
            GraphOp::Conv2d { .. } => "conv2d",
            GraphOp::Dense { .. } => "dense",
            GraphOp::LeakyRelu { .. } => "leaky_relu",
            GraphOp::Add(..) => "add",
            GraphOp::Subtract(..) => "subtract",
            GraphOp::ConcatChannels(_) => "concat_channels",
            GraphOp::SliceChannels { .. } => "slice_channels",
            GraphOp::Crop { .. } => "crop",
            GraphOp::GlobalAvgPool(_) => "global_avg_pool",
            GraphOp::AvgPool2(_) => "avg_pool2",
            GraphOp::Mse(..) => "mse",
            GraphOp::ScalarCombine(_) => "scalar_combine",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: GraphOp,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: GraphOp, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant leaf; no gradient is accumulated for it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, GraphOp::Leaf, false)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, GraphOp::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn op(&self, v: Var) -> &GraphOp {
        &self.nodes[v.0].op
    }

    /// Accumulated gradient of a node after [`Graph::backward`]; `None` if
    /// the node does not require a gradient or was not reached.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        node.grad
            .as_ref()
            .map(|g| Tensor::new(node.value.shape(), g.clone()).expect("grad shape"))
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, pad: usize) -> Result<Var> {
        let g = ConvGeometry::new(self.value(input), self.value(weight), self.value(bias), stride, pad)?;
        let out = conv2d_forward(&g, self.value(input), self.value(weight), self.value(bias));
        let rg = self.any_grad(&[input, weight, bias]);
        Ok(self.push(
            out,
            GraphOp::Conv2d {
                input,
                weight,
                bias,
                stride,
                pad,
            },
            rg,
        ))
    }

    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (n, d, m) = match (self.shape(input), self.shape(weight), self.shape(bias)) {
            ([n, d], [wd, m], [bm]) if d == wd && m == bm => (*n, *d, *m),
            (i, w, b) => {
                return Err(Error::shape(
                    "dense",
                    format!("input {i:?}, weight {w:?}, bias {b:?} do not agree"),
                ))
            }
        };
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let b = self.value(bias).data();
        let mut out = Vec::with_capacity(n * m);
        for row in x.chunks_exact(d) {
            for j in 0..m {
                let mut acc = b[j];
                for (i, xi) in row.iter().enumerate() {
                    acc += xi * w[i * m + j];
                }
                out.push(acc);
            }
        }
        let rg = self.any_grad(&[input, weight, bias]);
        let t = Tensor::new(&[n, m], out)?;
        Ok(self.push(t, GraphOp::Dense { input, weight, bias }, rg))
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Var {
        let src = self.value(input);
        let out: Vec<f64> = src
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { slope * x })
            .collect();
        let t = Tensor::new(src.shape(), out).expect("same shape");
        let rg = self.any_grad(&[input]);
        self.push(t, GraphOp::LeakyRelu { input, slope }, rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let va = self.value(a);
        let out: Vec<f64> = va
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let t = Tensor::new(va.shape(), out)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(t, GraphOp::Add(a, b), rg))
    }

    pub fn subtract(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("subtract", a, b)?;
        let va = self.value(a);
        let out: Vec<f64> = va
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let t = Tensor::new(va.shape(), out)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(t, GraphOp::Subtract(a, b), rg))
    }

    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::invalid("concat_channels needs at least one input"))?;
        let (n, _, h, w) = self.value(first).dims4()?;
        let mut total_c = 0;
        for &v in inputs {
            let (vn, vc, vh, vw) = self.value(v).dims4()?;
            if (vn, vh, vw) != (n, h, w) {
                return Err(Error::shape(
                    "concat_channels",
                    format!(
                        "operand {:?} disagrees with {:?} outside the channel axis",
                        self.shape(v),
                        self.shape(first)
                    ),
                ));
            }
            total_c += vc;
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(n * total_c * plane);
        for s in 0..n {
            for &v in inputs {
                let t = self.value(v);
                let c = t.shape()[1];
                out.extend_from_slice(&t.data()[s * c * plane..(s + 1) * c * plane]);
            }
        }
        let t = Tensor::new(&[n, total_c, h, w], out)?;
        let rg = self.any_grad(inputs);
        Ok(self.push(t, GraphOp::ConcatChannels(inputs.to_vec()), rg))
    }

    pub fn slice_channels(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let (n, c, h, w) = self.value(input).dims4()?;
        if start + len > c || len == 0 {
            return Err(Error::shape(
                "slice_channels",
                format!("channels {start}..{} out of 0..{c}", start + len),
            ));
        }
        let plane = h * w;
        let src = self.value(input).data();
        let mut out = Vec::with_capacity(n * len * plane);
        for s in 0..n {
            let base = (s * c + start) * plane;
            out.extend_from_slice(&src[base..base + len * plane]);
        }
        let t = Tensor::new(&[n, len, h, w], out)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(t, GraphOp::SliceChannels { input, start, len }, rg))
    }

    /// Spatial crop of a rank-4 tensor to `out_h × out_w` at (top, left).
    pub fn crop(&mut self, input: Var, top: usize, left: usize, out_h: usize, out_w: usize) -> Result<Var> {
        let (n, c, h, w) = self.value(input).dims4()?;
        if top + out_h > h || left + out_w > w || out_h == 0 || out_w == 0 {
            return Err(Error::shape(
                "crop",
                format!("window {out_h}x{out_w} at ({top},{left}) exceeds {h}x{w}"),
            ));
        }
        let src = self.value(input).data();
        let mut out = Vec::with_capacity(n * c * out_h * out_w);
        for plane in src.chunks_exact(h * w) {
            for y in top..top + out_h {
                out.extend_from_slice(&plane[y * w + left..y * w + left + out_w]);
            }
        }
        let t = Tensor::new(&[n, c, out_h, out_w], out)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(t, GraphOp::Crop { input, top, left }, rg))
    }

    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(input).dims4()?;
        let inv = 1.0 / (h * w) as f64;
        let out: Vec<f64> = self
            .value(input)
            .data()
            .chunks_exact(h * w)
            .map(|p| p.iter().sum::<f64>() * inv)
            .collect();
        let t = Tensor::new(&[n, c], out)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(t, GraphOp::GlobalAvgPool(input), rg))
    }

    /// 2×2 average pooling with stride 2; odd trailing rows/columns dropped.
    pub fn avg_pool2(&mut self, input: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(input).dims4()?;
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(Error::shape("avg_pool2", format!("input {h}x{w} too small")));
        }
        let src = self.value(input).data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        for plane in src.chunks_exact(h * w) {
            for y in 0..oh {
                for x in 0..ow {
                    let i = 2 * y * w + 2 * x;
                    out.push(0.25 * (plane[i] + plane[i + 1] + plane[i + w] + plane[i + w + 1]));
                }
            }
        }
        let t = Tensor::new(&[n, c, oh, ow], out)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(t, GraphOp::AvgPool2(input), rg))
    }

    /// Mean of squared differences; a one-element tensor.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mse", a, b)?;
        let va = self.value(a).data();
        let vb = self.value(b).data();
        let sum: f64 = va.iter().zip(vb).map(|(x, y)| (x - y) * (x - y)).sum();
        let t = Tensor::scalar(sum / va.len() as f64);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(t, GraphOp::Mse(a, b), rg))
    }

    /// Weighted sum of one-element tensors, evaluated left to right.
    pub fn scalar_combine(&mut self, terms: &[(f64, Var)]) -> Result<Var> {
        let mut acc = 0.0;
        for (i, &(wt, v)) in terms.iter().enumerate() {
            let t = self.value(v);
            if t.len() != 1 {
                return Err(Error::shape(
                    "scalar_combine",
                    format!("term {i} has shape {:?}, expected a scalar", t.shape()),
                ));
            }
            acc = if i == 0 { wt * t.item() } else { acc + wt * t.item() };
        }
        let vars: Vec<Var> = terms.iter().map(|t| t.1).collect();
        let rg = self.any_grad(&vars);
        Ok(self.push(Tensor::scalar(acc), GraphOp::ScalarCombine(terms.to_vec()), rg))
    }

    fn accumulate(&mut self, v: Var, delta: &[f64]) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match node.grad.as_mut() {
            Some(g) => {
                for (a, d) in g.iter_mut().zip(delta) {
                    *a += d;
                }
            }
            None => node.grad = Some(delta.to_vec()),
        }
    }

    /// Clear every accumulated gradient.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Back-propagate from a one-element node. Gradients accumulate, so
    /// calling this twice sums the two contributions.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be a scalar, got {:?}", self.shape(loss)),
            ));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        // Intermediate gradients of a previous sweep must not leak into this
        // one; only leaves keep accumulating.
        for node in self.nodes[..=loss.0].iter_mut() {
            if !matches!(node.op, GraphOp::Leaf) {
                node.grad = None;
            }
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            if matches!(self.nodes[idx].op, GraphOp::Leaf) || !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(go) = self.nodes[idx].grad.take() else {
                continue;
            };
            self.backward_node(idx, &go);
            self.nodes[idx].grad = Some(go);
        }
        for node in &self.nodes[..=loss.0] {
            if let Some(g) = &node.grad {
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "gradient of a {} node",
                        node.op.name()
                    )));
                }
            }
        }
        Ok(())
    }

    fn backward_node(&mut self, idx: usize, go: &[f64]) {
        let op = self.nodes[idx].op.clone();
        match op {
            GraphOp::Leaf => {}
            GraphOp::Conv2d {
                input,
                weight,
                bias,
                stride,
                pad,
            } => {
                let geom = ConvGeometry::new(self.value(input), self.value(weight), self.value(bias), stride, pad)
                    .expect("validated in forward");
                let need = (
                    self.requires_grad(input),
                    self.requires_grad(weight),
                    self.requires_grad(bias),
                );
                let grads = conv2d_backward(&geom, self.value(input), self.value(weight), go, need);
                if let Some(d) = grads.input {
                    self.accumulate(input, &d);
                }
                if let Some(d) = grads.weight {
                    self.accumulate(weight, &d);
                }
                if let Some(d) = grads.bias {
                    self.accumulate(bias, &d);
                }
            }
            GraphOp::Dense { input, weight, bias } => {
                let (n, d) = (self.shape(input)[0], self.shape(input)[1]);
                let m = self.shape(weight)[1];
                if self.requires_grad(input) {
                    let w = self.value(weight).data();
                    let mut dx = vec![0.0; n * d];
                    for r in 0..n {
                        for i in 0..d {
                            let mut acc = 0.0;
                            for j in 0..m {
                                acc += go[r * m + j] * w[i * m + j];
                            }
                            dx[r * d + i] = acc;
                        }
                    }
                    self.accumulate(input, &dx);
                }
                if self.requires_grad(weight) {
                    let x = self.value(input).data();
                    let mut dw = vec![0.0; d * m];
                    for r in 0..n {
                        for i in 0..d {
                            let xi = x[r * d + i];
                            for j in 0..m {
                                dw[i * m + j] += xi * go[r * m + j];
                            }
                        }
                    }
                    self.accumulate(weight, &dw);
                }
                if self.requires_grad(bias) {
                    let mut db = vec![0.0; m];
                    for row in go.chunks_exact(m) {
                        for (b, g) in db.iter_mut().zip(row) {
                            *b += g;
                        }
                    }
                    self.accumulate(bias, &db);
                }
            }
            GraphOp::LeakyRelu { input, slope } => {
                let dx: Vec<f64> = self
                    .value(input)
                    .data()
                    .iter()
                    .zip(go)
                    .map(|(&x, &g)| if x > 0.0 { g } else { slope * g })
                    .collect();
                self.accumulate(input, &dx);
            }
            GraphOp::Add(a, b) => {
                self.accumulate(a, go);
                self.accumulate(b, go);
            }
            GraphOp::Subtract(a, b) => {
                self.accumulate(a, go);
                let neg: Vec<f64> = go.iter().map(|g| -g).collect();
                self.accumulate(b, &neg);
            }
            GraphOp::ConcatChannels(inputs) => {
                let (n, total_c, h, w) = self.nodes[idx].value.dims4().expect("rank 4");
                let plane = h * w;
                let mut offset = 0;
                for v in inputs {
                    let c = self.shape(v)[1];
                    if self.requires_grad(v) {
                        let mut d = Vec::with_capacity(n * c * plane);
                        for s in 0..n {
                            let base = (s * total_c + offset) * plane;
                            d.extend_from_slice(&go[base..base + c * plane]);
                        }
                        self.accumulate(v, &d);
                    }
                    offset += c;
                }
            }
            GraphOp::SliceChannels { input, start, len } => {
                let (n, c, h, w) = self.value(input).dims4().expect("rank 4");
                let plane = h * w;
                let mut d = vec![0.0; n * c * plane];
                for s in 0..n {
                    let dst = (s * c + start) * plane;
                    let src = s * len * plane;
                    d[dst..dst + len * plane].copy_from_slice(&go[src..src + len * plane]);
                }
                self.accumulate(input, &d);
            }
            GraphOp::Crop { input, top, left } => {
                let (_, _, h, w) = self.value(input).dims4().expect("rank 4");
                let (_, _, oh, ow) = self.nodes[idx].value.dims4().expect("rank 4");
                let mut d = vec![0.0; self.value(input).len()];
                for (dst, src) in d.chunks_exact_mut(h * w).zip(go.chunks_exact(oh * ow)) {
                    for y in 0..oh {
                        let row = (top + y) * w + left;
                        dst[row..row + ow].copy_from_slice(&src[y * ow..(y + 1) * ow]);
                    }
                }
                self.accumulate(input, &d);
            }
            GraphOp::GlobalAvgPool(input) => {
                let (_, _, h, w) = self.value(input).dims4().expect("rank 4");
                let inv = 1.0 / (h * w) as f64;
                let mut d = Vec::with_capacity(self.value(input).len());
                for g in go {
                    d.extend(std::iter::repeat_n(g * inv, h * w));
                }
                self.accumulate(input, &d);
            }
            GraphOp::AvgPool2(input) => {
                let (_, _, h, w) = self.value(input).dims4().expect("rank 4");
                let (oh, ow) = (h / 2, w / 2);
                let mut d = vec![0.0; self.value(input).len()];
                for (dst, src) in d.chunks_exact_mut(h * w).zip(go.chunks_exact(oh * ow)) {
                    for y in 0..oh {
                        for x in 0..ow {
                            let g = 0.25 * src[y * ow + x];
                            let i = 2 * y * w + 2 * x;
                            dst[i] = g;
                            dst[i + 1] = g;
                            dst[i + w] = g;
                            dst[i + w + 1] = g;
                        }
                    }
                }
                self.accumulate(input, &d);
            }
            GraphOp::Mse(a, b) => {
                let va = self.value(a).data();
                let vb = self.value(b).data();
                let scale = 2.0 * go[0] / va.len() as f64;
                let da: Vec<f64> = va.iter().zip(vb).map(|(x, y)| scale * (x - y)).collect();
                if self.requires_grad(b) {
                    let db: Vec<f64> = da.iter().map(|v| -v).collect();
                    self.accumulate(b, &db);
                }
                self.accumulate(a, &da);
            }
            GraphOp::ScalarCombine(terms) => {
                for (wt, v) in terms {
                    self.accumulate(v, &[wt * go[0]]);
                }
            }
        }
    }
}

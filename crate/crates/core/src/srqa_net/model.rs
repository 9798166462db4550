use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::stereo_image::{Image, StereoPair};
use crate::tensorgrad::{BoundParams, Graph, ParamSet, Tensor, Var};

use super::config::{QAConfig, QAMode};

/// The three branches; `Low` resolves to the upper weights when shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Up,
    Low,
    Mid,
}

impl Branch {
    fn prefix(self, cfg: &QAConfig) -> &'static str {
        match self {
            Branch::Up => "up",
            Branch::Low if cfg.share_branches => "up",
            Branch::Low => "low",
            Branch::Mid => "mid",
        }
    }
}

fn conv_names(prefix: &str, layer: usize) -> (String, String) {
    (format!("{prefix}.conv{}.w", layer + 1), format!("{prefix}.conv{}.b", layer + 1))
}

/// Parameter names and shapes in checkpoint order.
pub fn param_layout(cfg: &QAConfig) -> Vec<(String, Vec<usize>)> {
    let k = cfg.kernel;
    let mut out = Vec::new();
    let mut push_branch = |prefix: &str, mid: bool| {
        for (l, &c_out) in cfg.widths.iter().enumerate() {
            let c_in = match (l, mid) {
                (0, _) => cfg.in_channels,
                (_, false) => cfg.widths[l - 1],
                // df_l concatenated with the previous middle features
                (_, true) => 2 * cfg.widths[l - 1],
            };
            let (w, b) = conv_names(prefix, l);
            out.push((w, vec![c_out, c_in, k, k]));
            out.push((b, vec![c_out]));
        }
    };
    push_branch("up", false);
    if !cfg.share_branches {
        push_branch("low", false);
    }
    push_branch("mid", true);
    let last = *cfg.widths.last().expect("validated");
    out.push(("head.fc1.w".into(), vec![3 * last, cfg.head_hidden]));
    out.push(("head.fc1.b".into(), vec![cfg.head_hidden]));
    out.push(("head.fc2.w".into(), vec![cfg.head_hidden, 1]));
    out.push(("head.fc2.b".into(), vec![1]));
    out
}

/// Three-branch stereo quality network: configuration plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QAModel {
    config: QAConfig,
    params: ParamSet,
}

impl QAModel {
    /// He-initialized weights (leaky-ReLU gain), zero biases, and the final
    /// bias at `config.output_bias`.
    pub fn new(config: QAConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitMix64::new(seed);
        let gain = 2.0 / (1.0 + config.slope * config.slope);
        let mut params = ParamSet::new();
        for (name, shape) in param_layout(&config) {
            let t = if name.ends_with(".w") {
                let fan_in: usize = if shape.len() == 4 { shape[1..].iter().product() } else { shape[0] };
                Tensor::randn(&shape, (gain / fan_in as f64).sqrt(), &mut rng)
            } else if name == "head.fc2.b" {
                Tensor::full(&shape, config.output_bias)
            } else {
                Tensor::zeros(&shape)
            };
            params.insert(name, t);
        }
        Ok(Self { config, params })
    }

    /// Wrap loaded weights, checking names and shapes against the config.
    pub fn from_params(config: QAConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let layout = param_layout(&config);
        if layout.len() != params.len() {
            return Err(Error::invalid(format!(
                "QA checkpoint has {} tensors, config expects {}",
                params.len(),
                layout.len()
            )));
        }
        for (name, shape) in &layout {
            let t = params.get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::shape(
                    "QA checkpoint",
                    format!("'{name}' has shape {:?}, expected {shape:?}", t.shape()),
                ));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &QAConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }
}

/// Handles to the interesting nodes of one QA forward pass.
#[derive(Debug, Clone, Copy)]
pub struct QAGraph {
    /// `[N, 1]` predicted scores.
    pub score: Var,
    /// First-layer post-activation features of the upper, lower, middle branch.
    pub first: [Var; 3],
    /// Channel concatenation of `first`.
    pub f_iqa: Var,
    /// Middle-branch layer-1 input (left minus right).
    pub mid_input: Var,
}

fn conv_layer(cfg: &QAConfig, g: &mut Graph, p: &BoundParams, branch: Branch, layer: usize, x: Var) -> Result<Var> {
    let (w, b) = conv_names(branch.prefix(cfg), layer);
    let y = g.conv2d(x, p.var(&w), p.var(&b), cfg.stride, cfg.pad())?;
    Ok(g.leaky_relu(y, cfg.slope))
}

/// First-layer features only: `[up, low, mid]` and the middle input.
pub fn build_first_layer(cfg: &QAConfig, g: &mut Graph, p: &BoundParams, left: Var, right: Var) -> Result<([Var; 3], Var)> {
    let diff = g.subtract(left, right)?;
    let up = conv_layer(cfg, g, p, Branch::Up, 0, left)?;
    let low = conv_layer(cfg, g, p, Branch::Low, 0, right)?;
    let mid = conv_layer(cfg, g, p, Branch::Mid, 0, diff)?;
    Ok(([up, low, mid], diff))
}

/// Full network on prepared `[N, C, P, P]` branch inputs.
pub fn build_qa(cfg: &QAConfig, g: &mut Graph, p: &BoundParams, left: Var, right: Var) -> Result<QAGraph> {
    let ([mut up, mut low, mut mid], mid_input) = build_first_layer(cfg, g, p, left, right)?;
    let first = [up, low, mid];
    let f_iqa = g.concat_channels(&first)?;
    for l in 1..cfg.depth() {
        let df = g.subtract(up, low)?;
        let mid_in = g.concat_channels(&[df, mid])?;
        up = conv_layer(cfg, g, p, Branch::Up, l, up)?;
        low = conv_layer(cfg, g, p, Branch::Low, l, low)?;
        mid = conv_layer(cfg, g, p, Branch::Mid, l, mid_in)?;
    }
    // pooling the channel concat equals concatenating the pooled vectors
    let last = g.concat_channels(&[up, low, mid])?;
    let v = g.global_avg_pool(last)?;
    let h = g.dense(v, p.var("head.fc1.w"), p.var("head.fc1.b"))?;
    let h = g.leaky_relu(h, cfg.slope);
    let score = g.dense(h, p.var("head.fc2.w"), p.var("head.fc2.b"))?;
    Ok(QAGraph {
        score,
        first,
        f_iqa,
        mid_input,
    })
}

/// Branch inputs for a batch: centred views (no-reference) or per-view
/// distorted-minus-reference (full-reference).
pub fn branch_inputs(cfg: &QAConfig, items: &[(&StereoPair, Option<&StereoPair>)]) -> Result<(Tensor, Tensor)> {
    let p = cfg.patch_size;
    let c = cfg.in_channels;
    let mut left = Vec::with_capacity(items.len() * c * p * p);
    let mut right = Vec::with_capacity(items.len() * c * p * p);
    for (i, &(pair, reference)) in items.iter().enumerate() {
        if pair.width() != p || pair.height() != p || pair.channels() != c {
            return Err(Error::shape(
                "qa_forward",
                format!(
                    "item {i} is {}x{}x{}, expected a {p}x{p}x{c} patch",
                    pair.width(),
                    pair.height(),
                    pair.channels()
                ),
            ));
        }
        match (cfg.mode, reference) {
            (QAMode::NoReference, _) => {
                left.extend(pair.left.data().iter().map(|v| v - 0.5));
                right.extend(pair.right.data().iter().map(|v| v - 0.5));
            }
            (QAMode::FullReference, Some(r)) => {
                if !r.left.same_shape(&pair.left) {
                    return Err(Error::shape("qa_forward", format!("item {i}: reference shape differs")));
                }
                left.extend(pair.left.data().iter().zip(r.left.data()).map(|(a, b)| a - b));
                right.extend(pair.right.data().iter().zip(r.right.data()).map(|(a, b)| a - b));
            }
            (QAMode::FullReference, None) => {
                return Err(Error::invalid("full-reference QA needs the reference pair"));
            }
        }
    }
    let shape = [items.len(), c, p, p];
    Ok((Tensor::new(&shape, left)?, Tensor::new(&shape, right)?))
}

/// Score and first-layer features of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct QAOutput {
    pub y: f64,
    pub f_iqa: Tensor,
    /// Upper, lower and middle first-layer features.
    pub first: [Tensor; 3],
    pub mid_input: Tensor,
}

/// Forward a batch of patches through a frozen model.
pub fn qa_forward_batch(model: &QAModel, items: &[(&StereoPair, Option<&StereoPair>)]) -> Result<Vec<f64>> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let (l, r) = branch_inputs(model.config(), items)?;
    let mut g = Graph::new();
    let p = model.params().bind(&mut g, false);
    let (lv, rv) = (g.constant(l), g.constant(r));
    let out = build_qa(model.config(), &mut g, &p, lv, rv)?;
    Ok(g.value(out.score).data().to_vec())
}

/// No-reference forward of one patch.
pub fn qa_forward(model: &QAModel, pair: &StereoPair) -> Result<QAOutput> {
    qa_forward_with_reference(model, pair, None)
}

pub fn qa_forward_with_reference(model: &QAModel, pair: &StereoPair, reference: Option<&StereoPair>) -> Result<QAOutput> {
    let (l, r) = branch_inputs(model.config(), &[(pair, reference)])?;
    let mut g = Graph::new();
    let p = model.params().bind(&mut g, false);
    let (lv, rv) = (g.constant(l), g.constant(r));
    let out = build_qa(model.config(), &mut g, &p, lv, rv)?;
    let y = g.value(out.score).item();
    if !y.is_finite() {
        return Err(Error::NonFinite("QA score".into()));
    }
    Ok(QAOutput {
        y,
        f_iqa: g.value(out.f_iqa).clone(),
        first: out.first.map(|v| g.value(v).clone()),
        mid_input: g.value(out.mid_input).clone(),
    })
}

/// Centre a `[N, C, H, W]` image node the way no-reference inputs are centred.
pub fn center_images(g: &mut Graph, x: Var) -> Result<Var> {
    let half = g.constant(Tensor::full(g.shape(x), 0.5));
    g.subtract(x, half)
}

/// `[1, C, H, W]` tensors of a pair's two views.
pub fn pair_tensors(pair: &StereoPair) -> (Tensor, Tensor) {
    (pair.left.to_tensor(), pair.right.to_tensor())
}

/// Images from a `[1, C, H, W]` pair of tensors, clamped to [0, 1].
pub fn pair_from_tensors(left: &Tensor, right: &Tensor) -> Result<StereoPair> {
    StereoPair::new(Image::from_tensor(left, 0)?, Image::from_tensor(right, 0)?)
}

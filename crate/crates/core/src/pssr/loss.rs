use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::srqa_net::{build_first_layer, center_images, pair_tensors, QAModel};
use crate::stereo_image::StereoPair;
use crate::tensorgrad::{BoundParams, Graph, Tensor, Var};

use super::model::{build_sr, upsample_batch, SRModel};

/// How SR features stand in for the QA first-layer features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Substitution {
    /// Left, right and left-minus-right fill the upper, lower and middle slots.
    #[default]
    AllBranches,
    /// Only the left features, compared against the upper slot.
    LeftOnly,
}

/// λ0 (pixel MSE), λ1 (image-level IQP), λ2 (feature-level IQP).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda0: 1.0,
            lambda1: 0.1,
            lambda2: 0.1,
        }
    }
}

impl LossWeights {
    pub fn mse_only() -> Self {
        Self {
            lambda0: 1.0,
            lambda1: 0.0,
            lambda2: 0.0,
        }
    }

    pub fn uses_qa(&self) -> bool {
        self.lambda1 != 0.0 || self.lambda2 != 0.0
    }

    /// `λ0·l_mse + λ1·l_im + λ2·l_f`, summed left to right like the graph does.
    pub fn combine(&self, l_mse: f64, l_im: f64, l_f: f64) -> f64 {
        self.lambda0 * l_mse + self.lambda1 * l_im + self.lambda2 * l_f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IQPLossBreakdown {
    pub l_mse: f64,
    pub l_iqp_im: f64,
    pub l_iqp_f: f64,
    pub total: f64,
    pub weights: LossWeights,
}

/// Top-left corner of the centred QA window, rounded down to even offsets so
/// 2×2 pooling of SR features lines up with the QA stride.
pub fn iqp_window(h: usize, w: usize, patch: usize) -> Result<(usize, usize)> {
    if h < patch || w < patch {
        return Err(Error::shape(
            "IQP",
            format!("{h}x{w} output is smaller than the {patch} QA patch"),
        ));
    }
    Ok(((h - patch) / 2 / 2 * 2, (w - patch) / 2 / 2 * 2))
}

fn crop_window(g: &mut Graph, v: Var, patch: usize) -> Result<Var> {
    let s = g.shape(v);
    let (h, w) = (s[2], s[3]);
    if (h, w) == (patch, patch) {
        return Ok(v);
    }
    let (top, left) = iqp_window(h, w, patch)?;
    g.crop(v, top, left, patch, patch)
}

/// QA first-layer features of a pair of image nodes (cropped to the QA
/// window, centred like no-reference inputs), concatenated, plus the upper slot.
fn first_layer_concat(qa: &QAModel, g: &mut Graph, qp: &BoundParams, left: Var, right: Var) -> Result<(Var, Var)> {
    let p = qa.config().patch_size;
    let l = crop_window(g, left, p)?;
    let r = crop_window(g, right, p)?;
    let l = center_images(g, l)?;
    let r = center_images(g, r)?;
    let (first, _) = build_first_layer(qa.config(), g, qp, l, r)?;
    Ok((g.concat_channels(&first)?, first[0]))
}

/// Ground-truth QA features shared by both IQP terms.
#[derive(Debug, Clone, Copy)]
pub struct GtFeatures {
    pub f_iqa: Var,
    pub up: Var,
}

pub fn build_gt_features(qa: &QAModel, g: &mut Graph, qp: &BoundParams, gt_left: Var, gt_right: Var) -> Result<GtFeatures> {
    let (f_iqa, up) = first_layer_concat(qa, g, qp, gt_left, gt_right)?;
    Ok(GtFeatures { f_iqa, up })
}

/// Image-level IQP: mean squared difference between QA first-layer
/// features of the SR output and of the ground truth.
pub fn build_iqp_im(qa: &QAModel, g: &mut Graph, qp: &BoundParams, sr_left: Var, sr_right: Var, gt: GtFeatures) -> Result<Var> {
    let (f_sr, _) = first_layer_concat(qa, g, qp, sr_left, sr_right)?;
    g.mse(f_sr, gt.f_iqa)
}

/// Feature-level IQP: pooled SR features substituted for the QA first-layer
/// features and compared at the substitution point.
pub fn build_iqp_f(
    qa: &QAModel,
    g: &mut Graph,
    f_left: Var,
    f_right: Var,
    gt: GtFeatures,
    substitution: Substitution,
) -> Result<Var> {
    let cfg = qa.config();
    let c = g.shape(f_left)[1];
    if c != cfg.first_width() || g.shape(f_right)[1] != c {
        return Err(Error::shape(
            "iqp_f",
            format!(
                "SR features have {c} channels but the QA first layer has {}",
                cfg.first_width()
            ),
        ));
    }
    let fl = crop_window(g, f_left, cfg.patch_size)?;
    let fr = crop_window(g, f_right, cfg.patch_size)?;
    let fl = g.avg_pool2(fl)?;
    let fr = g.avg_pool2(fr)?;
    let want = &g.shape(gt.up)[2..];
    if &g.shape(fl)[2..] != want {
        return Err(Error::shape(
            "iqp_f",
            format!(
                "pooled SR features are {:?} but QA first-layer features are {:?}",
                &g.shape(fl)[2..],
                want
            ),
        ));
    }
    match substitution {
        Substitution::AllBranches => {
            let d = g.subtract(fl, fr)?;
            let sub = g.concat_channels(&[fl, fr, d])?;
            g.mse(sub, gt.f_iqa)
        }
        Substitution::LeftOnly => g.mse(fl, gt.up),
    }
}

/// Nodes of the full training objective.
#[derive(Debug, Clone, Copy)]
pub struct CombinedGraph {
    pub l_mse: Var,
    pub l_iqp_im: Option<Var>,
    pub l_iqp_f: Option<Var>,
    pub total: Var,
}

/// Pixel MSE over both views plus, when `qa` is given, both IQP terms,
/// combined as `λ0·l_mse + λ1·l_im + λ2·l_f`.
#[allow(clippy::too_many_arguments)]
pub fn build_combined(
    sr: &SRModel,
    qa: Option<&QAModel>,
    g: &mut Graph,
    sp: &BoundParams,
    up: (Var, Var),
    gt: (Var, Var),
    weights: LossWeights,
    substitution: Substitution,
) -> Result<CombinedGraph> {
    let out = build_sr(sr.config(), g, sp, up.0, up.1)?;
    let pred = g.concat_channels(&[out.sr_left, out.sr_right])?;
    let target = g.concat_channels(&[gt.0, gt.1])?;
    let l_mse = g.mse(pred, target)?;
    match qa {
        None => {
            if weights.uses_qa() {
                return Err(Error::invalid("IQP weights are non-zero but no QA model was given"));
            }
            let total = g.scalar_combine(&[(weights.lambda0, l_mse)])?;
            Ok(CombinedGraph {
                l_mse,
                l_iqp_im: None,
                l_iqp_f: None,
                total,
            })
        }
        Some(qa) => {
            let qp = qa.params().bind(g, false);
            let gtf = build_gt_features(qa, g, &qp, gt.0, gt.1)?;
            let l_im = build_iqp_im(qa, g, &qp, out.sr_left, out.sr_right, gtf)?;
            let l_f = build_iqp_f(qa, g, out.f_left, out.f_right, gtf, substitution)?;
            let total = g.scalar_combine(&[
                (weights.lambda0, l_mse),
                (weights.lambda1, l_im),
                (weights.lambda2, l_f),
            ])?;
            Ok(CombinedGraph {
                l_mse,
                l_iqp_im: Some(l_im),
                l_iqp_f: Some(l_f),
                total,
            })
        }
    }
}

impl CombinedGraph {
    pub fn breakdown(&self, g: &Graph, weights: LossWeights) -> IQPLossBreakdown {
        let get = |v: Option<Var>| v.map_or(0.0, |v| g.value(v).item());
        IQPLossBreakdown {
            l_mse: g.value(self.l_mse).item(),
            l_iqp_im: get(self.l_iqp_im),
            l_iqp_f: get(self.l_iqp_f),
            total: g.value(self.total).item(),
            weights,
        }
    }
}

fn check_same(a: &StereoPair, b: &StereoPair) -> Result<()> {
    if !a.left.same_shape(&b.left) {
        return Err(Error::shape(
            "IQP",
            format!(
                "{}x{}x{} vs {}x{}x{}",
                a.width(),
                a.height(),
                a.channels(),
                b.width(),
                b.height(),
                b.channels()
            ),
        ));
    }
    Ok(())
}

/// Image-level IQP loss of a super-resolved pair against ground truth.
pub fn iqp_im_loss(qa: &QAModel, sr_pair: &StereoPair, gt_pair: &StereoPair) -> Result<f64> {
    check_same(sr_pair, gt_pair)?;
    let mut g = Graph::new();
    let qp = qa.params().bind(&mut g, false);
    let (sl, sr) = pair_tensors(sr_pair);
    let (gl, gr) = pair_tensors(gt_pair);
    let (sl, sr, gl, gr) = (g.constant(sl), g.constant(sr), g.constant(gl), g.constant(gr));
    let gt = build_gt_features(qa, &mut g, &qp, gl, gr)?;
    let l = build_iqp_im(qa, &mut g, &qp, sl, sr, gt)?;
    Ok(g.value(l).item())
}

/// Feature-level IQP loss of `[1, C, H, W]` SR features against ground truth.
pub fn iqp_f_loss(
    qa: &QAModel,
    f_left: &Tensor,
    f_right: &Tensor,
    gt_pair: &StereoPair,
    substitution: Substitution,
) -> Result<f64> {
    let mut g = Graph::new();
    let qp = qa.params().bind(&mut g, false);
    let (gl, gr) = pair_tensors(gt_pair);
    let (gl, gr) = (g.constant(gl), g.constant(gr));
    let (fl, fr) = (g.constant(f_left.clone()), g.constant(f_right.clone()));
    let gt = build_gt_features(qa, &mut g, &qp, gl, gr)?;
    let l = build_iqp_f(qa, &mut g, fl, fr, gt, substitution)?;
    Ok(g.value(l).item())
}

/// Every loss term for one (low-resolution, ground-truth) pair.
pub fn combined_loss(
    qa: &QAModel,
    model: &SRModel,
    lr_pair: &StereoPair,
    gt_pair: &StereoPair,
    weights: LossWeights,
    substitution: Substitution,
) -> Result<IQPLossBreakdown> {
    let scale = gt_pair.width() / lr_pair.width().max(1);
    if lr_pair.width() * scale != gt_pair.width() || lr_pair.height() * scale != gt_pair.height() {
        return Err(Error::shape(
            "combined_loss",
            "ground truth is not an integer multiple of the low-resolution pair",
        ));
    }
    let (ul, ur) = upsample_batch(&[lr_pair], scale)?;
    let (gl, gr) = pair_tensors(gt_pair);
    let mut g = Graph::new();
    let sp = model.params().bind(&mut g, false);
    let up = (g.constant(ul), g.constant(ur));
    let gt = (g.constant(gl), g.constant(gr));
    let c = build_combined(model, Some(qa), &mut g, &sp, up, gt, weights, substitution)?;
    Ok(c.breakdown(&g, weights))
}

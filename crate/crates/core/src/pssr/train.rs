use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::degradation::{crop_to_multiple, degrade, DegradationSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};
use crate::srqa_net::QAModel;
use crate::stereo_image::{StereoPair, DEFAULT_PATCH_SIZE};
use crate::tensorgrad::{AdamConfig, AdamState, Graph, Tensor};

use super::loss::{build_combined, IQPLossBreakdown, LossWeights, Substitution};
use super::model::{upsample_batch, SRModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SRTrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// High-resolution crop side; a multiple of the scale.
    pub patch_size: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub substitution: Substitution,
    pub adam: AdamConfig,
    /// Abort when a step's total loss exceeds this multiple of the first.
    pub divergence_factor: f64,
}

impl Default for SRTrainOptions {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 4,
            patch_size: DEFAULT_PATCH_SIZE,
            seed: 0,
            weights: LossWeights::default(),
            substitution: Substitution::AllBranches,
            adam: AdamConfig::default(),
            divergence_factor: 10.0,
        }
    }
}

/// Sample-weighted epoch means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub l_mse: f64,
    pub l_iqp_im: f64,
    pub l_iqp_f: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SRTrainReport {
    pub curve: Vec<EpochLosses>,
    /// Every optimizer step's losses, before that step's update.
    pub steps: Vec<IQPLossBreakdown>,
}

impl SRTrainReport {
    /// `epoch,l_mse,l_iqp_im,l_iqp_f,total`
    pub fn write_curve_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epoch", "l_mse", "l_iqp_im", "l_iqp_f", "total"])?;
        for e in &self.curve {
            wr.write_record([
                e.epoch.to_string(),
                e.l_mse.to_string(),
                e.l_iqp_im.to_string(),
                e.l_iqp_f.to_string(),
                e.total.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Ground truth cropped to the scale and its degraded counterpart.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub gt: StereoPair,
    pub lr: StereoPair,
}

/// Degrade every scene under `spec`; scene `i` gets noise seed
/// `derive_seed(spec.seed, [i])`.
pub fn prepare_pairs(scenes: &[StereoPair], spec: &DegradationSpec) -> Result<Vec<TrainingPair>> {
    scenes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let gt = crop_to_multiple(s, spec.scale)?;
            let spec_i = DegradationSpec {
                seed: derive_seed(spec.seed, &[i as u64]),
                ..*spec
            };
            let lr = degrade(&gt, &spec_i)?;
            Ok(TrainingPair { gt, lr })
        })
        .collect()
}

fn validate(pairs: &[TrainingPair], spec: &DegradationSpec, opts: &SRTrainOptions, qa: Option<&QAModel>) -> Result<()> {
    spec.validate()?;
    if !super::model::SR_SCALES.contains(&spec.scale) {
        return Err(Error::invalid(format!("scale {} is not supported by the SR network", spec.scale)));
    }
    if pairs.is_empty() {
        return Err(Error::invalid("SR training needs at least one scene"));
    }
    if opts.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if opts.patch_size == 0 || !opts.patch_size.is_multiple_of(spec.scale) {
        return Err(Error::invalid(format!(
            "patch size {} is not a positive multiple of scale {}",
            opts.patch_size, spec.scale
        )));
    }
    if opts.divergence_factor.is_nan() || opts.divergence_factor <= 1.0 {
        return Err(Error::invalid("divergence factor must exceed 1"));
    }
    for (i, p) in pairs.iter().enumerate() {
        if p.gt.width() < opts.patch_size || p.gt.height() < opts.patch_size {
            return Err(Error::invalid(format!(
                "scene {i} ({}x{}) is smaller than the {} patch",
                p.gt.width(),
                p.gt.height(),
                opts.patch_size
            )));
        }
    }
    if let Some(qa) = qa {
        if qa.config().patch_size > opts.patch_size {
            return Err(Error::invalid(format!(
                "QA patch {} exceeds the training patch {}",
                qa.config().patch_size,
                opts.patch_size
            )));
        }
    }
    Ok(())
}

/// Train the SR model with Adam on the combined objective. QA (if any) is
/// frozen: it enters the graph as constants. With `qa = None` only the
/// pixel term is built, which requires `λ1 = λ2 = 0`.
pub fn train_sr(
    model: &mut SRModel,
    qa: Option<&QAModel>,
    scenes: &[StereoPair],
    spec: &DegradationSpec,
    opts: &SRTrainOptions,
) -> Result<SRTrainReport> {
    train_sr_with(model, qa, scenes, spec, opts, |_| {})
}

/// [`train_sr`] with a callback after every epoch.
pub fn train_sr_with(
    model: &mut SRModel,
    qa: Option<&QAModel>,
    scenes: &[StereoPair],
    spec: &DegradationSpec,
    opts: &SRTrainOptions,
    mut on_epoch: impl FnMut(&EpochLosses),
) -> Result<SRTrainReport> {
    let pairs = prepare_pairs(scenes, spec)?;
    validate(&pairs, spec, opts, qa)?;
    if qa.is_none() && opts.weights.uses_qa() {
        return Err(Error::invalid("IQP weights are non-zero but no QA model was given"));
    }
    let s = spec.scale;
    let p = opts.patch_size;
    let batch = opts.batch_size.min(pairs.len());
    let mut adam = AdamState::new(model.params(), opts.adam);
    let mut report = SRTrainReport {
        curve: Vec::with_capacity(opts.epochs),
        steps: Vec::new(),
    };
    let mut initial_total = None;
    for epoch in 0..opts.epochs {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        SplitMix64::new(derive_seed(opts.seed, &[epoch as u64, 0])).shuffle(&mut order);
        let mut crop_rng = SplitMix64::new(derive_seed(opts.seed, &[epoch as u64, 1]));
        let mut sums = [0.0f64; 4];
        for (b, idx) in order.chunks(batch).enumerate() {
            let mut lr_crops = Vec::with_capacity(idx.len());
            let mut gt_l = Vec::new();
            let mut gt_r = Vec::new();
            for &i in idx {
                let TrainingPair { gt, lr } = &pairs[i];
                // scale-aligned anchor so the LR crop is exact
                let x = crop_rng.below((gt.width() - p) / s + 1) * s;
                let y = crop_rng.below((gt.height() - p) / s + 1) * s;
                lr_crops.push(lr.crop(x / s, y / s, p / s, p / s)?);
                let g = gt.crop(x, y, p, p)?;
                gt_l.extend_from_slice(g.left.data());
                gt_r.extend_from_slice(g.right.data());
            }
            let refs: Vec<&StereoPair> = lr_crops.iter().collect();
            let (ul, ur) = upsample_batch(&refs, s)?;
            let shape = ul.shape().to_vec();
            let mut g = Graph::new();
            let sp = model.params().bind(&mut g, true);
            let up = (g.constant(ul), g.constant(ur));
            let gt = (
                g.constant(Tensor::new(&shape, gt_l)?),
                g.constant(Tensor::new(&shape, gt_r)?),
            );
            let c = build_combined(model, qa, &mut g, &sp, up, gt, opts.weights, opts.substitution)?;
            let bd = c.breakdown(&g, opts.weights);
            if !bd.total.is_finite() {
                return Err(Error::NonFinite(format!("SR loss at epoch {epoch}, batch {b}")));
            }
            let first = *initial_total.get_or_insert(bd.total);
            if bd.total > opts.divergence_factor * first {
                return Err(Error::Diverged(format!(
                    "total loss {} at epoch {epoch}, batch {b} exceeds {}x the initial {first} \
                     (l_mse {}, l_iqp_im {}, l_iqp_f {})",
                    bd.total, opts.divergence_factor, bd.l_mse, bd.l_iqp_im, bd.l_iqp_f
                )));
            }
            g.backward(c.total)
                .map_err(|e| Error::NonFinite(format!("SR gradients at epoch {epoch}, batch {b}: {e}")))?;
            adam.step(model.params_mut(), &sp.grads(&g))?;
            let n = idx.len() as f64;
            for (acc, v) in sums.iter_mut().zip([bd.l_mse, bd.l_iqp_im, bd.l_iqp_f, bd.total]) {
                *acc += v * n;
            }
            report.steps.push(bd);
        }
        let n = pairs.len() as f64;
        let e = EpochLosses {
            epoch,
            l_mse: sums[0] / n,
            l_iqp_im: sums[1] / n,
            l_iqp_f: sums[2] / n,
            total: sums[3] / n,
        };
        on_epoch(&e);
        report.curve.push(e);
    }
    Ok(report)
}

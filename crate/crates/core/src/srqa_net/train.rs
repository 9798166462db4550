use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quality::Polarity;
use crate::rankmos::{Voter, RANKMOS_MAX, RANKMOS_MIN};
use crate::rng::{derive_seed, SplitMix64};
use crate::stereo_image::{PatchGrid, StereoPair};
use crate::tensorgrad::{AdamConfig, AdamState, Graph};

use super::model::{branch_inputs, build_qa, qa_forward_batch, QAModel};

/// One labelled training patch.
#[derive(Debug, Clone)]
pub struct QASample {
    pub distorted: StereoPair,
    /// Needed only in full-reference mode.
    pub reference: Option<StereoPair>,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QATrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for QATrainOptions {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 8,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QATrainReport {
    pub loss_curve: Vec<f64>,
    pub steps: u64,
}

/// Minimize mean squared error between predicted and label scores with Adam.
///
/// Each epoch visits every sample once in a seeded shuffled order; the last
/// batch may be short.
pub fn qa_train(model: &mut QAModel, dataset: &[QASample], opts: &QATrainOptions) -> Result<QATrainReport> {
    qa_train_with(model, dataset, opts, |_, _| {})
}

/// [`qa_train`] with a callback receiving `(epoch, mean loss)` after each epoch.
pub fn qa_train_with(
    model: &mut QAModel,
    dataset: &[QASample],
    opts: &QATrainOptions,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<QATrainReport> {
    if dataset.is_empty() {
        return Err(Error::invalid("QA training needs at least one sample"));
    }
    if opts.batch_size == 0 || opts.batch_size > dataset.len() {
        return Err(Error::invalid(format!(
            "batch size {} must be in 1..={}",
            opts.batch_size,
            dataset.len()
        )));
    }
    for (i, s) in dataset.iter().enumerate() {
        if !(RANKMOS_MIN..=RANKMOS_MAX).contains(&s.label) {
            return Err(Error::invalid(format!("sample {i}: label {} outside [1, 10]", s.label)));
        }
    }
    let cfg = model.config().clone();
    let mut adam = AdamState::new(model.params(), opts.adam);
    let mut curve = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        SplitMix64::new(derive_seed(opts.seed, &[epoch as u64])).shuffle(&mut order);
        let mut total = 0.0;
        for (b, batch) in order.chunks(opts.batch_size).enumerate() {
            let items: Vec<_> = batch
                .iter()
                .map(|&i| (&dataset[i].distorted, dataset[i].reference.as_ref()))
                .collect();
            let (l, r) = branch_inputs(&cfg, &items)?;
            let labels: Vec<f64> = batch.iter().map(|&i| dataset[i].label).collect();
            let mut g = Graph::new();
            let p = model.params().bind(&mut g, true);
            let (lv, rv) = (g.constant(l), g.constant(r));
            let out = build_qa(&cfg, &mut g, &p, lv, rv)?;
            let z = g.constant(crate::tensorgrad::Tensor::new(&[batch.len(), 1], labels)?);
            let loss = g.mse(out.score, z)?;
            let lv = g.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::NonFinite(format!("QA training loss at epoch {epoch}, batch {b}")));
            }
            g.backward(loss)
                .map_err(|e| Error::NonFinite(format!("QA gradients at epoch {epoch}, batch {b}: {e}")))?;
            adam.step(model.params_mut(), &p.grads(&g))?;
            total += lv * batch.len() as f64;
        }
        let mean = total / dataset.len() as f64;
        on_epoch(epoch, mean);
        curve.push(mean);
    }
    Ok(QATrainReport {
        loss_curve: curve,
        steps: adam.step_count(),
    })
}

/// Patch-averaged score of a full stereo pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePrediction {
    pub score: f64,
    pub patch_scores: Vec<f64>,
    pub n_patches: usize,
}

impl ScorePrediction {
    /// Mean of patch scores, summed in the given order.
    pub fn from_patch_scores(patch_scores: Vec<f64>) -> Result<Self> {
        if patch_scores.is_empty() {
            return Err(Error::invalid("no patches to average"));
        }
        let score = patch_scores.iter().sum::<f64>() / patch_scores.len() as f64;
        Ok(Self {
            score,
            n_patches: patch_scores.len(),
            patch_scores,
        })
    }
}

/// Patches scored per forward pass during inference.
const PREDICT_BATCH: usize = 8;

pub fn qa_predict(model: &QAModel, pair: &StereoPair, patch_size: usize, stride: usize) -> Result<ScorePrediction> {
    qa_predict_with_reference(model, pair, None, patch_size, stride)
}

/// Score every grid patch and average in patch-index order.
pub fn qa_predict_with_reference(
    model: &QAModel,
    pair: &StereoPair,
    reference: Option<&StereoPair>,
    patch_size: usize,
    stride: usize,
) -> Result<ScorePrediction> {
    if patch_size != model.config().patch_size {
        return Err(Error::invalid(format!(
            "patch size {patch_size} differs from the model's {}",
            model.config().patch_size
        )));
    }
    if pair.width() < patch_size || pair.height() < patch_size {
        return Err(Error::invalid(format!(
            "image {}x{} is smaller than the {patch_size} patch",
            pair.width(),
            pair.height()
        )));
    }
    let grid = PatchGrid::new(pair.width(), pair.height(), patch_size, stride)?;
    let mut patches = Vec::with_capacity(grid.len());
    for &(r, c) in &grid.anchors {
        let d = pair.crop(c, r, patch_size, patch_size)?;
        let rf = reference.map(|p| p.crop(c, r, patch_size, patch_size)).transpose()?;
        patches.push((d, rf));
    }
    let mut scores = Vec::with_capacity(patches.len());
    for chunk in patches.chunks(PREDICT_BATCH) {
        let items: Vec<_> = chunk.iter().map(|(d, r)| (d, r.as_ref())).collect();
        scores.extend(qa_forward_batch(model, &items)?);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("QA patch score".into()));
    }
    ScorePrediction::from_patch_scores(scores)
}

/// A trained QA model used as a higher-better rankMOS voter.
#[derive(Debug, Clone)]
pub struct QAVoter {
    pub model: QAModel,
    pub stride: usize,
}

pub fn qa_as_voter(model: QAModel) -> QAVoter {
    let stride = model.config().patch_size;
    QAVoter { model, stride }
}

impl Voter for QAVoter {
    fn name(&self) -> &str {
        "stereo_srqa"
    }

    fn polarity(&self) -> Polarity {
        Polarity::HigherBetter
    }

    fn score(&self, distorted: &StereoPair, reference: &StereoPair) -> Result<f64> {
        let p = self.model.config().patch_size;
        let r = match self.model.config().mode {
            super::QAMode::NoReference => None,
            super::QAMode::FullReference => Some(reference),
        };
        Ok(qa_predict_with_reference(&self.model, distorted, r, p, self.stride)?.score)
    }
}

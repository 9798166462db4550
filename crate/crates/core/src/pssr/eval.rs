use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::degradation::{crop_to_multiple, degrade, restore_naive, DegradationSpec};
use crate::error::{Error, Result};
use crate::quality::{block_match_disparity, epe, psnr, ssim};
use crate::rng::derive_seed;
use crate::srqa_net::{qa_predict, QAModel};
use crate::stereo_image::StereoPair;

use super::model::{super_resolve, SRModel};

/// Anything that maps a degraded pair back to full resolution.
pub trait Restorer: Sync {
    fn name(&self) -> &str;
    /// `gt` is available for oracle baselines; real models must ignore it.
    fn restore(&self, lr: &StereoPair, spec: &DegradationSpec, gt: &StereoPair) -> Result<StereoPair>;
}

/// A trained SR model under a display name.
#[derive(Debug, Clone)]
pub struct NamedModel {
    pub name: String,
    pub model: SRModel,
}

impl Restorer for NamedModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn restore(&self, lr: &StereoPair, spec: &DegradationSpec, _gt: &StereoPair) -> Result<StereoPair> {
        super_resolve(&self.model, lr, spec.scale)
    }
}

/// Upsampling with the degradation recipe's own upsampler.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveUpsample;

impl Restorer for NaiveUpsample {
    fn name(&self) -> &str {
        "naive"
    }

    fn restore(&self, lr: &StereoPair, spec: &DegradationSpec, _gt: &StereoPair) -> Result<StereoPair> {
        restore_naive(lr, spec)
    }
}

/// Returns the ground truth; marks the metric ceilings.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthOracle;

impl Restorer for GroundTruthOracle {
    fn name(&self) -> &str {
        "ground_truth"
    }

    fn restore(&self, _lr: &StereoPair, _spec: &DegradationSpec, gt: &StereoPair) -> Result<StereoPair> {
        Ok(gt.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub bm_window: usize,
    pub bm_search: usize,
    pub qa_stride: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            bm_window: 7,
            bm_search: 16,
            qa_stride: crate::stereo_image::DEFAULT_PATCH_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub spec: String,
    pub scene: usize,
    /// Mean of the two views.
    pub psnr: f64,
    pub ssim: f64,
    pub qa_score: Option<f64>,
    pub epe: f64,
}

/// Evaluate every restorer on every (spec, scene) combination.
///
/// Scene `k` under spec `s` is degraded with noise seed
/// `derive_seed(spec.seed, [k])`. EPE compares block matching on the
/// restored pair with the scene's disparity (or, without one, with block
/// matching on the clean pair). Rows are ordered model, spec, scene.
pub fn eval_sr(
    models: &[&dyn Restorer],
    scenes: &[StereoPair],
    specs: &[DegradationSpec],
    qa: Option<&QAModel>,
    opts: &EvalOptions,
) -> Result<Vec<EvalRow>> {
    if models.is_empty() || scenes.is_empty() || specs.is_empty() {
        return Err(Error::invalid("eval_sr needs at least one model, scene and spec"));
    }
    let mut cells = Vec::new();
    for m in 0..models.len() {
        for s in 0..specs.len() {
            for k in 0..scenes.len() {
                cells.push((m, s, k));
            }
        }
    }
    let rows = crate::parallel::par_map(&cells, |&(m, s, k)| -> Result<EvalRow> {
        let spec = &specs[s];
        let gt = crop_to_multiple(&scenes[k], spec.scale)?;
        let lr = degrade(
            &gt,
            &DegradationSpec {
                seed: derive_seed(spec.seed, &[k as u64]),
                ..*spec
            },
        )?;
        let out = models[m].restore(&lr, spec, &gt)?;
        let p = 0.5 * (psnr(&out.left, &gt.left)?.value + psnr(&out.right, &gt.right)?.value);
        let q = 0.5 * (ssim(&out.left, &gt.left)?.value + ssim(&out.right, &gt.right)?.value);
        let qa_score = qa
            .map(|qa| qa_predict(qa, &out, qa.config().patch_size, opts.qa_stride).map(|s| s.score))
            .transpose()?;
        let est = block_match_disparity(&out, opts.bm_window, opts.bm_search)?;
        let reference = match &gt.disparity_gt {
            Some(d) => d.clone(),
            None => block_match_disparity(&gt, opts.bm_window, opts.bm_search)?,
        };
        Ok(EvalRow {
            model: models[m].name().to_string(),
            spec: spec.label(),
            scene: k,
            psnr: p,
            ssim: q,
            qa_score,
            epe: epe(&est, &reference)?.value,
        })
    });
    rows.into_iter().collect()
}

/// `model,spec,scene,psnr,ssim,qa_score,epe`
pub fn write_eval_csv<W: Write>(rows: &[EvalRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["model", "spec", "scene", "psnr", "ssim", "qa_score", "epe"])?;
    for r in rows {
        wr.write_record([
            r.model.clone(),
            r.spec.clone(),
            r.scene.to_string(),
            r.psnr.to_string(),
            r.ssim.to_string(),
            r.qa_score.map(|v| v.to_string()).unwrap_or_default(),
            r.epe.to_string(),
        ])?;
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Per (model, spec) means over scenes, in first-appearance order.
pub fn summarize(rows: &[EvalRow]) -> Vec<(String, String, EvalRow)> {
    let mut groups: Vec<(String, String, Vec<&EvalRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| g.0 == r.model && g.1 == r.spec) {
            Some(g) => g.2.push(r),
            None => groups.push((r.model.clone(), r.spec.clone(), vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(m, s, rs)| {
            let n = rs.len() as f64;
            let mean = |f: &dyn Fn(&EvalRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            let qa = if rs.iter().all(|r| r.qa_score.is_some()) {
                Some(mean(&|r| r.qa_score.unwrap_or(0.0)))
            } else {
                None
            };
            let row = EvalRow {
                model: m.clone(),
                spec: s.clone(),
                scene: rs.len(),
                psnr: mean(&|r| r.psnr),
                ssim: mean(&|r| r.ssim),
                qa_score: qa,
                epe: mean(&|r| r.epe),
            };
            (m, s, row)
        })
        .collect()
}

/// Fixed-width table of [`summarize`] output.
pub fn format_eval_table(rows: &[EvalRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<24} {:>6} {:>9} {:>7} {:>8} {:>7}",
        "model", "spec", "scenes", "PSNR", "SSIM", "QA", "EPE"
    );
    for (m, s, r) in summarize(rows) {
        let qa = r.qa_score.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "{m:<16} {s:<24} {:>6} {:>9.4} {:>7.4} {qa:>8} {:>7.4}",
            r.scene, r.psnr, r.ssim, r.epe
        );
    }
    out
}

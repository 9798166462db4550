use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde_json::{json, Value};

use pssr_core::degradation::{build_catalog, distorted_version, CatalogConfig, DegradationSpec, Upsampler};
use pssr_core::diagnostics::{gradcheck_suite, GRADCHECK_TOLERANCE};
use pssr_core::pssr::{
    eval_sr, format_eval_table, super_resolve, train_sr_with, write_eval_csv, EvalOptions, GroundTruthOracle,
    LossWeights, NaiveUpsample, NamedModel, Restorer, SRConfig, SRModel, SRTrainOptions,
};
use pssr_core::rankmos::{synthesize_rankmos, CorrelationReport, PracticalityVoter, RankMosTable, SpatialVoter, StereoVoter, Voter};
use pssr_core::rng::derive_seed;
use pssr_core::srqa_net::{qa_predict_with_reference, qa_train_with, QAConfig, QAMode, QAModel, QASample, QATrainOptions};
use pssr_core::stereo_image::{extract_patches, gen_scene, StereoPair};
use pssr_core::tensorgrad::{weights, AdamConfig};

use crate::args::*;
use crate::data::*;

const QA_WEIGHTS: &str = "qa.pssrw";
const QA_CONFIG: &str = "qa_config.json";
const SR_WEIGHTS: &str = "sr.pssrw";
const SR_CONFIG: &str = "sr_config.json";

pub fn dispatch(command: &Command) -> Result<Value> {
    match command {
        Command::GenScenes(a) => gen_scenes(a),
        Command::Degrade(a) => degrade(a),
        Command::Rankmos(a) => rankmos(a),
        Command::TrainQa(a) => train_qa(a),
        Command::Score(a) => score(a),
        Command::TrainSr(a) => train_sr(a),
        Command::SuperResolve(a) => super_resolve_dir(a),
        Command::EvalSr(a) => eval_sr_cmd(a),
        Command::EvalQa(a) => eval_qa(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Replay(_) => bail!("replay cannot be nested"),
    }
}

fn gen_scenes(a: &GenScenesArgs) -> Result<Value> {
    ensure!(a.count > 0, "--count must be at least 1");
    ensure_dir(&a.out)?;
    for i in 0..a.count {
        let pair = gen_scene(derive_seed(a.seed, &[i as u64]), a.width, a.height, a.shapes, a.max_disparity)?;
        write_pair(&a.out, &scene_stem(i), &pair)?;
    }
    Ok(json!({ "scene_seeds": "derive_seed(seed, [i])" }))
}

fn degrade(a: &DegradeArgs) -> Result<Value> {
    let mut config: CatalogConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => CatalogConfig::default(),
    };
    config.seed = a.seed;
    let catalog = build_catalog(&config)?;
    let scenes = read_scenes(&a.scenes)?;
    ensure_dir(&a.out)?;
    for (i, scene) in scenes.iter().enumerate() {
        for j in 0..catalog.len() {
            let v = distorted_version(scene, &catalog.spec_for(i, j))?;
            write_pair(&a.out, &version_stem(i, j), &v)?;
        }
    }
    write_json(&a.out.join("catalog.json"), &config)?;
    let mut w = csv::Writer::from_writer(create_file(&a.out.join("versions.csv"))?);
    w.write_record(["version", "label", "scale", "blur_sigma", "noise_level", "upsampler"])?;
    for (j, s) in catalog.specs().iter().enumerate() {
        w.write_record([
            j.to_string(),
            s.label(),
            s.scale.to_string(),
            s.blur_sigma.to_string(),
            s.noise_level.to_string(),
            s.upsampler.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(json!({ "catalog": config, "n_refs": scenes.len(), "n_versions": catalog.len() }))
}

fn rankmos(a: &RankmosArgs) -> Result<Value> {
    let refs = read_scenes(&a.scenes)?;
    let versions = read_versions(&a.versions)?;
    ensure!(
        refs.len() == versions.len(),
        "{} scenes but versions for {} references",
        refs.len(),
        versions.len()
    );
    let practicality = PracticalityVoter {
        window: a.bm_window,
        max_search: a.bm_search,
    };
    let voters: [&dyn Voter; 3] = [&SpatialVoter, &StereoVoter, &practicality];
    let (votes, mos) = synthesize_rankmos(&refs, &versions, &voters, a.scope.into())?;
    ensure_dir(&a.out)?;
    votes.write_csv(create_file(&a.out.join("votes.csv"))?)?;
    mos.write_csv(create_file(&a.out.join("rankmos.csv"))?)?;
    Ok(json!({
        "voters": voters.iter().map(|v| v.name()).collect::<Vec<_>>(),
        "scope": a.scope,
        "bm_window": a.bm_window,
        "bm_search": a.bm_search,
    }))
}

fn read_labels(path: &Path) -> Result<RankMosTable> {
    let f = std::fs::File::open(path).with_context(|| format!("cannot read labels {}", path.display()))?;
    RankMosTable::read_csv(f).with_context(|| format!("labels {} are invalid", path.display()))
}

/// Versions, labels and (full-reference only) reference scenes, checked for agreement.
struct LabeledSet {
    versions: Vec<Vec<StereoPair>>,
    labels: RankMosTable,
    references: Option<Vec<StereoPair>>,
}

impl LabeledSet {
    fn load(versions: &Path, labels: &Path, scenes: Option<&Path>, mode: QAMode) -> Result<Self> {
        let versions = read_versions(versions)?;
        let labels = read_labels(labels)?;
        let dims = (versions.len(), versions[0].len());
        ensure!(
            labels.dims() == dims,
            "labels cover {:?} (refs, versions) but the image directory holds {:?}",
            labels.dims(),
            dims
        );
        let references = match mode {
            QAMode::NoReference => None,
            QAMode::FullReference => {
                let s = read_scenes(scenes.context("a full-reference model needs --scenes")?)?;
                ensure!(s.len() == dims.0, "{} scenes but {} labeled references", s.len(), dims.0);
                Some(s)
            }
        };
        Ok(Self {
            versions,
            labels,
            references,
        })
    }

    fn select(&self, refs: &Option<Vec<usize>>) -> Result<Vec<usize>> {
        let n = self.versions.len();
        let sel = refs.clone().unwrap_or_else(|| (0..n).collect());
        ensure!(!sel.is_empty(), "--refs selects no references");
        if let Some(&bad) = sel.iter().find(|&&i| i >= n) {
            bail!("reference {bad} out of range (have {n})");
        }
        Ok(sel)
    }

    fn reference(&self, i: usize) -> Option<&StereoPair> {
        self.references.as_ref().map(|r| &r[i])
    }
}

fn load_qa(dir: &Path) -> Result<QAModel> {
    let cfg: QAConfig = read_json(&dir.join(QA_CONFIG))?;
    let params = weights::load(&dir.join(QA_WEIGHTS))?;
    Ok(QAModel::from_params(cfg, params)?)
}

fn load_sr(dir: &Path) -> Result<SRModel> {
    let cfg: SRConfig = read_json(&dir.join(SR_CONFIG))?;
    let params = weights::load(&dir.join(SR_WEIGHTS))?;
    Ok(SRModel::from_params(cfg, params)?)
}

fn train_qa(a: &TrainQaArgs) -> Result<Value> {
    let mut cfg: QAConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => QAConfig::default(),
    };
    if let Some(p) = a.patch_size {
        cfg.patch_size = p;
    }
    cfg.validate()?;
    let set = LabeledSet::load(&a.versions, &a.labels, a.scenes.as_deref(), cfg.mode)?;
    let train_refs = set.select(&a.refs)?;
    let p = cfg.patch_size;
    let mut samples = Vec::new();
    for &i in &train_refs {
        for (j, v) in set.versions[i].iter().enumerate() {
            let label = set.labels.rankmos(i, j);
            let ref_patches = set.reference(i).map(|r| extract_patches(r, p, p)).transpose()?;
            for (k, d) in extract_patches(v, p, p)?.into_iter().enumerate() {
                samples.push(QASample {
                    distorted: d,
                    reference: ref_patches.as_ref().map(|r| r[k].clone()),
                    label,
                });
            }
        }
    }
    let opts = QATrainOptions {
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: derive_seed(a.seed, &[1]),
        adam: AdamConfig {
            lr: a.lr,
            ..AdamConfig::default()
        },
    };
    let mut model = QAModel::new(cfg.clone(), derive_seed(a.seed, &[0]))?;
    let report = qa_train_with(&mut model, &samples, &opts, |e, l| eprintln!("train-qa epoch {e} loss {l:.6}"))?;
    ensure_dir(&a.out)?;
    weights::save(model.params(), &a.out.join(QA_WEIGHTS))?;
    write_json(&a.out.join(QA_CONFIG), &cfg)?;
    let mut w = csv::Writer::from_writer(create_file(&a.out.join("qa_loss.csv"))?);
    w.write_record(["epoch", "loss"])?;
    for (e, l) in report.loss_curve.iter().enumerate() {
        w.write_record([e.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(json!({
        "qa_config": cfg,
        "train_refs": train_refs,
        "n_samples": samples.len(),
        "options": opts,
        "steps": report.steps,
    }))
}

fn score(a: &ScoreArgs) -> Result<Value> {
    let model = load_qa(&a.model)?;
    let p = model.config().patch_size;
    let stride = a.stride.unwrap_or(p);
    let full_ref = model.config().mode == QAMode::FullReference;
    ensure!(!full_ref || a.reference.is_some(), "a full-reference model needs --reference");
    let stems = pair_stems(&a.input)?;
    ensure_dir(&a.out)?;
    let mut w = csv::Writer::from_writer(create_file(&a.out.join("scores.csv"))?);
    w.write_record(["image", "score", "n_patches"])?;
    for stem in &stems {
        let pair = read_pair(&a.input, stem)?;
        let reference = match (&a.reference, full_ref) {
            (Some(dir), true) => Some(read_pair(dir, stem)?),
            _ => None,
        };
        let s = qa_predict_with_reference(&model, &pair, reference.as_ref(), p, stride)
            .with_context(|| format!("scoring {stem}"))?;
        w.write_record([stem.clone(), s.score.to_string(), s.n_patches.to_string()])?;
    }
    w.flush()?;
    Ok(json!({ "patch_size": p, "stride": stride, "n_images": stems.len() }))
}

fn eval_qa(a: &EvalQaArgs) -> Result<Value> {
    let model = load_qa(&a.model)?;
    let p = model.config().patch_size;
    let set = LabeledSet::load(&a.versions, &a.labels, a.scenes.as_deref(), model.config().mode)?;
    let refs = set.select(&a.refs)?;
    ensure_dir(&a.out)?;
    let mut w = csv::Writer::from_writer(create_file(&a.out.join("predictions.csv"))?);
    w.write_record(["ref", "version", "label", "prediction"])?;
    let (mut all_pred, mut all_label) = (Vec::new(), Vec::new());
    let mut per_reference = Vec::new();
    for &i in &refs {
        let (mut pred, mut label) = (Vec::new(), Vec::new());
        for (j, v) in set.versions[i].iter().enumerate() {
            let s = qa_predict_with_reference(&model, v, set.reference(i), p, p)?.score;
            let l = set.labels.rankmos(i, j);
            w.write_record([i.to_string(), j.to_string(), l.to_string(), s.to_string()])?;
            pred.push(s);
            label.push(l);
        }
        // A reference whose labels are all tied has no defined rank correlation.
        let report = CorrelationReport::compute(&pred, &label).map_err(|e| e.to_string());
        per_reference.push(json!({ "ref": i, "report": report.as_ref().ok(), "error": report.err() }));
        all_pred.extend(pred);
        all_label.extend(label);
    }
    w.flush()?;
    let overall = CorrelationReport::compute(&all_pred, &all_label)?;
    let report = json!({ "overall": overall, "per_reference": per_reference });
    write_json(&a.out.join("report.json"), &report)?;
    println!(
        "SROCC {:.4}  PLCC {:.4}  KROCC {:.4}  RMSE {:.4}  (n = {})",
        overall.srocc, overall.plcc, overall.krocc, overall.rmse, overall.n
    );
    Ok(json!({ "refs": refs, "patch_size": p }))
}

fn train_sr(a: &TrainSrArgs) -> Result<Value> {
    let cfg: SRConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SRConfig::default(),
    };
    cfg.validate()?;
    let spec = DegradationSpec {
        scale: a.scale,
        blur_sigma: a.blur_sigma,
        noise_level: a.noise_level,
        upsampler: Upsampler::Bicubic,
        seed: derive_seed(a.seed, &[2]),
    };
    spec.validate()?;
    let scenes = read_scenes(&a.scenes)?;
    let qa = a.qa.as_deref().map(load_qa).transpose()?;
    let opts = SRTrainOptions {
        epochs: a.epochs,
        batch_size: a.batch_size,
        patch_size: a.patch_size,
        seed: derive_seed(a.seed, &[1]),
        weights: LossWeights {
            lambda0: a.lambda0,
            lambda1: a.lambda1,
            lambda2: a.lambda2,
        },
        substitution: a.substitution.into(),
        adam: AdamConfig {
            lr: a.lr,
            ..AdamConfig::default()
        },
        ..SRTrainOptions::default()
    };
    let mut model = SRModel::new(cfg.clone(), derive_seed(a.seed, &[0]))?;
    let report = train_sr_with(&mut model, qa.as_ref(), &scenes, &spec, &opts, |e| {
        eprintln!(
            "train-sr epoch {} mse {:.6} iqp_im {:.6} iqp_f {:.6} total {:.6}",
            e.epoch, e.l_mse, e.l_iqp_im, e.l_iqp_f, e.total
        )
    })?;
    ensure_dir(&a.out)?;
    weights::save(model.params(), &a.out.join(SR_WEIGHTS))?;
    write_json(&a.out.join(SR_CONFIG), &cfg)?;
    report.write_curve_csv(create_file(&a.out.join("curves.csv"))?)?;
    Ok(json!({ "sr_config": cfg, "degradation": spec, "options": opts }))
}

fn super_resolve_dir(a: &SuperResolveArgs) -> Result<Value> {
    let model = load_sr(&a.model)?;
    let stems = pair_stems(&a.input)?;
    ensure_dir(&a.out)?;
    for stem in &stems {
        let lr = read_pair(&a.input, stem)?;
        let sr = super_resolve(&model, &lr, a.scale).with_context(|| format!("super-resolving {stem}"))?;
        write_pair(&a.out, stem, &sr)?;
    }
    Ok(json!({ "scale": a.scale, "n_images": stems.len() }))
}

fn eval_sr_cmd(a: &EvalSrArgs) -> Result<Value> {
    let scenes = read_scenes(&a.scenes)?;
    let mut named = Vec::new();
    for m in &a.models {
        let (name, dir) = m
            .split_once('=')
            .with_context(|| format!("--model expects NAME=DIR, got '{m}'"))?;
        named.push(NamedModel {
            name: name.to_string(),
            model: load_sr(Path::new(dir))?,
        });
    }
    let mut restorers: Vec<&dyn Restorer> = named.iter().map(|m| m as &dyn Restorer).collect();
    if !a.no_baselines {
        restorers.push(&NaiveUpsample);
        restorers.push(&GroundTruthOracle);
    }
    let config = CatalogConfig {
        scales: a.scale.clone(),
        blur_sigmas: a.blur_sigma.clone(),
        noise_levels: a.noise_level.clone(),
        upsamplers: vec![Upsampler::Bicubic],
        seed: a.seed,
    };
    let catalog = build_catalog(&config)?;
    let specs: Vec<DegradationSpec> = (0..catalog.len()).map(|j| catalog.spec_for(0, j)).collect();
    let qa = a.qa.as_deref().map(load_qa).transpose()?;
    let opts = EvalOptions {
        bm_window: a.bm_window,
        bm_search: a.bm_search,
        qa_stride: qa.as_ref().map_or(EvalOptions::default().qa_stride, |q| q.config().patch_size),
    };
    let rows = eval_sr(&restorers, &scenes, &specs, qa.as_ref(), &opts)?;
    ensure_dir(&a.out)?;
    write_eval_csv(&rows, create_file(&a.out.join("eval.csv"))?)?;
    let table = format_eval_table(&rows);
    std::fs::write(a.out.join("eval.txt"), &table)?;
    print!("{table}");
    Ok(json!({
        "models": restorers.iter().map(|r| r.name()).collect::<Vec<_>>(),
        "specs": specs,
        "options": opts,
    }))
}

fn gradcheck(a: &GradcheckArgs) -> Result<Value> {
    let entries = gradcheck_suite(a.seed)?;
    for e in &entries {
        println!(
            "{:<22} max_rel_err {:.3e}  coords {:>5}  {}",
            e.name,
            e.max_rel_err,
            e.coords_checked,
            if e.passed() { "ok" } else { "FAIL" }
        );
    }
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        let mut w = csv::Writer::from_writer(create_file(&out.join("gradcheck.csv"))?);
        w.write_record(["op", "max_rel_err", "coords_checked", "passed"])?;
        for e in &entries {
            w.write_record([
                e.name.clone(),
                e.max_rel_err.to_string(),
                e.coords_checked.to_string(),
                e.passed().to_string(),
            ])?;
        }
        w.flush()?;
    }
    let failed: Vec<&str> = entries.iter().filter(|e| !e.passed()).map(|e| e.name.as_str()).collect();
    ensure!(
        failed.is_empty(),
        "gradcheck exceeded tolerance {GRADCHECK_TOLERANCE:e} for: {}",
        failed.join(", ")
    );
    Ok(json!({ "tolerance": GRADCHECK_TOLERANCE, "entries": entries.len() }))
}

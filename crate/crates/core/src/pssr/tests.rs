use super::*;
use crate::degradation::{resize, DegradationSpec, Upsampler};
use crate::quality::{block_match_disparity, epe, PSNR_CAP_DB};
use crate::rng::SplitMix64;
use crate::srqa_net::{qa_forward, QAConfig, QAModel};
use crate::stereo_image::{gen_scene, Image, StereoPair};
use crate::tensorgrad::{grad_check, AdamConfig, BoundParams, GradCheckOptions, Graph, Tensor};

fn random_pair(seed: u64, side: usize) -> StereoPair {
    let mut rng = SplitMix64::new(seed);
    let mut img = || Image::new(side, side, 3, (0..3 * side * side).map(|_| rng.next_f64()).collect()).unwrap();
    StereoPair::new(img(), img()).unwrap()
}

fn tiny_sr(seed: u64) -> SRModel {
    SRModel::new(SRConfig { width: 4, ..Default::default() }, seed).unwrap()
}

fn tiny_qa(seed: u64) -> QAModel {
    QAModel::new(QAConfig::tiny(), seed).unwrap()
}

/// SR model whose reconstruction layer is non-zero, so every parameter matters.
fn perturbed(mut m: SRModel, seed: u64) -> SRModel {
    let mut rng = SplitMix64::new(seed);
    for name in ["recon.w", "recon.b"] {
        let t = m.params_mut().get_mut(name).unwrap();
        *t = Tensor::randn(t.shape(), 0.05, &mut rng);
    }
    m
}

#[test]
fn untrained_model_is_bicubic() {
    let m = SRModel::new(SRConfig::default(), 1).unwrap();
    let lr = random_pair(2, 10);
    let out = sr_forward(&m, &lr, 3).unwrap();
    assert_eq!((out.pair.width(), out.pair.height()), (30, 30));
    assert_eq!(out.f_left.shape(), &[1, 16, 30, 30]);
    let up = resize(&lr.left, 30, 30, Upsampler::Bicubic).unwrap();
    assert_eq!(out.raw_left.data(), up.data());
    assert!(sr_forward(&m, &lr, 7).is_err());
}

#[test]
fn sr_forward_gradcheck() {
    let m = perturbed(SRModel::new(SRConfig::default(), 3).unwrap(), 4);
    let lr = random_pair(5, 8);
    let (ul, ur) = upsample_batch(&[&lr], 2).unwrap();
    let target = random_pair(6, 16);
    let names = m.params().names().to_vec();
    let n = names.len();
    let mut inputs = m.params().tensors().to_vec();
    inputs.push(ul);
    inputs.push(ur);
    let cfg = m.config().clone();
    let (tl, tr) = (target.left.to_tensor(), target.right.to_tensor());
    let report = grad_check(
        |g: &mut Graph, v| {
            let p = BoundParams::from_vars(names.clone(), v[..n].to_vec())?;
            let out = build_sr(&cfg, g, &p, v[n], v[n + 1])?;
            let a = g.concat_channels(&[out.sr_left, out.sr_right])?;
            let (tl, tr) = (g.constant(tl.clone()), g.constant(tr.clone()));
            let b = g.concat_channels(&[tl, tr])?;
            g.mse(a, b)
        },
        &inputs,
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(1e-4), "{report:?}");
}

#[test]
fn iqp_im_properties() {
    let qa = tiny_qa(1);
    let gt = random_pair(2, 16);
    assert_eq!(iqp_im_loss(&qa, &gt, &gt).unwrap(), 0.0);
    let sr = random_pair(3, 16);
    let base = iqp_im_loss(&qa, &sr, &gt).unwrap();
    assert!(base > 0.0);
    let mut other = qa.clone();
    for name in ["head.fc1.w", "head.fc2.b"] {
        for v in other.params_mut().get_mut(name).unwrap().data_mut() {
            *v += 0.37;
        }
    }
    assert_eq!(iqp_im_loss(&other, &sr, &gt).unwrap(), base);
    assert!(iqp_im_loss(&qa, &random_pair(3, 18), &gt).is_err());
}

/// 2× nearest upsample of `[1, C, h, w]`, so 2×2 average pooling inverts it.
fn upsample_nearest2(t: &Tensor) -> Tensor {
    let (n, c, h, w) = t.dims4().unwrap();
    let mut out = vec![0.0; n * c * 4 * h * w];
    for p in 0..n * c {
        for y in 0..2 * h {
            for x in 0..2 * w {
                out[p * 4 * h * w + y * 2 * w + x] = t.data()[p * h * w + (y / 2) * w + x / 2];
            }
        }
    }
    Tensor::new(&[n, c, 2 * h, 2 * w], out).unwrap()
}

#[test]
fn iqp_f_properties() {
    let qa = tiny_qa(7);
    let gt = random_pair(8, 16);
    let feats = qa_forward(&qa, &gt).unwrap().first;
    let fl = upsample_nearest2(&feats[0]);
    let fr = upsample_nearest2(&feats[1]);
    assert_eq!(iqp_f_loss(&qa, &fl, &fr, &gt, Substitution::LeftOnly).unwrap(), 0.0);

    // Under full substitution the middle slot holds up - low, so the floor
    // is a third of the squared gap between that and the middle features.
    let gap: f64 = feats[0]
        .data()
        .iter()
        .zip(feats[1].data())
        .zip(feats[2].data())
        .map(|((u, l), m)| (u - l - m) * (u - l - m))
        .sum::<f64>()
        / (3 * feats[2].len()) as f64;
    let all = iqp_f_loss(&qa, &fl, &fr, &gt, Substitution::AllBranches).unwrap();
    assert!((all - gap).abs() < 1e-12 * gap.max(1.0));

    // interpolate toward the target: quadratic, minimised at t = 0
    let mut rng = SplitMix64::new(9);
    let f0 = Tensor::randn(fl.shape(), 0.5, &mut rng);
    let mix = |t: f64| {
        let d: Vec<f64> = f0.data().iter().zip(fl.data()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        Tensor::new(fl.shape(), d).unwrap()
    };
    let l = |t: f64, s| iqp_f_loss(&qa, &mix(t), &fr, &gt, s).unwrap();
    let left = [l(1.0, Substitution::LeftOnly), l(0.5, Substitution::LeftOnly), l(0.0, Substitution::LeftOnly)];
    assert!(left[0] > left[1] && left[1] > left[2]);
    let all = [l(1.0, Substitution::AllBranches), l(0.5, Substitution::AllBranches), l(0.0, Substitution::AllBranches)];
    assert!(all[0] - 2.0 * all[1] + all[2] > 0.0);

    let narrow = Tensor::zeros(&[1, 3, 16, 16]);
    assert!(iqp_f_loss(&qa, &narrow, &narrow, &gt, Substitution::AllBranches).is_err());
}

#[test]
fn iqp_gradients_skip_qa() {
    let qa = tiny_qa(2);
    let gt = random_pair(3, 16);
    let mut g = Graph::new();
    let qp = qa.params().bind(&mut g, false);
    let (gl, gr) = (g.constant(gt.left.to_tensor()), g.constant(gt.right.to_tensor()));
    let mut rng = SplitMix64::new(4);
    let fl = g.param(Tensor::randn(&[1, 4, 16, 16], 0.3, &mut rng));
    let fr = g.param(Tensor::randn(&[1, 4, 16, 16], 0.3, &mut rng));
    let gtf = build_gt_features(&qa, &mut g, &qp, gl, gr).unwrap();
    let l = build_iqp_f(&qa, &mut g, fl, fr, gtf, Substitution::AllBranches).unwrap();
    g.backward(l).unwrap();
    assert!(g.grad(fl).unwrap().data().iter().any(|&v| v != 0.0));
    assert!(qp.vars().iter().all(|&v| g.grad(v).is_none() && !g.requires_grad(v)));
}

#[test]
fn combined_loss_contracts() {
    let qa = tiny_qa(5);
    let sr = perturbed(tiny_sr(6), 7);
    let lr = random_pair(8, 8);
    let gt = random_pair(9, 16);
    let w = LossWeights::default();
    let bd = combined_loss(&qa, &sr, &lr, &gt, w, Substitution::AllBranches).unwrap();
    assert!(bd.l_mse > 0.0 && bd.l_iqp_im > 0.0 && bd.l_iqp_f > 0.0);
    assert_eq!(bd.total, w.combine(bd.l_mse, bd.l_iqp_im, bd.l_iqp_f));

    // zero weights on the IQP terms leave exactly the pixel loss
    let zero = combined_loss(&qa, &sr, &lr, &gt, LossWeights::mse_only(), Substitution::AllBranches).unwrap();
    assert_eq!(zero.total.to_bits(), bd.l_mse.to_bits());
}

#[test]
fn copying_ground_truth_zeroes_every_term() {
    let qa = tiny_qa(11);
    let gt = random_pair(12, 16);
    let feats = qa_forward(&qa, &gt).unwrap().first;
    let mut g = Graph::new();
    let qp = qa.params().bind(&mut g, false);
    let (gl, gr) = (g.constant(gt.left.to_tensor()), g.constant(gt.right.to_tensor()));
    let (sl, sr) = (g.constant(gt.left.to_tensor()), g.constant(gt.right.to_tensor()));
    let fl = g.constant(upsample_nearest2(&feats[0]));
    let fr = g.constant(upsample_nearest2(&feats[1]));
    let gtf = build_gt_features(&qa, &mut g, &qp, gl, gr).unwrap();
    let im = build_iqp_im(&qa, &mut g, &qp, sl, sr, gtf).unwrap();
    let f = build_iqp_f(&qa, &mut g, fl, fr, gtf, Substitution::LeftOnly).unwrap();
    let a = g.concat_channels(&[sl, sr]).unwrap();
    let b = g.concat_channels(&[gl, gr]).unwrap();
    let m = g.mse(a, b).unwrap();
    let total = g.scalar_combine(&[(1.0, m), (0.1, im), (0.1, f)]).unwrap();
    assert_eq!(g.value(total).item(), 0.0);
}

#[test]
fn combined_loss_gradcheck() {
    let qa = tiny_qa(13);
    let sr = perturbed(tiny_sr(14), 15);
    let lr = random_pair(16, 8);
    let gt = random_pair(17, 16);
    let (ul, ur) = upsample_batch(&[&lr], 2).unwrap();
    let names = sr.params().names().to_vec();
    let n = names.len();
    let report = grad_check(
        |g: &mut Graph, v| {
            let p = BoundParams::from_vars(names.clone(), v.to_vec())?;
            let up = (g.constant(ul.clone()), g.constant(ur.clone()));
            let t = (g.constant(gt.left.to_tensor()), g.constant(gt.right.to_tensor()));
            let c = build_combined(&sr, Some(&qa), g, &p, up, t, LossWeights::default(), Substitution::AllBranches)?;
            Ok(c.total)
        },
        &sr.params().tensors()[..n],
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(1e-4), "{report:?}");
}

fn tiny_scenes(n: u64) -> Vec<StereoPair> {
    (0..n).map(|i| gen_scene(40 + i, 24, 24, 3, 3).unwrap()).collect()
}

fn tiny_opts(weights: LossWeights) -> SRTrainOptions {
    SRTrainOptions {
        epochs: 6,
        batch_size: 2,
        patch_size: 16,
        seed: 3,
        weights,
        adam: AdamConfig { lr: 1e-3, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn zero_iqp_weights_match_pixel_only_training() {
    let qa = tiny_qa(1);
    let scenes = tiny_scenes(3);
    let spec = DegradationSpec { seed: 2, ..DegradationSpec::bi(2) };
    let mut a = tiny_sr(5);
    let mut b = tiny_sr(5);
    let ra = train_sr(&mut a, Some(&qa), &scenes, &spec, &tiny_opts(LossWeights::mse_only())).unwrap();
    let rb = train_sr(&mut b, None, &scenes, &spec, &tiny_opts(LossWeights::mse_only())).unwrap();
    assert_eq!(a, b);
    for (x, y) in ra.steps.iter().zip(&rb.steps) {
        assert_eq!(x.l_mse.to_bits(), y.l_mse.to_bits());
        assert_eq!(x.total.to_bits(), y.total.to_bits());
    }
}

#[test]
fn training_contracts() {
    let qa = tiny_qa(1);
    let before = qa.clone();
    let scenes = tiny_scenes(4);
    let spec = DegradationSpec { seed: 2, ..DegradationSpec::bi(2) };
    let mut m1 = tiny_sr(5);
    let mut m2 = tiny_sr(5);
    let opts = tiny_opts(LossWeights::default());
    let r1 = train_sr(&mut m1, Some(&qa), &scenes, &spec, &opts).unwrap();
    let r2 = train_sr(&mut m2, Some(&qa), &scenes, &spec, &opts).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(m1, m2);
    assert_eq!(qa, before);
    for s in &r1.steps {
        assert_eq!(s.total, s.weights.combine(s.l_mse, s.l_iqp_im, s.l_iqp_f));
        assert!(s.l_mse >= 0.0 && s.l_iqp_im >= 0.0 && s.l_iqp_f >= 0.0);
    }
    assert!(r1.curve.last().unwrap().total < r1.curve[0].total);

    // same init: the first step's pixel loss matches the pixel-only run
    let mut m3 = tiny_sr(5);
    let r3 = train_sr(&mut m3, None, &scenes, &spec, &tiny_opts(LossWeights::mse_only())).unwrap();
    assert_eq!(r3.steps[0].l_mse.to_bits(), r1.steps[0].l_mse.to_bits());

    let mut csv = Vec::new();
    r1.write_curve_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("epoch,l_mse,l_iqp_im,l_iqp_f,total\n"));
    assert_eq!(text.lines().count(), 1 + opts.epochs);
}

#[test]
fn training_rejects_bad_setups() {
    let qa = tiny_qa(1);
    let scenes = tiny_scenes(2);
    let spec = DegradationSpec::bi(3);
    let mut m = tiny_sr(1);
    // 16 is not a multiple of 3
    assert!(train_sr(&mut m, Some(&qa), &scenes, &spec, &tiny_opts(LossWeights::default())).is_err());
    // IQP weights without a QA model
    let spec = DegradationSpec::bi(2);
    assert!(train_sr(&mut m, None, &scenes, &spec, &tiny_opts(LossWeights::default())).is_err());
    // SR features narrower than the QA first layer
    let mut wide = SRModel::new(SRConfig { width: 5, ..Default::default() }, 1).unwrap();
    assert!(train_sr(&mut wide, Some(&qa), &scenes, &spec, &tiny_opts(LossWeights::default())).is_err());
}

#[test]
fn divergence_aborts() {
    let scenes = tiny_scenes(2);
    let spec = DegradationSpec::bi(2);
    let mut m = tiny_sr(1);
    let opts = SRTrainOptions {
        epochs: 20,
        adam: AdamConfig { lr: 5.0, ..Default::default() },
        ..tiny_opts(LossWeights::mse_only())
    };
    match train_sr(&mut m, None, &scenes, &spec, &opts) {
        Err(crate::Error::Diverged(msg)) => assert!(msg.contains("epoch")),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn eval_ground_truth_oracle_and_row_count() {
    let scenes: Vec<StereoPair> = (0..2).map(|i| gen_scene(60 + i, 48, 40, 4, 4).unwrap()).collect();
    let specs = [DegradationSpec::bi(2), DegradationSpec::bd(2, 1.0)];
    let naive = NaiveUpsample;
    let oracle = GroundTruthOracle;
    let model = NamedModel { name: "untrained".into(), model: tiny_sr(1) };
    let models: Vec<&dyn Restorer> = vec![&naive, &oracle, &model];
    let opts = EvalOptions { bm_window: 5, bm_search: 6, qa_stride: 16 };
    let rows = eval_sr(&models, &scenes, &specs, None, &opts).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 2);
    for r in rows.iter().filter(|r| r.model == "ground_truth") {
        assert_eq!(r.psnr, PSNR_CAP_DB);
        assert_eq!(r.ssim, 1.0);
        let gt = &scenes[r.scene];
        let floor = epe(&block_match_disparity(gt, 5, 6).unwrap(), gt.disparity_gt.as_ref().unwrap()).unwrap();
        assert_eq!(r.epe, floor.value);
    }
    // the untrained model is bicubic, like the naive restorer
    for (a, b) in rows.iter().filter(|r| r.model == "naive").zip(rows.iter().filter(|r| r.model == "untrained")) {
        assert_eq!(a.psnr, b.psnr);
    }
    let again = eval_sr(&models, &scenes, &specs, None, &opts).unwrap();
    assert_eq!(rows, again);
    let table = format_eval_table(&rows);
    assert_eq!(table.lines().count(), 1 + 3 * 2);
    let mut csv = Vec::new();
    write_eval_csv(&rows, &mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("model,spec,scene,psnr,ssim,qa_score,epe\n"));
}

#[test]
fn bd_sweep_degrades_psnr() {
    let scenes: Vec<StereoPair> = (0..2).map(|i| gen_scene(70 + i, 48, 48, 5, 4).unwrap()).collect();
    let specs: Vec<DegradationSpec> = [1.0, 2.6, 3.6].iter().map(|&s| DegradationSpec::bd(2, s)).collect();
    let model = NamedModel { name: "m".into(), model: tiny_sr(2) };
    let rows = eval_sr(&[&model], &scenes, &specs, None, &EvalOptions { bm_window: 5, bm_search: 6, qa_stride: 16 }).unwrap();
    let means: Vec<f64> = summarize(&rows).iter().map(|(_, _, r)| r.psnr).collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn iqp_window_is_even_and_centred() {
    assert_eq!(iqp_window(120, 120, 120).unwrap(), (0, 0));
    assert_eq!(iqp_window(126, 131, 120).unwrap(), (2, 4));
    assert!(iqp_window(100, 130, 120).is_err());
}

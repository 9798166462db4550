//! Finite-difference gradient checks over every graph op and the two full
//! networks, shared by the command-line tool and the test suites.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pssr::{build_combined, upsample_batch, LossWeights, SRConfig, SRModel, Substitution};
use crate::rng::{derive_seed, SplitMix64};
use crate::srqa_net::{branch_inputs, build_qa, QAConfig, QAModel};
use crate::stereo_image::{Image, StereoPair};
use crate::tensorgrad::{grad_check, BoundParams, GradCheckOptions, GradCheckReport, Graph, Tensor, Var, LEAKY_SLOPE};

/// Tolerance every entry must meet.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
    pub coords_checked: usize,
}

impl GradCheckEntry {
    fn new(name: &str, r: GradCheckReport) -> Self {
        Self {
            name: name.to_string(),
            max_rel_err: r.max_rel_err,
            coords_checked: r.coords_checked,
        }
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err <= GRADCHECK_TOLERANCE
    }
}

/// Reduce a node to a scalar through MSE against a fixed random target.
fn against_target(g: &mut Graph, v: Var, seed: u64) -> Result<Var> {
    let mut rng = SplitMix64::new(seed);
    let t = g.constant(Tensor::randn(g.shape(v), 1.0, &mut rng));
    g.mse(v, t)
}

fn random_pair(rng: &mut SplitMix64, side: usize) -> StereoPair {
    let mut img = || Image::new(side, side, 3, (0..3 * side * side).map(|_| rng.next_f64()).collect()).expect("dims");
    let l = img();
    let r = img();
    StereoPair::new(l, r).expect("same shape")
}

/// Run the whole battery. Deterministic in `seed`.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<GradCheckEntry>> {
    let opts = GradCheckOptions {
        seed,
        ..Default::default()
    };
    let mut rng = SplitMix64::new(derive_seed(seed, &[0]));
    let mut randn = |shape: &[usize]| Tensor::randn(shape, 1.0, &mut rng);
    let ts = derive_seed(seed, &[1]);
    let mut out = Vec::new();

    let (x, w, b) = (randn(&[2, 3, 7, 6]), randn(&[4, 3, 3, 3]), randn(&[4]));
    for (name, stride, pad) in [("conv2d", 1, 1), ("conv2d_strided", 2, 1), ("conv2d_valid", 1, 0)] {
        let r = grad_check(
            |g, v| {
                let y = g.conv2d(v[0], v[1], v[2], stride, pad)?;
                against_target(g, y, ts)
            },
            &[x.clone(), w.clone(), b.clone()],
            opts,
        )?;
        out.push(GradCheckEntry::new(name, r));
    }

    let (x, w, b) = (randn(&[3, 5]), randn(&[5, 4]), randn(&[4]));
    let r = grad_check(
        |g, v| {
            let y = g.dense(v[0], v[1], v[2])?;
            against_target(g, y, ts)
        },
        &[x, w, b],
        opts,
    )?;
    out.push(GradCheckEntry::new("dense", r));

    // keep every input at least 0.1 away from the kink
    let away: Vec<f64> = randn(&[2, 3, 4, 4])
        .data()
        .iter()
        .map(|v| v.signum() * (0.1 + v.abs()))
        .collect();
    let away = Tensor::new(&[2, 3, 4, 4], away)?;
    let r = grad_check(
        |g, v| {
            let y = g.leaky_relu(v[0], LEAKY_SLOPE);
            against_target(g, y, ts)
        },
        &[away],
        opts,
    )?;
    out.push(GradCheckEntry::new("leaky_relu", r));

    let (a, bb) = (randn(&[2, 2, 3, 3]), randn(&[2, 2, 3, 3]));
    for name in ["add", "subtract"] {
        let r = grad_check(
            |g, v| {
                let y = if name == "add" { g.add(v[0], v[1])? } else { g.subtract(v[0], v[1])? };
                against_target(g, y, ts)
            },
            &[a.clone(), bb.clone()],
            opts,
        )?;
        out.push(GradCheckEntry::new(name, r));
    }

    let (a, c) = (randn(&[2, 2, 4, 5]), randn(&[2, 3, 4, 5]));
    let r = grad_check(
        |g, v| {
            let y = g.concat_channels(&[v[0], v[1], v[0]])?;
            against_target(g, y, ts)
        },
        &[a.clone(), c.clone()],
        opts,
    )?;
    out.push(GradCheckEntry::new("concat_channels", r));

    let r = grad_check(
        |g, v| {
            let y = g.slice_channels(v[0], 1, 2)?;
            against_target(g, y, ts)
        },
        std::slice::from_ref(&c),
        opts,
    )?;
    out.push(GradCheckEntry::new("slice_channels", r));

    let r = grad_check(
        |g, v| {
            let y = g.crop(v[0], 1, 2, 2, 3)?;
            against_target(g, y, ts)
        },
        std::slice::from_ref(&c),
        opts,
    )?;
    out.push(GradCheckEntry::new("crop", r));

    let r = grad_check(
        |g, v| {
            let y = g.global_avg_pool(v[0])?;
            against_target(g, y, ts)
        },
        std::slice::from_ref(&c),
        opts,
    )?;
    out.push(GradCheckEntry::new("global_avg_pool", r));

    let odd = randn(&[2, 2, 5, 7]);
    let r = grad_check(
        |g, v| {
            let y = g.avg_pool2(v[0])?;
            against_target(g, y, ts)
        },
        &[odd],
        opts,
    )?;
    out.push(GradCheckEntry::new("avg_pool2", r));

    let r = grad_check(|g, v| g.mse(v[0], v[1]), &[a.clone(), randn(&[2, 2, 4, 5])], opts)?;
    out.push(GradCheckEntry::new("mse", r));

    let r = grad_check(
        |g, v| {
            let l1 = g.mse(v[0], v[1])?;
            let l2 = against_target(g, v[0], ts)?;
            g.scalar_combine(&[(1.0, l1), (0.3, l2), (-0.2, l1)])
        },
        &[a, randn(&[2, 2, 4, 5])],
        opts,
    )?;
    out.push(GradCheckEntry::new("scalar_combine", r));

    let mut prng = SplitMix64::new(derive_seed(seed, &[2]));
    out.push(GradCheckEntry::new("qa_network_tiny", qa_network_check(seed, &mut prng, opts)?));
    out.push(GradCheckEntry::new("combined_iqp_loss", combined_loss_check(seed, &mut prng, opts)?));
    Ok(out)
}

fn qa_network_check(seed: u64, rng: &mut SplitMix64, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let cfg = QAConfig::tiny();
    let model = QAModel::new(cfg.clone(), derive_seed(seed, &[3]))?;
    let pair = random_pair(rng, cfg.patch_size);
    let (l, r) = branch_inputs(&cfg, &[(&pair, None)])?;
    let names = model.params().names().to_vec();
    let n = names.len();
    let mut inputs = model.params().tensors().to_vec();
    inputs.push(l);
    inputs.push(r);
    grad_check(
        |g, v| {
            let p = BoundParams::from_vars(names.clone(), v[..n].to_vec())?;
            let out = build_qa(&cfg, g, &p, v[n], v[n + 1])?;
            let z = g.constant(Tensor::new(&[1, 1], vec![7.0])?);
            g.mse(out.score, z)
        },
        &inputs,
        opts,
    )
}

fn combined_loss_check(seed: u64, rng: &mut SplitMix64, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let qa = QAModel::new(QAConfig::tiny(), derive_seed(seed, &[4]))?;
    let mut sr = SRModel::new(
        SRConfig {
            width: qa.config().first_width(),
            ..Default::default()
        },
        derive_seed(seed, &[5]),
    )?;
    // a non-zero reconstruction layer so the trunk's gradients are exercised
    let mut wrng = SplitMix64::new(derive_seed(seed, &[6]));
    for name in ["recon.w", "recon.b"] {
        let t = sr.params_mut().get_mut(name)?;
        *t = Tensor::randn(t.shape(), 0.05, &mut wrng);
    }
    let lr = random_pair(rng, qa.config().patch_size / 2);
    let gt = random_pair(rng, qa.config().patch_size);
    let (ul, ur) = upsample_batch(&[&lr], 2)?;
    let names = sr.params().names().to_vec();
    grad_check(
        |g, v| {
            let p = BoundParams::from_vars(names.clone(), v.to_vec())?;
            let up = (g.constant(ul.clone()), g.constant(ur.clone()));
            let t = (g.constant(gt.left.to_tensor()), g.constant(gt.right.to_tensor()));
            let c = build_combined(&sr, Some(&qa), g, &p, up, t, LossWeights::default(), Substitution::AllBranches)?;
            Ok(c.total)
        },
        sr.params().tensors(),
        opts,
    )
}

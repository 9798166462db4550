use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pssr_core::pssr::Substitution;
use pssr_core::rankmos::NormScope;

#[derive(Debug, Parser)]
#[command(name = "pssr", version, about = "Stereo SR quality assessment and perception-oriented SR pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Every subcommand. The serialized form is what `manifest.json` records.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Render synthetic stereo scenes with ground-truth disparity.
    GenScenes(GenScenesArgs),
    /// Apply the distortion catalog to every scene.
    Degrade(DegradeArgs),
    /// Vote on every version and merge the votes into rankMOS labels.
    Rankmos(RankmosArgs),
    /// Train the stereo QA network on rankMOS labels.
    TrainQa(TrainQaArgs),
    /// Score every stereo pair in a directory with a trained QA model.
    Score(ScoreArgs),
    /// Train the stereo SR network, optionally with the QA-guided loss.
    TrainSr(TrainSrArgs),
    /// Super-resolve every low-resolution pair in a directory.
    SuperResolve(SuperResolveArgs),
    /// Compare SR models by PSNR, SSIM, QA score and disparity EPE.
    EvalSr(EvalSrArgs),
    /// Correlate QA predictions with rankMOS labels.
    EvalQa(EvalQaArgs),
    /// Finite-difference check of every autodiff op and both networks.
    Gradcheck(GradcheckArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenScenesArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 120)]
    pub width: usize,
    #[arg(long, default_value_t = 120)]
    pub height: usize,
    #[arg(long, default_value_t = 6)]
    pub shapes: usize,
    #[arg(long, default_value_t = 8)]
    pub max_disparity: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DegradeArgs {
    #[arg(long)]
    pub seed: u64,
    /// Directory written by `gen-scenes`.
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Catalog JSON (`scales`, `blur_sigmas`, `noise_levels`, `upsamplers`); the 27-version default otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeArg {
    PerReference,
    Global,
}

impl From<ScopeArg> for NormScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::PerReference => NormScope::PerReference,
            ScopeArg::Global => NormScope::Global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RankmosArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    /// Directory written by `degrade`.
    #[arg(long)]
    pub versions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ScopeArg::PerReference)]
    pub scope: ScopeArg,
    #[arg(long, default_value_t = 7)]
    pub bm_window: usize,
    #[arg(long, default_value_t = 16)]
    pub bm_search: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainQaArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub versions: PathBuf,
    /// `rankmos.csv` written by `rankmos`.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Reference images; required for a full-reference config.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// QA network config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Reference indices to train on (comma separated); all by default.
    #[arg(long, value_delimiter = ',')]
    pub refs: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    /// Directory written by `train-qa`.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of `<name>_L.ppm` / `<name>_R.ppm` pairs.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Pairs with matching names, for a full-reference model.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Patch stride; the patch size by default.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubstitutionArg {
    AllBranches,
    LeftOnly,
}

impl From<SubstitutionArg> for Substitution {
    fn from(s: SubstitutionArg) -> Self {
        match s {
            SubstitutionArg::AllBranches => Substitution::AllBranches,
            SubstitutionArg::LeftOnly => Substitution::LeftOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainSrArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory written by `train-qa`; needed when lambda1 or lambda2 is non-zero.
    #[arg(long)]
    pub qa: Option<PathBuf>,
    /// SR network config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    #[arg(long, default_value_t = 0.0)]
    pub blur_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_level: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 120)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda0: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda2: f64,
    #[arg(long, value_enum, default_value_t = SubstitutionArg::AllBranches)]
    pub substitution: SubstitutionArg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SuperResolveArgs {
    /// Directory written by `train-sr`.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of low-resolution `<name>_L.ppm` / `<name>_R.ppm` pairs.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalSrArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `name=dir` for each model written by `train-sr`.
    #[arg(long = "model", value_name = "NAME=DIR")]
    pub models: Vec<String>,
    /// Also score with a QA model written by `train-qa`.
    #[arg(long)]
    pub qa: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub scale: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub blur_sigma: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub noise_level: Vec<f64>,
    /// Skip the naive-upsampling and ground-truth rows.
    #[arg(long)]
    pub no_baselines: bool,
    #[arg(long, default_value_t = 7)]
    pub bm_window: usize,
    #[arg(long, default_value_t = 16)]
    pub bm_search: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalQaArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub versions: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Reference indices to evaluate (comma separated); all by default.
    #[arg(long, value_delimiter = ',')]
    pub refs: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write `gradcheck.csv` and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; the recorded one otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenScenes(_) => "gen-scenes",
            Command::Degrade(_) => "degrade",
            Command::Rankmos(_) => "rankmos",
            Command::TrainQa(_) => "train-qa",
            Command::Score(_) => "score",
            Command::TrainSr(_) => "train-sr",
            Command::SuperResolve(_) => "super-resolve",
            Command::EvalSr(_) => "eval-sr",
            Command::EvalQa(_) => "eval-qa",
            Command::Gradcheck(_) => "gradcheck",
            Command::Replay(_) => "replay",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::GenScenes(a) => Some(a.seed),
            Command::Degrade(a) => Some(a.seed),
            Command::TrainQa(a) => Some(a.seed),
            Command::TrainSr(a) => Some(a.seed),
            Command::EvalSr(a) => Some(a.seed),
            Command::Gradcheck(a) => Some(a.seed),
            _ => None,
        }
    }

    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Command::GenScenes(a) => Some(&a.out),
            Command::Degrade(a) => Some(&a.out),
            Command::Rankmos(a) => Some(&a.out),
            Command::TrainQa(a) => Some(&a.out),
            Command::Score(a) => Some(&a.out),
            Command::TrainSr(a) => Some(&a.out),
            Command::SuperResolve(a) => Some(&a.out),
            Command::EvalSr(a) => Some(&a.out),
            Command::EvalQa(a) => Some(&a.out),
            Command::Gradcheck(a) => a.out.as_ref(),
            Command::Replay(_) => None,
        }
    }

    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            Command::GenScenes(a) => a.out = out,
            Command::Degrade(a) => a.out = out,
            Command::Rankmos(a) => a.out = out,
            Command::TrainQa(a) => a.out = out,
            Command::Score(a) => a.out = out,
            Command::TrainSr(a) => a.out = out,
            Command::SuperResolve(a) => a.out = out,
            Command::EvalSr(a) => a.out = out,
            Command::EvalQa(a) => a.out = out,
            Command::Gradcheck(a) => a.out = Some(out),
            Command::Replay(_) => {}
        }
    }
}

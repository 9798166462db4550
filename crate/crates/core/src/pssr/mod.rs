//! Perception-oriented stereo super-resolution: a toy stereo SR network
//! trained with pixel MSE plus image-level and feature-level constraints
//! measured inside a frozen quality network.

mod eval;
mod loss;
mod model;
mod train;

pub use eval::{
    eval_sr, format_eval_table, summarize, write_eval_csv, EvalOptions, EvalRow, GroundTruthOracle, NaiveUpsample,
    NamedModel, Restorer,
};
pub use loss::{
    build_combined, build_gt_features, build_iqp_f, build_iqp_im, combined_loss, iqp_f_loss, iqp_im_loss, iqp_window,
    CombinedGraph, GtFeatures, IQPLossBreakdown, LossWeights, Substitution,
};
pub use model::{
    build_sr, sr_forward, sr_param_layout, super_resolve, upsample_batch, SRConfig, SRGraph, SRModel, SROutput, SR_SCALES,
};
pub use train::{
    prepare_pairs, train_sr, train_sr_with, EpochLosses, SRTrainOptions, SRTrainReport, TrainingPair,
};

#[cfg(test)]
mod tests;

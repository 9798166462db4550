//! Three-branch stereo quality network: upper (left view), lower (right
//! view) and middle (difference stream) conv branches feeding a two-layer
//! regression head.

mod config;
mod model;
mod train;

pub use config::{QAConfig, QAMode};
pub use model::{
    branch_inputs, build_first_layer, build_qa, center_images, pair_from_tensors, pair_tensors, param_layout,
    qa_forward, qa_forward_batch, qa_forward_with_reference, Branch, QAGraph, QAModel, QAOutput,
};
pub use train::{
    qa_as_voter, qa_predict, qa_predict_with_reference, qa_train, qa_train_with, QASample, QATrainOptions,
    QATrainReport, QAVoter, ScorePrediction,
};

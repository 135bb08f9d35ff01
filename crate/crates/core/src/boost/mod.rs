//! Gradient-boosted decision trees and the hierarchical two-step migration
//! classifier, with downsampling, cross-validation, and F1 reporting.

pub mod eval;
pub mod gbdt;
pub mod store;
pub mod synth;
pub mod tree;
pub mod twostep;

pub use eval::{cross_validate, CrossValidateParams, EvalReport, ModelEval};
pub use gbdt::{fit_gbdt, GbdtModel, GbdtParams};
pub use twostep::{downsample_majority, fit_two_step, TwoStepModel, TwoStepParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("response vector must contain both classes")]
    SingleClass,
    #[error("every feature is constant; nothing to split on")]
    ConstantFeatures,
    #[error("need more than {need} rows to respect min_leaf, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("downsampling ratio must be positive, got {0}")]
    BadRatio(f64),
    #[error("label {0} absent from the training data")]
    MissingLabel(String),
    #[error("stage 1 predicts no positive rows on its training data; stage 2 has nothing to learn from")]
    NoStagePositives,
    #[error("class {label} missing from {split} split of fold {fold}")]
    FoldMissingClass { fold: usize, split: &'static str, label: String },
    #[error("malformed model file: {0}")]
    BadModelFile(String),
    #[error("malformed prediction file at line {line}: {message}")]
    BadPredictionFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

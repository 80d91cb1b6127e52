//! Baseline learners over surface and tree-relation features, with minimal-pair metrics.

mod eval;
mod features;
mod model;
mod stats;

use thiserror::Error;

use crate::datasets::Split;
use crate::paradigms::Cell;

pub use eval::{
    evaluate, evaluate_split, render_result, render_table, run_once, run_restarts, samples, train_model, Diagnosis,
    EvalResult, KindEval, ModelPredictor, OracleLinear, OracleStructural, Predictor, RandomPredictor, RestartReport,
    SavedModel, SplitEval, Summary,
};
pub use features::{
    featurize_linear, featurize_structural, featurize_surface, hash_feature, hashed, surface_feature_names, tokens_of,
    Featurizer, RelationIndicators, SparseVector, DIM, HASH_SEED,
};
pub use model::{gradient_check, LogisticModel, Sample, TrainConfig, TrainLog};
pub use stats::{chance_alignment_probability, median};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("{split} record quad {quad_id} {cell} has no partner")]
    Unpaired { split: Split, quad_id: u64, cell: Cell },
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("domain error: {0}")]
    Domain(String),
}

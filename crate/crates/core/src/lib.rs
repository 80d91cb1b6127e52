//! Poverty-of-the-stimulus datasets: templates over a feature-annotated lexicon, tree oracles
//! that label each sentence under a hierarchical and a linear hypothesis, verification that
//! training data is ambiguous and test data is not, and baseline learners.

pub mod cli;
pub mod datasets;
pub mod grammar;
pub mod learners;
pub mod lexicon;
pub mod oracles;
pub mod paradigms;
pub mod tree;

use thiserror::Error;

pub use datasets::{build_dataset, emit_dataset, Dataset, DatasetError, DatasetSpec, Split, SplitRecord};
pub use grammar::{expand, expand_in, GrammarError, QuadEnv, Template, TemplateSet};
pub use learners::{chance_alignment_probability, EvalResult, Featurizer, LearnerError, TrainConfig};
pub use lexicon::{FeatureBundle, LexicalEntry, Lexicon, LexiconError, Schema};
pub use oracles::{c_commands, dominates, front_auxiliary, precedes, FrontingStrategy};
pub use paradigms::{build_quad, verify_posd, Cell, LabeledSentence, ParadigmError, ParadigmId, PosdReport, Quad};
pub use tree::{linearize, DerivationTree, NodeId, Role, Sentence, TreeError};

/// Feature vectors over `f64`.
pub type FeatureVector = learners::SparseVector<f64>;

/// Logistic regression over `f64`.
pub type LinearModel = learners::LogisticModel<f64>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Paradigm(#[from] ParadigmError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

//! Training neural models from observations.
//!
//! The loss of an example is `-ln max(P(O), eps)`. Its gradient with respect
//! to the output matrices comes from [`ObservationTerms::gradient`] and is
//! pushed through each model's softmax and layers by
//! [`Model::backward_into`](crate::neural::Model::backward_into).

mod dataset;
mod eval;
mod objective;
mod train;

use thiserror::Error;

use crate::ground::GroundError;
use crate::lang::ParseError;
use crate::neural::NeuralError;
use crate::semantics::SemanticsError;
use crate::stable::SolveError;

pub use dataset::{load_dataset, parse_dataset, DatasetRecord, TensorRef, TrainingExample};
pub use eval::{argmax_sigma, evaluate, group_name};
pub use objective::{observation_probability, output_gradient, ObservationTerms, PreparedProgram};
pub use train::{
    train, Algorithm, EpochReport, ExampleGrad, Learner, LossReport, Optimizer, OptimizerConfig,
    DEFAULT_EPSILON,
};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error("non-finite loss in epoch {epoch} (example {example})")]
    Divergence { epoch: usize, example: usize },
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("model `{0}` is used by the program but not registered")]
    UnknownModel(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<SolveError> for LearnError {
    fn from(e: SolveError) -> Self {
        LearnError::Semantics(e.into())
    }
}

use coderl::corpus::CorpusError;
use coderl::eval::EvalError;
use coderl::inference::InferenceError;
use coderl::models::ModelError;
use coderl::training::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing prerequisite: {0}")]
    Prerequisite(String),
    #[error("{artifact} was produced under config {found}, current config is {expected}")]
    HashMismatch {
        artifact: String,
        expected: String,
        found: String,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Prerequisite(_) | CliError::HashMismatch { .. } => 3,
            _ => 4,
        }
    }
}

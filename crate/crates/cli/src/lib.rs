//! Driver for the full pipeline: configuration, stage prerequisites and
//! artifact bookkeeping.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{CriticMode, CsMode, RunConfig};
pub use error::CliError;

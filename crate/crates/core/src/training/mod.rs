//! Optimisation procedures: next-token pretraining, cross-entropy
//! warm-start, synthetic sample collection, critic training, RL finetuning
//! of the actor and repair-model training.

mod collect;
mod critic;
mod rl;
mod supervised;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::diffkit::{AdamConfig, DiffError, Gradients};
use crate::minilang::{Outcome, OutcomeReport};
use crate::models::{Model, ModelError};
use crate::seeding::derive_rng;

pub use collect::{collect_synthetic, load_samples, save_samples, LabeledSample, SampleSource};
pub use critic::{critic_accuracy, split_by_problem, train_critic, train_test_critic, CriticAccuracy, CriticReport};
pub use rl::{rl_finetune, rl_gradients, rl_step, rl_surrogate, token_weights, Ablation, RlConfig, RlStepOutcome};
pub use supervised::{ce_warmstart, ntp_pretrain, pivot_range, repair_pairs, train_repair, RepairPair};

pub const RETURN_COMPILE_ERROR: f64 = -1.0;
pub const RETURN_RUNTIME_ERROR: f64 = -0.6;
pub const RETURN_FAILED_TEST: f64 = -0.3;
pub const RETURN_PASSED: f64 = 1.0;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
    #[error("ablation {0} needs a trained critic")]
    MissingCritic(&'static str),
    #[error("nothing to train on: {0}")]
    Empty(&'static str),
    #[error("sample file: {0}")]
    Samples(String),
}

pub fn outcome_return(outcome: Outcome) -> f64 {
    match outcome {
        Outcome::CompileError => RETURN_COMPILE_ERROR,
        Outcome::RuntimeError => RETURN_RUNTIME_ERROR,
        Outcome::FailedTest => RETURN_FAILED_TEST,
        Outcome::PassedTest => RETURN_PASSED,
    }
}

/// Terminal return of a program from its aggregated test outcome.
pub fn return_of(report: &OutcomeReport) -> f64 {
    outcome_return(report.category)
}

/// One line of the training metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub stage: String,
    pub epoch: usize,
    pub values: BTreeMap<String, f64>,
}

impl EpochMetrics {
    fn new(stage: &str, epoch: usize) -> Self {
        Self {
            stage: stage.to_string(),
            epoch,
            values: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

/// Mini-batch settings shared by the supervised stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl OptimConfig {
    pub fn new(lr: f64, epochs: usize) -> Self {
        Self {
            lr,
            epochs,
            batch_size: 16,
        }
    }
}

/// Per-item result of a gradient computation: gradients, loss and any
/// extra statistics to average into the epoch metrics.
pub(crate) struct ItemGrad {
    pub grads: Gradients,
    pub loss: f64,
    pub stats: Vec<(&'static str, f64)>,
}

/// Runs shuffled mini-batch epochs. Item gradients inside a batch are
/// computed in parallel against the frozen batch-start parameters, then
/// summed in item order and averaged, so results do not depend on the
/// worker count.
pub(crate) fn run_epochs<T, F>(
    model: &mut Model,
    items: &[T],
    optim: &OptimConfig,
    seed: u64,
    stage: &str,
    item_grad: F,
) -> Result<Vec<EpochMetrics>, TrainError>
where
    T: Sync,
    F: Fn(&Model, &T, &mut rand_chacha::ChaCha8Rng) -> Result<ItemGrad, TrainError> + Sync,
{
    run_epochs_with(model, items, optim, seed, stage, item_grad, |_, _| Ok(()))
}

/// [`run_epochs`] with a hook that can add entries to each epoch's metrics.
pub(crate) fn run_epochs_with<T, F, H>(
    model: &mut Model,
    items: &[T],
    optim: &OptimConfig,
    seed: u64,
    stage: &str,
    item_grad: F,
    mut after_epoch: H,
) -> Result<Vec<EpochMetrics>, TrainError>
where
    T: Sync,
    F: Fn(&Model, &T, &mut rand_chacha::ChaCha8Rng) -> Result<ItemGrad, TrainError> + Sync,
    H: FnMut(&Model, &mut EpochMetrics) -> Result<(), TrainError>,
{
    use rand::seq::SliceRandom;

    let mut history = Vec::with_capacity(optim.epochs);
    if items.is_empty() {
        return if optim.epochs == 0 {
            Ok(history)
        } else {
            Err(TrainError::Empty("no training items"))
        };
    }
    let batch = optim.batch_size.max(1);
    for epoch in 0..optim.epochs {
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut derive_rng(seed, &format!("{stage}/order"), epoch as u64));
        let mut loss_sum = 0.0;
        let mut stat_sums: BTreeMap<&'static str, f64> = BTreeMap::new();
        for chunk in order.chunks(batch) {
            let frozen = &*model;
            let results: Vec<Result<ItemGrad, TrainError>> = chunk
                .par_iter()
                .map(|&i| {
                    let mut rng = derive_rng(seed, stage, (epoch * items.len() + i) as u64);
                    item_grad(frozen, &items[i], &mut rng)
                })
                .collect();
            for r in results {
                let r = r?;
                model.store.accumulate(&r.grads);
                loss_sum += r.loss;
                for (k, v) in r.stats {
                    *stat_sums.entry(k).or_default() += v;
                }
            }
            model.store.scale_grad(1.0 / chunk.len() as f64);
            if model.store.adam_step(optim.lr, AdamConfig::default()).is_err() {
                // every item in the batch contributed an exactly zero gradient
                model.store.zero_grad();
            }
        }
        let n = items.len() as f64;
        let mut m = EpochMetrics::new(stage, epoch).with("loss", loss_sum / n);
        for (k, v) in stat_sums {
            m = m.with(k, v / n);
        }
        after_epoch(model, &mut m)?;
        history.push(m);
    }
    Ok(history)
}

#[cfg(test)]
mod tests;

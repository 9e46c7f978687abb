use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::EncodedProblem;
use crate::diffkit::Tape;
use crate::minilang::Outcome;
use crate::models::{Model, Role, TEST_CRITIC_FAILED, TEST_CRITIC_PASSED};
use crate::seeding::derive_rng;

use super::{run_epochs_with, EpochMetrics, ItemGrad, LabeledSample, OptimConfig, TrainError};

/// Fraction of problems whose samples are held out from critic training.
pub const HELDOUT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticAccuracy {
    /// Exact-class accuracy under the model's own label set.
    pub accuracy: f64,
    /// Accuracy of the induced PassedTest-vs-rest decision.
    pub pass_accuracy: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticReport {
    pub epochs: Vec<EpochMetrics>,
    pub heldout: CriticAccuracy,
    pub train_samples: usize,
}

/// Splits sample indices 90/10 by problem, so held-out samples come from
/// problems the critic never saw.
pub fn split_by_problem(samples: &[LabeledSample], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut seen = HashSet::new();
    let mut problems: Vec<&str> = Vec::new();
    for s in samples {
        if seen.insert(s.problem_id.as_str()) {
            problems.push(&s.problem_id);
        }
    }
    problems.shuffle(&mut derive_rng(seed, "critic/split", 0));
    let n_held = ((problems.len() as f64 * HELDOUT_FRACTION).round() as usize).min(problems.len());
    let held: HashSet<&str> = problems[..n_held].iter().copied().collect();
    (0..samples.len()).partition(|&i| !held.contains(samples[i].problem_id.as_str()))
}

fn label(role: Role, outcome: Outcome) -> usize {
    match role {
        Role::TestCritic if outcome == Outcome::PassedTest => TEST_CRITIC_PASSED,
        Role::TestCritic => TEST_CRITIC_FAILED,
        _ => outcome.index(),
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn source_of<'a>(
    problems: &'a HashMap<String, EncodedProblem>,
    s: &LabeledSample,
) -> Result<&'a EncodedProblem, TrainError> {
    problems
        .get(&s.problem_id)
        .ok_or_else(|| TrainError::UnknownProblem(s.problem_id.clone()))
}

/// Sequence-level predictions of `critic` against the labels of `samples`.
pub fn critic_accuracy(
    critic: &Model,
    samples: &[&LabeledSample],
    problems: &HashMap<String, EncodedProblem>,
) -> Result<CriticAccuracy, TrainError> {
    let role = critic.role();
    let pass_class = label(role, Outcome::PassedTest);
    let mut correct = 0usize;
    let mut pass_correct = 0usize;
    for s in samples {
        let p = source_of(problems, s)?;
        let mut tape = Tape::new();
        let (_, pooled) = critic.critic_logits(&mut tape, &p.source, &s.program)?;
        let predicted = argmax(tape.value(pooled));
        let truth = label(role, s.outcome);
        correct += usize::from(predicted == truth);
        pass_correct += usize::from((predicted == pass_class) == (truth == pass_class));
    }
    let n = samples.len().max(1) as f64;
    Ok(CriticAccuracy {
        accuracy: correct as f64 / n,
        pass_accuracy: pass_correct as f64 / n,
        count: samples.len(),
    })
}

fn train(
    critic: &mut Model,
    expected: Role,
    samples: &[LabeledSample],
    problems: &HashMap<String, EncodedProblem>,
    optim: &OptimConfig,
    seed: u64,
) -> Result<CriticReport, TrainError> {
    if critic.role() != expected {
        return Err(crate::models::ModelError::WrongRole {
            expected: expected.name(),
            found: critic.role(),
        }
        .into());
    }
    let (train_idx, held_idx) = split_by_problem(samples, seed);
    let train_set: Vec<&LabeledSample> = train_idx.iter().map(|&i| &samples[i]).collect();
    let held_set: Vec<&LabeledSample> = held_idx.iter().map(|&i| &samples[i]).collect();
    let role = critic.role();
    let stage = if role == Role::TestCritic {
        "test_critic"
    } else {
        "critic"
    };
    let epochs = run_epochs_with(
        critic,
        &train_set,
        optim,
        seed,
        stage,
        |m, s, _| {
            let p = source_of(problems, s)?;
            let mut tape = Tape::new();
            let (_, pooled) = m.critic_logits(&mut tape, &p.source, &s.program)?;
            let hit = argmax(tape.value(pooled)) == label(role, s.outcome);
            let loss = tape.cross_entropy(pooled, label(role, s.outcome))?;
            let value = tape.scalar(loss);
            Ok(ItemGrad {
                grads: tape.backward(loss)?,
                loss: value,
                stats: vec![("train_accuracy", f64::from(u8::from(hit)))],
            })
        },
        |m, metrics| {
            if !held_set.is_empty() {
                let acc = critic_accuracy(m, &held_set, problems)?;
                metrics.values.insert("heldout_accuracy".into(), acc.accuracy);
                metrics.values.insert("heldout_pass_accuracy".into(), acc.pass_accuracy);
            }
            Ok(())
        },
    )?;
    let heldout = critic_accuracy(critic, &held_set, problems)?;
    Ok(CriticReport {
        epochs,
        heldout,
        train_samples: train_set.len(),
    })
}

/// Fits the 4-class critic by minimising `-log u_hat[u]` over samples.
pub fn train_critic(
    critic: &mut Model,
    samples: &[LabeledSample],
    problems: &HashMap<String, EncodedProblem>,
    optim: &OptimConfig,
    seed: u64,
) -> Result<CriticReport, TrainError> {
    train(critic, Role::Critic, samples, problems, optim, seed)
}

/// Fits the binary PassedTest-vs-rest critic on the same samples.
pub fn train_test_critic(
    critic: &mut Model,
    samples: &[LabeledSample],
    problems: &HashMap<String, EncodedProblem>,
    optim: &OptimConfig,
    seed: u64,
) -> Result<CriticReport, TrainError> {
    train(critic, Role::TestCritic, samples, problems, optim, seed)
}

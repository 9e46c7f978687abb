use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::corpus::{EncodedProblem, TokenId, Vocabulary};
use crate::diffkit::Tape;
use crate::minilang::Outcome;
use crate::models::{repair_input, Model};

use super::{run_epochs, EpochMetrics, ItemGrad, LabeledSample, OptimConfig, TrainError};

/// Teacher-forced `-sum_t log p(w_t | w_<t, D)` and its gradients.
pub(crate) fn ce_item(model: &Model, source: &[TokenId], target: &[TokenId]) -> Result<ItemGrad, TrainError> {
    let mut tape = Tape::new();
    let lp = model.token_log_probs(&mut tape, source, target)?;
    let total = tape.sum(lp);
    let loss = tape.scale(total, -1.0);
    let value = tape.scalar(loss);
    Ok(ItemGrad {
        grads: tape.backward(loss)?,
        loss: value,
        stats: vec![("tokens", target.len() as f64)],
    })
}

/// Inclusive pivot bounds for a program of `len` tokens: 10% to 90% of
/// the length, clamped so both sides are non-empty. `None` below 2 tokens.
pub fn pivot_range(len: usize) -> Option<(usize, usize)> {
    if len < 2 {
        return None;
    }
    let lo = len.div_ceil(10).clamp(1, len - 1);
    let hi = (9 * len / 10).clamp(1, len - 1);
    Some((lo, hi.max(lo)))
}

/// Next-token pretraining on bare programs: each epoch splits every
/// program at a random pivot, encodes the left part and predicts the rest.
pub fn ntp_pretrain(
    actor: &mut Model,
    programs: &[Vec<TokenId>],
    optim: &OptimConfig,
    seed: u64,
) -> Result<Vec<EpochMetrics>, TrainError> {
    let usable: Vec<&Vec<TokenId>> = programs.iter().filter(|p| p.len() >= 2).collect();
    let vocab = Vocabulary::standard();
    run_epochs(actor, &usable, optim, seed, "pretrain", |m, program, rng| {
        let (lo, hi) = pivot_range(program.len()).expect("filtered to length >= 2");
        let pivot = rng.random_range(lo..=hi);
        let mut source = vec![vocab.bos()];
        source.extend_from_slice(&program[..pivot]);
        source.push(vocab.eos());
        let mut target = program[pivot..].to_vec();
        target.push(vocab.eos());
        ce_item(m, &source, &target)
    })
}

/// Cross-entropy finetuning on `(description, program)` pairs.
pub fn ce_warmstart(
    actor: &mut Model,
    problems: &[EncodedProblem],
    optim: &OptimConfig,
    seed: u64,
) -> Result<Vec<EpochMetrics>, TrainError> {
    run_epochs(actor, problems, optim, seed, "warmstart", |m, p, _| {
        ce_item(m, &p.source, &p.target)
    })
}

/// A `(buggy program, fix)` training example for the repair model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairPair {
    pub input: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

/// Repair examples from failing samples: `repair_input(D, W, u, c)` mapped
/// to the ground truth. Passing samples are dropped, as are exact
/// duplicates of an earlier example.
pub fn repair_pairs(
    samples: &[LabeledSample],
    problems: &HashMap<String, EncodedProblem>,
) -> Result<Vec<RepairPair>, TrainError> {
    let eos = Vocabulary::standard().eos();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in samples.iter().filter(|s| s.outcome != Outcome::PassedTest) {
        let p = problems
            .get(&s.problem_id)
            .ok_or_else(|| TrainError::UnknownProblem(s.problem_id.clone()))?;
        let end = s.program.iter().position(|&t| t == eos).unwrap_or(s.program.len());
        let input = repair_input(&p.description, &s.program[..end], s.outcome, s.subtype)?;
        if seen.insert(input.clone()) {
            out.push(RepairPair {
                input,
                target: p.target.clone(),
            });
        }
    }
    Ok(out)
}

pub fn train_repair(
    repair: &mut Model,
    pairs: &[RepairPair],
    optim: &OptimConfig,
    seed: u64,
) -> Result<Vec<EpochMetrics>, TrainError> {
    run_epochs(repair, pairs, optim, seed, "repair", |m, p, _| {
        ce_item(m, &p.input, &p.target)
    })
}

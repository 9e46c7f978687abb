use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{evaluate_ids, Dataset, EncodedProblem, TokenId, MAX_TARGET_LEN};
use crate::diffkit::{AdamConfig, Gradients, Tape, Var};
use crate::minilang::{Outcome, OutcomeReport};
use crate::models::{critic_forward, greedy, sample, token_values, Model, SamplingConfig};

use super::{return_of, run_epochs, EpochMetrics, ItemGrad, OptimConfig, TrainError};

/// Variants of the RL objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ablation {
    /// Constant token weights, greedy baseline.
    A,
    /// Learned critic weights, no baseline.
    B,
    /// Linearly decaying position weights, greedy baseline.
    C,
    /// Learned critic weights, greedy baseline.
    D,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::A, Ablation::B, Ablation::C, Ablation::D];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::A => "A",
            Ablation::B => "B",
            Ablation::C => "C",
            Ablation::D => "D",
        }
    }

    pub fn uses_baseline(self) -> bool {
        self != Ablation::B
    }

    pub fn needs_critic(self) -> bool {
        matches!(self, Ablation::B | Ablation::D)
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Ablation::A),
            "B" | "b" => Ok(Ablation::B),
            "C" | "c" => Ok(Ablation::C),
            "D" | "d" => Ok(Ablation::D),
            other => Err(format!("unknown ablation {other:?}")),
        }
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlConfig {
    pub ablation: Ablation,
    pub optim: OptimConfig,
    /// Distribution `W^s` is drawn from.
    pub sampling: SamplingConfig,
    pub greedy_max_len: usize,
    pub ce_weight: f64,
    pub rl_weight: f64,
}

impl RlConfig {
    pub fn new(ablation: Ablation) -> Self {
        Self {
            ablation,
            optim: OptimConfig::new(3e-4, 5),
            sampling: SamplingConfig {
                temperature: 1.0,
                top_p: 1.0,
                max_len: MAX_TARGET_LEN - 1,
            },
            greedy_max_len: MAX_TARGET_LEN - 1,
            ce_weight: 1.0,
            rl_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlStepOutcome {
    pub l_ce: f64,
    pub l_rl: f64,
    pub advantage: f64,
    pub sample_return: f64,
    pub baseline_return: f64,
}

/// Per-token weights `q_t` for a sampled program under `ablation`.
pub fn token_weights(
    ablation: Ablation,
    critic: Option<&Model>,
    source: &[TokenId],
    program: &[TokenId],
    outcome: Outcome,
) -> Result<Vec<f64>, TrainError> {
    let t = program.len();
    Ok(match ablation {
        Ablation::A => vec![1.0; t],
        Ablation::C => (1..=t).map(|i| (t - i + 1) as f64 / t as f64).collect(),
        Ablation::B | Ablation::D => {
            let critic = critic.ok_or(TrainError::MissingCritic(ablation.name()))?;
            token_values(&critic_forward(critic, source, program)?.token_dists, outcome)
        }
    })
}

/// `-A * sum_t q_t * log p(w_t | w_<t, D)` with `q` and `A` constant.
pub fn rl_surrogate(
    tape: &mut Tape,
    actor: &Model,
    source: &[TokenId],
    program: &[TokenId],
    weights: &[f64],
    advantage: f64,
) -> Result<Var, TrainError> {
    let lp = actor.token_log_probs(tape, source, program)?;
    let coeff = tape.constant(weights.iter().map(|q| -advantage * q).collect());
    let weighted = tape.mul(lp, coeff)?;
    Ok(tape.sum(weighted))
}

/// Gradients of `ce_weight * L_ce + rl_weight * L_rl` for one problem:
/// draws `W^s`, decodes the greedy baseline `W^b`, scores both with `judge`
/// and weights the sample's log-likelihood by the advantage and token
/// weights. `ground_truth` feeds the cross-entropy term.
#[allow(clippy::too_many_arguments)]
pub fn rl_gradients<R: Rng + ?Sized>(
    actor: &Model,
    critic: Option<&Model>,
    source: &[TokenId],
    ground_truth: Option<&[TokenId]>,
    judge: &dyn Fn(&[TokenId]) -> OutcomeReport,
    config: &RlConfig,
    rng: &mut R,
) -> Result<(Gradients, RlStepOutcome), TrainError> {
    let ws = sample(actor, source, &config.sampling, rng)?;
    let report = judge(&ws.ids);
    let sample_return = return_of(&report);
    let baseline_return = if config.ablation.uses_baseline() {
        let wb = greedy(actor, source, config.greedy_max_len)?;
        if wb.ids == ws.ids {
            sample_return
        } else {
            return_of(&judge(&wb.ids))
        }
    } else {
        0.0
    };
    let advantage = sample_return - baseline_return;

    let mut tape = Tape::new();
    let mut terms = Vec::new();
    let mut l_ce = 0.0;
    if let (Some(gt), true) = (ground_truth, config.ce_weight != 0.0) {
        let lp = actor.token_log_probs(&mut tape, source, gt)?;
        let total = tape.sum(lp);
        let ce = tape.scale(total, -config.ce_weight);
        l_ce = -tape.scalar(total);
        terms.push(ce);
    }
    let mut l_rl = 0.0;
    if advantage != 0.0 && config.rl_weight != 0.0 {
        let q = token_weights(config.ablation, critic, source, &ws.ids, report.category)?;
        let rl = rl_surrogate(&mut tape, actor, source, &ws.ids, &q, advantage)?;
        l_rl = tape.scalar(rl);
        terms.push(tape.scale(rl, config.rl_weight));
    }
    let grads = match terms.as_slice() {
        [] => Gradients::default(),
        [only] => tape.backward(*only)?,
        parts => {
            let stacked = tape.concat(parts)?;
            let total = tape.sum(stacked);
            tape.backward(total)?
        }
    };
    Ok((
        grads,
        RlStepOutcome {
            l_ce,
            l_rl,
            advantage,
            sample_return,
            baseline_return,
        },
    ))
}

/// One single-problem update of the actor.
#[allow(clippy::too_many_arguments)]
pub fn rl_step<R: Rng + ?Sized>(
    actor: &mut Model,
    critic: Option<&Model>,
    source: &[TokenId],
    ground_truth: Option<&[TokenId]>,
    judge: &dyn Fn(&[TokenId]) -> OutcomeReport,
    config: &RlConfig,
    rng: &mut R,
) -> Result<RlStepOutcome, TrainError> {
    let (grads, outcome) = rl_gradients(actor, critic, source, ground_truth, judge, config, rng)?;
    actor.store.accumulate(&grads);
    if actor.store.adam_step(config.optim.lr, AdamConfig::default()).is_err() {
        actor.store.zero_grad();
    }
    Ok(outcome)
}

/// RL finetuning over a training set. Returns are computed on each
/// problem's hidden tests; `L_ce` uses its ground truth.
pub fn rl_finetune(
    actor: &mut Model,
    critic: Option<&Model>,
    dataset: &Dataset,
    config: &RlConfig,
    seed: u64,
) -> Result<Vec<EpochMetrics>, TrainError> {
    if config.ablation.needs_critic() && critic.is_none() {
        return Err(TrainError::MissingCritic(config.ablation.name()));
    }
    let items = dataset
        .problems
        .iter()
        .map(|p| Ok((p, EncodedProblem::new(p)?)))
        .collect::<Result<Vec<_>, TrainError>>()?;
    let stage = format!("rl_{}", config.ablation.name());
    run_epochs(actor, &items, &config.optim, seed, &stage, |m, (p, enc), rng| {
        let judge = |ids: &[TokenId]| evaluate_ids(ids, &p.hidden_tests);
        let (grads, out) = rl_gradients(m, critic, &enc.source, Some(&enc.target), &judge, config, rng)?;
        Ok(ItemGrad {
            grads,
            loss: out.l_ce + out.l_rl,
            stats: vec![
                ("l_ce", out.l_ce),
                ("l_rl", out.l_rl),
                ("advantage", out.advantage),
                ("sample_return", out.sample_return),
                ("baseline_return", out.baseline_return),
                (
                    "sample_pass",
                    f64::from(u8::from(out.sample_return == super::RETURN_PASSED)),
                ),
            ],
        })
    })
}

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{generate_dataset, DatasetConfig, EncodedProblem, Split, TokenId};
use crate::diffkit::Tape;
use crate::minilang::{ErrorSubtype, Outcome, OutcomeReport};
use crate::models::{log_prob, Model, ModelConfig, Role, SamplingConfig};

fn tiny(role: Role, seed: u64) -> Model {
    let config = ModelConfig {
        embed: 8,
        hidden: 12,
        attention: 6,
        ..ModelConfig::for_role(role)
    };
    Model::new(config, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn report(category: Outcome) -> OutcomeReport {
    let subtype = match category {
        Outcome::CompileError => ErrorSubtype::Syntax,
        Outcome::RuntimeError => ErrorSubtype::DivByZero,
        Outcome::FailedTest => ErrorSubtype::WrongAnswer,
        Outcome::PassedTest => ErrorSubtype::None,
    };
    OutcomeReport {
        category,
        subtype,
        per_test: Vec::new(),
    }
}

#[test]
fn returns_per_outcome() {
    assert_eq!(return_of(&report(Outcome::CompileError)), -1.0);
    assert_eq!(return_of(&report(Outcome::RuntimeError)), -0.6);
    assert_eq!(return_of(&report(Outcome::FailedTest)), -0.3);
    assert_eq!(return_of(&report(Outcome::PassedTest)), 1.0);
    let a = return_of(&report(Outcome::PassedTest)) - return_of(&report(Outcome::FailedTest));
    assert!((a - 1.3).abs() < 1e-15);
}

#[test]
fn pivot_bounds() {
    assert_eq!(pivot_range(20), Some((2, 18)));
    assert_eq!(pivot_range(2), Some((1, 1)));
    assert_eq!(pivot_range(1), None);
    assert_eq!(pivot_range(0), None);
    for len in 2..300usize {
        let (lo, hi) = pivot_range(len).unwrap();
        assert!(1 <= lo && lo <= hi && hi < len, "{len}: {lo}..{hi}");
        // ceil(0.1 L) and floor(0.9 L) away from the clamps
        if len >= 10 {
            assert!(lo * 10 >= len && (lo - 1) * 10 < len);
            assert!(hi * 10 <= 9 * len && (hi + 1) * 10 > 9 * len);
        }
    }
}

fn program() -> (Vec<TokenId>, Vec<TokenId>) {
    let ds = generate_dataset(&DatasetConfig::new(Split::Train, 1, 3));
    let enc = EncodedProblem::new(&ds.problems[0]).unwrap();
    (enc.source, enc.target)
}

#[test]
fn zero_advantage_gives_exactly_zero_gradient() {
    let actor = tiny(Role::Actor, 1);
    let (src, tgt) = program();
    let mut tape = Tape::new();
    let q = vec![0.7; tgt.len()];
    let loss = rl_surrogate(&mut tape, &actor, &src, &tgt, &q, 0.0).unwrap();
    let g = tape.backward(loss).unwrap();
    let mut n = 0;
    for id in g.param_ids() {
        assert!(g.param(id).unwrap().iter().all(|&x| x == 0.0));
        n += 1;
    }
    assert!(n > 0);
}

#[test]
fn constant_weights_reduce_to_reinforce() {
    let actor = tiny(Role::Actor, 2);
    let (src, tgt) = program();
    let (total, _) = log_prob(&actor, &src, &tgt).unwrap();
    let mut tape = Tape::new();
    let q = token_weights(Ablation::A, None, &src, &tgt, Outcome::FailedTest).unwrap();
    let loss = rl_surrogate(&mut tape, &actor, &src, &tgt, &q, 1.3).unwrap();
    assert!((tape.scalar(loss) - (-1.3 * total)).abs() < 1e-10);
}

#[test]
fn position_weights_decay_linearly() {
    let w = token_weights(Ablation::C, None, &[1, 2], &[5, 6, 7, 2], Outcome::PassedTest).unwrap();
    assert_eq!(w, vec![1.0, 0.75, 0.5, 0.25]);
    assert!(matches!(
        token_weights(Ablation::D, None, &[1, 2], &[5], Outcome::PassedTest),
        Err(TrainError::MissingCritic("D"))
    ));
}

#[test]
fn critic_weights_index_the_outcome() {
    let critic = tiny(Role::Critic, 3);
    let (src, tgt) = program();
    let dists = crate::models::critic_forward(&critic, &src, &tgt).unwrap().token_dists;
    let w = token_weights(Ablation::D, Some(&critic), &src, &tgt, Outcome::RuntimeError).unwrap();
    for (q, d) in w.iter().zip(&dists) {
        assert_eq!(*q, d[1]);
        assert!(*q > 0.0 && *q < 1.0);
    }
}

#[test]
fn rl_loss_does_not_reach_the_critic() {
    let actor = tiny(Role::Actor, 4);
    let mut critic = tiny(Role::Critic, 5);
    let (src, tgt) = program();
    let config = RlConfig::new(Ablation::D);
    // the sample always fails, the baseline always passes: A != 0
    let calls = std::sync::atomic::AtomicUsize::new(0);
    let judge = |_: &[TokenId]| {
        let n = calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        report(if n == 0 {
            Outcome::CompileError
        } else {
            Outcome::PassedTest
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (g, out) = rl_gradients(&actor, Some(&critic), &src, Some(&tgt), &judge, &config, &mut rng).unwrap();
    assert_eq!(out.advantage, -2.0);
    assert!(out.l_rl != 0.0);
    let critic_ids: Vec<_> = critic.store.ids().collect();
    assert!(g.param_ids().all(|id| !critic_ids.contains(&id)));
    critic.store.accumulate(&g);
    assert_eq!(critic.store.grad_norm(), 0.0);
}

#[test]
fn missing_critic_is_an_error() {
    let mut actor = tiny(Role::Actor, 6);
    let ds = generate_dataset(&DatasetConfig::new(Split::Train, 2, 4));
    for ablation in [Ablation::B, Ablation::D] {
        let r = rl_finetune(&mut actor, None, &ds, &RlConfig::new(ablation), 0);
        assert!(matches!(r, Err(TrainError::MissingCritic(_))));
    }
}

/// One-step bandit: programs are single tokens and only `WINNER` passes.
#[test]
fn bandit_probability_of_the_passing_token_rises() {
    const WINNER: usize = 5;
    let config = ModelConfig {
        vocab: 8,
        embed: 4,
        hidden: 6,
        attention: 3,
        ..ModelConfig::actor()
    };
    let source = [1, 4, 2];
    let judge = |ids: &[TokenId]| {
        report(if ids.first() == Some(&WINNER) {
            Outcome::PassedTest
        } else {
            Outcome::FailedTest
        })
    };
    let mut rl = RlConfig::new(Ablation::A);
    rl.sampling.max_len = 1;
    rl.greedy_max_len = 1;
    rl.ce_weight = 0.0;
    rl.optim.lr = 0.01;
    let p_win = |m: &Model| log_prob(m, &source, &[WINNER]).unwrap().0.exp();
    let (mut before, mut after) = (0.0, 0.0);
    for seed in 0..5 {
        let mut actor = Model::new(config, &mut ChaCha8Rng::seed_from_u64(seed));
        before += p_win(&actor);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for _ in 0..200 {
            rl_step(&mut actor, None, &source, None, &judge, &rl, &mut rng).unwrap();
        }
        after += p_win(&actor);
    }
    assert!(after / 5.0 > before / 5.0 + 0.2, "before {before} after {after}");
}

fn encoded_map(ds: &crate::corpus::Dataset) -> HashMap<String, EncodedProblem> {
    ds.problems
        .iter()
        .map(|p| (p.id.clone(), EncodedProblem::new(p).unwrap()))
        .collect()
}

#[test]
fn collection_counts_labels_and_determinism() {
    let actor = tiny(Role::Actor, 7);
    let ds = generate_dataset(&DatasetConfig::new(Split::Train, 4, 5));
    let cfg = SamplingConfig {
        max_len: 30,
        ..SamplingConfig::default()
    };
    let a = collect_synthetic(&actor, &ds, 3, &cfg, 11).unwrap();
    assert_eq!(a.len(), 4 * (3 + 1));
    for s in &a {
        assert_eq!(s.subtype.category(), s.outcome);
        if s.source == SampleSource::GroundTruth {
            assert_eq!(s.outcome, Outcome::PassedTest);
        }
    }
    assert_eq!(a.iter().filter(|s| s.source == SampleSource::GroundTruth).count(), 4);
    assert_eq!(a, collect_synthetic(&actor, &ds, 3, &cfg, 11).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.jsonl");
    save_samples(&a, &path).unwrap();
    assert_eq!(load_samples(&path).unwrap(), a);
}

#[test]
fn warmstart_with_zero_epochs_is_identity() {
    let mut actor = tiny(Role::Actor, 8);
    let before = actor.store.clone();
    let ds = generate_dataset(&DatasetConfig::new(Split::Train, 3, 6));
    let enc: Vec<_> = ds.problems.iter().map(|p| EncodedProblem::new(p).unwrap()).collect();
    let history = ce_warmstart(&mut actor, &enc, &OptimConfig::new(1e-3, 0), 0).unwrap();
    assert!(history.is_empty());
    for (a, b) in actor.store.ids().zip(before.ids()) {
        assert_eq!(actor.store.values(a), before.values(b));
    }
}

#[test]
fn critic_starts_near_uniform_and_split_is_by_problem() {
    let actor = tiny(Role::Actor, 9);
    let ds = generate_dataset(&DatasetConfig::new(Split::Train, 20, 7));
    let cfg = SamplingConfig {
        max_len: 20,
        ..SamplingConfig::default()
    };
    let samples = collect_synthetic(&actor, &ds, 2, &cfg, 1).unwrap();
    let (train, held) = split_by_problem(&samples, 3);
    assert_eq!(train.len() + held.len(), samples.len());
    assert_eq!(held.len(), 2 * 3);
    for &h in &held {
        assert!(train.iter().all(|&t| samples[t].problem_id != samples[h].problem_id));
    }
    let mut critic = tiny(Role::Critic, 10);
    let problems = encoded_map(&ds);
    let report = train_critic(&mut critic, &samples, &problems, &OptimConfig::new(1e-3, 1), 0).unwrap();
    let first = report.epochs[0].get("loss").unwrap();
    assert!((first - 4f64.ln()).abs() < 0.1, "{first}");
    assert!(report.epochs[0].get("heldout_accuracy").is_some());
    let mut wrong = tiny(Role::Critic, 10);
    assert!(train_test_critic(&mut wrong, &samples, &problems, &OptimConfig::new(1e-3, 1), 0).is_err());
}

#[test]
fn repair_pairs_exclude_passing_samples() {
    let ds = generate_dataset(&DatasetConfig::new(Split::Train, 2, 8));
    let problems = encoded_map(&ds);
    let p = &ds.problems[0];
    let eos = crate::corpus::Vocabulary::standard().eos();
    let mk = |program: Vec<TokenId>, outcome: Outcome, subtype| LabeledSample {
        problem_id: p.id.clone(),
        program,
        outcome,
        subtype,
        source: SampleSource::Sampled,
    };
    let samples = vec![
        mk(vec![10, eos], Outcome::CompileError, ErrorSubtype::Syntax),
        mk(vec![10, eos], Outcome::CompileError, ErrorSubtype::Syntax),
        mk(problems[&p.id].target.clone(), Outcome::PassedTest, ErrorSubtype::None),
        mk(vec![11], Outcome::RuntimeError, ErrorSubtype::NoReturn),
    ];
    let pairs = repair_pairs(&samples, &problems).unwrap();
    assert_eq!(pairs.len(), 2);
    let u_pass = crate::corpus::Vocabulary::standard().outcome_id(Outcome::PassedTest);
    assert!(pairs.iter().all(|r| !r.input.contains(&u_pass)));
    assert!(pairs.iter().all(|r| r.target == problems[&p.id].target));
}

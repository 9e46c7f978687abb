//! Gradient-check cases shared by the gradient and acceptance suites.

use coderl::corpus::{generate_dataset, DatasetConfig, EncodedProblem, Split};
use coderl::diffkit::{Tape, Tensor, Var};
use coderl::minilang::Outcome;
use coderl::models::{critic_forward, token_values, Model, ModelConfig, Role};
use coderl::training::{rl_surrogate, token_weights, Ablation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fd::{check_inputs, check_model};

fn tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(
        vec![rows, cols],
        (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect(),
    )
    .unwrap()
}

/// Contracts a matrix with fixed pseudo-random weights so every output
/// element contributes to the scalar.
fn contract(tape: &mut Tape, v: Var) -> Var {
    let [r, c] = tape.shape(v);
    let w: Vec<f64> = (0..r * c).map(|i| 0.3 + 0.17 * ((i * 7 + 3) % 11) as f64).collect();
    let w = tape.leaf(Tensor::new(vec![r, c], w).unwrap()).unwrap();
    let p = tape.mul(v, w).unwrap();
    tape.sum(p)
}

type OpCase = (&'static str, Vec<(usize, usize)>, fn(&mut Tape, &[Var]) -> Var);

fn op_cases() -> Vec<OpCase> {
    vec![
        ("matmul", vec![(3, 4), (4, 2)], |t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            contract(t, y)
        }),
        ("add", vec![(3, 4), (3, 4)], |t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            contract(t, y)
        }),
        ("add_broadcast", vec![(3, 4), (1, 4)], |t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            contract(t, y)
        }),
        ("sub", vec![(2, 3), (2, 3)], |t, v| {
            let y = t.sub(v[0], v[1]).unwrap();
            contract(t, y)
        }),
        ("mul", vec![(2, 3), (2, 3)], |t, v| {
            let y = t.mul(v[0], v[1]).unwrap();
            contract(t, y)
        }),
        ("scale", vec![(2, 3)], |t, v| {
            let y = t.scale(v[0], -1.7);
            contract(t, y)
        }),
        ("tanh", vec![(2, 5)], |t, v| {
            let y = t.tanh(v[0]);
            contract(t, y)
        }),
        ("sigmoid", vec![(2, 5)], |t, v| {
            let y = t.sigmoid(v[0]);
            contract(t, y)
        }),
        ("softmax", vec![(3, 4)], |t, v| {
            let y = t.softmax(v[0]).unwrap();
            contract(t, y)
        }),
        ("log_softmax", vec![(3, 4)], |t, v| {
            let y = t.log_softmax(v[0]).unwrap();
            contract(t, y)
        }),
        ("embedding_gather", vec![(5, 3)], |t, v| {
            let y = t.embedding_gather(v[0], &[4, 0, 4, 2]).unwrap();
            contract(t, y)
        }),
        ("concat", vec![(2, 3), (2, 1)], |t, v| {
            let y = t.concat(&[v[0], v[1], v[0]]).unwrap();
            contract(t, y)
        }),
        ("concat_rows", vec![(2, 3), (1, 3)], |t, v| {
            let y = t.concat_rows(&[v[1], v[0]]).unwrap();
            contract(t, y)
        }),
        ("max_pool_over_time", vec![(4, 3)], |t, v| {
            let y = t.max_pool_over_time(v[0]);
            contract(t, y)
        }),
        ("cross_entropy", vec![(1, 5)], |t, v| t.cross_entropy(v[0], 3).unwrap()),
        ("sum", vec![(3, 2)], |t, v| {
            let y = t.sum(v[0]);
            t.mul(y, y).unwrap()
        }),
        ("pick", vec![(3, 2)], |t, v| {
            let y = t.pick(v[0], 4).unwrap();
            t.tanh(y)
        }),
        ("row", vec![(3, 2)], |t, v| {
            let y = t.row(v[0], 1).unwrap();
            contract(t, y)
        }),
        ("reshape", vec![(2, 3)], |t, v| {
            let y = t.reshape(v[0], 3, 2).unwrap();
            let y = t.softmax(y).unwrap();
            contract(t, y)
        }),
    ]
}

/// `(name, max relative error)` for every tape operation.
pub fn op_errors() -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    op_cases()
        .into_iter()
        .map(|(name, shapes, f)| {
            let inputs: Vec<Tensor> = shapes.iter().map(|&(r, c)| tensor(&mut rng, r, c)).collect();
            (name, check_inputs(&inputs, f))
        })
        .collect()
}

pub fn small(role: Role, seed: u64) -> Model {
    let config = ModelConfig {
        embed: 6,
        hidden: 8,
        attention: 5,
        ..ModelConfig::for_role(role)
    };
    let model = Model::new(config, &mut ChaCha8Rng::seed_from_u64(seed));
    assert!(model.num_parameters() <= 10_000);
    model
}

pub fn example_pair() -> EncodedProblem {
    let ds = generate_dataset(&DatasetConfig::new(Split::Train, 1, 17));
    let mut enc = EncodedProblem::new(&ds.problems[0]).unwrap();
    enc.target.truncate(8);
    enc.source.truncate(10);
    enc
}

/// `(name, max relative error)` for the full training losses.
pub fn loss_errors() -> Vec<(&'static str, f64)> {
    let pair = example_pair();
    let (src, tgt) = (pair.source.clone(), pair.target.clone());
    let mut out = Vec::new();

    let mut actor = small(Role::Actor, 1);
    out.push((
        "actor_cross_entropy",
        check_model(&mut actor, |m, t| {
            let lp = m.token_log_probs(t, &src, &tgt).unwrap();
            let s = t.sum(lp);
            t.scale(s, -1.0)
        }),
    ));

    for (name, role, share) in [
        ("critic_loss", Role::Critic, true),
        ("critic_loss_separate_head", Role::Critic, false),
        ("test_critic_loss", Role::TestCritic, true),
    ] {
        let mut critic = small(role, 2);
        if !share {
            let config = ModelConfig {
                share_head: false,
                ..critic.config
            };
            critic = Model::new(config, &mut ChaCha8Rng::seed_from_u64(3));
        }
        let label = if role == Role::Critic { 1 } else { 0 };
        out.push((
            name,
            check_model(&mut critic, |m, t| {
                let (_, pooled) = m.critic_logits(t, &src, &tgt).unwrap();
                t.cross_entropy(pooled, label).unwrap()
            }),
        ));
    }

    let critic = small(Role::Critic, 4);
    let q = token_values(
        &critic_forward(&critic, &src, &tgt).unwrap().token_dists,
        Outcome::RuntimeError,
    );
    let mut actor = small(Role::Actor, 5);
    out.push((
        "rl_surrogate_critic_weights",
        check_model(&mut actor, |m, t| rl_surrogate(t, m, &src, &tgt, &q, 1.3).unwrap()),
    ));
    let q = token_weights(Ablation::C, None, &src, &tgt, Outcome::FailedTest).unwrap();
    out.push((
        "rl_surrogate_position_weights",
        check_model(&mut actor, |m, t| rl_surrogate(t, m, &src, &tgt, &q, -0.7).unwrap()),
    ));

    let toy = ModelConfig {
        vocab: 2,
        embed: 3,
        hidden: 4,
        attention: 2,
        ..ModelConfig::actor()
    };
    let mut toy = Model::new(toy, &mut ChaCha8Rng::seed_from_u64(6));
    out.push((
        "rl_surrogate_two_token_vocab",
        check_model(&mut toy, |m, t| {
            rl_surrogate(t, m, &[0, 1, 1], &[1, 0, 1], &[0.9, 0.4, 0.2], 2.0).unwrap()
        }),
    ));

    let mut repair = small(Role::Repair, 7);
    out.push((
        "repair_cross_entropy",
        check_model(&mut repair, |m, t| {
            let lp = m.token_log_probs(t, &src, &tgt).unwrap();
            let s = t.sum(lp);
            t.scale(s, -1.0)
        }),
    ));
    out
}

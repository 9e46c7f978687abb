use crate::corpus::Vocabulary;
use crate::diffkit::{Tape, Var};
use crate::minilang::{ErrorSubtype, Outcome};

use super::{Model, ModelError, Role};

/// Test-critic class order.
pub const TEST_CRITIC_FAILED: usize = 0;
pub const TEST_CRITIC_PASSED: usize = 1;

pub const MAX_REPAIR_INPUT_LEN: usize = 192;

/// Per-token and pooled outcome distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticOutput {
    pub token_dists: Vec<Vec<f64>>,
    pub sequence: Vec<f64>,
}

impl Model {
    /// Critic logits for `program` read token by token (no BOS), so the
    /// state at `t` depends on `w_1..w_t` and the source only. Returns
    /// `T x K` per-token logits and `1 x K` logits of the max-pooled state.
    pub fn critic_logits(
        &self,
        tape: &mut Tape,
        source: &[usize],
        program: &[usize],
    ) -> Result<(Var, Var), ModelError> {
        self.expect_role(false)?;
        if program.is_empty() {
            return Err(ModelError::Empty("program"));
        }
        let net = self.bind(tape);
        let enc = self.encode(tape, &net, source)?;
        let states = self.decode_states(tape, &net, &enc, program)?;
        let per_token = self.head(tape, &net, states)?;
        let pooled = tape.max_pool_over_time(states);
        let sequence = self.pooled_head(tape, &net, pooled)?;
        Ok((per_token, sequence))
    }
}

pub fn critic_forward(model: &Model, source: &[usize], program: &[usize]) -> Result<CriticOutput, ModelError> {
    let mut tape = Tape::new();
    let (per_token, sequence) = model.critic_logits(&mut tape, source, program)?;
    let v = tape.softmax(per_token)?;
    let u = tape.softmax(sequence)?;
    let k = model.config.output_width();
    Ok(CriticOutput {
        token_dists: tape.value(v).chunks(k).map(<[f64]>::to_vec).collect(),
        sequence: tape.value(u).to_vec(),
    })
}

/// `q_t = v_t[u]`.
pub fn token_values(dists: &[Vec<f64>], u: Outcome) -> Vec<f64> {
    dists.iter().map(|d| d[u.index()]).collect()
}

/// PassedTest probability of the test-critic after each prefix `w_1..w_t`.
pub fn prefix_pass_values(model: &Model, source: &[usize], program: &[usize]) -> Result<Vec<f64>, ModelError> {
    if model.role() != Role::TestCritic {
        return Err(ModelError::WrongRole {
            expected: "test_critic",
            found: model.role(),
        });
    }
    let out = critic_forward(model, source, program)?;
    Ok(out.token_dists.iter().map(|d| d[TEST_CRITIC_PASSED]).collect())
}

/// `BOS D SEP W SEP u c EOS`.
pub fn repair_input(
    description: &[usize],
    program: &[usize],
    u: Outcome,
    c: ErrorSubtype,
) -> Result<Vec<usize>, ModelError> {
    let vocab = Vocabulary::standard();
    let len = description.len() + program.len() + 6;
    if len > MAX_REPAIR_INPUT_LEN {
        return Err(ModelError::TooLong {
            kind: "repair input",
            len,
            max: MAX_REPAIR_INPUT_LEN,
        });
    }
    let mut out = Vec::with_capacity(len);
    out.push(vocab.bos());
    out.extend_from_slice(description);
    out.push(vocab.sep());
    out.extend_from_slice(program);
    out.push(vocab.sep());
    out.push(vocab.outcome_id(u));
    out.push(vocab.subtype_id(c));
    out.push(vocab.eos());
    Ok(out)
}

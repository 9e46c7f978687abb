use rand::Rng;

use crate::corpus::{Vocabulary, MAX_TARGET_LEN};
use crate::diffkit::{Tape, Var};

use super::network::{Encoded, Network};
use super::{Model, ModelError};

/// Nucleus sampling settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    /// Upper bound on the emitted sequence, prefix and EOS included.
    pub max_len: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_p: 0.95,
            max_len: MAX_TARGET_LEN - 1,
        }
    }
}

impl SamplingConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::Sampling(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ModelError::Sampling(format!("top_p {} must lie in (0, 1]", self.top_p)));
        }
        Ok(())
    }
}

/// A decoded sequence (no BOS; ends with EOS unless cut by `max_len`) and
/// the log-probability of each token.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub ids: Vec<usize>,
    pub log_probs: Vec<f64>,
}

impl Decoded {
    pub fn total_log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }

    pub fn mean_log_prob(&self) -> f64 {
        if self.log_probs.is_empty() {
            0.0
        } else {
            self.total_log_prob() / self.log_probs.len() as f64
        }
    }

    /// Tokens before the first EOS.
    pub fn program(&self) -> &[usize] {
        let eos = Vocabulary::standard().eos();
        let end = self.ids.iter().position(|&t| t == eos).unwrap_or(self.ids.len());
        &self.ids[..end]
    }
}

/// Incremental decoder over a fixed encoding. Nodes of each step are
/// discarded once its state has been read out.
struct Session<'m> {
    model: &'m Model,
    tape: Tape,
    net: Network,
    enc: Encoded,
    mark: usize,
    state: Vec<f64>,
}

impl<'m> Session<'m> {
    fn new(model: &'m Model, source: &[usize]) -> Result<Self, ModelError> {
        model.expect_role(true)?;
        let mut tape = Tape::new();
        let net = model.bind(&mut tape);
        let enc = model.encode(&mut tape, &net, source)?;
        let state = tape.value(enc.last).to_vec();
        let mark = tape.len();
        Ok(Self {
            model,
            tape,
            net,
            enc,
            mark,
            state,
        })
    }

    /// Consumes `token` and returns the logits of the next position.
    fn feed(&mut self, token: usize) -> Result<Vec<f64>, ModelError> {
        self.tape.truncate(self.mark);
        let s: Var = self.tape.constant(self.state.clone());
        let s = self.model.decode_step(&mut self.tape, &self.net, &self.enc, s, token)?;
        let logits = self.model.head(&mut self.tape, &self.net, s)?;
        self.state = self.tape.value(s).to_vec();
        Ok(self.tape.value(logits).to_vec())
    }
}

fn scaled_softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&x| ((x - max) / temperature).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

fn scaled_log_prob(logits: &[f64], temperature: f64, token: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = logits
        .iter()
        .map(|&x| ((x - max) / temperature).exp())
        .sum::<f64>()
        .ln();
    (logits[token] - max) / temperature - lse
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Draws from the smallest set of most-probable entries whose mass reaches
/// `top_p`, renormalised. Ties in probability order by smaller index.
pub fn nucleus_pick<R: Rng + ?Sized>(probs: &[f64], top_p: f64, rng: &mut R) -> usize {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut keep = order.len();
    for (i, &id) in order.iter().enumerate() {
        mass += probs[id];
        if mass >= top_p - 1e-12 {
            keep = i + 1;
            break;
        }
    }
    let nucleus = &order[..keep];
    let total: f64 = nucleus.iter().map(|&id| probs[id]).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &id in nucleus {
        acc += probs[id];
        if u < acc {
            return id;
        }
    }
    nucleus[keep - 1]
}

enum Policy<'r, R: Rng + ?Sized> {
    Greedy,
    Nucleus(SamplingConfig, &'r mut R),
}

fn run<R: Rng + ?Sized>(
    model: &Model,
    source: &[usize],
    prefix: &[usize],
    mut policy: Policy<'_, R>,
    max_len: usize,
) -> Result<Decoded, ModelError> {
    let eos = Vocabulary::standard().eos();
    let temperature = match &policy {
        Policy::Greedy => 1.0,
        Policy::Nucleus(cfg, _) => {
            cfg.validate()?;
            cfg.temperature
        }
    };
    if prefix.len() > max_len {
        return Err(ModelError::TooLong {
            kind: "prefix",
            len: prefix.len(),
            max: max_len,
        });
    }
    let mut session = Session::new(model, source)?;
    let mut ids = Vec::new();
    let mut log_probs = Vec::new();
    let mut logits = session.feed(Vocabulary::standard().bos())?;
    for &token in prefix {
        model.check_ids(&[token], "prefix")?;
        log_probs.push(scaled_log_prob(&logits, temperature, token));
        ids.push(token);
        logits = session.feed(token)?;
    }
    while ids.len() < max_len && ids.last() != Some(&eos) {
        let token = match &mut policy {
            Policy::Greedy => argmax(&logits),
            Policy::Nucleus(cfg, rng) => {
                let probs = scaled_softmax(&logits, temperature);
                nucleus_pick(&probs, cfg.top_p, *rng)
            }
        };
        log_probs.push(scaled_log_prob(&logits, temperature, token));
        ids.push(token);
        if token != eos && ids.len() < max_len {
            logits = session.feed(token)?;
        }
    }
    Ok(Decoded { ids, log_probs })
}

/// Autoregressive nucleus sample. Log-probabilities are recorded under the
/// full temperature-scaled distribution, not the truncated nucleus.
pub fn sample<R: Rng + ?Sized>(
    model: &Model,
    source: &[usize],
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<Decoded, ModelError> {
    run(model, source, &[], Policy::Nucleus(*config, rng), config.max_len)
}

/// Teacher-forces `prefix`, then samples the continuation.
pub fn sample_with_prefix<R: Rng + ?Sized>(
    model: &Model,
    source: &[usize],
    prefix: &[usize],
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<Decoded, ModelError> {
    run(model, source, prefix, Policy::Nucleus(*config, rng), config.max_len)
}

/// Argmax decoding; ties go to the smaller token id.
pub fn greedy(model: &Model, source: &[usize], max_len: usize) -> Result<Decoded, ModelError> {
    run::<rand_chacha::ChaCha8Rng>(model, source, &[], Policy::Greedy, max_len)
}

use crate::diffkit::{ParamId, Tape, Var};

use super::{Gru, Model, ModelError};

#[derive(Debug, Clone, Copy)]
struct GruVars {
    w: [Var; 3],
    c: Option<[Var; 3]>,
    u: [Var; 3],
    b: [Var; 3],
}

/// A model's parameters recorded on one tape.
#[derive(Debug, Clone, Copy)]
pub struct Network {
    embedding: Var,
    enc: GruVars,
    dec: GruVars,
    att_w: Var,
    att_u: Var,
    att_v: Var,
    out_w: Var,
    out_b: Var,
    pool: Option<(Var, Var)>,
}

/// Encoder output for one source sequence.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// `S x H` encoder states.
    pub states: Var,
    /// `S x A` attention keys, `states * att.u`.
    pub keys: Var,
    /// Final encoder state, `1 x H`; initial decoder state.
    pub last: Var,
    pub len: usize,
}

impl Model {
    pub fn bind(&self, tape: &mut Tape) -> Network {
        let store = &self.store;
        let mut p = |id: ParamId| tape.param(store, id);
        let gru = |g: &Gru, p: &mut dyn FnMut(ParamId) -> Var| GruVars {
            w: g.w.map(&mut *p),
            c: g.c.map(|c| c.map(&mut *p)),
            u: g.u.map(&mut *p),
            b: g.b.map(&mut *p),
        };
        let ids = &self.ids;
        let embedding = p(ids.embedding);
        let enc = gru(&ids.enc, &mut p);
        let dec = gru(&ids.dec, &mut p);
        Network {
            embedding,
            enc,
            dec,
            att_w: p(ids.att_w),
            att_u: p(ids.att_u),
            att_v: p(ids.att_v),
            out_w: p(ids.out_w),
            out_b: p(ids.out_b),
            pool: ids.pool.map(|(w, b)| (p(w), p(b))),
        }
    }

    pub(crate) fn check_ids(&self, ids: &[usize], kind: &'static str) -> Result<(), ModelError> {
        if ids.is_empty() {
            return Err(ModelError::Empty(kind));
        }
        let len = self.config.vocab;
        match ids.iter().find(|&&id| id >= len) {
            Some(&id) => Err(ModelError::IdOutOfVocab { id, len }),
            None => Ok(()),
        }
    }

    /// Input-to-hidden projections (bias included) for every row of `ids`.
    fn project(&self, tape: &mut Tape, net: &Network, g: &GruVars, ids: &[usize]) -> Result<[Var; 3], ModelError> {
        let x = tape.embedding_gather(net.embedding, ids)?;
        let mut out = [x; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let xw = tape.matmul(x, g.w[k])?;
            *o = tape.add(xw, g.b[k])?;
        }
        Ok(out)
    }

    /// One gated recurrent update. `x` holds the three projected input rows.
    fn gru_step(tape: &mut Tape, g: &GruVars, x: [Var; 3], ctx: Option<Var>, h: Var) -> Result<Var, ModelError> {
        let pre = |tape: &mut Tape, k: usize| -> Result<Var, ModelError> {
            let mut acc = x[k];
            if let (Some(ctx), Some(c)) = (ctx, g.c) {
                let cc = tape.matmul(ctx, c[k])?;
                acc = tape.add(acc, cc)?;
            }
            Ok(acc)
        };
        let z_in = pre(tape, 0)?;
        let hz = tape.matmul(h, g.u[0])?;
        let z_sum = tape.add(z_in, hz)?;
        let z = tape.sigmoid(z_sum);
        let r_in = pre(tape, 1)?;
        let hr = tape.matmul(h, g.u[1])?;
        let r_sum = tape.add(r_in, hr)?;
        let r = tape.sigmoid(r_sum);
        let n_in = pre(tape, 2)?;
        let hn = tape.matmul(h, g.u[2])?;
        let gated = tape.mul(r, hn)?;
        let n_sum = tape.add(n_in, gated)?;
        let n = tape.tanh(n_sum);
        // h' = (1 - z) * n + z * h
        let diff = tape.sub(h, n)?;
        let zd = tape.mul(z, diff)?;
        Ok(tape.add(n, zd)?)
    }

    pub fn encode(&self, tape: &mut Tape, net: &Network, source: &[usize]) -> Result<Encoded, ModelError> {
        self.check_ids(source, "source")?;
        let x = self.project(tape, net, &net.enc, source)?;
        let mut h = tape.constant(vec![0.0; self.config.hidden]);
        let mut states = Vec::with_capacity(source.len());
        for t in 0..source.len() {
            let xt = [tape.row(x[0], t)?, tape.row(x[1], t)?, tape.row(x[2], t)?];
            h = Self::gru_step(tape, &net.enc, xt, None, h)?;
            states.push(h);
        }
        let states_m = tape.concat_rows(&states)?;
        let keys = tape.matmul(states_m, net.att_u)?;
        Ok(Encoded {
            states: states_m,
            keys,
            last: h,
            len: source.len(),
        })
    }

    /// Additive attention context for decoder state `s`.
    fn attend(&self, tape: &mut Tape, net: &Network, enc: &Encoded, s: Var) -> Result<Var, ModelError> {
        let q = tape.matmul(s, net.att_w)?;
        let e = tape.add(enc.keys, q)?;
        let e = tape.tanh(e);
        let scores = tape.matmul(e, net.att_v)?;
        let scores = tape.reshape(scores, 1, enc.len)?;
        let alpha = tape.softmax(scores)?;
        Ok(tape.matmul(alpha, enc.states)?)
    }

    /// Runs the decoder over `inputs` from the encoder's final state,
    /// returning the `T x H` stack of states `s_1..s_T`.
    pub fn decode_states(
        &self,
        tape: &mut Tape,
        net: &Network,
        enc: &Encoded,
        inputs: &[usize],
    ) -> Result<Var, ModelError> {
        self.check_ids(inputs, "decoder input")?;
        let x = self.project(tape, net, &net.dec, inputs)?;
        let mut s = enc.last;
        let mut states = Vec::with_capacity(inputs.len());
        for t in 0..inputs.len() {
            let ctx = self.attend(tape, net, enc, s)?;
            let xt = [tape.row(x[0], t)?, tape.row(x[1], t)?, tape.row(x[2], t)?];
            s = Self::gru_step(tape, &net.dec, xt, Some(ctx), s)?;
            states.push(s);
        }
        Ok(tape.concat_rows(&states)?)
    }

    /// One decoder step from state `s` consuming `token`; returns the new
    /// state.
    pub(crate) fn decode_step(
        &self,
        tape: &mut Tape,
        net: &Network,
        enc: &Encoded,
        s: Var,
        token: usize,
    ) -> Result<Var, ModelError> {
        self.check_ids(&[token], "decoder input")?;
        let x = self.project(tape, net, &net.dec, &[token])?;
        let ctx = self.attend(tape, net, enc, s)?;
        Self::gru_step(tape, &net.dec, x, Some(ctx), s)
    }

    /// `states * out.w + out.b`.
    pub(crate) fn head(&self, tape: &mut Tape, net: &Network, states: Var) -> Result<Var, ModelError> {
        let y = tape.matmul(states, net.out_w)?;
        Ok(tape.add(y, net.out_b)?)
    }

    pub(crate) fn pooled_head(&self, tape: &mut Tape, net: &Network, pooled: Var) -> Result<Var, ModelError> {
        match net.pool {
            Some((w, b)) => {
                let y = tape.matmul(pooled, w)?;
                Ok(tape.add(y, b)?)
            }
            None => self.head(tape, net, pooled),
        }
    }

    /// Teacher-forced per-token log-probabilities `log p(w_t | w_<t, D)` as
    /// a `1 x T` row. `target` excludes the leading BOS.
    pub fn token_log_probs(&self, tape: &mut Tape, source: &[usize], target: &[usize]) -> Result<Var, ModelError> {
        self.expect_role(true)?;
        self.check_ids(target, "target")?;
        let net = self.bind(tape);
        let enc = self.encode(tape, &net, source)?;
        let mut inputs = Vec::with_capacity(target.len());
        inputs.push(crate::corpus::Vocabulary::standard().bos());
        inputs.extend_from_slice(&target[..target.len() - 1]);
        let states = self.decode_states(tape, &net, &enc, &inputs)?;
        let logits = self.head(tape, &net, states)?;
        let logp = tape.log_softmax(logits)?;
        let v = self.config.vocab;
        let picks = target
            .iter()
            .enumerate()
            .map(|(t, &w)| tape.pick(logp, t * v + w))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(tape.concat(&picks)?)
    }
}

/// Total and per-token log-likelihood of `target` given `source`.
pub fn log_prob(model: &Model, source: &[usize], target: &[usize]) -> Result<(f64, Vec<f64>), ModelError> {
    let mut tape = Tape::new();
    let lp = model.token_log_probs(&mut tape, source, target)?;
    let per_token = tape.value(lp).to_vec();
    Ok((per_token.iter().sum(), per_token))
}

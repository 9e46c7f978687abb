//! The four networks of the pipeline. They share one recurrent
//! encoder-decoder body with additive attention and differ in output head:
//! actor and repair model project to the vocabulary, critic and
//! test-critic to outcome classes.

mod critic;
mod decode;
mod network;

use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::diffkit::{load_checkpoint, save_checkpoint, CheckpointMeta, DiffError, ParamId, ParameterStore};

pub use critic::{
    critic_forward, prefix_pass_values, repair_input, token_values, CriticOutput, MAX_REPAIR_INPUT_LEN,
    TEST_CRITIC_FAILED, TEST_CRITIC_PASSED,
};
pub use decode::{greedy, nucleus_pick, sample, sample_with_prefix, Decoded, SamplingConfig};
pub use network::{log_prob, Encoded, Network};

/// Uniform initialisation half-width for every weight matrix.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("token id {id} outside a vocabulary of {len}")]
    IdOutOfVocab { id: usize, len: usize },
    #[error("empty {0} sequence")]
    Empty(&'static str),
    #[error("{kind} sequence of length {len} exceeds {max}")]
    TooLong { kind: &'static str, len: usize, max: usize },
    #[error("operation needs a {expected} model, got {found}")]
    WrongRole { expected: &'static str, found: Role },
    #[error("invalid sampling configuration: {0}")]
    Sampling(String),
    #[error("checkpoint metadata: {0}")]
    Meta(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Actor,
    Critic,
    TestCritic,
    Repair,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Actor => "actor",
            Role::Critic => "critic",
            Role::TestCritic => "test_critic",
            Role::Repair => "repair",
        }
    }

    /// Generators decode over the vocabulary; the others classify.
    pub fn is_generator(self) -> bool {
        matches!(self, Role::Actor | Role::Repair)
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "actor" => Ok(Role::Actor),
            "critic" => Ok(Role::Critic),
            "test_critic" => Ok(Role::TestCritic),
            "repair" => Ok(Role::Repair),
            other => Err(ModelError::Meta(format!("unknown role {other:?}"))),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub role: Role,
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub attention: usize,
    /// Critic roles only: one linear head for tokens and the pooled state.
    pub share_head: bool,
}

impl ModelConfig {
    pub fn actor() -> Self {
        Self {
            role: Role::Actor,
            vocab: Vocabulary::standard().len(),
            embed: 64,
            hidden: 128,
            attention: 64,
            share_head: true,
        }
    }

    pub fn repair() -> Self {
        Self {
            role: Role::Repair,
            ..Self::actor()
        }
    }

    pub fn critic() -> Self {
        Self {
            role: Role::Critic,
            vocab: Vocabulary::standard().len(),
            embed: 32,
            hidden: 64,
            attention: 32,
            share_head: true,
        }
    }

    pub fn test_critic() -> Self {
        Self {
            role: Role::TestCritic,
            ..Self::critic()
        }
    }

    pub fn for_role(role: Role) -> Self {
        match role {
            Role::Actor => Self::actor(),
            Role::Repair => Self::repair(),
            Role::Critic => Self::critic(),
            Role::TestCritic => Self::test_critic(),
        }
    }

    /// Width of the output layer.
    pub fn output_width(&self) -> usize {
        match self.role {
            Role::Actor | Role::Repair => self.vocab,
            Role::Critic => 4,
            Role::TestCritic => 2,
        }
    }

    fn to_meta(self) -> CheckpointMeta {
        let mut meta = CheckpointMeta::new();
        meta.insert("role".into(), self.role.name().into());
        meta.insert("vocab".into(), self.vocab.to_string());
        meta.insert("embed".into(), self.embed.to_string());
        meta.insert("hidden".into(), self.hidden.to_string());
        meta.insert("attention".into(), self.attention.to_string());
        meta.insert("share_head".into(), self.share_head.to_string());
        meta
    }

    fn from_meta(meta: &CheckpointMeta) -> Result<Self, ModelError> {
        fn field<T: FromStr>(meta: &CheckpointMeta, key: &str) -> Result<T, ModelError> {
            meta.get(key)
                .ok_or_else(|| ModelError::Meta(format!("missing {key:?}")))?
                .parse()
                .map_err(|_| ModelError::Meta(format!("bad value for {key:?}")))
        }
        Ok(Self {
            role: meta
                .get("role")
                .ok_or_else(|| ModelError::Meta("missing \"role\"".into()))?
                .parse()?,
            vocab: field(meta, "vocab")?,
            embed: field(meta, "embed")?,
            hidden: field(meta, "hidden")?,
            attention: field(meta, "attention")?,
            share_head: field(meta, "share_head")?,
        })
    }
}

/// Parameter layout: name and shape of every tensor, in creation order.
fn layout(c: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (v, e, h, a) = (c.vocab, c.embed, c.hidden, c.attention);
    let mut out = vec![("embedding".to_string(), vec![v, e])];
    for gate in ["z", "r", "n"] {
        out.push((format!("enc.w{gate}"), vec![e, h]));
        out.push((format!("enc.u{gate}"), vec![h, h]));
        out.push((format!("enc.b{gate}"), vec![h]));
    }
    for gate in ["z", "r", "n"] {
        out.push((format!("dec.w{gate}"), vec![e, h]));
        out.push((format!("dec.c{gate}"), vec![h, h]));
        out.push((format!("dec.u{gate}"), vec![h, h]));
        out.push((format!("dec.b{gate}"), vec![h]));
    }
    out.push(("att.w".into(), vec![h, a]));
    out.push(("att.u".into(), vec![h, a]));
    out.push(("att.v".into(), vec![a, 1]));
    let k = c.output_width();
    out.push(("out.w".into(), vec![h, k]));
    out.push(("out.b".into(), vec![k]));
    if !c.role.is_generator() && !c.share_head {
        out.push(("pool.w".into(), vec![h, k]));
        out.push(("pool.b".into(), vec![k]));
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Gru {
    pub w: [ParamId; 3],
    pub c: Option<[ParamId; 3]>,
    pub u: [ParamId; 3],
    pub b: [ParamId; 3],
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ParamIds {
    pub embedding: ParamId,
    pub enc: Gru,
    pub dec: Gru,
    pub att_w: ParamId,
    pub att_u: ParamId,
    pub att_v: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub pool: Option<(ParamId, ParamId)>,
}

impl ParamIds {
    fn lookup(store: &ParameterStore, c: &ModelConfig) -> Result<Self, ModelError> {
        for (name, shape) in layout(c) {
            let id = store.id(&name)?;
            if store.shape(id) != shape.as_slice() {
                return Err(ModelError::Meta(format!(
                    "parameter {name:?} has shape {:?}, expected {shape:?}",
                    store.shape(id)
                )));
            }
        }
        if store.len() != layout(c).len() {
            return Err(ModelError::Meta("unexpected extra parameters".into()));
        }
        let id = |n: &str| store.id(n).expect("validated above");
        let gates = |prefix: &str, kind: &str| ["z", "r", "n"].map(|g| id(&format!("{prefix}.{kind}{g}")));
        let pool = if !c.role.is_generator() && !c.share_head {
            Some((id("pool.w"), id("pool.b")))
        } else {
            None
        };
        Ok(Self {
            embedding: id("embedding"),
            enc: Gru {
                w: gates("enc", "w"),
                c: None,
                u: gates("enc", "u"),
                b: gates("enc", "b"),
            },
            dec: Gru {
                w: gates("dec", "w"),
                c: Some(gates("dec", "c")),
                u: gates("dec", "u"),
                b: gates("dec", "b"),
            },
            att_w: id("att.w"),
            att_u: id("att.u"),
            att_v: id("att.v"),
            out_w: id("out.w"),
            out_b: id("out.b"),
            pool,
        })
    }
}

/// A network plus its parameters. Used for all four roles.
#[derive(Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParameterStore,
    pub(crate) ids: ParamIds,
}

impl Clone for Model {
    /// Copies the parameters into a new store and rebinds the ids to it.
    fn clone(&self) -> Self {
        let store = self.store.clone();
        let ids = ParamIds::lookup(&store, &self.config).expect("cloned store has the same layout");
        Self {
            config: self.config,
            store,
            ids,
        }
    }
}

impl Model {
    /// Fresh weights from `uniform(-0.08, 0.08)`; output biases start at zero.
    pub fn new<R: Rng>(config: ModelConfig, rng: &mut R) -> Self {
        let mut store = ParameterStore::new();
        for (name, shape) in layout(&config) {
            let scale = if name == "out.b" || name == "pool.b" {
                0.0
            } else {
                INIT_SCALE
            };
            store
                .insert_uniform(&name, shape, scale, rng)
                .expect("layout names are unique and shapes positive");
        }
        let ids = ParamIds::lookup(&store, &config).expect("fresh layout is consistent");
        Self { config, store, ids }
    }

    pub fn from_store(config: ModelConfig, store: ParameterStore) -> Result<Self, ModelError> {
        let ids = ParamIds::lookup(&store, &config)?;
        Ok(Self { config, store, ids })
    }

    pub fn role(&self) -> Role {
        self.config.role
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn output_weight(&self) -> ParamId {
        self.ids.out_w
    }

    pub fn output_bias(&self) -> ParamId {
        self.ids.out_b
    }

    pub(crate) fn expect_role(&self, generator: bool) -> Result<(), ModelError> {
        if self.config.role.is_generator() == generator {
            Ok(())
        } else {
            Err(ModelError::WrongRole {
                expected: if generator { "generator" } else { "critic" },
                found: self.config.role,
            })
        }
    }

    /// Writes the parameters with role and dimensions in the metadata;
    /// `extra` entries (e.g. a config hash) are stored alongside.
    pub fn save(&self, path: &Path, extra: &CheckpointMeta) -> Result<(), ModelError> {
        let mut meta = extra.clone();
        meta.extend(self.config.to_meta());
        save_checkpoint(&self.store, &meta, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointMeta), ModelError> {
        let (store, meta) = load_checkpoint(path)?;
        let config = ModelConfig::from_meta(&meta)?;
        Ok((Self::from_store(config, store)?, meta))
    }
}

use std::path::{Path, PathBuf};
use std::str::FromStr;

use coderl::corpus::{DatasetConfig, Split};
use coderl::inference::CriticSamplingConfig;
use coderl::models::{ModelConfig, Role, SamplingConfig};
use coderl::training::{Ablation, OptimConfig, RlConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const OUTPUT_DIR_ENV: &str = "CODERL_OUTPUT_DIR";
pub const WORKERS_ENV: &str = "CODERL_WORKERS";

/// Flat run configuration; see `configs/default.toml` for documentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,

    pub train_problems: usize,
    pub test_problems: usize,
    pub tier1_share: f64,
    pub tier2_share: f64,
    pub tier3_share: f64,

    pub actor_embed: usize,
    pub actor_hidden: usize,
    pub actor_attention: usize,
    pub critic_embed: usize,
    pub critic_hidden: usize,
    pub critic_attention: usize,
    pub critic_share_head: bool,
    pub repair_embed: usize,
    pub repair_hidden: usize,
    pub repair_attention: usize,

    pub batch_size: usize,

    pub pretrain_programs: usize,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,

    pub warmstart_epochs: usize,
    pub warmstart_lr: f64,

    pub collect_samples: usize,
    pub collect_temperature: f64,
    pub collect_top_p: f64,

    pub critic_epochs: usize,
    pub critic_lr: f64,

    pub rl_epochs: usize,
    pub rl_lr: f64,
    pub rl_baseline: bool,
    pub rl_critic_mode: CriticMode,
    pub rl_ce_weight: f64,
    pub rl_rl_weight: f64,
    pub rl_temperature: f64,
    pub rl_top_p: f64,

    pub repair_epochs: usize,
    pub repair_lr: f64,
    pub repair_from_warmstart: bool,

    pub gen_n: usize,
    pub gen_m: usize,
    pub gen_temperature: f64,
    pub gen_top_p: f64,
    pub gen_max_len: usize,
    pub gen_cs: CsMode,

    pub report_ks: Vec<usize>,
    pub report_n_at_k: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticMode {
    Learned,
    Constant,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CsMode {
    #[serde(rename = "off")]
    Off,
    #[serde(rename = "refine")]
    Refine,
    #[serde(rename = "refine+repair")]
    RefineRepair,
}

impl CsMode {
    pub fn name(self) -> &'static str {
        match self {
            CsMode::Off => "off",
            CsMode::Refine => "refine",
            CsMode::RefineRepair => "refine+repair",
        }
    }
}

impl FromStr for CsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(CsMode::Off),
            "refine" => Ok(CsMode::Refine),
            "refine+repair" => Ok(CsMode::RefineRepair),
            other => Err(format!("unknown critic sampling mode {other:?}")),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let actor = ModelConfig::actor();
        let critic = ModelConfig::critic();
        let repair = ModelConfig::repair();
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            workers: 0,
            train_problems: 200,
            test_problems: 50,
            tier1_share: 0.6,
            tier2_share: 0.3,
            tier3_share: 0.1,
            actor_embed: actor.embed,
            actor_hidden: actor.hidden,
            actor_attention: actor.attention,
            critic_embed: critic.embed,
            critic_hidden: critic.hidden,
            critic_attention: critic.attention,
            critic_share_head: critic.share_head,
            repair_embed: repair.embed,
            repair_hidden: repair.hidden,
            repair_attention: repair.attention,
            batch_size: 8,
            pretrain_programs: 1000,
            pretrain_epochs: 6,
            pretrain_lr: 1e-3,
            warmstart_epochs: 30,
            warmstart_lr: 3e-3,
            collect_samples: 20,
            collect_temperature: 1.0,
            collect_top_p: 0.95,
            critic_epochs: 20,
            critic_lr: 3e-3,
            rl_epochs: 5,
            rl_lr: 3e-4,
            rl_baseline: true,
            rl_critic_mode: CriticMode::Learned,
            rl_ce_weight: 1.0,
            rl_rl_weight: 1.0,
            rl_temperature: 1.0,
            rl_top_p: 1.0,
            repair_epochs: 5,
            repair_lr: 1e-3,
            repair_from_warmstart: true,
            gen_n: 20,
            gen_m: 1,
            gen_temperature: 1.0,
            gen_top_p: 0.95,
            gen_max_len: 95,
            gen_cs: CsMode::RefineRepair,
            report_ks: vec![1, 5, 20],
            report_n_at_k: vec![[1, 5], [5, 20]],
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies the output-directory and worker-count environment overrides.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
        if let Some(dir) = lookup(OUTPUT_DIR_ENV) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Some(w) = lookup(WORKERS_ENV) {
            self.workers = w
                .trim()
                .parse()
                .map_err(|_| bad(format!("{WORKERS_ENV}={w:?} is not a count")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let shares = [self.tier1_share, self.tier2_share, self.tier3_share];
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) || (shares.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(bad("tier shares must lie in [0, 1] and sum to 1"));
        }
        let sizes = [
            ("actor", self.actor_embed, self.actor_hidden, self.actor_attention),
            ("critic", self.critic_embed, self.critic_hidden, self.critic_attention),
            ("repair", self.repair_embed, self.repair_hidden, self.repair_attention),
        ];
        for (name, e, h, a) in sizes {
            if e == 0 || h == 0 || a == 0 {
                return Err(bad(format!("{name} sizes must be positive")));
            }
        }
        if self.repair_from_warmstart
            && (self.repair_embed, self.repair_hidden, self.repair_attention)
                != (self.actor_embed, self.actor_hidden, self.actor_attention)
        {
            return Err(bad("repair_from_warmstart needs repair sizes equal to the actor's"));
        }
        let lrs = [
            self.pretrain_lr,
            self.warmstart_lr,
            self.critic_lr,
            self.rl_lr,
            self.repair_lr,
        ];
        if lrs.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return Err(bad("learning rates must be positive"));
        }
        if self.batch_size == 0 || self.gen_n == 0 || self.train_problems == 0 || self.test_problems == 0 {
            return Err(bad("batch_size, gen_n and problem counts must be positive"));
        }
        if self.gen_m == 0 || self.gen_m > self.gen_n {
            return Err(bad("gen_m must lie in 1..=gen_n"));
        }
        self.ablation()?;
        for s in [
            self.collect_sampling(),
            self.rl_config()?.sampling,
            self.cs_config(self.gen_cs).sampling,
        ] {
            if !(s.temperature > 0.0 && s.temperature.is_finite()) || !(s.top_p > 0.0 && s.top_p <= 1.0) {
                return Err(bad("temperatures must be positive and top_p in (0, 1]"));
            }
        }
        if !(1..=coderl::corpus::MAX_TARGET_LEN - 1).contains(&self.gen_max_len) {
            return Err(bad(format!(
                "gen_max_len must lie in 1..={}",
                coderl::corpus::MAX_TARGET_LEN - 1
            )));
        }
        if self.report_ks.contains(&0) || self.report_n_at_k.iter().any(|&[n, k]| n == 0 || n > k) {
            return Err(bad("report entries need 1 <= n <= k"));
        }
        Ok(())
    }

    /// SHA-256 over every setting that influences results; the output
    /// directory and worker count are excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.workers = 0;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn ablation(&self) -> Result<Ablation, CliError> {
        match (self.rl_critic_mode, self.rl_baseline) {
            (CriticMode::Constant, true) => Ok(Ablation::A),
            (CriticMode::Learned, false) => Ok(Ablation::B),
            (CriticMode::Distance, true) => Ok(Ablation::C),
            (CriticMode::Learned, true) => Ok(Ablation::D),
            (mode, _) => Err(bad(format!("rl_critic_mode {mode:?} requires rl_baseline = true"))),
        }
    }

    pub fn dataset(&self, split: Split) -> DatasetConfig {
        let (problems, stream) = match split {
            Split::Train => (self.train_problems, 0),
            Split::Test => (self.test_problems, 1),
        };
        DatasetConfig {
            split,
            problems,
            seed: coderl::seeding::derive_seed(self.seed, "corpus", stream),
            tier_mix: [self.tier1_share, self.tier2_share, self.tier3_share],
        }
    }

    pub fn model(&self, role: Role) -> ModelConfig {
        let (embed, hidden, attention) = match role {
            Role::Actor => (self.actor_embed, self.actor_hidden, self.actor_attention),
            Role::Critic | Role::TestCritic => (self.critic_embed, self.critic_hidden, self.critic_attention),
            Role::Repair => (self.repair_embed, self.repair_hidden, self.repair_attention),
        };
        ModelConfig {
            embed,
            hidden,
            attention,
            share_head: self.critic_share_head,
            ..ModelConfig::for_role(role)
        }
    }

    fn optim(&self, lr: f64, epochs: usize) -> OptimConfig {
        OptimConfig {
            lr,
            epochs,
            batch_size: self.batch_size,
        }
    }

    pub fn pretrain_optim(&self) -> OptimConfig {
        self.optim(self.pretrain_lr, self.pretrain_epochs)
    }

    pub fn warmstart_optim(&self) -> OptimConfig {
        self.optim(self.warmstart_lr, self.warmstart_epochs)
    }

    pub fn critic_optim(&self) -> OptimConfig {
        self.optim(self.critic_lr, self.critic_epochs)
    }

    pub fn repair_optim(&self) -> OptimConfig {
        self.optim(self.repair_lr, self.repair_epochs)
    }

    pub fn collect_sampling(&self) -> SamplingConfig {
        SamplingConfig {
            temperature: self.collect_temperature,
            top_p: self.collect_top_p,
            ..SamplingConfig::default()
        }
    }

    pub fn rl_config_for(&self, ablation: Ablation) -> RlConfig {
        let mut rl = RlConfig::new(ablation);
        rl.optim = self.optim(self.rl_lr, self.rl_epochs);
        rl.sampling.temperature = self.rl_temperature;
        rl.sampling.top_p = self.rl_top_p;
        rl.ce_weight = self.rl_ce_weight;
        rl.rl_weight = self.rl_rl_weight;
        rl
    }

    pub fn rl_config(&self) -> Result<RlConfig, CliError> {
        Ok(self.rl_config_for(self.ablation()?))
    }

    pub fn cs_config(&self, mode: CsMode) -> CriticSamplingConfig {
        CriticSamplingConfig {
            n: self.gen_n,
            m: self.gen_m,
            refine: mode != CsMode::Off,
            repair: mode == CsMode::RefineRepair,
            sampling: SamplingConfig {
                temperature: self.gen_temperature,
                top_p: self.gen_top_p,
                max_len: self.gen_max_len,
            },
        }
    }

    pub fn report_spec(&self) -> coderl::eval::ReportSpec {
        coderl::eval::ReportSpec {
            ks: self.report_ks.clone(),
            n_at_k: self.report_n_at_k.iter().map(|&[n, k]| (n, k)).collect(),
            unbiased: true,
        }
    }
}

//! The stages of a run and the artifacts they exchange. Every artifact is
//! listed in `manifest.json` with the hash of the config that produced it
//! and a checksum of its bytes; a stage refuses inputs that are missing,
//! stale or modified.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use coderl::corpus::{encode_program, generate_dataset, load_dataset, save_dataset, Dataset, EncodedProblem, Split};
use coderl::diffkit::CheckpointMeta;
use coderl::eval::{metric_table, outcome_histogram, to_csv, EvalRecord, MetricRow, TestSet};
use coderl::inference::{critic_sampling, GenerationBatch, Models, Trace};
use coderl::models::{Model, Role};
use coderl::seeding::{derive_rng, derive_seed};
use coderl::training::{
    ce_warmstart, collect_synthetic, load_samples, ntp_pretrain, repair_pairs, rl_finetune, save_samples,
    train_critic as fit_critic, train_repair as fit_repair, train_test_critic, Ablation, CriticReport, EpochMetrics,
};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CsMode, RunConfig};
use crate::error::CliError;

pub const TRAIN_DATA: &str = "data/train.jsonl";
pub const TEST_DATA: &str = "data/test.jsonl";
pub const PRETRAIN: &str = "models/pretrain.ckpt";
pub const WARMSTART: &str = "models/warmstart.ckpt";
pub const CRITIC: &str = "models/critic.ckpt";
pub const TEST_CRITIC: &str = "models/test_critic.ckpt";
pub const CRITIC_REPORT: &str = "models/critic_report.json";
pub const REPAIR: &str = "models/repair.ckpt";
pub const SAMPLES: &str = "samples/synthetic.jsonl";
pub const METRICS_LOG: &str = "metrics.jsonl";
pub const MANIFEST: &str = "manifest.json";
pub const REPORT_METRICS: &str = "report/metrics.csv";
pub const REPORT_ABLATION: &str = "report/ablation.csv";
pub const REPORT_HISTOGRAMS: &str = "report/histograms.csv";
pub const REPORT_SUMMARY: &str = "report/summary.json";

pub fn rl_checkpoint(ablation: Ablation) -> String {
    format!("models/rl_{}.ckpt", ablation.name())
}

/// Actor checkpoints that `generate` accepts, by name.
pub fn actor_checkpoint(model: &str) -> Result<String, CliError> {
    match model {
        "warmstart" => Ok(WARMSTART.to_string()),
        "pretrain" => Ok(PRETRAIN.to_string()),
        other => match other.strip_prefix("rl_").map(str::parse::<Ablation>) {
            Some(Ok(a)) => Ok(rl_checkpoint(a)),
            _ => Err(CliError::Config(format!(
                "unknown model {other:?}; expected warmstart, pretrain or rl_A..rl_D"
            ))),
        },
    }
}

pub fn run_name(model: &str, cs: CsMode) -> String {
    format!("{model}.{}", cs.name())
}

pub fn generation_path(run: &str) -> String {
    format!("generations/{run}.jsonl")
}

pub fn trace_path(run: &str) -> String {
    format!("generations/{run}.trace.jsonl")
}

pub fn eval_path(run: &str) -> String {
    format!("eval/{run}.jsonl")
}

pub fn eval_table_path(run: &str) -> String {
    format!("eval/{run}.csv")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ManifestEntry {
    config_hash: String,
    sha256: String,
}

type Manifest = BTreeMap<String, ManifestEntry>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// An output directory bound to one configuration.
pub struct Workspace {
    pub config: RunConfig,
    pub hash: String,
    pub root: PathBuf,
    pub verbose: bool,
}

/// Header line of the line-delimited artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    config_hash: String,
}

impl Workspace {
    pub fn open(config: RunConfig) -> Result<Self, CliError> {
        config.validate()?;
        let root = config.output_dir.clone();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self {
            hash: config.hash(),
            config,
            root,
            verbose: true,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[{}] {}", &self.hash[..8], msg.as_ref());
        }
    }

    fn manifest(&self) -> Result<Manifest, CliError> {
        let path = self.path(MANIFEST);
        if !path.exists() {
            return Ok(Manifest::new());
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invariant(format!("{MANIFEST}: {e}")))
    }

    /// Registers a freshly written artifact.
    fn record(&self, rel: &str) -> Result<(), CliError> {
        let mut manifest = self.manifest()?;
        manifest.insert(
            rel.to_string(),
            ManifestEntry {
                config_hash: self.hash.clone(),
                sha256: file_digest(&self.path(rel))?,
            },
        );
        let path = self.path(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    /// Path of an existing artifact produced under the current config.
    pub fn require(&self, rel: &str, produced_by: &str) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        let manifest = self.manifest()?;
        let Some(entry) = manifest.get(rel).filter(|_| path.exists()) else {
            return Err(CliError::Prerequisite(format!(
                "{rel} not found; run `{produced_by}` first"
            )));
        };
        if entry.config_hash != self.hash {
            return Err(CliError::HashMismatch {
                artifact: rel.to_string(),
                expected: self.hash.clone(),
                found: entry.config_hash.clone(),
            });
        }
        if file_digest(&path)? != entry.sha256 {
            return Err(CliError::Invariant(format!("{rel} changed after it was written")));
        }
        Ok(path)
    }

    pub fn has(&self, rel: &str) -> bool {
        self.manifest()
            .is_ok_and(|m| m.get(rel).is_some_and(|e| e.config_hash == self.hash))
            && self.path(rel).exists()
    }

    fn prepare(&self, rel: &str) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        Ok(path)
    }

    fn write(&self, rel: &str, contents: &str) -> Result<(), CliError> {
        let path = self.prepare(rel)?;
        fs::write(&path, contents).map_err(io_err(&path))?;
        self.record(rel)
    }

    fn write_lines<T: Serialize>(&self, rel: &str, kind: &str, items: &[T]) -> Result<(), CliError> {
        let header = Header {
            kind: kind.to_string(),
            config_hash: self.hash.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes") + "\n";
        for item in items {
            out += &serde_json::to_string(item).map_err(|e| CliError::Invariant(e.to_string()))?;
            out.push('\n');
        }
        self.write(rel, &out)
    }

    fn read_lines<T: for<'de> Deserialize<'de>>(
        &self,
        rel: &str,
        kind: &str,
        produced_by: &str,
    ) -> Result<Vec<T>, CliError> {
        let path = self.require(rel, produced_by)?;
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let mut lines = BufReader::new(file).lines();
        let malformed = |msg: String| CliError::Invariant(format!("{rel}: {msg}"));
        let header: Header = match lines.next() {
            Some(line) => serde_json::from_str(&line.map_err(io_err(&path))?).map_err(|e| malformed(e.to_string()))?,
            None => return Err(malformed("empty file".into())),
        };
        if header.kind != kind {
            return Err(malformed(format!("expected {kind}, found {}", header.kind)));
        }
        let mut out = Vec::new();
        for line in lines {
            let line = line.map_err(io_err(&path))?;
            out.push(serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?);
        }
        Ok(out)
    }

    fn log_metrics(&self, metrics: &[EpochMetrics]) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Line<'a> {
            stage: &'a str,
            epoch: usize,
            values: &'a BTreeMap<String, f64>,
            seed: u64,
            config_hash: &'a str,
        }
        let path = self.path(METRICS_LOG);
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        for m in metrics {
            let line = Line {
                stage: &m.stage,
                epoch: m.epoch,
                values: &m.values,
                seed: self.config.seed,
                config_hash: &self.hash,
            };
            writeln!(file, "{}", serde_json::to_string(&line).expect("metrics serialize")).map_err(io_err(&path))?;
            let summary: Vec<String> = m.values.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
            self.note(format!("{} epoch {}: {}", m.stage, m.epoch, summary.join(" ")));
        }
        Ok(())
    }

    fn meta(&self, stage: &str) -> CheckpointMeta {
        CheckpointMeta::from([
            ("config_hash".to_string(), self.hash.clone()),
            ("stage".to_string(), stage.to_string()),
            ("seed".to_string(), self.config.seed.to_string()),
        ])
    }

    fn save_model(&self, model: &Model, rel: &str, stage: &str) -> Result<(), CliError> {
        let path = self.prepare(rel)?;
        model.save(&path, &self.meta(stage))?;
        self.record(rel)
    }

    fn load_model(&self, rel: &str, role: Role, produced_by: &str) -> Result<Model, CliError> {
        let path = self.require(rel, produced_by)?;
        let (model, meta) = Model::load(&path)?;
        if model.role() != role {
            return Err(CliError::Invariant(format!(
                "{rel} holds a {} model, expected {}",
                model.role(),
                role
            )));
        }
        if meta.get("config_hash") != Some(&self.hash) {
            return Err(CliError::HashMismatch {
                artifact: rel.to_string(),
                expected: self.hash.clone(),
                found: meta.get("config_hash").cloned().unwrap_or_default(),
            });
        }
        Ok(model)
    }

    fn dataset(&self, split: Split) -> Result<Dataset, CliError> {
        let rel = match split {
            Split::Train => TRAIN_DATA,
            Split::Test => TEST_DATA,
        };
        Ok(load_dataset(&self.require(rel, "gen-data")?)?)
    }

    fn init_rng(&self, label: &str) -> ChaCha8Rng {
        derive_rng(self.config.seed, label, 0)
    }
}

fn encoded(dataset: &Dataset) -> Result<Vec<EncodedProblem>, CliError> {
    Ok(dataset
        .problems
        .iter()
        .map(EncodedProblem::new)
        .collect::<Result<_, _>>()?)
}

pub fn gen_data(ws: &Workspace) -> Result<(), CliError> {
    for (split, rel) in [(Split::Train, TRAIN_DATA), (Split::Test, TEST_DATA)] {
        let ds = generate_dataset(&ws.config.dataset(split));
        let path = ws.prepare(rel)?;
        save_dataset(&ds, &path)?;
        ws.record(rel)?;
        ws.note(format!("wrote {} {} problems", ds.problems.len(), split.name()));
    }
    Ok(())
}

/// Bare programs for pretraining, drawn from their own stream.
pub fn pretrain_corpus(config: &RunConfig) -> Result<Vec<Vec<usize>>, CliError> {
    let mut dc = config.dataset(Split::Train);
    dc.problems = config.pretrain_programs;
    dc.seed = derive_seed(config.seed, "pretrain/corpus", 0);
    generate_dataset(&dc)
        .problems
        .iter()
        .map(|p| {
            let ids = encode_program(&p.ground_truth)?;
            Ok(ids[1..ids.len() - 1].to_vec())
        })
        .collect()
}

pub fn pretrain(ws: &Workspace) -> Result<(), CliError> {
    ws.require(TRAIN_DATA, "gen-data")?;
    let mut actor = Model::new(ws.config.model(Role::Actor), &mut ws.init_rng("init/actor"));
    let corpus = pretrain_corpus(&ws.config)?;
    let history = ntp_pretrain(&mut actor, &corpus, &ws.config.pretrain_optim(), ws.config.seed)?;
    ws.log_metrics(&history)?;
    ws.save_model(&actor, PRETRAIN, "pretrain")
}

pub fn warmstart(ws: &Workspace) -> Result<(), CliError> {
    let mut actor = ws.load_model(PRETRAIN, Role::Actor, "pretrain")?;
    let train = encoded(&ws.dataset(Split::Train)?)?;
    let history = ce_warmstart(&mut actor, &train, &ws.config.warmstart_optim(), ws.config.seed)?;
    ws.log_metrics(&history)?;
    ws.save_model(&actor, WARMSTART, "warmstart")
}

pub fn collect(ws: &Workspace) -> Result<(), CliError> {
    let actor = ws.load_model(WARMSTART, Role::Actor, "warmstart")?;
    let train = ws.dataset(Split::Train)?;
    let samples = collect_synthetic(
        &actor,
        &train,
        ws.config.collect_samples,
        &ws.config.collect_sampling(),
        ws.config.seed,
    )?;
    let path = ws.prepare(SAMPLES)?;
    save_samples(&samples, &path)?;
    ws.record(SAMPLES)?;
    let passed = samples.iter().filter(|s| s.outcome.index() == 3).count();
    ws.note(format!("collected {} samples, {passed} passing", samples.len()));
    Ok(())
}

fn problem_map(dataset: &Dataset) -> Result<HashMap<String, EncodedProblem>, CliError> {
    dataset
        .problems
        .iter()
        .map(|p| Ok((p.id.clone(), EncodedProblem::new(p)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticReports {
    pub critic: CriticReport,
    pub test_critic: CriticReport,
}

pub fn train_critic(ws: &Workspace) -> Result<CriticReports, CliError> {
    let samples = load_samples(&ws.require(SAMPLES, "collect")?)?;
    let problems = problem_map(&ws.dataset(Split::Train)?)?;
    let optim = ws.config.critic_optim();
    let mut critic = Model::new(ws.config.model(Role::Critic), &mut ws.init_rng("init/critic"));
    let report = fit_critic(&mut critic, &samples, &problems, &optim, ws.config.seed)?;
    ws.log_metrics(&report.epochs)?;
    ws.save_model(&critic, CRITIC, "critic")?;
    let mut test_critic = Model::new(ws.config.model(Role::TestCritic), &mut ws.init_rng("init/test_critic"));
    let test_report = train_test_critic(&mut test_critic, &samples, &problems, &optim, ws.config.seed)?;
    ws.log_metrics(&test_report.epochs)?;
    ws.save_model(&test_critic, TEST_CRITIC, "test_critic")?;
    let reports = CriticReports {
        critic: report,
        test_critic: test_report,
    };
    ws.note(format!(
        "held-out accuracy: critic {:.3}, test-critic {:.3}",
        reports.critic.heldout.accuracy, reports.test_critic.heldout.accuracy
    ));
    ws.write(
        CRITIC_REPORT,
        &(serde_json::to_string_pretty(&reports).expect("report serializes") + "\n"),
    )?;
    Ok(reports)
}

pub fn train_rl(ws: &Workspace, ablation: Ablation) -> Result<(), CliError> {
    let mut actor = ws.load_model(WARMSTART, Role::Actor, "warmstart")?;
    let critic = ws.load_model(CRITIC, Role::Critic, "train-critic")?;
    let train = ws.dataset(Split::Train)?;
    let history = rl_finetune(
        &mut actor,
        Some(&critic),
        &train,
        &ws.config.rl_config_for(ablation),
        ws.config.seed,
    )?;
    ws.log_metrics(&history)?;
    ws.save_model(&actor, &rl_checkpoint(ablation), &format!("rl_{}", ablation.name()))
}

pub fn train_repair(ws: &Workspace) -> Result<(), CliError> {
    let samples = load_samples(&ws.require(SAMPLES, "collect")?)?;
    let problems = problem_map(&ws.dataset(Split::Train)?)?;
    let pairs = repair_pairs(&samples, &problems)?;
    ws.note(format!("{} repair pairs", pairs.len()));
    let mut model = if ws.config.repair_from_warmstart {
        let actor = ws.load_model(WARMSTART, Role::Actor, "warmstart")?;
        Model::from_store(ws.config.model(Role::Repair), actor.store)?
    } else {
        Model::new(ws.config.model(Role::Repair), &mut ws.init_rng("init/repair"))
    };
    let history = fit_repair(&mut model, &pairs, &ws.config.repair_optim(), ws.config.seed)?;
    ws.log_metrics(&history)?;
    ws.save_model(&model, REPAIR, "repair")
}

/// Runs generation on the test split and returns the run name.
pub fn generate(ws: &Workspace, model: &str, cs: CsMode, trace: bool) -> Result<String, CliError> {
    let actor_rel = actor_checkpoint(model)?;
    let producer = if model == "warmstart" || model == "pretrain" {
        model.to_string()
    } else {
        "train-rl".into()
    };
    let actor = ws.load_model(&actor_rel, Role::Actor, &producer)?;
    let test_critic = ws.load_model(TEST_CRITIC, Role::TestCritic, "train-critic")?;
    let repair = match cs {
        CsMode::RefineRepair => Some(ws.load_model(REPAIR, Role::Repair, "train-repair")?),
        _ => None,
    };
    let test = ws.dataset(Split::Test)?;
    let models = Models {
        actor: &actor,
        test_critic: Some(&test_critic),
        repair: repair.as_ref(),
    };
    let cs_config = ws.config.cs_config(cs);
    let results: Vec<(GenerationBatch, Trace)> = test
        .problems
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = derive_rng(ws.config.seed, "generate", i as u64);
            critic_sampling(&models, p, &cs_config, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    let run = run_name(model, cs);
    let (batches, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    if let Some(b) = batches.iter().find(|b| b.programs.len() != cs_config.n) {
        return Err(CliError::Invariant(format!(
            "{} produced {} programs",
            b.problem_id,
            b.programs.len()
        )));
    }
    ws.write_lines(&generation_path(&run), "generations", &batches)?;
    if trace {
        ws.write_lines(&trace_path(&run), "trace", &traces)?;
    }
    let mut branches: BTreeMap<String, usize> = BTreeMap::new();
    for t in &traces {
        *branches.entry(format!("{:?}", t.branch)).or_default() += 1;
    }
    ws.note(format!("generated {run}: branches {branches:?}"));
    Ok(run)
}

pub fn evaluate(ws: &Workspace, run: &str) -> Result<Vec<MetricRow>, CliError> {
    let batches: Vec<GenerationBatch> = ws.read_lines(&generation_path(run), "generations", "generate")?;
    let test = ws.dataset(Split::Test)?;
    if batches.len() != test.problems.len() {
        return Err(CliError::Invariant(format!(
            "{run}: {} batches for {} problems",
            batches.len(),
            test.problems.len()
        )));
    }
    let records: Vec<EvalRecord> = test
        .problems
        .par_iter()
        .zip(&batches)
        .map(|(p, b)| {
            if b.problem_id != p.id {
                return Err(CliError::Invariant(format!(
                    "batch {} does not match problem {}",
                    b.problem_id, p.id
                )));
            }
            Ok(EvalRecord::from_batch(p, b))
        })
        .collect::<Result<_, _>>()?;
    let rows = metric_table(&records, &ws.config.report_spec());
    ws.write_lines(&eval_path(run), "eval", &records)?;
    ws.write(&eval_table_path(run), &to_csv(&rows))?;
    Ok(rows)
}

/// Runs listed in the manifest with an evaluation under the current config.
pub fn evaluated_runs(ws: &Workspace) -> Result<Vec<String>, CliError> {
    Ok(ws
        .manifest()?
        .iter()
        .filter(|(_, e)| e.config_hash == ws.hash)
        .filter_map(|(rel, _)| rel.strip_prefix("eval/")?.strip_suffix(".jsonl").map(str::to_string))
        .collect())
}

fn fmt_opt<T: ToString>(v: Option<T>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |x| x.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub runs: BTreeMap<String, Vec<MetricRow>>,
}

/// Aggregates every evaluated run into the report tables.
pub fn report(ws: &Workspace) -> Result<Summary, CliError> {
    let runs = evaluated_runs(ws)?;
    if runs.is_empty() {
        return Err(CliError::Prerequisite("no evaluated runs; run `evaluate` first".into()));
    }
    let spec = ws.config.report_spec();
    let mut summary = Summary {
        config_hash: ws.hash.clone(),
        seed: ws.config.seed,
        runs: BTreeMap::new(),
    };
    let mut metrics = String::from("run,metric,k,n,tier,value\n");
    let mut ablation = String::from("run,model,cs");
    for k in &spec.ks {
        write!(ablation, ",pass@{k}").expect("string write");
    }
    ablation.push('\n');
    let mut histograms = String::from("run,test_set,tier,category,percent\n");
    for run in &runs {
        let records: Vec<EvalRecord> = ws.read_lines(&eval_path(run), "eval", "evaluate")?;
        let rows = metric_table(&records, &spec);
        for r in &rows {
            writeln!(
                metrics,
                "{run},{},{},{},{},{:.6}",
                r.metric,
                fmt_opt(r.k, ""),
                fmt_opt(r.n, ""),
                fmt_opt(r.tier, "all"),
                r.value
            )
            .expect("string write");
        }
        let (model, cs) = run.split_once('.').unwrap_or((run.as_str(), ""));
        write!(ablation, "{run},{model},{cs}").expect("string write");
        for &k in &spec.ks {
            let v = rows
                .iter()
                .find(|r| r.metric == "pass@k_unbiased" && r.k == Some(k) && r.tier.is_none())
                .map_or(String::new(), |r| format!("{:.6}", r.value));
            write!(ablation, ",{v}").expect("string write");
        }
        ablation.push('\n');
        for test_set in [TestSet::Example, TestSet::Hidden] {
            let h = outcome_histogram(&records, test_set);
            let tiers = std::iter::once(("all".to_string(), &h.overall))
                .chain(h.per_tier.iter().map(|(t, hist)| (t.to_string(), hist)));
            for (tier, hist) in tiers {
                for (o, v) in &hist.categories {
                    writeln!(histograms, "{run},{},{tier},{},{v:.6}", test_set.name(), o.name()).expect("string write");
                }
                for (s, v) in &hist.subtypes {
                    writeln!(histograms, "{run},{},{tier},{},{v:.6}", test_set.name(), s.name()).expect("string write");
                }
            }
        }
        summary.runs.insert(run.clone(), rows);
    }
    ws.write(REPORT_METRICS, &metrics)?;
    ws.write(REPORT_ABLATION, &ablation)?;
    ws.write(REPORT_HISTOGRAMS, &histograms)?;
    ws.write(
        REPORT_SUMMARY,
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    ws.note(format!("report over {} runs", runs.len()));
    Ok(summary)
}

/// Generation runs of the standard plan: the warm-start baseline, the
/// ablation grid and the critic sampling variants of the full method.
pub const STANDARD_RUNS: [(&str, CsMode); 5] = [
    ("warmstart", CsMode::Off),
    ("rl_B", CsMode::Off),
    ("rl_D", CsMode::Off),
    ("rl_D", CsMode::Refine),
    ("rl_D", CsMode::RefineRepair),
];

/// Every stage in order, then the standard generation runs and a report.
pub fn run_all(ws: &Workspace) -> Result<Summary, CliError> {
    gen_data(ws)?;
    pretrain(ws)?;
    warmstart(ws)?;
    collect(ws)?;
    train_critic(ws)?;
    let configured = ws.config.ablation()?;
    let mut ablations = vec![Ablation::B, Ablation::D];
    if !ablations.contains(&configured) {
        ablations.push(configured);
    }
    for a in ablations {
        train_rl(ws, a)?;
    }
    train_repair(ws)?;
    for (model, cs) in STANDARD_RUNS {
        let run = generate(ws, model, cs, false)?;
        evaluate(ws, &run)?;
    }
    report(ws)
}

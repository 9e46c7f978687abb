//! Critic Sampling: batch generation, example-test partition, refining
//! from critic-selected seeds and repairing complete failures.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{evaluate_ids, CorpusError, EncodedProblem, ProblemSpec, TokenId, Vocabulary};
use crate::minilang::OutcomeReport;
use crate::models::{
    critic_forward, prefix_pass_values, repair_input, sample, sample_with_prefix, Decoded, Model, ModelError, Role,
    SamplingConfig, TEST_CRITIC_PASSED,
};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("refining needs at least one passing program")]
    NothingToRefine,
    #[error("cannot take the top {m} of {available} failing programs")]
    TooFewFailing { m: usize, available: usize },
    #[error("{0} model required")]
    MissingModel(&'static str),
}

/// How a program in a batch was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Origin {
    Sampled,
    /// Completion of a seed cut from program `origin` of the batch it was
    /// refined from.
    Refined {
        origin: usize,
    },
    /// Repair of program `origin` of the failed batch.
    Repaired {
        origin: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Decoded ids, EOS included when one was produced.
    pub ids: Vec<TokenId>,
    pub mean_log_prob: f64,
    pub example: OutcomeReport,
    /// Sequence-level PassedTest probability from the test-critic.
    pub score: Option<f64>,
    pub origin: Origin,
}

impl Candidate {
    pub fn passed_examples(&self) -> bool {
        self.example.passed()
    }

    /// Tokens before the first EOS.
    pub fn program(&self) -> &[TokenId] {
        program_part(&self.ids)
    }
}

fn program_part(ids: &[TokenId]) -> &[TokenId] {
    let eos = Vocabulary::standard().eos();
    let end = ids.iter().position(|&t| t == eos).unwrap_or(ids.len());
    &ids[..end]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationBatch {
    pub problem_id: String,
    pub programs: Vec<Candidate>,
}

impl GenerationBatch {
    /// Indices of programs passing the example tests.
    pub fn passing(&self) -> Vec<usize> {
        (0..self.programs.len())
            .filter(|&i| self.programs[i].passed_examples())
            .collect()
    }

    pub fn failing(&self) -> Vec<usize> {
        (0..self.programs.len())
            .filter(|&i| !self.programs[i].passed_examples())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub prefix: Vec<TokenId>,
    pub origin: usize,
    pub copies: usize,
}

/// Where a seed was cut and why.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedCut {
    /// 1-based position of the highest pass value.
    pub t_max: usize,
    /// 1-based position of the first token judged more likely to fail,
    /// when one occurs at or before `t_max`.
    pub chop: Option<usize>,
    pub prefix_len: usize,
}

/// Applies the seed rule to per-prefix pass values `p_1..p_T`.
pub fn chop_prefix(pass_values: &[f64]) -> SeedCut {
    if pass_values.is_empty() {
        return SeedCut {
            t_max: 0,
            chop: None,
            prefix_len: 0,
        };
    }
    let mut best = 0;
    for (i, &p) in pass_values.iter().enumerate() {
        if p > pass_values[best] {
            best = i;
        }
    }
    let t_max = best + 1;
    let chop = pass_values[..t_max].iter().position(|&p| p < 0.5).map(|j| j + 1);
    SeedCut {
        t_max,
        chop,
        prefix_len: chop.map_or(t_max, |j| j - 1),
    }
}

/// Seed prefix of a passing program. Only positions that leave at least
/// one token of `ids` to regenerate are eligible.
pub fn select_seed(
    test_critic: &Model,
    source: &[TokenId],
    ids: &[TokenId],
) -> Result<(Vec<TokenId>, SeedCut), InferenceError> {
    let program = program_part(ids);
    let eligible = program.len().min(ids.len().saturating_sub(1));
    if eligible == 0 {
        return Ok((Vec::new(), chop_prefix(&[])));
    }
    let values = prefix_pass_values(test_critic, source, &program[..eligible])?;
    let cut = chop_prefix(&values);
    Ok((program[..cut.prefix_len].to_vec(), cut))
}

/// `floor(n / k)` copies per slot, with the remaining `n mod k` going one
/// each to the best `ranked` slots. `ranked` lists slot indices best first.
pub fn stack_counts(ranked: &[usize], n: usize) -> Vec<usize> {
    let k = ranked.len();
    if k == 0 {
        return Vec::new();
    }
    let mut counts = vec![n / k; k];
    for &slot in &ranked[..n % k] {
        counts[slot] += 1;
    }
    counts
}

/// Orders by descending score then descending mean log-likelihood; the
/// original index breaks remaining ties.
pub fn rank(cands: &[&Candidate], primary_score: bool) -> Vec<usize> {
    let key = |c: &Candidate| {
        let s = c.score.unwrap_or(f64::NEG_INFINITY);
        if primary_score {
            (s, c.mean_log_prob)
        } else {
            (c.mean_log_prob, s)
        }
    };
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (key(cands[a]), key(cands[b]));
        kb.0.partial_cmp(&ka.0)
            .unwrap_or(Ordering::Equal)
            .then(kb.1.partial_cmp(&ka.1).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    order
}

/// Shared context for one problem.
pub struct ProblemContext<'a> {
    pub problem: &'a ProblemSpec,
    pub encoded: EncodedProblem,
}

impl<'a> ProblemContext<'a> {
    pub fn new(problem: &'a ProblemSpec) -> Result<Self, InferenceError> {
        Ok(Self {
            problem,
            encoded: EncodedProblem::new(problem)?,
        })
    }
}

fn score(test_critic: Option<&Model>, source: &[TokenId], ids: &[TokenId]) -> Result<Option<f64>, InferenceError> {
    match test_critic {
        Some(tc) if !ids.is_empty() => Ok(Some(critic_forward(tc, source, ids)?.sequence[TEST_CRITIC_PASSED])),
        _ => Ok(None),
    }
}

fn finish(
    ctx: &ProblemContext<'_>,
    test_critic: Option<&Model>,
    decoded: Decoded,
    origin: Origin,
) -> Result<Candidate, InferenceError> {
    Ok(Candidate {
        example: evaluate_ids(&decoded.ids, &ctx.problem.example_tests),
        score: score(test_critic, &ctx.encoded.source, &decoded.ids)?,
        mean_log_prob: decoded.mean_log_prob(),
        ids: decoded.ids,
        origin,
    })
}

/// One independent stream per job so jobs can run on any worker.
fn job_seeds<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.random()).collect()
}

/// `n` independent nucleus samples, evaluated on the example tests and
/// scored by the test-critic when one is given.
pub fn generate_batch<R: Rng + ?Sized>(
    actor: &Model,
    test_critic: Option<&Model>,
    ctx: &ProblemContext<'_>,
    n: usize,
    sampling: &SamplingConfig,
    rng: &mut R,
) -> Result<GenerationBatch, InferenceError> {
    if n == 0 {
        return Err(InferenceError::EmptyBatch);
    }
    let programs = job_seeds(rng, n)
        .into_par_iter()
        .map(|s| {
            let d = sample(actor, &ctx.encoded.source, sampling, &mut ChaCha8Rng::seed_from_u64(s))?;
            finish(ctx, test_critic, d, Origin::Sampled)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GenerationBatch {
        problem_id: ctx.problem.id.clone(),
        programs,
    })
}

/// Record of one seed for traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub origin: usize,
    pub cut: SeedCut,
    pub copies: usize,
}

/// Refined programs, their seeds and the per-seed trace.
pub type Refined = (Vec<Candidate>, Vec<Seed>, Vec<SeedTrace>);

/// Resamples `n` programs from seeds cut out of the passing programs.
#[allow(clippy::too_many_arguments)]
pub fn refine<R: Rng + ?Sized>(
    actor: &Model,
    test_critic: &Model,
    ctx: &ProblemContext<'_>,
    batch: &GenerationBatch,
    n: usize,
    sampling: &SamplingConfig,
    rng: &mut R,
) -> Result<Refined, InferenceError> {
    let passing = batch.passing();
    if passing.is_empty() {
        return Err(InferenceError::NothingToRefine);
    }
    let cands: Vec<&Candidate> = passing.iter().map(|&i| &batch.programs[i]).collect();
    let counts = stack_counts(&rank(&cands, true), n);
    let mut seeds = Vec::with_capacity(passing.len());
    let mut traces = Vec::with_capacity(passing.len());
    for ((&origin, cand), copies) in passing.iter().zip(&cands).zip(counts) {
        let (prefix, cut) = select_seed(test_critic, &ctx.encoded.source, &cand.ids)?;
        traces.push(SeedTrace { origin, cut, copies });
        seeds.push(Seed { prefix, origin, copies });
    }
    let jobs: Vec<&Seed> = seeds.iter().flat_map(|s| std::iter::repeat_n(s, s.copies)).collect();
    let programs = jobs
        .into_par_iter()
        .zip(job_seeds(rng, n))
        .map(|(seed, s)| {
            let d = sample_with_prefix(
                actor,
                &ctx.encoded.source,
                &seed.prefix,
                sampling,
                &mut ChaCha8Rng::seed_from_u64(s),
            )?;
            finish(ctx, Some(test_critic), d, Origin::Refined { origin: seed.origin })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((programs, seeds, traces))
}

/// Repairs the top `m` failing programs (by test-critic score, then mean
/// log-likelihood) into `n` new programs, conditioning on each one's
/// aggregate example-test outcome.
#[allow(clippy::too_many_arguments)]
pub fn repair<R: Rng + ?Sized>(
    repair_model: &Model,
    test_critic: &Model,
    ctx: &ProblemContext<'_>,
    batch: &GenerationBatch,
    m: usize,
    n: usize,
    sampling: &SamplingConfig,
    rng: &mut R,
) -> Result<(Vec<Candidate>, Vec<usize>), InferenceError> {
    if repair_model.role() != Role::Repair {
        return Err(ModelError::WrongRole {
            expected: "repair",
            found: repair_model.role(),
        }
        .into());
    }
    let failing = batch.failing();
    if m == 0 || m > failing.len() {
        return Err(InferenceError::TooFewFailing {
            m,
            available: failing.len(),
        });
    }
    let cands: Vec<&Candidate> = failing.iter().map(|&i| &batch.programs[i]).collect();
    let order = rank(&cands, true);
    let top: Vec<usize> = order[..m].to_vec();
    let counts = stack_counts(&(0..m).collect::<Vec<_>>(), n);
    let mut jobs = Vec::with_capacity(n);
    for (slot, &c) in top.iter().enumerate() {
        let cand = cands[c];
        let input = repair_input(
            &ctx.encoded.description,
            cand.program(),
            cand.example.category,
            cand.example.subtype,
        )?;
        jobs.extend(std::iter::repeat_n((failing[c], input), counts[slot]));
    }
    let programs = jobs
        .into_par_iter()
        .zip(job_seeds(rng, n))
        .map(|((origin, input), s)| {
            let d = sample(repair_model, &input, sampling, &mut ChaCha8Rng::seed_from_u64(s))?;
            finish(ctx, Some(test_critic), d, Origin::Repaired { origin })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((programs, top.iter().map(|&c| failing[c]).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticSamplingConfig {
    pub n: usize,
    pub m: usize,
    pub refine: bool,
    pub repair: bool,
    pub sampling: SamplingConfig,
}

impl Default for CriticSamplingConfig {
    fn default() -> Self {
        Self {
            n: 20,
            m: 1,
            refine: true,
            repair: true,
            sampling: SamplingConfig::default(),
        }
    }
}

/// Which path the pipeline took for one problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// The first batch was returned unchanged.
    Raw,
    Refine,
    /// Complete failure, repaired batch returned as is.
    Repair,
    RepairRefine,
}

/// Walk-through of one problem's generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub problem_id: String,
    pub branch: Branch,
    pub batch_passing: usize,
    pub batch_failing: usize,
    pub seeds: Vec<SeedTrace>,
    pub repair_candidates: Vec<usize>,
    pub repaired_passing: Option<usize>,
}

pub struct Models<'m> {
    pub actor: &'m Model,
    pub test_critic: Option<&'m Model>,
    pub repair: Option<&'m Model>,
}

/// The full pipeline for one problem; always yields exactly `config.n`
/// programs.
pub fn critic_sampling<R: Rng + ?Sized>(
    models: &Models<'_>,
    problem: &ProblemSpec,
    config: &CriticSamplingConfig,
    rng: &mut R,
) -> Result<(GenerationBatch, Trace), InferenceError> {
    let ctx = ProblemContext::new(problem)?;
    let need_critic = config.refine || config.repair;
    let test_critic = match models.test_critic {
        Some(tc) => Some(tc),
        None if need_critic => return Err(InferenceError::MissingModel("test_critic")),
        None => None,
    };
    let first = generate_batch(models.actor, test_critic, &ctx, config.n, &config.sampling, rng)?;
    let mut trace = Trace {
        problem_id: problem.id.clone(),
        branch: Branch::Raw,
        batch_passing: first.passing().len(),
        batch_failing: first.failing().len(),
        seeds: Vec::new(),
        repair_candidates: Vec::new(),
        repaired_passing: None,
    };
    let mut current = first;
    if current.passing().is_empty() {
        if !config.repair {
            return Ok((current, trace));
        }
        let repair_model = models.repair.ok_or(InferenceError::MissingModel("repair"))?;
        let tc = test_critic.expect("checked above");
        let (programs, chosen) = repair(
            repair_model,
            tc,
            &ctx,
            &current,
            config.m,
            config.n,
            &config.sampling,
            rng,
        )?;
        current = GenerationBatch {
            problem_id: problem.id.clone(),
            programs,
        };
        trace.branch = Branch::Repair;
        trace.repair_candidates = chosen;
        trace.repaired_passing = Some(current.passing().len());
        if current.passing().is_empty() || !config.refine {
            return Ok((current, trace));
        }
        trace.branch = Branch::RepairRefine;
    } else if config.refine {
        trace.branch = Branch::Refine;
    } else {
        return Ok((current, trace));
    }
    let tc = test_critic.expect("checked above");
    let (programs, _, seeds) = refine(models.actor, tc, &ctx, &current, config.n, &config.sampling, rng)?;
    trace.seeds = seeds;
    Ok((
        GenerationBatch {
            problem_id: problem.id.clone(),
            programs,
        },
        trace,
    ))
}

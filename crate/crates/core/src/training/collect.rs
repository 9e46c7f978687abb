use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{evaluate_ids, Dataset, EncodedProblem, TokenId};
use crate::minilang::{ErrorSubtype, Outcome};
use crate::models::{sample, Model, SamplingConfig};
use crate::seeding::derive_rng;

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Sampled,
    GroundTruth,
}

/// A program with its hidden-test outcome. `program` is the decoded id
/// sequence, EOS included when one was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub problem_id: String,
    pub program: Vec<TokenId>,
    pub outcome: Outcome,
    pub subtype: ErrorSubtype,
    pub source: SampleSource,
}

/// Draws `per_problem` samples for every problem from a frozen actor and
/// labels them on the hidden tests; the ground truth is appended with
/// label PassedTest. Problems run in parallel on independent streams.
pub fn collect_synthetic(
    actor: &Model,
    dataset: &Dataset,
    per_problem: usize,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<Vec<LabeledSample>, TrainError> {
    let per: Vec<Result<Vec<LabeledSample>, TrainError>> = dataset
        .problems
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let enc = EncodedProblem::new(p)?;
            let mut rng = derive_rng(seed, "collect", i as u64);
            let mut out = Vec::with_capacity(per_problem + 1);
            for _ in 0..per_problem {
                let s = sample(actor, &enc.source, sampling, &mut rng)?;
                let report = evaluate_ids(&s.ids, &p.hidden_tests);
                out.push(LabeledSample {
                    problem_id: p.id.clone(),
                    program: s.ids,
                    outcome: report.category,
                    subtype: report.subtype,
                    source: SampleSource::Sampled,
                });
            }
            out.push(LabeledSample {
                problem_id: p.id.clone(),
                program: enc.target,
                outcome: Outcome::PassedTest,
                subtype: ErrorSubtype::None,
                source: SampleSource::GroundTruth,
            });
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(dataset.problems.len() * (per_problem + 1));
    for r in per {
        all.extend(r?);
    }
    Ok(all)
}

pub fn save_samples(samples: &[LabeledSample], path: &Path) -> Result<(), TrainError> {
    let io = |e: std::io::Error| TrainError::Samples(e.to_string());
    let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| TrainError::Samples(e.to_string()))?;
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_samples(path: &Path) -> Result<Vec<LabeledSample>, TrainError> {
    let file = fs::File::open(path).map_err(|e| TrainError::Samples(e.to_string()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| TrainError::Samples(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: LabeledSample =
            serde_json::from_str(&line).map_err(|e| TrainError::Samples(format!("line {}: {e}", n + 1)))?;
        if s.subtype.category() != s.outcome {
            return Err(TrainError::Samples(format!(
                "line {}: subtype does not match outcome",
                n + 1
            )));
        }
        out.push(s);
    }
    Ok(out)
}

//! Synthetic problem corpus, the shared vocabulary, sequence encoding and
//! dataset files.

mod generate;
mod vocab;

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{
    generate_dataset, generate_problem, DatasetConfig, EXAMPLE_TESTS, MAX_HIDDEN_TESTS, MIN_HIDDEN_TESTS,
};
pub use vocab::{TokenId, Vocabulary, BOS, DESCRIPTION_WORDS, EOS, MAX_VOCAB_LITERAL, PAD, SEP};

use crate::minilang::{evaluate_program, lex, render, DslToken, ErrorSubtype, Outcome, OutcomeReport, TestCase};

pub const MAX_SOURCE_LEN: usize = 64;
pub const MAX_TARGET_LEN: usize = 96;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("tier must be 1, 2 or 3, got {0}")]
    InvalidTier(u8),
    #[error("no valid tests for tier {tier} program `{program}` after 100 redraws")]
    GenerationFailed { tier: u8, program: String },
    #[error("token {0:?} is not in the vocabulary")]
    UnknownToken(String),
    #[error("token id {0} is out of range")]
    UnknownId(TokenId),
    #[error("{kind} sequence of length {len} exceeds the limit of {max}")]
    TooLong { kind: &'static str, len: usize, max: usize },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("problem {id}: {message}")]
    Invariant { id: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

mod token_strings {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(tokens: &[DslToken], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(tokens.iter().map(|t| t.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DslToken>, D::Error> {
        let words: Vec<String> = Vec::deserialize(d)?;
        words
            .iter()
            .map(|w| {
                DslToken::from_word(w).ok_or_else(|| serde::de::Error::custom(format!("unknown program token {w:?}")))
            })
            .collect()
    }
}

/// One synthesis task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: String,
    pub tier: u8,
    pub description: Vec<String>,
    pub example_tests: Vec<TestCase>,
    pub hidden_tests: Vec<TestCase>,
    #[serde(with = "token_strings")]
    pub ground_truth: Vec<DslToken>,
}

impl ProblemSpec {
    pub fn all_tests(&self) -> impl Iterator<Item = &TestCase> {
        self.example_tests.iter().chain(&self.hidden_tests)
    }

    /// Checks the problem invariants: the ground truth passes every test,
    /// input triples are distinct, and `return 0` fails the hidden tests.
    pub fn check(&self) -> Result<(), CorpusError> {
        let fail = |message: String| CorpusError::Invariant {
            id: self.id.clone(),
            message,
        };
        if !(1..=3).contains(&self.tier) {
            return Err(fail(format!("invalid tier {}", self.tier)));
        }
        if self.example_tests.is_empty() || self.hidden_tests.is_empty() {
            return Err(fail("needs example and hidden tests".into()));
        }
        let all: Vec<TestCase> = self.all_tests().copied().collect();
        let report = evaluate_program(&self.ground_truth, &all);
        if !report.passed() {
            return Err(fail(format!(
                "ground truth `{}` fails its tests ({:?})",
                render(&self.ground_truth),
                report.subtype
            )));
        }
        let triples: HashSet<[i64; 3]> = all.iter().map(TestCase::triple).collect();
        if triples.len() != all.len() {
            return Err(fail("duplicate test inputs".into()));
        }
        let trivial = lex("return 0").expect("static program");
        if evaluate_program(&trivial, &self.hidden_tests).passed() {
            return Err(fail("`return 0` passes every hidden test".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub problems: Vec<ProblemSpec>,
    pub split: Split,
    pub generator_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    generator_seed: u64,
    split: Split,
}

/// Encodes a problem as `(BOS description EOS, BOS program EOS)`.
pub fn encode(problem: &ProblemSpec) -> Result<(Vec<TokenId>, Vec<TokenId>), CorpusError> {
    let source = encode_words(problem.description.iter().map(String::as_str), "source", MAX_SOURCE_LEN)?;
    let target = encode_program(&problem.ground_truth)?;
    Ok((source, target))
}

/// `BOS tokens EOS` for any surface strings, with a length limit.
pub fn encode_words<'a>(
    words: impl IntoIterator<Item = &'a str>,
    kind: &'static str,
    max: usize,
) -> Result<Vec<TokenId>, CorpusError> {
    let vocab = Vocabulary::standard();
    let mut ids = vec![vocab.bos()];
    for w in words {
        ids.push(vocab.id(w).ok_or_else(|| CorpusError::UnknownToken(w.to_string()))?);
    }
    ids.push(vocab.eos());
    if ids.len() > max {
        return Err(CorpusError::TooLong {
            kind,
            len: ids.len(),
            max,
        });
    }
    Ok(ids)
}

pub fn encode_program(program: &[DslToken]) -> Result<Vec<TokenId>, CorpusError> {
    let words: Vec<String> = program.iter().map(DslToken::to_string).collect();
    encode_words(words.iter().map(String::as_str), "target", MAX_TARGET_LEN)
}

/// Surface strings for an id sequence.
pub fn decode_ids(ids: &[TokenId]) -> Result<Vec<String>, CorpusError> {
    let vocab = Vocabulary::standard();
    ids.iter()
        .map(|&id| vocab.token(id).map(str::to_string).ok_or(CorpusError::UnknownId(id)))
        .collect()
}

/// Program tokens of a decoded id sequence, cut at the first EOS. `None`
/// when a non-program token (special, word or tag) occurs before it.
pub fn decode_program(ids: &[TokenId]) -> Option<Vec<DslToken>> {
    let vocab = Vocabulary::standard();
    ids.iter()
        .take_while(|&&id| id != vocab.eos())
        .map(|&id| vocab.dsl_token(id))
        .collect()
}

/// Runs a decoded id sequence against `tests`. Sequences that are not pure
/// program text count as compile errors.
pub fn evaluate_ids(ids: &[TokenId], tests: &[TestCase]) -> OutcomeReport {
    match decode_program(ids) {
        Some(tokens) => evaluate_program(&tokens, tests),
        None => OutcomeReport {
            category: Outcome::CompileError,
            subtype: ErrorSubtype::Syntax,
            per_test: Vec::new(),
        },
    }
}

/// Id sequences for one problem as the models consume them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedProblem {
    /// `BOS description EOS`.
    pub source: Vec<TokenId>,
    /// Ground-truth program followed by EOS (no BOS).
    pub target: Vec<TokenId>,
    /// Description ids without delimiters.
    pub description: Vec<TokenId>,
}

impl EncodedProblem {
    pub fn new(problem: &ProblemSpec) -> Result<Self, CorpusError> {
        let (source, target) = encode(problem)?;
        Ok(Self {
            description: source[1..source.len() - 1].to_vec(),
            target: target[1..].to_vec(),
            source,
        })
    }
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let header = Header {
        generator_seed: dataset.generator_seed,
        split: dataset.split,
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for p in &dataset.problems {
        writeln!(out, "{}", serde_json::to_string(p).expect("problem serializes"))?;
    }
    out.flush()?;
    Ok(())
}

/// Loads a JSON Lines dataset. Every problem is re-checked against its
/// invariants; an empty file is an empty training dataset.
pub fn load_dataset(path: &Path) -> Result<Dataset, CorpusError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut header: Option<Header> = None;
    let mut problems: Vec<ProblemSpec> = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| CorpusError::Malformed {
            line: lineno,
            message: e.to_string(),
        };
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(malformed)?);
            continue;
        }
        let p: ProblemSpec = serde_json::from_str(&line).map_err(malformed)?;
        p.check()?;
        if !ids.insert(p.id.clone()) {
            return Err(CorpusError::Invariant {
                id: p.id,
                message: format!("duplicate id on line {lineno}"),
            });
        }
        problems.push(p);
    }
    let header = header.unwrap_or(Header {
        generator_seed: 0,
        split: Split::Train,
    });
    Ok(Dataset {
        problems,
        split: header.split,
        generator_seed: header.generator_seed,
    })
}

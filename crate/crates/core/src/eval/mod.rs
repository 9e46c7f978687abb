//! Metrics over generated programs: pass@k, n@k, outcome histograms and
//! the tables they are reported in.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{evaluate_ids, ProblemSpec};
use crate::inference::GenerationBatch;
use crate::minilang::{ErrorSubtype, Outcome, OutcomeReport};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("k = {k} but problem {problem} has only {available} programs")]
    NotEnoughPrograms {
        problem: String,
        k: usize,
        available: usize,
    },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("n = {n} exceeds k = {k}")]
    NExceedsK { n: usize, k: usize },
    #[error("no records")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub hidden: OutcomeReport,
    pub example: OutcomeReport,
    pub mean_log_prob: f64,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub problem_id: String,
    pub tier: u8,
    pub programs: Vec<ProgramRecord>,
}

impl EvalRecord {
    /// Scores a finished batch on the problem's hidden tests.
    pub fn from_batch(problem: &ProblemSpec, batch: &GenerationBatch) -> Self {
        Self {
            problem_id: problem.id.clone(),
            tier: problem.tier,
            programs: batch
                .programs
                .iter()
                .map(|c| ProgramRecord {
                    hidden: evaluate_ids(&c.ids, &problem.hidden_tests),
                    example: c.example.clone(),
                    mean_log_prob: c.mean_log_prob,
                    score: c.score,
                })
                .collect(),
        }
    }

    fn solved_within(&self, k: usize) -> bool {
        self.programs[..k].iter().any(|p| p.hidden.passed())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassMode {
    /// Solved by any of the first k programs.
    Raw,
    /// `1 - C(N - c, k) / C(N, k)` over all N programs.
    Unbiased,
}

/// `1 - C(n - c, k) / C(n, k)` as a running product.
pub fn unbiased_estimate(n: usize, c: usize, k: usize) -> f64 {
    if n - c < k {
        return 1.0;
    }
    let mut miss = 1.0;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - k as f64 / i as f64;
    }
    1.0 - miss
}

fn check_k(records: &[EvalRecord], k: usize) -> Result<(), EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    match records.iter().find(|r| r.programs.len() < k) {
        Some(r) => Err(EvalError::NotEnoughPrograms {
            problem: r.problem_id.clone(),
            k,
            available: r.programs.len(),
        }),
        None => Ok(()),
    }
}

pub fn pass_at_k(records: &[EvalRecord], k: usize, mode: PassMode) -> Result<f64, EvalError> {
    check_k(records, k)?;
    let total: f64 = records
        .iter()
        .map(|r| match mode {
            PassMode::Raw => f64::from(u8::from(r.solved_within(k))),
            PassMode::Unbiased => {
                let c = r.programs.iter().filter(|p| p.hidden.passed()).count();
                unbiased_estimate(r.programs.len(), c, k)
            }
        })
        .sum();
    Ok(total / records.len() as f64)
}

fn desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Indices of the `n` programs chosen from the first `k`: example-test
/// passers by mean log-likelihood (then score), topped up with the rest by
/// score (then mean log-likelihood).
pub fn select_candidates(record: &EvalRecord, n: usize, k: usize) -> Vec<usize> {
    let programs = &record.programs[..k];
    let score = |i: usize| programs[i].score.unwrap_or(f64::NEG_INFINITY);
    let (mut pass, mut fail): (Vec<usize>, Vec<usize>) = (0..k).partition(|&i| programs[i].example.passed());
    pass.sort_by(|&a, &b| {
        desc(programs[a].mean_log_prob, programs[b].mean_log_prob)
            .then(desc(score(a), score(b)))
            .then(a.cmp(&b))
    });
    fail.sort_by(|&a, &b| {
        desc(score(a), score(b))
            .then(desc(programs[a].mean_log_prob, programs[b].mean_log_prob))
            .then(a.cmp(&b))
    });
    pass.into_iter().chain(fail).take(n).collect()
}

pub fn n_at_k(records: &[EvalRecord], n: usize, k: usize) -> Result<f64, EvalError> {
    if n > k {
        return Err(EvalError::NExceedsK { n, k });
    }
    check_k(records, k)?;
    let solved = records
        .iter()
        .filter(|r| {
            select_candidates(r, n, k)
                .iter()
                .any(|&i| r.programs[i].hidden.passed())
        })
        .count();
    Ok(solved as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSet {
    Example,
    Hidden,
}

impl TestSet {
    pub fn name(self) -> &'static str {
        match self {
            TestSet::Example => "example",
            TestSet::Hidden => "hidden",
        }
    }
}

/// Percentages averaged over problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub problems: usize,
    pub categories: BTreeMap<Outcome, f64>,
    /// Error subtypes only; these sum to the non-passing share.
    pub subtypes: BTreeMap<ErrorSubtype, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeHistogram {
    pub overall: Histogram,
    pub per_tier: BTreeMap<u8, Histogram>,
}

fn histogram<'a>(records: impl Iterator<Item = &'a EvalRecord>, test_set: TestSet) -> Histogram {
    let mut categories: BTreeMap<Outcome, f64> = Outcome::ALL.iter().map(|&o| (o, 0.0)).collect();
    let mut subtypes: BTreeMap<ErrorSubtype, f64> = BTreeMap::new();
    let mut problems = 0usize;
    for r in records.filter(|r| !r.programs.is_empty()) {
        problems += 1;
        let share = 100.0 / r.programs.len() as f64;
        for p in &r.programs {
            let report = match test_set {
                TestSet::Example => &p.example,
                TestSet::Hidden => &p.hidden,
            };
            *categories.get_mut(&report.category).expect("all categories present") += share;
            if report.category != Outcome::PassedTest {
                *subtypes.entry(report.subtype).or_default() += share;
            }
        }
    }
    if problems > 0 {
        for v in categories.values_mut().chain(subtypes.values_mut()) {
            *v /= problems as f64;
        }
    }
    Histogram {
        problems,
        categories,
        subtypes,
    }
}

pub fn outcome_histogram(records: &[EvalRecord], test_set: TestSet) -> OutcomeHistogram {
    let mut tiers: Vec<u8> = records.iter().map(|r| r.tier).collect();
    tiers.sort_unstable();
    tiers.dedup();
    OutcomeHistogram {
        overall: histogram(records.iter(), test_set),
        per_tier: tiers
            .into_iter()
            .map(|t| (t, histogram(records.iter().filter(|r| r.tier == t), test_set)))
            .collect(),
    }
}

/// One line of a metric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub k: Option<usize>,
    pub n: Option<usize>,
    /// `None` aggregates every tier.
    pub tier: Option<u8>,
    pub value: f64,
}

impl MetricRow {
    fn new(metric: impl Into<String>, k: Option<usize>, n: Option<usize>, tier: Option<u8>, value: f64) -> Self {
        Self {
            metric: metric.into(),
            k,
            n,
            tier,
            value,
        }
    }
}

/// Which metrics [`metric_table`] emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub ks: Vec<usize>,
    /// `(n, k)` pairs.
    pub n_at_k: Vec<(usize, usize)>,
    pub unbiased: bool,
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            ks: vec![1, 5, 20],
            n_at_k: vec![(1, 5), (5, 20)],
            unbiased: true,
        }
    }
}

/// Metrics overall and per tier. Entries whose k exceeds the programs
/// available are skipped.
pub fn metric_table(records: &[EvalRecord], spec: &ReportSpec) -> Vec<MetricRow> {
    let mut tiers: Vec<Option<u8>> = vec![None];
    let mut distinct: Vec<u8> = records.iter().map(|r| r.tier).collect();
    distinct.sort_unstable();
    distinct.dedup();
    tiers.extend(distinct.into_iter().map(Some));
    let mut rows = Vec::new();
    for tier in tiers {
        let subset: Vec<EvalRecord> = records
            .iter()
            .filter(|r| tier.is_none_or(|t| r.tier == t))
            .cloned()
            .collect();
        for &k in &spec.ks {
            if let Ok(v) = pass_at_k(&subset, k, PassMode::Raw) {
                rows.push(MetricRow::new("pass@k", Some(k), None, tier, v));
            }
            if spec.unbiased {
                if let Ok(v) = pass_at_k(&subset, k, PassMode::Unbiased) {
                    rows.push(MetricRow::new("pass@k_unbiased", Some(k), None, tier, v));
                }
            }
        }
        for &(n, k) in &spec.n_at_k {
            if let Ok(v) = n_at_k(&subset, n, k) {
                rows.push(MetricRow::new("n@k", Some(k), Some(n), tier, v));
            }
        }
        for test_set in [TestSet::Example, TestSet::Hidden] {
            let h = histogram(subset.iter(), test_set);
            for (o, v) in &h.categories {
                rows.push(MetricRow::new(
                    format!("{}_pct/{}", test_set.name(), o.name()),
                    None,
                    None,
                    tier,
                    *v,
                ));
            }
            for (s, v) in &h.subtypes {
                rows.push(MetricRow::new(
                    format!("{}_pct/{}", test_set.name(), s.name()),
                    None,
                    None,
                    tier,
                    *v,
                ));
            }
        }
    }
    rows
}

fn opt<T: ToString>(v: Option<T>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |x| x.to_string())
}

/// Comma-separated table with a header; values carry fixed precision so
/// identical inputs give identical bytes.
pub fn to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("metric,k,n,tier,value\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.6}",
            r.metric,
            opt(r.k, ""),
            opt(r.n, ""),
            opt(r.tier, "all"),
            r.value
        )
        .expect("writing to a string");
    }
    out
}

pub fn to_json(rows: &[MetricRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

#[cfg(test)]
mod tests;

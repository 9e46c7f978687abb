//! Python bindings: problems, the interpreter, models, critic sampling and
//! the pass@k estimator.

use std::collections::BTreeMap;
use std::path::PathBuf;

use coderl::corpus::{self, DatasetConfig, EncodedProblem, ProblemSpec, Split, TokenId};
use coderl::inference::{self, CriticSamplingConfig, Models};
use coderl::minilang::{self, TestCase};
use coderl::models::{self, ModelConfig, Role, SamplingConfig};
use coderl::{eval, training};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn text(ids: &[TokenId]) -> PyResult<String> {
    let words = corpus::decode_ids(ids).map_err(value_err)?;
    Ok(words
        .into_iter()
        .filter(|w| w != corpus::EOS && w != corpus::BOS)
        .collect::<Vec<_>>()
        .join(" "))
}

fn tests_of(tests: &[TestCase]) -> Vec<(i64, i64, i64, i64)> {
    tests
        .iter()
        .map(|t| (t.inputs.a, t.inputs.b, t.inputs.c, t.expected))
        .collect()
}

/// One synthesis task.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Problem {
    inner: ProblemSpec,
}

#[pymethods]
impl Problem {
    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn tier(&self) -> u8 {
        self.inner.tier
    }

    #[getter]
    fn description(&self) -> String {
        self.inner.description.join(" ")
    }

    #[getter]
    fn ground_truth(&self) -> String {
        minilang::render(&self.inner.ground_truth)
    }

    /// `(a, b, c, expected)` tuples.
    #[getter]
    fn example_tests(&self) -> Vec<(i64, i64, i64, i64)> {
        tests_of(&self.inner.example_tests)
    }

    #[getter]
    fn hidden_tests(&self) -> Vec<(i64, i64, i64, i64)> {
        tests_of(&self.inner.hidden_tests)
    }

    /// `(category, subtype)` of `program` on the hidden tests.
    fn judge(&self, program: &str) -> PyResult<(String, String)> {
        evaluate(program, self.hidden_tests())
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, tier={})", self.inner.id, self.inner.tier)
    }
}

/// `count` problems of `split` ("train" or "test") from `seed`.
#[pyfunction]
fn generate_dataset(split: &str, count: usize, seed: u64) -> PyResult<Vec<Problem>> {
    let split = match split {
        "train" => Split::Train,
        "test" => Split::Test,
        other => return Err(value_err(format!("unknown split {other:?}"))),
    };
    let ds = corpus::generate_dataset(&DatasetConfig::new(split, count, seed));
    Ok(ds.problems.into_iter().map(|inner| Problem { inner }).collect())
}

#[pyfunction]
fn load_dataset(path: PathBuf) -> PyResult<Vec<Problem>> {
    let ds = corpus::load_dataset(&path).map_err(value_err)?;
    Ok(ds.problems.into_iter().map(|inner| Problem { inner }).collect())
}

/// Runs program text on `(a, b, c, expected)` tests; returns
/// `(category, subtype)`.
#[pyfunction]
fn evaluate(program: &str, tests: Vec<(i64, i64, i64, i64)>) -> PyResult<(String, String)> {
    let tests: Vec<TestCase> = tests
        .into_iter()
        .map(|(a, b, c, e)| TestCase::new([a, b, c], e))
        .collect();
    let report = match minilang::lex(program) {
        Ok(tokens) => minilang::evaluate_program(&tokens, &tests),
        Err(_) => minilang::evaluate_program(&[], &tests),
    };
    Ok((report.category.name().to_string(), report.subtype.name().to_string()))
}

/// Training return for an outcome category name.
#[pyfunction]
fn return_of(category: &str) -> PyResult<f64> {
    let outcome = minilang::Outcome::ALL
        .into_iter()
        .find(|o| o.name() == category)
        .ok_or_else(|| value_err(format!("unknown category {category:?}")))?;
    Ok(training::outcome_return(outcome))
}

/// Unbiased pass@k from `n` samples of which `c` pass.
#[pyfunction]
fn pass_at_k(n: usize, c: usize, k: usize) -> PyResult<f64> {
    if c > n || k == 0 || k > n {
        return Err(value_err("need c <= n and 1 <= k <= n"));
    }
    Ok(eval::unbiased_estimate(n, c, k))
}

/// Seed length the chop rule keeps for per-token pass values.
#[pyfunction]
fn chop_prefix(pass_values: Vec<f64>) -> usize {
    inference::chop_prefix(&pass_values).prefix_len
}

/// A network for one role: actor, critic, test_critic or repair.
#[pyclass]
struct Model {
    inner: models::Model,
}

fn encoded(problem: &Problem) -> PyResult<EncodedProblem> {
    EncodedProblem::new(&problem.inner).map_err(value_err)
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (role, seed = 0))]
    fn new(role: &str, seed: u64) -> PyResult<Self> {
        let role: Role = role.parse().map_err(value_err)?;
        let inner = models::Model::new(ModelConfig::for_role(role), &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, _) = models::Model::load(&path).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path, &BTreeMap::new()).map_err(value_err)
    }

    #[getter]
    fn role(&self) -> String {
        self.inner.role().to_string()
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.inner.num_parameters()
    }

    /// Total log-likelihood of program text for `problem`.
    fn log_prob(&self, problem: &Problem, program: &str) -> PyResult<f64> {
        let enc = encoded(problem)?;
        let tokens = minilang::lex(program).map_err(value_err)?;
        let mut target = corpus::encode_program(&tokens).map_err(value_err)?;
        target.remove(0);
        let (total, _) = models::log_prob(&self.inner, &enc.source, &target).map_err(value_err)?;
        Ok(total)
    }

    #[pyo3(signature = (problem, temperature = 1.0, top_p = 0.95, seed = 0))]
    fn sample(&self, problem: &Problem, temperature: f64, top_p: f64, seed: u64) -> PyResult<String> {
        let enc = encoded(problem)?;
        let config = SamplingConfig {
            temperature,
            top_p,
            ..SamplingConfig::default()
        };
        let d = models::sample(&self.inner, &enc.source, &config, &mut ChaCha8Rng::seed_from_u64(seed))
            .map_err(value_err)?;
        text(&d.ids)
    }

    fn greedy(&self, problem: &Problem) -> PyResult<String> {
        let enc = encoded(problem)?;
        let d = models::greedy(&self.inner, &enc.source, SamplingConfig::default().max_len).map_err(value_err)?;
        text(&d.ids)
    }
}

/// Runs critic sampling for one problem; returns `(programs, branch)`.
#[pyfunction]
#[pyo3(signature = (actor, test_critic, repair, problem, n = 20, m = 1, use_refine = true, use_repair = true, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn critic_sampling(
    actor: &Model,
    test_critic: &Model,
    repair: Option<PyRef<'_, Model>>,
    problem: &Problem,
    n: usize,
    m: usize,
    use_refine: bool,
    use_repair: bool,
    seed: u64,
) -> PyResult<(Vec<String>, String)> {
    let models = Models {
        actor: &actor.inner,
        test_critic: Some(&test_critic.inner),
        repair: repair.as_ref().map(|r| &r.inner),
    };
    let config = CriticSamplingConfig {
        n,
        m,
        refine: use_refine,
        repair: use_repair,
        sampling: SamplingConfig::default(),
    };
    let (batch, trace) =
        inference::critic_sampling(&models, &problem.inner, &config, &mut ChaCha8Rng::seed_from_u64(seed))
            .map_err(value_err)?;
    let programs = batch
        .programs
        .iter()
        .map(|c| text(c.program()))
        .collect::<PyResult<_>>()?;
    Ok((programs, format!("{:?}", trace.branch).to_lowercase()))
}

#[pymodule]
fn pycoderl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(return_of, m)?)?;
    m.add_function(wrap_pyfunction!(pass_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(chop_prefix, m)?)?;
    m.add_function(wrap_pyfunction!(critic_sampling, m)?)?;
    Ok(())
}

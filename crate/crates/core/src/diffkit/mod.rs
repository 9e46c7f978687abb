//! Minimal reverse-mode automatic differentiation over dense `f64`
//! matrices, a named parameter store with an Adam optimizer, and the binary
//! checkpoint format.

mod checkpoint;
mod tape;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointMeta};
pub use tape::{Gradients, Tape, Var};

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("unsupported shape {0:?}")]
    UnsupportedShape(Vec<usize>),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0}: input is not finite")]
    NonFinite(&'static str),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("backward called on a cleared tape")]
    TapeCleared,
    #[error("variable does not belong to the current tape")]
    StaleVar,
    #[error("optimizer step before any gradient was accumulated")]
    NoGradients,
    #[error("parameter {0:?} already exists")]
    DuplicateParam(String),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A dense row-major tensor with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Option<Vec<f64>>,
    pub requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, DiffError> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(DiffError::ShapeMismatch {
                op: "tensor",
                lhs: shape,
                rhs: vec![values.len()],
            });
        }
        Ok(Self {
            shape,
            values,
            grad: None,
            requires_grad: false,
        })
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; n],
            grad: None,
            requires_grad: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId {
    store: u64,
    index: usize,
}

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
struct Param {
    name: String,
    shape: Vec<usize>,
    values: Arc<Vec<f64>>,
    grad: Vec<f64>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Named trainable tensors plus their Adam state. Each store has a unique
/// identity, so gradients from a tape that touched several stores are
/// routed to the right one.
#[derive(Debug)]
pub struct ParameterStore {
    id: u64,
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
    steps: u64,
    has_grad: bool,
}

impl Default for ParameterStore {
    fn default() -> Self {
        Self::new()
    }
}

impl Clone for ParameterStore {
    /// Copies values and optimizer state under a fresh store identity.
    fn clone(&self) -> Self {
        Self {
            id: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    values: Arc::new(p.values.as_ref().clone()),
                    grad: p.grad.clone(),
                    first_moment: p.first_moment.clone(),
                    second_moment: p.second_moment.clone(),
                })
                .collect(),
            by_name: self.by_name.clone(),
            steps: self.steps,
            has_grad: self.has_grad,
        }
    }
}

impl ParameterStore {
    pub fn new() -> Self {
        Self {
            id: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            params: Vec::new(),
            by_name: HashMap::new(),
            steps: 0,
            has_grad: false,
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<ParamId, DiffError> {
        if self.by_name.contains_key(name) {
            return Err(DiffError::DuplicateParam(name.to_string()));
        }
        let valid = matches!(tensor.shape.as_slice(), [n] if *n > 0)
            || matches!(tensor.shape.as_slice(), [r, c] if *r > 0 && *c > 0);
        if !valid || tensor.shape.iter().product::<usize>() != tensor.values.len() {
            return Err(DiffError::UnsupportedShape(tensor.shape));
        }
        let n = tensor.values.len();
        self.params.push(Param {
            name: name.to_string(),
            shape: tensor.shape,
            values: Arc::new(tensor.values),
            grad: vec![0.0; n],
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        });
        let index = self.params.len() - 1;
        self.by_name.insert(name.to_string(), index);
        Ok(ParamId { store: self.id, index })
    }

    /// Inserts a parameter filled from `uniform(-scale, scale)`.
    pub fn insert_uniform<R: Rng>(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        scale: f64,
        rng: &mut R,
    ) -> Result<ParamId, DiffError> {
        let n = shape.iter().product();
        let values = (0..n)
            .map(|_| {
                if scale > 0.0 {
                    rng.random_range(-scale..scale)
                } else {
                    0.0
                }
            })
            .collect();
        self.insert(name, Tensor::new(shape, values)?)
    }

    pub fn id(&self, name: &str) -> Result<ParamId, DiffError> {
        self.by_name
            .get(name)
            .map(|&index| ParamId { store: self.id, index })
            .ok_or_else(|| DiffError::UnknownParam(name.to_string()))
    }

    fn param(&self, id: ParamId) -> &Param {
        assert_eq!(id.store, self.id, "parameter id from another store");
        &self.params[id.index]
    }

    pub(crate) fn shared(&self, id: ParamId) -> (&[usize], Arc<Vec<f64>>) {
        let p = self.param(id);
        (&p.shape, Arc::clone(&p.values))
    }

    pub fn values(&self, id: ParamId) -> &[f64] {
        &self.param(id).values
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [f64] {
        assert_eq!(id.store, self.id, "parameter id from another store");
        Arc::make_mut(&mut self.params[id.index].values).as_mut_slice()
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.param(id).grad
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.param(id).shape
    }

    /// Snapshot of a parameter as a tensor, including its gradient.
    pub fn tensor(&self, name: &str) -> Result<Tensor, DiffError> {
        let p = self.param(self.id(name)?);
        Ok(Tensor {
            shape: p.shape.clone(),
            values: p.values.as_ref().clone(),
            grad: Some(p.grad.clone()),
            requires_grad: true,
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(|index| ParamId { store: self.id, index })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    /// Adds (`+=`) this store's share of `grads`. Gradients for parameters
    /// of other stores are ignored.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in &grads.params {
            if id.store != self.id {
                continue;
            }
            let p = &mut self.params[id.index];
            for (o, x) in p.grad.iter_mut().zip(g) {
                *o += x;
            }
            self.has_grad = true;
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Multiplies every accumulated gradient by `factor`.
    pub fn scale_grad(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// One bias-corrected Adam update, then zeroes the gradients.
    pub fn adam_step(&mut self, lr: f64, config: AdamConfig) -> Result<(), DiffError> {
        if !self.has_grad {
            return Err(DiffError::NoGradients);
        }
        self.steps += 1;
        let t = self.steps as i32;
        let bias1 = 1.0 - config.beta1.powi(t);
        let bias2 = 1.0 - config.beta2.powi(t);
        for p in &mut self.params {
            let values = Arc::make_mut(&mut p.values);
            #[allow(clippy::needless_range_loop)]
            for j in 0..values.len() {
                let g = p.grad[j];
                p.first_moment[j] = config.beta1 * p.first_moment[j] + (1.0 - config.beta1) * g;
                p.second_moment[j] = config.beta2 * p.second_moment[j] + (1.0 - config.beta2) * g * g;
                let m_hat = p.first_moment[j] / bias1;
                let v_hat = p.second_moment[j] / bias2;
                values[j] -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
                p.grad[j] = 0.0;
            }
        }
        Ok(())
    }

    pub fn optimizer_steps(&self) -> u64 {
        self.steps
    }
}

use std::collections::HashMap;
use std::sync::Arc;

use super::{DiffError, ParamId, ParameterStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Buffer {
    Owned(Vec<f64>),
    Shared(Arc<Vec<f64>>),
}

impl Buffer {
    fn as_slice(&self) -> &[f64] {
        match self {
            Buffer::Owned(v) => v,
            Buffer::Shared(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf(Option<ParamId>),
    MatMul(Var, Var),
    /// Second operand is either the same shape or a single row broadcast
    /// over every row of the first.
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Gather(Var, Vec<usize>),
    Concat(Vec<Var>),
    ConcatRows(Vec<Var>),
    MaxPool(Var, Vec<usize>),
    CrossEntropy(Var, usize),
    Sum(Var),
    Pick(Var, usize),
    Row(Var, usize),
    Reshape(Var),
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    value: Buffer,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of executed operations. Values are computed eagerly;
/// `backward` walks the record in exact reverse.
///
/// Every tensor on the tape is a matrix; a rank-1 leaf of length `n` is a
/// `1 x n` row.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    cleared: bool,
}

/// Gradients produced by one backward pass.
#[derive(Debug, Default)]
pub struct Gradients {
    pub(super) params: Vec<(ParamId, Vec<f64>)>,
    leaves: HashMap<usize, Vec<f64>>,
}

impl Gradients {
    /// Gradient of a non-parameter leaf created with `requires_grad`.
    pub fn wrt(&self, var: Var) -> Option<&[f64]> {
        self.leaves.get(&var.0).map(Vec::as_slice)
    }

    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params.iter().find(|(p, _)| *p == id).map(|(_, g)| g.as_slice())
    }

    /// Parameters with a recorded gradient.
    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.params.iter().map(|(p, _)| *p)
    }
}

fn matmul_into(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            if x == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &w) in row.iter_mut().zip(brow) {
                *o += x * w;
            }
        }
    }
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded after `mark` (a previous [`Tape::len`]).
    /// Vars created after the mark become invalid.
    pub fn truncate(&mut self, mark: usize) {
        self.nodes.truncate(mark);
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.cleared = false;
        self.nodes.push(Node {
            rows,
            cols,
            value: Buffer::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn dims_of(shape: &[usize]) -> Result<(usize, usize), DiffError> {
        match *shape {
            [n] if n > 0 => Ok((1, n)),
            [r, c] if r > 0 && c > 0 => Ok((r, c)),
            _ => Err(DiffError::UnsupportedShape(shape.to_vec())),
        }
    }

    /// Records a leaf tensor. Its gradient is reported through
    /// [`Gradients::wrt`] when `tensor.requires_grad` is set.
    pub fn leaf(&mut self, tensor: Tensor) -> Result<Var, DiffError> {
        let (rows, cols) = Self::dims_of(&tensor.shape)?;
        if tensor.values.len() != rows * cols {
            return Err(DiffError::ShapeMismatch {
                op: "leaf",
                lhs: tensor.shape.clone(),
                rhs: vec![tensor.values.len()],
            });
        }
        Ok(self.push(rows, cols, tensor.values, Op::Leaf(None), tensor.requires_grad))
    }

    /// A constant row vector.
    pub fn constant(&mut self, values: Vec<f64>) -> Var {
        let n = values.len();
        self.push(1, n, values, Op::Leaf(None), false)
    }

    /// Records a parameter of `store` without copying its values.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> Var {
        let (shape, values) = store.shared(id);
        let (rows, cols) = Self::dims_of(shape).expect("parameter shapes are validated on creation");
        self.cleared = false;
        self.nodes.push(Node {
            rows,
            cols,
            value: Buffer::Shared(values),
            op: Op::Leaf(Some(id)),
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant copy of `v`: gradients never flow through the copy.
    pub fn detach(&mut self, v: Var) -> Var {
        let n = self.node(v);
        let (rows, cols, value) = (n.rows, n.cols, n.value.as_slice().to_vec());
        self.push(rows, cols, value, Op::Leaf(None), false)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        self.node(v).value.as_slice()
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        let n = self.node(v);
        [n.rows, n.cols]
    }

    /// The single value of a `1 x 1` tensor.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> DiffError {
        DiffError::ShapeMismatch {
            op,
            lhs: self.shape(a).to_vec(),
            rhs: self.shape(b).to_vec(),
        }
    }

    fn rg(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let [m, k] = self.shape(a);
        let [k2, n] = self.shape(b);
        if k != k2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(self.value(a), self.value(b), m, k, n, &mut out);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(m, n, out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let [m, n] = self.shape(a);
        let [bm, bn] = self.shape(b);
        if bn != n || (bm != m && bm != 1) {
            return Err(self.mismatch("add", a, b));
        }
        let bv = self.value(b);
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, &x)| x + if bm == 1 { bv[i % n] } else { bv[i] })
            .collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(m, n, out, Op::Add(a, b), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), DiffError> {
        if self.shape(a) != self.shape(b) {
            Err(self.mismatch(op, a, b))
        } else {
            Ok(())
        }
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        let [m, n] = self.shape(a);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(m, n, out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let [m, n] = self.shape(a);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(m, n, out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * factor).collect();
        let [m, n] = self.shape(a);
        let rg = self.rg(a);
        self.push(m, n, out, Op::Scale(a, factor), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x.tanh()).collect();
        let [m, n] = self.shape(a);
        let rg = self.rg(a);
        self.push(m, n, out, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect();
        let [m, n] = self.shape(a);
        let rg = self.rg(a);
        self.push(m, n, out, Op::Sigmoid(a), rg)
    }

    fn check_finite(&self, op: &'static str, a: Var) -> Result<(), DiffError> {
        if self.value(a).iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(DiffError::NonFinite(op))
        }
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var, DiffError> {
        self.check_finite("softmax", a)?;
        let [m, n] = self.shape(a);
        let mut out = vec![0.0; m * n];
        for (row, o) in self.value(a).chunks(n).zip(out.chunks_mut(n)) {
            softmax_row(row, o);
        }
        let rg = self.rg(a);
        Ok(self.push(m, n, out, Op::Softmax(a), rg))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var, DiffError> {
        self.check_finite("log_softmax", a)?;
        let [m, n] = self.shape(a);
        let mut out = Vec::with_capacity(m * n);
        for row in self.value(a).chunks(n) {
            let lse = log_sum_exp(row);
            out.extend(row.iter().map(|x| x - lse));
        }
        let rg = self.rg(a);
        Ok(self.push(m, n, out, Op::LogSoftmax(a), rg))
    }

    /// Rows of `table` at `ids`, stacked into a `ids.len() x cols` matrix.
    pub fn embedding_gather(&mut self, table: Var, ids: &[usize]) -> Result<Var, DiffError> {
        let [rows, cols] = self.shape(table);
        if ids.is_empty() {
            return Err(DiffError::UnsupportedShape(vec![0, cols]));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(DiffError::IndexOutOfRange { index: bad, len: rows });
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * cols);
        for &i in ids {
            out.extend_from_slice(&tv[i * cols..(i + 1) * cols]);
        }
        let rg = self.rg(table);
        Ok(self.push(ids.len(), cols, out, Op::Gather(table, ids.to_vec()), rg))
    }

    /// Concatenation along the last axis; all parts share a row count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        let Some(&first) = parts.first() else {
            return Err(DiffError::UnsupportedShape(vec![]));
        };
        let [m, _] = self.shape(first);
        for &p in parts {
            if self.shape(p)[0] != m {
                return Err(self.mismatch("concat", first, p));
            }
        }
        let n: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
        let mut out = Vec::with_capacity(m * n);
        for r in 0..m {
            for &p in parts {
                let c = self.shape(p)[1];
                out.extend_from_slice(&self.value(p)[r * c..(r + 1) * c]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(m, n, out, Op::Concat(parts.to_vec()), rg))
    }

    /// Stacks parts along the first axis; all parts share a column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        let Some(&first) = parts.first() else {
            return Err(DiffError::UnsupportedShape(vec![]));
        };
        let [_, n] = self.shape(first);
        let mut m = 0;
        for &p in parts {
            if self.shape(p)[1] != n {
                return Err(self.mismatch("concat_rows", first, p));
            }
            m += self.shape(p)[0];
        }
        let mut out = Vec::with_capacity(m * n);
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(m, n, out, Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Columnwise maximum of a `T x H` matrix, giving `1 x H`. Ties go to
    /// the earliest row.
    pub fn max_pool_over_time(&mut self, a: Var) -> Var {
        let [t, h] = self.shape(a);
        let v = self.value(a);
        let mut argmax = vec![0usize; h];
        let mut out = v[..h].to_vec();
        for r in 1..t {
            for c in 0..h {
                let x = v[r * h + c];
                if x > out[c] {
                    out[c] = x;
                    argmax[c] = r;
                }
            }
        }
        let rg = self.rg(a);
        self.push(1, h, out, Op::MaxPool(a, argmax), rg)
    }

    /// `-log_softmax(logits)[target]` for a single row of logits.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var, DiffError> {
        let [m, n] = self.shape(logits);
        if m != 1 {
            return Err(DiffError::UnsupportedShape(vec![m, n]));
        }
        if target >= n {
            return Err(DiffError::IndexOutOfRange { index: target, len: n });
        }
        self.check_finite("cross_entropy", logits)?;
        let row = self.value(logits);
        let loss = log_sum_exp(row) - row[target];
        let rg = self.rg(logits);
        Ok(self.push(1, 1, vec![loss], Op::CrossEntropy(logits, target), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).iter().sum();
        let rg = self.rg(a);
        self.push(1, 1, vec![total], Op::Sum(a), rg)
    }

    /// The element at flat row-major `index`, as a `1 x 1` tensor.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var, DiffError> {
        let len = self.value(a).len();
        if index >= len {
            return Err(DiffError::IndexOutOfRange { index, len });
        }
        let x = self.value(a)[index];
        let rg = self.rg(a);
        Ok(self.push(1, 1, vec![x], Op::Pick(a, index), rg))
    }

    /// Row `index` of a matrix, as a `1 x cols` tensor.
    pub fn row(&mut self, a: Var, index: usize) -> Result<Var, DiffError> {
        let [m, n] = self.shape(a);
        if index >= m {
            return Err(DiffError::IndexOutOfRange { index, len: m });
        }
        let out = self.value(a)[index * n..(index + 1) * n].to_vec();
        let rg = self.rg(a);
        Ok(self.push(1, n, out, Op::Row(a, index), rg))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, DiffError> {
        let [m, n] = self.shape(a);
        if m * n != rows * cols {
            return Err(DiffError::ShapeMismatch {
                op: "reshape",
                lhs: vec![m, n],
                rhs: vec![rows, cols],
            });
        }
        let out = self.value(a).to_vec();
        let rg = self.rg(a);
        Ok(self.push(rows, cols, out, Op::Reshape(a), rg))
    }

    /// Back-propagates from a scalar `loss`, then clears the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, DiffError> {
        if self.cleared {
            return Err(DiffError::TapeCleared);
        }
        if loss.0 >= self.nodes.len() {
            return Err(DiffError::StaleVar);
        }
        if self.shape(loss) != [1, 1] {
            return Err(DiffError::NotScalar(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut result = Gradients::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let nodes = &self.nodes;
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
                if !nodes[v.0].requires_grad {
                    return;
                }
                let len = nodes[v.0].rows * nodes[v.0].cols;
                let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
                f(slot);
            };
            match &node.op {
                Op::Leaf(Some(id)) => match result.params.iter_mut().find(|(p, _)| p == id) {
                    Some((_, existing)) => existing.iter_mut().zip(&g).for_each(|(o, x)| *o += x),
                    None => result.params.push((*id, g)),
                },
                Op::Leaf(None) => {
                    result.leaves.insert(i, g);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = (nodes[a.0].rows, nodes[a.0].cols);
                    let n = nodes[b.0].cols;
                    let av = nodes[a.0].value.as_slice();
                    let bv = nodes[b.0].value.as_slice();
                    acc(*a, &mut |ga| {
                        for r in 0..m {
                            let grow = &g[r * n..(r + 1) * n];
                            for p in 0..k {
                                let brow = &bv[p * n..(p + 1) * n];
                                ga[r * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    });
                    acc(*b, &mut |gb| {
                        for r in 0..m {
                            let grow = &g[r * n..(r + 1) * n];
                            for p in 0..k {
                                let x = av[r * k + p];
                                if x == 0.0 {
                                    continue;
                                }
                                for (o, &y) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                    *o += x * y;
                                }
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc(*a, &mut |ga| ga.iter_mut().zip(&g).for_each(|(o, x)| *o += x));
                    // a broadcast row folds every output row back onto itself
                    acc(*b, &mut |gb| {
                        let len = gb.len();
                        for (j, x) in g.iter().enumerate() {
                            gb[j % len] += x;
                        }
                    });
                }
                Op::Sub(a, b) => {
                    acc(*a, &mut |ga| ga.iter_mut().zip(&g).for_each(|(o, x)| *o += x));
                    acc(*b, &mut |gb| gb.iter_mut().zip(&g).for_each(|(o, x)| *o -= x));
                }
                Op::Mul(a, b) => {
                    let av = nodes[a.0].value.as_slice();
                    let bv = nodes[b.0].value.as_slice();
                    acc(*a, &mut |ga| {
                        for j in 0..ga.len() {
                            ga[j] += g[j] * bv[j];
                        }
                    });
                    acc(*b, &mut |gb| {
                        for j in 0..gb.len() {
                            gb[j] += g[j] * av[j];
                        }
                    });
                }
                Op::Scale(a, s) => acc(*a, &mut |ga| ga.iter_mut().zip(&g).for_each(|(o, x)| *o += s * x)),
                Op::Tanh(a) => {
                    let y = node.value.as_slice();
                    acc(*a, &mut |ga| {
                        for j in 0..ga.len() {
                            ga[j] += g[j] * (1.0 - y[j] * y[j]);
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_slice();
                    acc(*a, &mut |ga| {
                        for j in 0..ga.len() {
                            ga[j] += g[j] * y[j] * (1.0 - y[j]);
                        }
                    });
                }
                Op::Softmax(a) => {
                    let y = node.value.as_slice();
                    let n = node.cols;
                    acc(*a, &mut |ga| {
                        for ((gr, yr), out) in g.chunks(n).zip(y.chunks(n)).zip(ga.chunks_mut(n)) {
                            let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                            for j in 0..n {
                                out[j] += yr[j] * (gr[j] - dot);
                            }
                        }
                    });
                }
                Op::LogSoftmax(a) => {
                    let y = node.value.as_slice();
                    let n = node.cols;
                    acc(*a, &mut |ga| {
                        for ((gr, yr), out) in g.chunks(n).zip(y.chunks(n)).zip(ga.chunks_mut(n)) {
                            let total: f64 = gr.iter().sum();
                            for j in 0..n {
                                out[j] += gr[j] - yr[j].exp() * total;
                            }
                        }
                    });
                }
                Op::Gather(table, ids) => {
                    let cols = node.cols;
                    acc(*table, &mut |gt| {
                        for (r, &id) in ids.iter().enumerate() {
                            for c in 0..cols {
                                gt[id * cols + c] += g[r * cols + c];
                            }
                        }
                    });
                }
                Op::Concat(parts) => {
                    let m = node.rows;
                    let n = node.cols;
                    let mut offset = 0;
                    for &p in parts {
                        let c = nodes[p.0].cols;
                        acc(p, &mut |gp| {
                            for r in 0..m {
                                for j in 0..c {
                                    gp[r * c + j] += g[r * n + offset + j];
                                }
                            }
                        });
                        offset += c;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = nodes[p.0].rows * nodes[p.0].cols;
                        acc(p, &mut |gp| {
                            gp.iter_mut().zip(&g[offset..offset + len]).for_each(|(o, x)| *o += x)
                        });
                        offset += len;
                    }
                }
                Op::MaxPool(a, argmax) => {
                    let h = node.cols;
                    acc(*a, &mut |ga| {
                        for (c, &r) in argmax.iter().enumerate() {
                            ga[r * h + c] += g[c];
                        }
                    });
                }
                Op::CrossEntropy(logits, target) => {
                    let row = nodes[logits.0].value.as_slice();
                    let mut p = vec![0.0; row.len()];
                    softmax_row(row, &mut p);
                    acc(*logits, &mut |gl| {
                        for j in 0..gl.len() {
                            let onehot = if j == *target { 1.0 } else { 0.0 };
                            gl[j] += g[0] * (p[j] - onehot);
                        }
                    });
                }
                Op::Sum(a) => acc(*a, &mut |ga| ga.iter_mut().for_each(|o| *o += g[0])),
                Op::Pick(a, index) => acc(*a, &mut |ga| ga[*index] += g[0]),
                Op::Row(a, index) => {
                    let n = node.cols;
                    acc(*a, &mut |ga| {
                        ga[index * n..(index + 1) * n]
                            .iter_mut()
                            .zip(&g)
                            .for_each(|(o, x)| *o += x)
                    })
                }
                Op::Reshape(a) => acc(*a, &mut |ga| ga.iter_mut().zip(&g).for_each(|(o, x)| *o += x)),
            }
        }
        self.nodes.clear();
        self.cleared = true;
        Ok(result)
    }
}

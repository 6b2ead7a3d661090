//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied to its nodes in insertion
//! order; insertion order is a valid topological order, so [`Graph::backward`]
//! simply walks the tape in reverse. The graph borrows the model's
//! [`ParamStore`] immutably and never writes to it: gradients come back as a
//! [`Gradients`] value that the caller folds into the store (or sums across a
//! batch first). Build a fresh graph per training example and drop it after
//! the backward pass.
//!
//! Broadcasting is limited to [`Graph::add_bias`], which adds a vector over
//! every leading axis. Everything else requires identical shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{kernels, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Softmax {
        x: Var,
        axis: usize,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Transpose(Var),
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Slice {
        x: Var,
        axis: usize,
        start: usize,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Sum(Var),
    Mean(Var),
    CrossEntropy {
        logits: Var,
        target: Var,
        probs: Vec<f64>,
    },
    SquaredError {
        pred: Var,
        target: Var,
    },
    RowNorm(Var),
}

struct Node {
    value: Value,
    op: Op,
    requires_grad: bool,
}

pub const LAYER_NORM_EPS: f64 = 1e-9;

/// Splits `shape` around `axis` into (outer, dim, inner) strides.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub struct Graph<'p> {
    params: Option<&'p ParamStore>,
    param_nodes: Vec<Option<Var>>,
    nodes: Vec<Node>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Graph<'p> {
    /// A graph with no parameter store; only inputs and leaves.
    pub fn new() -> Self {
        Self {
            params: None,
            param_nodes: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn with_params(params: &'p ParamStore) -> Self {
        Self {
            params: Some(params),
            param_nodes: vec![None; params.len()],
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node. Parameters are untouched.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.param_nodes.iter_mut().for_each(|n| *n = None);
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.expect("param node without store").get(*id),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn data(&self, v: Var) -> &[f64] {
        self.value(v).data()
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, false)
    }

    /// A differentiable input; its gradient is reported by [`Gradients::wrt`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, true)
    }

    /// The node for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        let store = self.params.expect("graph has no parameter store");
        let rg = store.get(id).requires_grad();
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param(id),
            requires_grad: rg,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (n, k2) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::shape(
                "matmul_nt",
                format!("{:?} x {:?}ᵀ", self.shape(a), self.shape(b)),
            ));
        }
        let mut out = vec![0.0; m * n];
        kernels::matmul_nt(self.data(a), self.data(b), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMulNT(a, b), rg))
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::from_parts(self.shape(a).to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_with(a, b, |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_with(a, b, |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_with(a, b, |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// Adds vector `b` (length = last axis of `x`) to every leading index of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let n = *self.shape(x).last().unwrap();
        if self.shape(b) != [n] {
            return Err(Error::shape(
                "add_bias",
                format!("bias {:?} for input {:?}", self.shape(b), self.shape(x)),
            ));
        }
        let bias = self.data(b);
        let data = self
            .data(x)
            .chunks(n)
            .flat_map(|row| row.iter().zip(bias).map(|(r, c)| r + c))
            .collect();
        let out = Tensor::from_parts(self.shape(x).to_vec(), data);
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(out, Op::AddBias(x, b), rg))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let t = self.value(x);
        let out = Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|v| v * c).collect());
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, c), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::from_parts(
            t.shape().to_vec(),
            t.data().iter().map(|&v| v.max(0.0)).collect(),
        );
        let rg = self.rg(x);
        self.push(out, Op::Relu(x), rg)
    }

    /// Softmax along `axis`, stabilized by subtracting the running maximum.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape(
                "softmax",
                format!("axis {axis} out of range for {shape:?}"),
            ));
        }
        let (outer, dim, inner) = axis_split(&shape, axis);
        let src = self.data(x);
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |k: usize| (o * dim + k) * inner + i;
                let max = (0..dim)
                    .map(|k| src[idx(k)])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for k in 0..dim {
                    let e = (src[idx(k)] - max).exp();
                    out[idx(k)] = e;
                    sum += e;
                }
                for k in 0..dim {
                    out[idx(k)] /= sum;
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Softmax { x, axis }, rg))
    }

    /// Normalizes each vector along the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().unwrap();
        if self.shape(gain) != [n] || self.shape(bias) != [n] {
            return Err(Error::shape(
                "layer_norm",
                format!(
                    "gain {:?} / bias {:?} for input {shape:?}",
                    self.shape(gain),
                    self.shape(bias)
                ),
            ));
        }
        let src = self.data(x);
        let g = self.data(gain);
        let b = self.data(bias);
        let rows = src.len() / n;
        let mut xhat = vec![0.0; src.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; src.len()];
        for r in 0..rows {
            let row = &src[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[r] = is;
            for j in 0..n {
                let h = (row[j] - mean) * is;
                xhat[r * n + j] = h;
                out[r * n + j] = h * g[j] + b[j];
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Matrix transpose (rank 2 only).
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).transpose()?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Transpose(x), rg))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat", "no inputs"));
        };
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape(
                "concat",
                format!("axis {axis} out of range for {base:?}"),
            ));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::shape(
                    "concat",
                    format!("{s:?} incompatible with {base:?} along axis {axis}"),
                ));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_split(&shape, axis);
        let mut out = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let d = self.shape(p)[axis];
                let chunk = d * inner;
                out.extend_from_slice(&self.data(p)[o * chunk..(o + 1) * chunk]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Takes `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let src_shape = self.shape(x).to_vec();
        if axis >= src_shape.len() || len == 0 || start + len > src_shape[axis] {
            return Err(Error::shape(
                "slice",
                format!(
                    "[{start}, {}) along axis {axis} of {src_shape:?}",
                    start + len
                ),
            ));
        }
        let (outer, dim, inner) = axis_split(&src_shape, axis);
        let src = self.data(x);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * dim + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut shape = src_shape;
        shape[axis] = len;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::Slice { x, axis, start },
            rg,
        ))
    }

    /// Inverted dropout: zeroes entries with probability `p` and rescales the
    /// survivors by `1/(1-p)`. The mask is a pure function of `seed`.
    pub fn dropout(&mut self, x: Var, p: f64, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout p={p} outside [0, 1)")));
        }
        if p == 0.0 {
            return Ok(x);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = 1.0 / (1.0 - p);
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let out = Tensor::from_parts(
            t.shape().to_vec(),
            t.data().iter().zip(&mask).map(|(v, m)| v * m).collect(),
        );
        let rg = self.rg(x);
        Ok(self.push(out, Op::Dropout { x, mask }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let d = self.data(x);
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(m), Op::Mean(x), rg)
    }

    /// `Σ_rows −Σ_c target·log softmax(logits)` over the last axis.
    pub fn cross_entropy_with_logits(&mut self, logits: Var, target: Var) -> Result<Var> {
        self.same_shape("cross_entropy_with_logits", logits, target)?;
        let n = *self.shape(logits).last().unwrap();
        let z = self.data(logits);
        let y = self.data(target);
        let mut probs = vec![0.0; z.len()];
        let mut loss = 0.0;
        for r in 0..z.len() / n {
            let zr = &z[r * n..(r + 1) * n];
            let yr = &y[r * n..(r + 1) * n];
            let max = zr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = zr.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            for j in 0..n {
                probs[r * n + j] = (zr[j] - max).exp() / sum;
                loss -= yr[j] * (zr[j] - lse);
            }
        }
        let rg = self.rg(logits) || self.rg(target);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                target,
                probs,
            },
            rg,
        ))
    }

    /// `Σ (pred − target)²`.
    pub fn squared_error(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("squared_error", pred, target)?;
        let s = self
            .data(pred)
            .iter()
            .zip(self.data(target))
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let rg = self.rg(pred) || self.rg(target);
        Ok(self.push(Tensor::scalar(s), Op::SquaredError { pred, target }, rg))
    }

    /// Euclidean norm of each row of a matrix; shape `[rows]`.
    ///
    /// The subgradient at a zero row is taken to be zero.
    pub fn row_norm(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (r, _) = t.dims2()?;
        let out: Vec<f64> = (0..r)
            .map(|i| t.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let rg = self.rg(x);
        Ok(self.push(Tensor::vector(out), Op::RowNorm(x), rg))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients {
            params: vec![None; self.params.map_or(0, ParamStore::len)],
            leaves: Vec::new(),
        };

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &node.op {
                Op::Input => out.leaves.push((Var(idx), g)),
                Op::Param(id) => out.params[id.0] = Some(g),
                op => self.propagate(op, Var(idx), &g, &mut grads),
            }
        }
        out.leaves.reverse();
        Ok(out)
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut [f64]> {
        if !self.rg(v) {
            return None;
        }
        let n = self.value(v).len();
        Some(
            grads[v.0]
                .get_or_insert_with(|| vec![0.0; n])
                .as_mut_slice(),
        )
    }

    fn propagate(&self, op: &Op, out: Var, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match *op {
            Op::Input | Op::Param(_) => unreachable!(),
            Op::MatMul(a, b) => {
                let (m, k) = self.value(a).dims2().unwrap();
                let n = self.value(b).cols();
                if let Some(ga) = self.acc(grads, a) {
                    kernels::matmul_nt(g, self.data(b), ga, m, n, k);
                }
                if let Some(gb) = self.acc(grads, b) {
                    kernels::matmul_tn(self.data(a), g, gb, m, k, n);
                }
            }
            Op::MatMulNT(a, b) => {
                let (m, k) = self.value(a).dims2().unwrap();
                let n = self.value(b).rows();
                if let Some(ga) = self.acc(grads, a) {
                    kernels::matmul(g, self.data(b), ga, m, n, k);
                }
                if let Some(gb) = self.acc(grads, b) {
                    kernels::matmul_tn(g, self.data(a), gb, m, n, k);
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = self.acc(grads, a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
                if let Some(gb) = self.acc(grads, b) {
                    gb.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.acc(grads, a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
                if let Some(gb) = self.acc(grads, b) {
                    gb.iter_mut().zip(g).for_each(|(x, y)| *x -= y);
                }
            }
            Op::Mul(a, b) => {
                if let Some(ga) = self.acc(grads, a) {
                    for ((x, y), bv) in ga.iter_mut().zip(g).zip(self.data(b)) {
                        *x += y * bv;
                    }
                }
                if let Some(gb) = self.acc(grads, b) {
                    for ((x, y), av) in gb.iter_mut().zip(g).zip(self.data(a)) {
                        *x += y * av;
                    }
                }
            }
            Op::AddBias(x, b) => {
                if let Some(gx) = self.acc(grads, x) {
                    gx.iter_mut().zip(g).for_each(|(a, y)| *a += y);
                }
                if let Some(gb) = self.acc(grads, b) {
                    let n = gb.len();
                    for row in g.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(a, y)| *a += y);
                    }
                }
            }
            Op::Scale(x, c) => {
                if let Some(gx) = self.acc(grads, x) {
                    gx.iter_mut().zip(g).for_each(|(a, y)| *a += c * y);
                }
            }
            Op::Relu(x) => {
                let xs = self.data(x);
                if let Some(gx) = self.acc(grads, x) {
                    for ((a, y), v) in gx.iter_mut().zip(g).zip(xs) {
                        if *v > 0.0 {
                            *a += y;
                        }
                    }
                }
            }
            Op::Softmax { x, axis } => {
                let y = self.data(out);
                let (outer, dim, inner) = axis_split(self.shape(out), axis);
                if let Some(gx) = self.acc(grads, x) {
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |k: usize| (o * dim + k) * inner + i;
                            let dot: f64 = (0..dim).map(|k| g[idx(k)] * y[idx(k)]).sum();
                            for k in 0..dim {
                                gx[idx(k)] += y[idx(k)] * (g[idx(k)] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                ref xhat,
                ref inv_std,
            } => {
                let gv = self.data(gain);
                let n = gv.len();
                if let Some(ggain) = self.acc(grads, gain) {
                    for (gr, hr) in g.chunks(n).zip(xhat.chunks(n)) {
                        for j in 0..n {
                            ggain[j] += gr[j] * hr[j];
                        }
                    }
                }
                if let Some(gbias) = self.acc(grads, bias) {
                    for gr in g.chunks(n) {
                        gbias.iter_mut().zip(gr).for_each(|(a, y)| *a += y);
                    }
                }
                if let Some(gx) = self.acc(grads, x) {
                    let nf = n as f64;
                    for (r, (gr, hr)) in g.chunks(n).zip(xhat.chunks(n)).enumerate() {
                        let mut mean_d = 0.0;
                        let mut mean_dh = 0.0;
                        for j in 0..n {
                            let d = gr[j] * gv[j];
                            mean_d += d;
                            mean_dh += d * hr[j];
                        }
                        mean_d /= nf;
                        mean_dh /= nf;
                        let gxr = &mut gx[r * n..(r + 1) * n];
                        for j in 0..n {
                            let d = gr[j] * gv[j];
                            gxr[j] += inv_std[r] * (d - mean_d - hr[j] * mean_dh);
                        }
                    }
                }
            }
            Op::Transpose(x) => {
                let (r, c) = self.value(x).dims2().unwrap();
                if let Some(gx) = self.acc(grads, x) {
                    for i in 0..r {
                        for j in 0..c {
                            gx[i * c + j] += g[j * r + i];
                        }
                    }
                }
            }
            Op::Concat { ref parts, axis } => {
                let (outer, total, inner) = axis_split(self.shape(out), axis);
                let mut offset = 0;
                for &p in parts {
                    let d = self.shape(p)[axis];
                    if let Some(gp) = self.acc(grads, p) {
                        for o in 0..outer {
                            let src = (o * total + offset) * inner;
                            let dst = o * d * inner;
                            for (a, y) in gp[dst..dst + d * inner]
                                .iter_mut()
                                .zip(&g[src..src + d * inner])
                            {
                                *a += y;
                            }
                        }
                    }
                    offset += d;
                }
            }
            Op::Slice { x, axis, start } => {
                let (outer, dim, inner) = axis_split(self.shape(x), axis);
                let len = self.shape(out)[axis];
                if let Some(gx) = self.acc(grads, x) {
                    for o in 0..outer {
                        let dst = (o * dim + start) * inner;
                        let src = o * len * inner;
                        for (a, y) in gx[dst..dst + len * inner]
                            .iter_mut()
                            .zip(&g[src..src + len * inner])
                        {
                            *a += y;
                        }
                    }
                }
            }
            Op::Dropout { x, ref mask } => {
                if let Some(gx) = self.acc(grads, x) {
                    for ((a, y), m) in gx.iter_mut().zip(g).zip(mask) {
                        *a += y * m;
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(gx) = self.acc(grads, x) {
                    gx.iter_mut().for_each(|a| *a += g[0]);
                }
            }
            Op::Mean(x) => {
                let n = self.value(x).len() as f64;
                if let Some(gx) = self.acc(grads, x) {
                    gx.iter_mut().for_each(|a| *a += g[0] / n);
                }
            }
            Op::CrossEntropy {
                logits,
                target,
                ref probs,
            } => {
                let n = *self.shape(logits).last().unwrap();
                let y = self.data(target);
                if let Some(gz) = self.acc(grads, logits) {
                    for (r, yr) in y.chunks(n).enumerate() {
                        let mass: f64 = yr.iter().sum();
                        for j in 0..n {
                            gz[r * n + j] += g[0] * (mass * probs[r * n + j] - yr[j]);
                        }
                    }
                }
                if self.rg(target) {
                    let z = self.data(logits);
                    let mut lse = Vec::with_capacity(y.len() / n);
                    for zr in z.chunks(n) {
                        let max = zr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        lse.push(max + zr.iter().map(|v| (v - max).exp()).sum::<f64>().ln());
                    }
                    let gy = self.acc(grads, target).unwrap();
                    for (i, a) in gy.iter_mut().enumerate() {
                        *a -= g[0] * (z[i] - lse[i / n]);
                    }
                }
            }
            Op::SquaredError { pred, target } => {
                let p = self.data(pred);
                let t = self.data(target);
                if let Some(gp) = self.acc(grads, pred) {
                    for ((a, pv), tv) in gp.iter_mut().zip(p).zip(t) {
                        *a += 2.0 * g[0] * (pv - tv);
                    }
                }
                if let Some(gt) = self.acc(grads, target) {
                    for ((a, pv), tv) in gt.iter_mut().zip(p).zip(t) {
                        *a -= 2.0 * g[0] * (pv - tv);
                    }
                }
            }
            Op::RowNorm(x) => {
                let norms = self.data(out);
                let xv = self.value(x);
                let c = xv.cols();
                let xs = xv.data();
                if let Some(gx) = self.acc(grads, x) {
                    for (r, &nr) in norms.iter().enumerate() {
                        if nr == 0.0 {
                            continue;
                        }
                        for j in 0..c {
                            gx[r * c + j] += g[r] * xs[r * c + j] / nr;
                        }
                    }
                }
            }
        }
    }
}

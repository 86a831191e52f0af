//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Graph`] is an append-only arena of nodes; construction is topological
//! by definition, so forward evaluation is a single in-order sweep and
//! backpropagation a single reverse sweep. Every primitive defines its
//! forward value and an exact vector-Jacobian product.
//!
//! Shapes are inferred and checked at construction time; forward evaluation
//! additionally rejects non-finite values (numeric health).

mod adam;
mod check;

pub use adam::{adam_step, AdamHyper, AdamState, ParamSet};
pub use check::{finite_diff_compare, finite_diff_full, GradCheckFailure, GradCheckReport};

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::SparseVector;
use crate::tensor::DenseMatrix;

pub type NodeId = usize;

/// Values bound to `Op::Input` nodes for one forward pass.
pub type Bindings = HashMap<String, DenseMatrix>;

/// Primitive operations of the compute graph.
#[derive(Clone, Debug)]
pub enum Op {
    /// Externally bound value, identified by name.
    Input(String),
    /// Trainable tensor, index into the [`ParamSet`] given at evaluation.
    Param(usize),
    /// Fixed value baked into the graph.
    Const(DenseMatrix),
    /// `a (n x k) . b (k x m)`
    MatMul,
    Transpose,
    /// `x (n x d) . w (d x h) + bias (1 x h)` broadcast over rows.
    Affine,
    Relu,
    Sigmoid,
    /// Column-wise concatenation of two inputs with equal row counts.
    ConcatCols,
    /// Per-row inner product of two equally shaped inputs; output `n x 1`.
    RowwiseDot,
    /// Mean over all entries; output scalar.
    Mean,
    /// Elementwise square.
    Square,
    /// Sum over all entries; output scalar.
    Sum,
    /// Multiply by a fixed factor.
    Scale(f64),
    Sub,
    Add,
    /// Squared Frobenius norm; output scalar.
    FrobeniusSq,
    /// `K[k, l] = exp(-lambda * ||x_k - y_l||^2)` between the rows of two
    /// inputs. Fused primitive: the Gram matrix dominates a training step, so
    /// its VJP (`dK/dx = -2 lambda (x - y) K`) is computed in one pass.
    RbfPairwise(f64),
    /// Rows of sparse data times a dense weight input: `S (n x len) . w
    /// (len x h)`. The sparse side is constant; gradients flow to the weight
    /// only and touch only the rows referenced by the batch.
    SparseMatMul(Arc<Vec<SparseVector>>),
    /// Numerically stable binary cross entropy from logits. Inputs
    /// `[logits (n x 1), labels (n x 1)]`; gradients flow to logits only.
    BceWithLogits,
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input(_) => "input",
            Op::Param(_) => "param",
            Op::Const(_) => "const",
            Op::MatMul => "matmul",
            Op::Transpose => "transpose",
            Op::Affine => "affine",
            Op::Relu => "relu",
            Op::Sigmoid => "sigmoid",
            Op::ConcatCols => "concat_cols",
            Op::RowwiseDot => "rowwise_dot",
            Op::Mean => "mean",
            Op::Square => "square",
            Op::Sum => "sum",
            Op::Scale(_) => "scale",
            Op::Sub => "sub",
            Op::Add => "add",
            Op::FrobeniusSq => "frobenius_sq",
            Op::RbfPairwise(_) => "rbf_pairwise",
            Op::SparseMatMul(_) => "sparse_matmul",
            Op::BceWithLogits => "bce_with_logits",
        }
    }
}

struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    shape: (usize, usize),
    value: Option<DenseMatrix>,
    adjoint: Option<DenseMatrix>,
}

/// Append-only compute graph. Single-writer during forward/backward.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id].shape
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, shape: (usize, usize)) -> NodeId {
        debug_assert!(inputs.iter().all(|&i| i < self.nodes.len()));
        self.nodes.push(Node {
            op,
            inputs,
            shape,
            value: None,
            adjoint: None,
        });
        self.nodes.len() - 1
    }

    fn mismatch(&self, op: &'static str, ids: &[NodeId]) -> Error {
        let shapes: Vec<String> = ids
            .iter()
            .map(|&i| format!("{:?}", self.nodes[i].shape))
            .collect();
        Error::ShapeMismatch {
            op,
            details: shapes.join(" vs "),
        }
    }

    // ----- leaves -------------------------------------------------------

    pub fn input(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> NodeId {
        self.push(Op::Input(name.into()), vec![], (rows, cols))
    }

    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        let shape = value.shape();
        self.push(Op::Const(value), vec![], shape)
    }

    pub fn scalar_const(&mut self, v: f64) -> NodeId {
        self.constant(DenseMatrix::scalar(v))
    }

    /// Register a trainable tensor from `params` as a graph leaf.
    pub fn param(&mut self, index: usize, params: &ParamSet) -> NodeId {
        let shape = params.tensor(index).shape();
        self.push(Op::Param(index), vec![], shape)
    }

    // ----- primitives ---------------------------------------------------

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.nodes[a].shape;
        let (br, bc) = self.nodes[b].shape;
        if ac != br {
            return Err(self.mismatch("matmul", &[a, b]));
        }
        Ok(self.push(Op::MatMul, vec![a, b], (ar, bc)))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let (r, c) = self.nodes[a].shape;
        Ok(self.push(Op::Transpose, vec![a], (c, r)))
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, bias: NodeId) -> Result<NodeId> {
        let (n, d) = self.nodes[x].shape;
        let (wr, h) = self.nodes[w].shape;
        let bs = self.nodes[bias].shape;
        if d != wr || bs != (1, h) {
            return Err(self.mismatch("affine", &[x, w, bias]));
        }
        Ok(self.push(Op::Affine, vec![x, w, bias], (n, h)))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.nodes[a].shape;
        Ok(self.push(Op::Relu, vec![a], shape))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.nodes[a].shape;
        Ok(self.push(Op::Sigmoid, vec![a], shape))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.nodes[a].shape;
        let (br, bc) = self.nodes[b].shape;
        if ar != br {
            return Err(self.mismatch("concat_cols", &[a, b]));
        }
        Ok(self.push(Op::ConcatCols, vec![a, b], (ar, ac + bc)))
    }

    pub fn rowwise_dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.nodes[a].shape;
        let sb = self.nodes[b].shape;
        if sa != sb {
            return Err(self.mismatch("rowwise_dot", &[a, b]));
        }
        Ok(self.push(Op::RowwiseDot, vec![a, b], (sa.0, 1)))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        Ok(self.push(Op::Mean, vec![a], (1, 1)))
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.nodes[a].shape;
        Ok(self.push(Op::Square, vec![a], shape))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        Ok(self.push(Op::Sum, vec![a], (1, 1)))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        let shape = self.nodes[a].shape;
        Ok(self.push(Op::Scale(factor), vec![a], shape))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.nodes[a].shape != self.nodes[b].shape {
            return Err(self.mismatch("sub", &[a, b]));
        }
        let shape = self.nodes[a].shape;
        Ok(self.push(Op::Sub, vec![a, b], shape))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.nodes[a].shape != self.nodes[b].shape {
            return Err(self.mismatch("add", &[a, b]));
        }
        let shape = self.nodes[a].shape;
        Ok(self.push(Op::Add, vec![a, b], shape))
    }

    pub fn frobenius_sq(&mut self, a: NodeId) -> Result<NodeId> {
        Ok(self.push(Op::FrobeniusSq, vec![a], (1, 1)))
    }

    pub fn rbf_pairwise(&mut self, x: NodeId, y: NodeId, bandwidth: f64) -> Result<NodeId> {
        let (n, dx) = self.nodes[x].shape;
        let (m, dy) = self.nodes[y].shape;
        if dx != dy {
            return Err(self.mismatch("rbf_pairwise", &[x, y]));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::Config(format!(
                "rbf bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(self.push(Op::RbfPairwise(bandwidth), vec![x, y], (n, m)))
    }

    pub fn sparse_matmul(&mut self, rows: Arc<Vec<SparseVector>>, w: NodeId) -> Result<NodeId> {
        let (wr, h) = self.nodes[w].shape;
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != wr) {
            return Err(Error::ShapeMismatch {
                op: "sparse_matmul",
                details: format!("sparse row length {} vs weight rows {}", bad.len(), wr),
            });
        }
        Ok(self.push(Op::SparseMatMul(rows), vec![w], (n, h)))
    }

    pub fn bce_with_logits(&mut self, logits: NodeId, labels: NodeId) -> Result<NodeId> {
        let sl = self.nodes[logits].shape;
        let sy = self.nodes[labels].shape;
        if sl != sy || sl.1 != 1 || sl.0 == 0 {
            return Err(self.mismatch("bce_with_logits", &[logits, labels]));
        }
        Ok(self.push(Op::BceWithLogits, vec![logits, labels], (1, 1)))
    }

    // ----- evaluation ---------------------------------------------------

    fn value_of<'a>(&'a self, id: NodeId, params: &'a ParamSet) -> Result<&'a DenseMatrix> {
        let node = &self.nodes[id];
        match &node.op {
            Op::Param(idx) => Ok(params.tensor(*idx)),
            _ => node
                .value
                .as_ref()
                .ok_or_else(|| Error::Graph(format!("node {id} has no forward value"))),
        }
    }

    /// Run the forward pass, populating every node's cached output. Pure
    /// given bindings and parameters.
    pub fn forward(&mut self, params: &ParamSet, bindings: &Bindings) -> Result<()> {
        for i in 0..self.nodes.len() {
            self.nodes[i].value = None;
            self.nodes[i].adjoint = None;
        }
        for i in 0..self.nodes.len() {
            let out = self.eval(i, params, bindings)?;
            if let Some(v) = out {
                if !v.is_finite() {
                    return Err(Error::NumericHealth(format!(
                        "{} (node {i})",
                        self.nodes[i].op.name()
                    )));
                }
                self.nodes[i].value = Some(v);
            }
        }
        Ok(())
    }

    fn eval(
        &self,
        id: NodeId,
        params: &ParamSet,
        bindings: &Bindings,
    ) -> Result<Option<DenseMatrix>> {
        let node = &self.nodes[id];
        let input = |slot: usize| self.value_of(node.inputs[slot], params);
        let out = match &node.op {
            Op::Param(_) => return Ok(None),
            Op::Input(name) => {
                let v = bindings
                    .get(name)
                    .ok_or_else(|| Error::Graph(format!("unbound input '{name}'")))?;
                if v.shape() != node.shape {
                    return Err(Error::ShapeMismatch {
                        op: "input binding",
                        details: format!("'{name}': {:?} vs {:?}", v.shape(), node.shape),
                    });
                }
                v.clone()
            }
            Op::Const(v) => v.clone(),
            Op::MatMul => input(0)?.matmul(input(1)?)?,
            Op::Transpose => input(0)?.transpose(),
            Op::Affine => {
                let x = input(0)?;
                let w = input(1)?;
                let b = input(2)?;
                let mut z = x.matmul(w)?;
                let bias = b.values();
                let h = z.cols();
                for row in z.values_mut().chunks_mut(h) {
                    for (o, &bv) in row.iter_mut().zip(bias) {
                        *o += bv;
                    }
                }
                z
            }
            Op::Relu => input(0)?.map(|v| v.max(0.0)),
            Op::Sigmoid => input(0)?.map(sigmoid),
            Op::ConcatCols => {
                let a = input(0)?;
                let b = input(1)?;
                let (n, ca) = a.shape();
                let cb = b.cols();
                DenseMatrix::from_fn(n, ca + cb, |i, j| {
                    if j < ca {
                        a.get(i, j)
                    } else {
                        b.get(i, j - ca)
                    }
                })
            }
            Op::RowwiseDot => {
                let a = input(0)?;
                let b = input(1)?;
                let (n, d) = a.shape();
                let av = a.values();
                let bv = b.values();
                DenseMatrix::from_fn(n, 1, |i, _| {
                    (0..d).map(|j| av[i * d + j] * bv[i * d + j]).sum()
                })
            }
            Op::Mean => {
                let a = input(0)?;
                let k = (a.rows() * a.cols()) as f64;
                DenseMatrix::scalar(a.sum() / k)
            }
            Op::Square => input(0)?.map(|v| v * v),
            Op::Sum => DenseMatrix::scalar(input(0)?.sum()),
            Op::Scale(c) => input(0)?.scale(*c),
            Op::Sub => input(0)?.sub(input(1)?)?,
            Op::Add => input(0)?.add(input(1)?)?,
            Op::FrobeniusSq => DenseMatrix::scalar(input(0)?.frobenius_sq()),
            Op::RbfPairwise(lambda) => {
                let x = input(0)?;
                let y = input(1)?;
                rbf_forward(x, y, *lambda)
            }
            Op::SparseMatMul(rows) => {
                let w = input(0)?;
                let h = w.cols();
                let mut out = DenseMatrix::zeros(rows.len(), h);
                let buf = out.values_mut();
                for (r, sv) in rows.iter().enumerate() {
                    sv.accumulate_product(w, &mut buf[r * h..(r + 1) * h]);
                }
                out
            }
            Op::BceWithLogits => {
                let z = input(0)?;
                let y = input(1)?;
                let n = z.rows() as f64;
                let total: f64 = z
                    .values()
                    .iter()
                    .zip(y.values())
                    .map(|(&zi, &yi)| softplus(zi) - yi * zi)
                    .sum();
                DenseMatrix::scalar(total / n)
            }
        };
        Ok(Some(out))
    }

    /// Cached forward value of a computed node (run `forward` first).
    pub fn value(&self, id: NodeId) -> Result<&DenseMatrix> {
        self.nodes[id]
            .value
            .as_ref()
            .ok_or_else(|| Error::Graph(format!("node {id} has no forward value")))
    }

    /// Scalar convenience accessor.
    pub fn scalar_value(&self, id: NodeId) -> Result<f64> {
        let v = self.value(id)?;
        if !v.is_scalar() {
            return Err(Error::Graph(format!(
                "node {id} is {:?}, not scalar",
                v.shape()
            )));
        }
        Ok(v.scalar_value())
    }

    /// Reverse sweep from a scalar loss node. Populates adjoints; the
    /// gradient of each `Param` leaf equals the true partial derivative of
    /// the loss with respect to that tensor.
    pub fn backward(&mut self, loss: NodeId, params: &ParamSet) -> Result<()> {
        if self.nodes[loss].shape != (1, 1) {
            return Err(Error::Graph(format!(
                "loss node must be scalar, got {:?}",
                self.nodes[loss].shape
            )));
        }
        if self.nodes[loss].value.is_none() {
            return Err(Error::Graph("backward before forward".into()));
        }
        for node in &mut self.nodes {
            node.adjoint = None;
        }
        self.nodes[loss].adjoint = Some(DenseMatrix::scalar(1.0));
        for i in (0..=loss).rev() {
            if self.nodes[i].adjoint.is_none() {
                continue;
            }
            let contribs = self.vjp(i, params)?;
            for (target, c) in contribs {
                match &mut self.nodes[target].adjoint {
                    Some(a) => a.add_scaled_assign(&c, 1.0)?,
                    slot @ None => *slot = Some(c),
                }
            }
        }
        Ok(())
    }

    /// Adjoint of a node after `backward` (None if the node is off the loss
    /// path).
    pub fn adjoint(&self, id: NodeId) -> Option<&DenseMatrix> {
        self.nodes[id].adjoint.as_ref()
    }

    fn vjp(&self, id: NodeId, params: &ParamSet) -> Result<Vec<(NodeId, DenseMatrix)>> {
        let node = &self.nodes[id];
        let adj = node.adjoint.as_ref().expect("caller checked adjoint");
        let input_id = |slot: usize| node.inputs[slot];
        let input = |slot: usize| self.value_of(node.inputs[slot], params);
        let mut out: Vec<(NodeId, DenseMatrix)> = Vec::new();
        match &node.op {
            Op::Input(_) | Op::Param(_) | Op::Const(_) => {}
            Op::MatMul => {
                let a = input(0)?;
                let b = input(1)?;
                out.push((input_id(0), adj.matmul(&b.transpose())?));
                out.push((input_id(1), a.transpose().matmul(adj)?));
            }
            Op::Transpose => out.push((input_id(0), adj.transpose())),
            Op::Affine => {
                let x = input(0)?;
                let w = input(1)?;
                out.push((input_id(0), adj.matmul(&w.transpose())?));
                out.push((input_id(1), x.transpose().matmul(adj)?));
                let h = adj.cols();
                let mut bias_grad = DenseMatrix::zeros(1, h);
                let bg = bias_grad.values_mut();
                for row in adj.values().chunks(h) {
                    for (g, &v) in bg.iter_mut().zip(row) {
                        *g += v;
                    }
                }
                out.push((input_id(2), bias_grad));
            }
            Op::Relu => {
                let x = input(0)?;
                out.push((input_id(0), adj.zip_map(x, |a, v| if v > 0.0 { a } else { 0.0 })?));
            }
            Op::Sigmoid => {
                let s = node.value.as_ref().expect("forward ran");
                out.push((input_id(0), adj.zip_map(s, |a, sv| a * sv * (1.0 - sv))?));
            }
            Op::ConcatCols => {
                let (n, ca) = self.nodes[input_id(0)].shape;
                let cb = self.nodes[input_id(1)].shape.1;
                out.push((
                    input_id(0),
                    DenseMatrix::from_fn(n, ca, |i, j| adj.get(i, j)),
                ));
                out.push((
                    input_id(1),
                    DenseMatrix::from_fn(n, cb, |i, j| adj.get(i, ca + j)),
                ));
            }
            Op::RowwiseDot => {
                let a = input(0)?;
                let b = input(1)?;
                let (n, d) = a.shape();
                out.push((
                    input_id(0),
                    DenseMatrix::from_fn(n, d, |i, j| adj.get(i, 0) * b.get(i, j)),
                ));
                out.push((
                    input_id(1),
                    DenseMatrix::from_fn(n, d, |i, j| adj.get(i, 0) * a.get(i, j)),
                ));
            }
            Op::Mean => {
                let (r, c) = self.nodes[input_id(0)].shape;
                let g = adj.scalar_value() / (r * c) as f64;
                out.push((input_id(0), DenseMatrix::from_fn(r, c, |_, _| g)));
            }
            Op::Square => {
                let x = input(0)?;
                out.push((input_id(0), adj.zip_map(x, |a, v| a * 2.0 * v)?));
            }
            Op::Sum => {
                let (r, c) = self.nodes[input_id(0)].shape;
                let g = adj.scalar_value();
                out.push((input_id(0), DenseMatrix::from_fn(r, c, |_, _| g)));
            }
            Op::Scale(factor) => out.push((input_id(0), adj.scale(*factor))),
            Op::Sub => {
                out.push((input_id(0), adj.clone()));
                out.push((input_id(1), adj.scale(-1.0)));
            }
            Op::Add => {
                out.push((input_id(0), adj.clone()));
                out.push((input_id(1), adj.clone()));
            }
            Op::FrobeniusSq => {
                let x = input(0)?;
                out.push((input_id(0), x.scale(2.0 * adj.scalar_value())));
            }
            Op::RbfPairwise(lambda) => {
                let x = input(0)?;
                let y = input(1)?;
                let k = node.value.as_ref().expect("forward ran");
                let (gx, gy) = rbf_backward(x, y, k, adj, *lambda);
                out.push((input_id(0), gx));
                out.push((input_id(1), gy));
            }
            Op::SparseMatMul(rows) => {
                let w = input(0)?;
                let h = w.cols();
                let mut grad = DenseMatrix::zeros(w.rows(), h);
                let g = grad.values_mut();
                let av = adj.values();
                for (r, sv) in rows.iter().enumerate() {
                    let arow = &av[r * h..(r + 1) * h];
                    for (i, v) in sv.iter() {
                        let grow = &mut g[i as usize * h..(i as usize + 1) * h];
                        for (gv, &a) in grow.iter_mut().zip(arow) {
                            *gv += v * a;
                        }
                    }
                }
                out.push((input_id(0), grad));
            }
            Op::BceWithLogits => {
                let z = input(0)?;
                let y = input(1)?;
                let n = z.rows() as f64;
                let a = adj.scalar_value();
                out.push((
                    input_id(0),
                    z.zip_map(y, |zi, yi| a * (sigmoid(zi) - yi) / n)?,
                ));
            }
        }
        Ok(out)
    }

    /// Gradients for every tensor in `params`, aligned with its order.
    /// Parameters that do not influence the loss get zero gradients.
    pub fn param_gradients(&self, params: &ParamSet) -> Vec<DenseMatrix> {
        let mut grads: Vec<DenseMatrix> = (0..params.len())
            .map(|i| {
                let (r, c) = params.tensor(i).shape();
                DenseMatrix::zeros(r, c)
            })
            .collect();
        for node in &self.nodes {
            if let (Op::Param(idx), Some(adj)) = (&node.op, &node.adjoint) {
                grads[*idx]
                    .add_scaled_assign(adj, 1.0)
                    .expect("param adjoint shape matches tensor");
            }
        }
        grads
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn rbf_forward(x: &DenseMatrix, y: &DenseMatrix, lambda: f64) -> DenseMatrix {
    let (n, d) = x.shape();
    let m = y.rows();
    let xv = x.values();
    let yv = y.values();
    let mut out = DenseMatrix::zeros(n, m);
    let ov = out.values_mut();
    for k in 0..n {
        let xk = &xv[k * d..(k + 1) * d];
        for l in 0..m {
            let yl = &yv[l * d..(l + 1) * d];
            let mut dist = 0.0;
            for (a, b) in xk.iter().zip(yl) {
                let diff = a - b;
                dist += diff * diff;
            }
            ov[k * m + l] = (-lambda * dist).exp();
        }
    }
    out
}

fn rbf_backward(
    x: &DenseMatrix,
    y: &DenseMatrix,
    k: &DenseMatrix,
    adj: &DenseMatrix,
    lambda: f64,
) -> (DenseMatrix, DenseMatrix) {
    let (n, d) = x.shape();
    let m = y.rows();
    let xv = x.values();
    let yv = y.values();
    let mut gx = DenseMatrix::zeros(n, d);
    let mut gy = DenseMatrix::zeros(m, d);
    let gxv = gx.values_mut();
    let gyv = gy.values_mut();
    for r in 0..n {
        let xr = &xv[r * d..(r + 1) * d];
        for c in 0..m {
            let w = -2.0 * lambda * adj.get(r, c) * k.get(r, c);
            if w == 0.0 {
                continue;
            }
            let yc = &yv[c * d..(c + 1) * d];
            for j in 0..d {
                let diff = xr[j] - yc[j];
                gxv[r * d + j] += w * diff;
                gyv[c * d + j] -= w * diff;
            }
        }
    }
    (gx, gy)
}

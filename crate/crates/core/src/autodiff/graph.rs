//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so storage order is a topological
//! order and the backward pass walks it in reverse. All differentiable
//! operators carry a leading batch dimension where one applies.

use super::conv::{self, ConvGeom};
use super::gemm::gemm;
use super::tensor::{Parameter, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        geom: ConvGeom,
        batch: usize,
        cols: Vec<f64>,
    },
    Deconv {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        geom: ConvGeom,
        batch: usize,
    },
    Dense {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Relu(NodeId),
    Sigmoid(NodeId),
    SqrtSigmoid(NodeId),
    Neg(NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Reshape(NodeId),
    TransposeLast2(NodeId),
    Concat(NodeId, NodeId),
    MeanBatch(NodeId),
    Softmax(NodeId),
    NormalizeSum(NodeId),
    Sdkl(NodeId, NodeId),
    CrossEntropy {
        logits: NodeId,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    SquaredError(NodeId, NodeId),
    SumSquares(NodeId),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A single forward evaluation recorded for differentiation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node that requires them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(x: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (row, dst) in x.chunks(width).zip(out.chunks_mut(width)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    out
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Constant input; no gradient is tracked.
    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf, false)
    }

    /// Leaf whose gradient is tracked (copies the parameter's current value).
    pub fn param(&mut self, p: &Parameter) -> NodeId {
        self.push(p.value.clone(), Op::Leaf, true)
    }

    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> NodeId {
        self.push(t, Op::Leaf, requires_grad)
    }

    fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    /// Valid 1-D cross-correlation: `[B, Cin, L]` with kernels `[Cout, Cin, k]`
    /// gives `[B, Cout, ⌊(L−k)/s⌋+1]`.
    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize) -> Result<NodeId> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 3 || ws[1] != xs[1] || self.shape(b) != [ws[0]] {
            return Err(Error::shape(format!(
                "conv1d: input {xs:?}, kernels {ws:?}, bias {:?}",
                self.shape(b)
            )));
        }
        let geom = ConvGeom::new(xs[1], ws[0], (1, xs[2]), (1, ws[2]), (1, stride))?;
        self.conv_impl(x, w, b, geom, xs[0], vec![xs[0], geom.cout, geom.ow])
    }

    /// Valid 2-D cross-correlation: `[B, Cin, H, W]` with kernels
    /// `[Cout, Cin, kh, kw]`.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: (usize, usize),
    ) -> Result<NodeId> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || ws[1] != xs[1] || self.shape(b) != [ws[0]] {
            return Err(Error::shape(format!(
                "conv2d: input {xs:?}, kernels {ws:?}, bias {:?}",
                self.shape(b)
            )));
        }
        let geom = ConvGeom::new(xs[1], ws[0], (xs[2], xs[3]), (ws[2], ws[3]), stride)?;
        self.conv_impl(x, w, b, geom, xs[0], vec![xs[0], geom.cout, geom.oh, geom.ow])
    }

    fn conv_impl(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        geom: ConvGeom,
        batch: usize,
        out_shape: Vec<usize>,
    ) -> Result<NodeId> {
        // Patch matrices are only needed for the weight gradient.
        let (y, cols) = conv::conv_forward(
            batch,
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            &geom,
            self.rg(&[w]),
        );
        let rg = self.rg(&[x, w, b]);
        let value = Tensor::new(out_shape, y)?;
        Ok(self.push(
            value,
            Op::Conv {
                x,
                w,
                b,
                geom,
                batch,
                cols,
            },
            rg,
        ))
    }

    /// Transposed 1-D convolution: `[B, Cin, L]` with kernels `[Cin, Cout, k]`
    /// gives `[B, Cout, (L−1)·s+k]`.
    pub fn deconv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize) -> Result<NodeId> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 3 || ws[0] != xs[1] || self.shape(b) != [ws[1]] {
            return Err(Error::shape(format!(
                "deconv1d: input {xs:?}, kernels {ws:?}, bias {:?}",
                self.shape(b)
            )));
        }
        let geom = ConvGeom::for_transpose(xs[1], ws[1], (1, xs[2]), (1, ws[2]), (1, stride))?;
        self.deconv_impl(x, w, b, geom, xs[0], vec![xs[0], geom.cin, geom.w])
    }

    /// Transposed 2-D convolution: `[B, Cin, H, W]` with kernels
    /// `[Cin, Cout, kh, kw]`.
    pub fn deconv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: (usize, usize),
    ) -> Result<NodeId> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || ws[0] != xs[1] || self.shape(b) != [ws[1]] {
            return Err(Error::shape(format!(
                "deconv2d: input {xs:?}, kernels {ws:?}, bias {:?}",
                self.shape(b)
            )));
        }
        let geom =
            ConvGeom::for_transpose(xs[1], ws[1], (xs[2], xs[3]), (ws[2], ws[3]), stride)?;
        self.deconv_impl(x, w, b, geom, xs[0], vec![xs[0], geom.cin, geom.h, geom.w])
    }

    fn deconv_impl(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        geom: ConvGeom,
        batch: usize,
        out_shape: Vec<usize>,
    ) -> Result<NodeId> {
        let y = conv::deconv_forward(
            batch,
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            &geom,
        );
        let rg = self.rg(&[x, w, b]);
        let value = Tensor::new(out_shape, y)?;
        Ok(self.push(
            value,
            Op::Deconv {
                x,
                w,
                b,
                geom,
                batch,
            },
            rg,
        ))
    }

    /// Affine map `[B, M]` → `[B, P]` with weight `[P, M]` and bias `[P]`.
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 2 || ws.len() != 2 || ws[1] != xs[1] || self.shape(b) != [ws[0]] {
            return Err(Error::shape(format!(
                "dense: input {xs:?}, weight {ws:?}, bias {:?}",
                self.shape(b)
            )));
        }
        let (batch, m, p) = (xs[0], xs[1], ws[0]);
        let mut y = Vec::with_capacity(batch * p);
        for _ in 0..batch {
            y.extend_from_slice(self.value(b).data());
        }
        gemm(batch, m, p, self.value(x).data(), false, self.value(w).data(), true, 1.0, &mut y);
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(Tensor::new(vec![batch, p], y)?, Op::Dense { x, w, b }, rg))
    }

    fn map(&mut self, x: NodeId, op: Op, f: impl Fn(f64) -> f64) -> NodeId {
        let v = self.value(x);
        let data = v.data().iter().map(|&a| f(a)).collect();
        let value = Tensor::new(v.shape().to_vec(), data).expect("elementwise shape");
        let rg = self.rg(&[x]);
        self.push(value, op, rg)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.map(x, Op::Relu(x), |a| a.max(0.0))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.map(x, Op::Sigmoid(x), sigmoid)
    }

    /// `√σ(x)` with a gradient that stays finite under saturation.
    pub fn sqrt_sigmoid(&mut self, x: NodeId) -> NodeId {
        self.map(x, Op::SqrtSigmoid(x), |a| sigmoid(a).sqrt())
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        self.map(x, Op::Neg(x), |a| -a)
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        self.map(x, Op::Scale(x, factor), |a| a * factor)
    }

    fn zip(&mut self, a: NodeId, b: NodeId, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(format!(
                "elementwise operands {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&p, &q)| f(p, q))
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip(a, b, Op::Add(a, b), |p, q| p + q)
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip(a, b, Op::Mul(a, b), |p, q| p * q)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Swaps the two trailing axes: `[…, R, C]` → `[…, C, R]`.
    pub fn transpose_last2(&mut self, x: NodeId) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::shape("transpose needs rank >= 2"));
        }
        let (r, c) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        let data = transpose_blocks(self.value(x).data(), r, c);
        let mut out_shape = shape;
        let n = out_shape.len();
        out_shape.swap(n - 2, n - 1);
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::new(out_shape, data)?, Op::TransposeLast2(x), rg))
    }

    /// Concatenates `[B, a]` and `[B, b]` into `[B, a+b]`.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[0] != sb[0] {
            return Err(Error::shape(format!("concat: {sa:?} and {sb:?}")));
        }
        let mut data = Vec::with_capacity(sa[0] * (sa[1] + sb[1]));
        for (ra, rb) in self
            .value(a)
            .data()
            .chunks(sa[1])
            .zip(self.value(b).data().chunks(sb[1]))
        {
            data.extend_from_slice(ra);
            data.extend_from_slice(rb);
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(
            Tensor::new(vec![sa[0], sa[1] + sb[1]], data)?,
            Op::Concat(a, b),
            rg,
        ))
    }

    /// Mean over the batch axis: `[B, M]` → `[M]`.
    pub fn mean_batch(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 {
            return Err(Error::shape(format!("mean_batch expects [B, M], got {s:?}")));
        }
        let mut out = vec![0.0; s[1]];
        for row in self.value(x).data().chunks(s[1]) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in &mut out {
            *o /= s[0] as f64;
        }
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::new(vec![s[1]], out)?, Op::MeanBatch(x), rg))
    }

    /// Softmax along the last axis, stabilized by max subtraction.
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let width = *v.shape().last().expect("rank >= 1");
        let value = Tensor::new(v.shape().to_vec(), softmax_rows(v.data(), width))
            .expect("softmax shape");
        let rg = self.rg(&[x]);
        self.push(value, Op::Softmax(x), rg)
    }

    /// Divides each last-axis row by its sum.
    pub fn normalize_sum(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        let width = *v.shape().last().expect("rank >= 1");
        let mut data = v.data().to_vec();
        for row in data.chunks_mut(width) {
            let s: f64 = row.iter().sum();
            if s == 0.0 || !s.is_finite() {
                return Err(Error::invalid("normalize_sum: row sum is zero or non-finite"));
            }
            for r in row.iter_mut() {
                *r /= s;
            }
        }
        let value = Tensor::new(v.shape().to_vec(), data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::NormalizeSum(x), rg))
    }

    /// Symmetrized KL divergence `Σ p ln(p/q) + Σ q ln(q/p)` of two strictly
    /// positive vectors.
    pub fn sdkl(&mut self, p: NodeId, q: NodeId) -> Result<NodeId> {
        if self.shape(p) != self.shape(q) {
            return Err(Error::shape(format!(
                "sdkl: {:?} vs {:?}",
                self.shape(p),
                self.shape(q)
            )));
        }
        let (pv, qv) = (self.value(p).data(), self.value(q).data());
        if pv.iter().chain(qv).any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::invalid("sdkl: probabilities must be strictly positive"));
        }
        let value = symmetric_kl(pv, qv);
        let rg = self.rg(&[p, q]);
        Ok(self.push(Tensor::scalar(value), Op::Sdkl(p, q), rg))
    }

    /// Mean softmax cross-entropy of `[B, K]` logits against class labels.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(Error::shape(format!(
                "cross_entropy: logits {s:?} for {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= s[1]) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {} classes",
                s[1]
            )));
        }
        let probs = softmax_rows(self.value(logits).data(), s[1]);
        let loss = log_softmax_nll(self.value(logits).data(), s[1], labels);
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// `Σ (a − b)²` over all elements.
    pub fn squared_error(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(format!(
                "squared_error: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::scalar(s), Op::SquaredError(a, b), rg))
    }

    /// `Σ x²` over all elements.
    pub fn sum_squares(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).sum_squares();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::SumSquares(x), rg)
    }

    /// Reverse sweep from a single-element node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[i].take() else { continue };
            self.backprop_node(node, &dy, &mut grads);
            grads[i] = Some(dy);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, data: Vec<f64>) {
        if !self.wants(id) {
            return;
        }
        let shape = self.shape(id);
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        match &mut grads[id.0] {
            Some(g) => {
                for (a, b) in g.data_mut().iter_mut().zip(&data) {
                    *a += b;
                }
            }
            slot @ None => {
                *slot = Some(Tensor::new(shape.to_vec(), data).expect("gradient shape"));
            }
        }
    }

    fn backprop_node(&self, node: &Node, dy: &Tensor, grads: &mut [Option<Tensor>]) {
        let g = dy.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv {
                x,
                w,
                b,
                geom,
                batch,
                cols,
            } => {
                let cols = self.wants(*w).then_some(cols.as_slice());
                let r = conv::conv_backward(
                    *batch,
                    cols,
                    self.value(*w).data(),
                    geom,
                    g,
                    self.wants(*x),
                );
                if let Some(dx) = r.dx {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = r.dw {
                    self.accumulate(grads, *w, dw);
                }
                self.accumulate(grads, *b, r.db);
            }
            Op::Deconv {
                x,
                w,
                b,
                geom,
                batch,
            } => {
                let r = conv::deconv_backward(
                    *batch,
                    self.value(*x).data(),
                    self.value(*w).data(),
                    geom,
                    g,
                    self.wants(*x),
                );
                if let Some(dx) = r.dx {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = r.dw {
                    self.accumulate(grads, *w, dw);
                }
                self.accumulate(grads, *b, r.db);
            }
            Op::Dense { x, w, b } => {
                let xs = self.shape(*x);
                let (batch, m) = (xs[0], xs[1]);
                let p = self.shape(*w)[0];
                if self.wants(*x) {
                    let mut dx = vec![0.0; batch * m];
                    gemm(batch, p, m, g, false, self.value(*w).data(), false, 0.0, &mut dx);
                    self.accumulate(grads, *x, dx);
                }
                if self.wants(*w) {
                    let mut dw = vec![0.0; p * m];
                    gemm(p, batch, m, g, true, self.value(*x).data(), false, 0.0, &mut dw);
                    self.accumulate(grads, *w, dw);
                }
                let mut db = vec![0.0; p];
                for row in g.chunks(p) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                self.accumulate(grads, *b, db);
            }
            Op::Relu(x) => {
                let d = g
                    .iter()
                    .zip(node.value.data())
                    .map(|(&gi, &y)| if y > 0.0 { gi } else { 0.0 })
                    .collect();
                self.accumulate(grads, *x, d);
            }
            Op::Sigmoid(x) => {
                let d = g
                    .iter()
                    .zip(node.value.data())
                    .map(|(&gi, &y)| gi * y * (1.0 - y))
                    .collect();
                self.accumulate(grads, *x, d);
            }
            Op::SqrtSigmoid(x) => {
                let d = g
                    .iter()
                    .zip(node.value.data())
                    .zip(self.value(*x).data())
                    .map(|((&gi, &y), &xi)| gi * 0.5 * y * sigmoid(-xi))
                    .collect();
                self.accumulate(grads, *x, d);
            }
            Op::Neg(x) => self.accumulate(grads, *x, g.iter().map(|v| -v).collect()),
            Op::Scale(x, f) => self.accumulate(grads, *x, g.iter().map(|v| v * f).collect()),
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, g.iter().zip(bv).map(|(gi, v)| gi * v).collect());
                self.accumulate(grads, *b, g.iter().zip(av).map(|(gi, v)| gi * v).collect());
            }
            Op::Reshape(x) => self.accumulate(grads, *x, g.to_vec()),
            Op::TransposeLast2(x) => {
                let s = node.value.shape();
                let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
                self.accumulate(grads, *x, transpose_blocks(g, r, c));
            }
            Op::Concat(a, b) => {
                let (wa, wb) = (self.shape(*a)[1], self.shape(*b)[1]);
                let mut ga = Vec::with_capacity(g.len() / (wa + wb) * wa);
                let mut gb = Vec::with_capacity(g.len() / (wa + wb) * wb);
                for row in g.chunks(wa + wb) {
                    ga.extend_from_slice(&row[..wa]);
                    gb.extend_from_slice(&row[wa..]);
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::MeanBatch(x) => {
                let s = self.shape(*x);
                let inv = 1.0 / s[0] as f64;
                let mut d = Vec::with_capacity(s[0] * s[1]);
                for _ in 0..s[0] {
                    d.extend(g.iter().map(|v| v * inv));
                }
                self.accumulate(grads, *x, d);
            }
            Op::Softmax(x) => {
                let width = *node.value.shape().last().unwrap();
                let mut d = vec![0.0; g.len()];
                for ((dr, gr), yr) in d
                    .chunks_mut(width)
                    .zip(g.chunks(width))
                    .zip(node.value.data().chunks(width))
                {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for ((o, gi), yi) in dr.iter_mut().zip(gr).zip(yr) {
                        *o = yi * (gi - dot);
                    }
                }
                self.accumulate(grads, *x, d);
            }
            Op::NormalizeSum(x) => {
                let width = *node.value.shape().last().unwrap();
                let mut d = vec![0.0; g.len()];
                for (((dr, gr), yr), xr) in d
                    .chunks_mut(width)
                    .zip(g.chunks(width))
                    .zip(node.value.data().chunks(width))
                    .zip(self.value(*x).data().chunks(width))
                {
                    let s: f64 = xr.iter().sum();
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for (o, gi) in dr.iter_mut().zip(gr) {
                        *o = (gi - dot) / s;
                    }
                }
                self.accumulate(grads, *x, d);
            }
            Op::Sdkl(p, q) => {
                let (pv, qv) = (self.value(*p).data(), self.value(*q).data());
                let g0 = g[0];
                let dp = pv
                    .iter()
                    .zip(qv)
                    .map(|(&a, &b)| g0 * ((a / b).ln() + 1.0 - b / a))
                    .collect();
                let dq = pv
                    .iter()
                    .zip(qv)
                    .map(|(&a, &b)| g0 * ((b / a).ln() + 1.0 - a / b))
                    .collect();
                self.accumulate(grads, *p, dp);
                self.accumulate(grads, *q, dq);
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let k = self.shape(*logits)[1];
                let scale = g[0] / labels.len() as f64;
                let mut d: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (n, &l) in labels.iter().enumerate() {
                    d[n * k + l] -= scale;
                }
                self.accumulate(grads, *logits, d);
            }
            Op::SquaredError(a, b) => {
                let diff: Vec<f64> = self
                    .value(*a)
                    .data()
                    .iter()
                    .zip(self.value(*b).data())
                    .map(|(x, y)| 2.0 * (x - y) * g[0])
                    .collect();
                if self.wants(*b) {
                    self.accumulate(grads, *b, diff.iter().map(|v| -v).collect());
                }
                self.accumulate(grads, *a, diff);
            }
            Op::SumSquares(x) => {
                let d = self.value(*x).data().iter().map(|v| 2.0 * v * g[0]).collect();
                self.accumulate(grads, *x, d);
            }
        }
    }
}

/// `Σ (p − q)(ln p − ln q)`, equal to `D(p‖q) + D(q‖p)`.
pub fn symmetric_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| a * (a / b).ln() + b * (b / a).ln())
        .sum()
}

fn log_softmax_nll(logits: &[f64], width: usize, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &l) in logits.chunks(width).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        total += lse - row[l];
    }
    total / labels.len() as f64
}

/// Transposes every trailing `r×c` block of a flat buffer.
fn transpose_blocks(x: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (src, dst) in x.chunks(r * c).zip(out.chunks_mut(r * c)) {
        for i in 0..r {
            for j in 0..c {
                dst[j * r + i] = src[i * c + j];
            }
        }
    }
    out
}

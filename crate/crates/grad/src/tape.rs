//! Operation tape: forward evaluation with recorded structure, replayed in
//! reverse for gradients.
//!
//! Nodes are appended in construction order, so the tape itself is a
//! topological order of the graph; the backward pass walks it once from the
//! loss down to the leaves. Shapes are validated when each node is built and
//! mismatches are rejected naming both shapes. Broadcasting is supported only
//! over the leading batch dimension (or a scalar operand).

use crate::error::GradError;
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{broadcast_of, Broadcast, Tensor};
use std::collections::HashMap;

pub type NodeId = usize;

// Payloads not consulted by backward (StopGrad's input, AddScalar's shift)
// stay in the record so a node always names its inputs.
#[allow(dead_code)]
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId, Broadcast),
    Mul(NodeId, NodeId, Broadcast),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    MatMul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Elu(NodeId),
    Exp(NodeId),
    Softplus(NodeId),
    Square(NodeId),
    Concat(Vec<NodeId>),
    Softmax { input: NodeId, chunk: usize },
    LogSoftmax { input: NodeId, chunk: usize },
    SumAll(NodeId),
    MeanAll(NodeId),
    SumChunks { input: NodeId, chunk: usize },
    ClampMin(NodeId, f64),
    StopGrad(NodeId),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation and differentiates it in reverse.
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    bindings: Vec<(ParamId, NodeId)>,
    bound: HashMap<ParamId, NodeId>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            bindings: Vec::new(),
            bound: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        id
    }

    fn req(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    /// Insert a tensor as a leaf; differentiable iff the tensor asks for it.
    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        let rg = t.requires_grad();
        self.push(t, Op::Leaf, rg)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, t: Tensor) -> NodeId {
        let mut t = t;
        if t.requires_grad() {
            t = Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("valid tensor");
        }
        self.push(t, Op::Leaf, false)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.constant(Tensor::scalar(v))
    }

    /// Insert a stored parameter as a differentiable leaf. Repeated bindings
    /// of the same parameter on one tape reuse the node so gradients
    /// accumulate in a single buffer.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.bound.get(&id) {
            return node;
        }
        let mut t = store.get(id).clone();
        t = t.with_grad();
        let node = self.push(t, Op::Leaf, true);
        self.bindings.push((id, node));
        self.bound.insert(id, node);
        node
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    /// Gradient buffer of a node after `backward`; `None` when the node does
    /// not require gradients or no backward pass has run.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id).and_then(|g| g.as_deref())
    }

    // ---- elementwise and linear ops ------------------------------------

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add as fn(_, _, _) -> _)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul as fn(_, _, _) -> _)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        make: fn(NodeId, NodeId, Broadcast) -> Op,
    ) -> Result<NodeId, GradError> {
        // Commutative ops put the broadcast operand on the right.
        let (a, b) = if self.nodes[a].value.numel() < self.nodes[b].value.numel() {
            (b, a)
        } else {
            (a, b)
        };
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        let bc = broadcast_of(va.shape(), vb.shape()).ok_or_else(|| GradError::ShapeMismatch {
            op: name,
            lhs: va.shape().to_vec(),
            rhs: vb.shape().to_vec(),
        })?;
        let out = match bc {
            Broadcast::Same => va
                .data()
                .iter()
                .zip(vb.data())
                .map(|(&x, &y)| f(x, y))
                .collect::<Vec<_>>(),
            Broadcast::Scalar => {
                let y = vb.data()[0];
                va.data().iter().map(|&x| f(x, y)).collect()
            }
            Broadcast::Rows { stride, .. } => va
                .data()
                .iter()
                .enumerate()
                .map(|(i, &x)| f(x, vb.data()[i % stride]))
                .collect(),
        };
        let value = Tensor::new(va.shape().to_vec(), out)?;
        let rg = self.req(a) || self.req(b);
        Ok(self.push(value, make(a, b, bc), rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        let nb = self.scale(b, -1.0)?;
        self.add(a, nb)
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.scale(a, -1.0)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, GradError> {
        let va = &self.nodes[a].value;
        let data = va.data().iter().map(|&x| x * c).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.req(a);
        Ok(self.push(value, Op::Scale(a, c), rg))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> Result<NodeId, GradError> {
        let va = &self.nodes[a].value;
        let data = va.data().iter().map(|&x| x + c).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.req(a);
        Ok(self.push(value, Op::AddScalar(a, c), rg))
    }

    /// `[m,k] x [k,n] -> [m,n]`, or `[k] x [k,n] -> [n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        let (ash, bsh) = (va.shape(), vb.shape());
        if bsh.len() != 2 {
            return Err(GradError::BadShape {
                op: "matmul",
                expected: "rank-2 rhs",
                got: bsh.to_vec(),
            });
        }
        let (k, n) = (bsh[0], bsh[1]);
        let m = match ash.len() {
            1 if ash[0] == k => 1,
            2 if ash[1] == k => ash[0],
            _ => {
                return Err(GradError::ShapeMismatch {
                    op: "matmul",
                    lhs: ash.to_vec(),
                    rhs: bsh.to_vec(),
                })
            }
        };
        let rank1 = ash.len() == 1;
        let out = matmul_raw(va.data(), vb.data(), m, k, n);
        let shape = if rank1 { vec![n] } else { vec![m, n] };
        let value = Tensor::new(shape, out)?;
        let rg = self.req(a) || self.req(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `x W + b` with `b` broadcast over the batch rows.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        let xw = self.matmul(x, w)?;
        self.add(xw, b)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.unary(a, |x| x.tanh(), Op::Tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.unary(a, sigmoid, Op::Sigmoid)
    }

    pub fn elu(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.unary(a, |x| if x > 0.0 { x } else { x.exp() - 1.0 }, Op::Elu)
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.unary(a, f64::exp, Op::Exp)
    }

    pub fn softplus(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.unary(a, softplus, Op::Softplus)
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.unary(a, |x| x * x, Op::Square)
    }

    pub fn clamp_min(&mut self, a: NodeId, c: f64) -> Result<NodeId, GradError> {
        let va = &self.nodes[a].value;
        let data = va.data().iter().map(|&x| x.max(c)).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.req(a);
        Ok(self.push(value, Op::ClampMin(a, c), rg))
    }

    /// Identity forward; blocks all gradient flow to `a` and its ancestors
    /// through this node.
    pub fn stop_grad(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        let value = self.nodes[a].value.clone();
        Ok(self.push(value, Op::StopGrad(a), false))
    }

    fn unary(
        &mut self,
        a: NodeId,
        f: impl Fn(f64) -> f64,
        make: fn(NodeId) -> Op,
    ) -> Result<NodeId, GradError> {
        let va = &self.nodes[a].value;
        let data = va.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.req(a);
        Ok(self.push(value, make(a), rg))
    }

    /// Concatenate along the trailing axis. All inputs rank-1, or all rank-2
    /// with equal leading dimension.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, GradError> {
        if parts.is_empty() {
            return Err(GradError::EmptyInput { op: "concat" });
        }
        let rank = self.nodes[parts[0]].value.shape().len();
        let rows = self.nodes[parts[0]].value.leading();
        let mut cols = 0usize;
        for &p in parts {
            let v = &self.nodes[p].value;
            if v.shape().len() != rank || v.leading() != rows {
                return Err(GradError::ShapeMismatch {
                    op: "concat",
                    lhs: self.nodes[parts[0]].value.shape().to_vec(),
                    rhs: v.shape().to_vec(),
                });
            }
            cols += v.trailing();
        }
        let mut data = vec![0.0; rows * cols];
        let mut offset = 0usize;
        for &p in parts {
            let v = &self.nodes[p].value;
            let w = v.trailing();
            for r in 0..rows {
                data[r * cols + offset..r * cols + offset + w]
                    .copy_from_slice(&v.data()[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let shape = if rank == 1 { vec![cols] } else { vec![rows, cols] };
        let value = Tensor::new(shape, data)?;
        let rg = parts.iter().any(|&p| self.req(p));
        Ok(self.push(value, Op::Concat(parts.to_vec()), rg))
    }

    /// Softmax over consecutive chunks of the trailing axis.
    pub fn softmax(&mut self, a: NodeId, chunk: usize) -> Result<NodeId, GradError> {
        self.chunked(a, chunk, true)
    }

    /// Log-softmax over consecutive chunks of the trailing axis.
    pub fn log_softmax(&mut self, a: NodeId, chunk: usize) -> Result<NodeId, GradError> {
        self.chunked(a, chunk, false)
    }

    fn chunked(&mut self, a: NodeId, chunk: usize, soft: bool) -> Result<NodeId, GradError> {
        let va = &self.nodes[a].value;
        if chunk == 0 || va.trailing() % chunk != 0 {
            return Err(GradError::BadChunk {
                chunk,
                dim: va.trailing(),
            });
        }
        let mut data = va.data().to_vec();
        for block in data.chunks_mut(chunk) {
            let max = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in block.iter_mut() {
                *v -= max;
                sum += v.exp();
            }
            let log_sum = sum.ln();
            for v in block.iter_mut() {
                if soft {
                    *v = (*v - log_sum).exp();
                } else {
                    *v -= log_sum;
                }
            }
        }
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.req(a);
        let op = if soft {
            Op::Softmax { input: a, chunk }
        } else {
            Op::LogSoftmax { input: a, chunk }
        };
        Ok(self.push(value, op, rg))
    }

    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        let s: f64 = self.nodes[a].value.data().iter().sum();
        let rg = self.req(a);
        Ok(self.push(Tensor::scalar(s), Op::SumAll(a), rg))
    }

    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        let v = &self.nodes[a].value;
        if v.numel() == 0 {
            return Err(GradError::EmptyInput { op: "mean" });
        }
        let s: f64 = v.data().iter().sum::<f64>() / v.numel() as f64;
        let rg = self.req(a);
        Ok(self.push(Tensor::scalar(s), Op::MeanAll(a), rg))
    }

    /// Sum consecutive chunks of the trailing axis; `[B, g*c]` with chunk `c`
    /// becomes `[B, g]` (a trailing dim of 1 is dropped).
    pub fn sum_chunks(&mut self, a: NodeId, chunk: usize) -> Result<NodeId, GradError> {
        let va = &self.nodes[a].value;
        if chunk == 0 || va.trailing() % chunk != 0 {
            return Err(GradError::BadChunk {
                chunk,
                dim: va.trailing(),
            });
        }
        let data: Vec<f64> = va
            .data()
            .chunks(chunk)
            .map(|block| block.iter().sum())
            .collect();
        let new_trailing = va.trailing() / chunk;
        let old = va.shape();
        let shape = if old.len() >= 2 && new_trailing == 1 {
            old[..old.len() - 1].to_vec()
        } else {
            let mut s = old.to_vec();
            *s.last_mut().unwrap() = new_trailing;
            s
        };
        let value = Tensor::new(shape, data)?;
        let rg = self.req(a);
        Ok(self.push(value, Op::SumChunks { input: a, chunk }, rg))
    }

    // ---- backward -------------------------------------------------------

    /// Populate gradient buffers for every differentiable node reachable from
    /// the scalar `loss`.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), GradError> {
        let lv = &self.nodes[loss].value;
        if !lv.is_scalar() {
            return Err(GradError::NonScalarLoss {
                shape: lv.shape().to_vec(),
            });
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss].requires_grad {
            return Ok(());
        }
        self.grads[loss] = Some(vec![1.0]);
        for id in (0..=loss).rev() {
            if self.grads[id].is_none() || !self.nodes[id].requires_grad {
                continue;
            }
            let g = self.grads[id].take().unwrap();
            self.propagate(id, &g);
            self.grads[id] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, target: NodeId, contrib: impl FnOnce(&mut [f64])) {
        if !self.nodes[target].requires_grad {
            return;
        }
        if self.grads[target].is_none() {
            self.grads[target] = Some(vec![0.0; self.nodes[target].value.numel()]);
        }
        contrib(self.grads[target].as_mut().unwrap());
    }

    fn propagate(&mut self, id: NodeId, g: &[f64]) {
        let op = self.nodes[id].op.clone();
        match op {
            Op::Leaf | Op::StopGrad(_) => {}
            Op::Add(a, b, bc) => {
                self.accumulate(a, |ga| {
                    for (gi, &gv) in ga.iter_mut().zip(g) {
                        *gi += gv;
                    }
                });
                self.accumulate_reduced(b, g, bc, None);
            }
            Op::Mul(a, b, bc) => {
                let vb = self.nodes[b].value.data().to_vec();
                let va = self.nodes[a].value.data().to_vec();
                let stride = vb.len();
                self.accumulate(a, |ga| match bc {
                    Broadcast::Same => {
                        for i in 0..ga.len() {
                            ga[i] += g[i] * vb[i];
                        }
                    }
                    Broadcast::Scalar => {
                        for i in 0..ga.len() {
                            ga[i] += g[i] * vb[0];
                        }
                    }
                    Broadcast::Rows { .. } => {
                        for i in 0..ga.len() {
                            ga[i] += g[i] * vb[i % stride];
                        }
                    }
                });
                self.accumulate_reduced(b, g, bc, Some(&va));
            }
            Op::Scale(a, c) => self.accumulate(a, |ga| {
                for (gi, &gv) in ga.iter_mut().zip(g) {
                    *gi += gv * c;
                }
            }),
            Op::AddScalar(a, _) => self.accumulate(a, |ga| {
                for (gi, &gv) in ga.iter_mut().zip(g) {
                    *gi += gv;
                }
            }),
            Op::MatMul(a, b) => {
                let (m, k, n) = {
                    let bsh = self.nodes[b].value.shape();
                    let ash = self.nodes[a].value.shape();
                    let m = if ash.len() == 1 { 1 } else { ash[0] };
                    (m, bsh[0], bsh[1])
                };
                let va = self.nodes[a].value.data().to_vec();
                let vb = self.nodes[b].value.data().to_vec();
                // dA = g B^T
                self.accumulate(a, |ga| {
                    for i in 0..m {
                        for j in 0..k {
                            let mut acc = 0.0;
                            for t in 0..n {
                                acc += g[i * n + t] * vb[j * n + t];
                            }
                            ga[i * k + j] += acc;
                        }
                    }
                });
                // dB = A^T g
                self.accumulate(b, |gb| {
                    for j in 0..k {
                        for i in 0..m {
                            let aij = va[i * k + j];
                            if aij == 0.0 {
                                continue;
                            }
                            for t in 0..n {
                                gb[j * n + t] += aij * g[i * n + t];
                            }
                        }
                    }
                });
            }
            Op::Tanh(a) => {
                let y = self.nodes[id].value.data().to_vec();
                self.accumulate(a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[id].value.data().to_vec();
                self.accumulate(a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                });
            }
            Op::Elu(a) => {
                let x = self.nodes[a].value.data().to_vec();
                let y = self.nodes[id].value.data().to_vec();
                self.accumulate(a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * if x[i] > 0.0 { 1.0 } else { y[i] + 1.0 };
                    }
                });
            }
            Op::Exp(a) => {
                let y = self.nodes[id].value.data().to_vec();
                self.accumulate(a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * y[i];
                    }
                });
            }
            Op::Softplus(a) => {
                let x = self.nodes[a].value.data().to_vec();
                self.accumulate(a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * sigmoid(x[i]);
                    }
                });
            }
            Op::Square(a) => {
                let x = self.nodes[a].value.data().to_vec();
                self.accumulate(a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * 2.0 * x[i];
                    }
                });
            }
            Op::Concat(parts) => {
                let rows = self.nodes[id].value.leading();
                let cols = self.nodes[id].value.trailing();
                let mut offset = 0usize;
                for &p in &parts {
                    let w = self.nodes[p].value.trailing();
                    self.accumulate(p, |gp| {
                        for r in 0..rows {
                            for c in 0..w {
                                gp[r * w + c] += g[r * cols + offset + c];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Softmax { input, chunk } => {
                let y = self.nodes[id].value.data().to_vec();
                self.accumulate(input, |ga| {
                    for (ci, block) in y.chunks(chunk).enumerate() {
                        let base = ci * chunk;
                        let dot: f64 = (0..chunk).map(|j| g[base + j] * block[j]).sum();
                        for j in 0..chunk {
                            ga[base + j] += block[j] * (g[base + j] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax { input, chunk } => {
                let y = self.nodes[id].value.data().to_vec();
                self.accumulate(input, |ga| {
                    for ci in 0..y.len() / chunk {
                        let base = ci * chunk;
                        let gsum: f64 = (0..chunk).map(|j| g[base + j]).sum();
                        for j in 0..chunk {
                            ga[base + j] += g[base + j] - y[base + j].exp() * gsum;
                        }
                    }
                });
            }
            Op::SumAll(a) => {
                let gv = g[0];
                self.accumulate(a, |ga| {
                    for gi in ga.iter_mut() {
                        *gi += gv;
                    }
                });
            }
            Op::MeanAll(a) => {
                let n = self.nodes[a].value.numel() as f64;
                let gv = g[0] / n;
                self.accumulate(a, |ga| {
                    for gi in ga.iter_mut() {
                        *gi += gv;
                    }
                });
            }
            Op::SumChunks { input, chunk } => {
                self.accumulate(input, |ga| {
                    for (i, gi) in ga.iter_mut().enumerate() {
                        *gi += g[i / chunk];
                    }
                });
            }
            Op::ClampMin(a, c) => {
                let x = self.nodes[a].value.data().to_vec();
                self.accumulate(a, |ga| {
                    for i in 0..ga.len() {
                        if x[i] > c {
                            ga[i] += g[i];
                        }
                    }
                });
            }
        }
    }

    fn accumulate_reduced(&mut self, b: NodeId, g: &[f64], bc: Broadcast, mul_by: Option<&[f64]>) {
        let stride = self.nodes[b].value.numel();
        self.accumulate(b, |gb| match bc {
            Broadcast::Same => {
                for i in 0..g.len() {
                    gb[i] += g[i] * mul_by.map_or(1.0, |a| a[i]);
                }
            }
            Broadcast::Scalar => {
                let mut acc = 0.0;
                for i in 0..g.len() {
                    acc += g[i] * mul_by.map_or(1.0, |a| a[i]);
                }
                gb[0] += acc;
            }
            Broadcast::Rows { .. } => {
                for i in 0..g.len() {
                    gb[i % stride] += g[i] * mul_by.map_or(1.0, |a| a[i]);
                }
            }
        });
    }

    /// Gather parameter gradients after a backward pass. Parameters that did
    /// not participate in the graph are absent from the result.
    pub fn collect_gradients(&self, store: &ParamStore) -> Gradients {
        let mut out = Gradients::empty(store.len());
        for &(pid, nid) in &self.bindings {
            if let Some(g) = self.grad(nid) {
                out.accumulate(pid, g);
            }
        }
        out
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..k {
            let aij = a[i * k + j];
            if aij == 0.0 {
                continue;
            }
            let brow = &b[j * n..(j + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for t in 0..n {
                orow[t] += aij * brow[t];
            }
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(&[1.0, 2.0]).with_grad());
        let err = tape.backward(x).unwrap_err();
        assert!(matches!(err, GradError::NonScalarLoss { .. }));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(&[1.0, 2.0]));
        let b = tape.leaf(Tensor::vector(&[1.0, 2.0, 3.0]));
        let err = tape.add(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2]") && msg.contains("[3]"), "{msg}");
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(&[1.0, -5.0, 2.5]).with_grad());
        let loss = tape.sum_all(x).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(&[1.0, -2.0]).with_grad());
        let sq = tape.square(x).unwrap();
        let loss = tape.sum_all(sq).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0, -4.0]);
    }

    #[test]
    fn matmul_hand_case() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::matrix(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap());
        let b = tape.leaf(Tensor::matrix(&[&[5.0], &[6.0]]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[17.0, 39.0]);
        assert_eq!(tape.value(c).shape(), &[2, 1]);
    }

    #[test]
    fn affine_identity_case() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(&[1.0, 2.0]));
        let w = tape.leaf(Tensor::matrix(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap());
        let b = tape.leaf(Tensor::vector(&[0.0, 0.0]));
        let y = tape.affine(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0]);
    }

    #[test]
    fn softmax_symmetry() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(&[0.0, 0.0, 0.0]));
        let y = tape.softmax(x, 3).unwrap();
        for &v in tape.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stop_grad_blocks_path() {
        // d/dx [x * sg(x)] at x=3 must be 3, not 6.
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(&[3.0]).with_grad());
        let frozen = tape.stop_grad(x).unwrap();
        let prod = tape.mul(x, frozen).unwrap();
        let loss = tape.sum_all(prod).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[3.0]);
        assert_eq!(tape.value(frozen).data(), tape.value(x).data());
    }

    #[test]
    fn broadcast_rows_accumulates() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::matrix(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap().with_grad());
        let b = tape.leaf(Tensor::vector(&[10.0, 20.0]).with_grad());
        let y = tape.add(a, b).unwrap();
        assert_eq!(tape.value(y).data(), &[11.0, 22.0, 13.0, 24.0]);
        let loss = tape.sum_all(y).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(b).unwrap(), &[2.0, 2.0]);
    }
}

//! Recorded computation graph with exact reverse-mode differentiation.
//!
//! Forward calls append immutable nodes to an arena; `backward_into`
//! sweeps the tape in reverse and accumulates parameter gradients. The
//! op set is exactly what the recurrent models need. Nodes reference
//! their parents by index, so hypotheses and sub-models may share
//! prefixes of one graph.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::neural::{log_softmax, GradientSet, ParameterSet};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op<T> {
    Param(usize),
    Constant,
    /// Column of a [m, n] parent (embedding lookup).
    Col { src: NodeId, col: usize },
    /// w: [m, n], x: [n] -> [m]
    MatVec { w: NodeId, x: NodeId },
    /// w: [m, n], y: [m] -> [n]
    MatTVec { w: NodeId, y: NodeId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale { src: NodeId, factor: T },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(NodeId, NodeId),
    Slice { src: NodeId, start: usize },
    /// log softmax(energies)[index]; the softmax is cached for backward.
    LogSoftmaxPick {
        energies: NodeId,
        index: usize,
        probs: Vec<T>,
    },
}

struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
}

pub struct Graph<'p, T: Real> {
    params: &'p ParameterSet<T>,
    param_nodes: HashMap<usize, NodeId>,
    nodes: Vec<Node<T>>,
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParameterSet<T>) -> Self {
        Graph {
            params,
            param_nodes: HashMap::new(),
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &ParameterSet<T> {
        self.params
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    /// The unique node for a named parameter; repeated uses share it so
    /// gradients accumulate across every use site.
    pub fn param(&mut self, name: &str) -> Result<NodeId> {
        let index = self
            .params
            .index_of(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter: {name}")))?;
        if let Some(&id) = self.param_nodes.get(&index) {
            return Ok(id);
        }
        let value = self.params.by_index(index).clone();
        let id = self.push(Op::Param(index), value);
        self.param_nodes.insert(index, id);
        Ok(id)
    }

    /// A leaf that receives no gradient (inputs, carried states).
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.constant(Tensor::zeros(&[len]))
    }

    pub fn col(&mut self, src: NodeId, col: usize) -> Result<NodeId> {
        let value = self.nodes[src].value.column(col)?;
        Ok(self.push(Op::Col { src, col }, value))
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let value = self.nodes[w].value.matvec(&self.nodes[x].value)?;
        Ok(self.push(Op::MatVec { w, x }, value))
    }

    pub fn matvec_t(&mut self, w: NodeId, y: NodeId) -> Result<NodeId> {
        let value = self.nodes[w].value.matvec_t(&self.nodes[y].value)?;
        Ok(self.push(Op::MatTVec { w, y }, value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.add(&self.nodes[b].value)?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.sub(&self.nodes[b].value)?;
        Ok(self.push(Op::Sub(a, b), value))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.mul(&self.nodes[b].value)?;
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scale(&mut self, src: NodeId, factor: T) -> NodeId {
        let value = self.nodes[src].value.map(|v| v * factor);
        self.push(Op::Scale { src, factor }, value)
    }

    pub fn sigmoid(&mut self, src: NodeId) -> NodeId {
        let value = self.nodes[src]
            .value
            .map(|v| T::one() / (T::one() + (-v).exp()));
        self.push(Op::Sigmoid(src), value)
    }

    pub fn tanh(&mut self, src: NodeId) -> NodeId {
        let value = self.nodes[src].value.map(|v| v.tanh());
        self.push(Op::Tanh(src), value)
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a].value.concat(&self.nodes[b].value);
        self.push(Op::Concat(a, b), value)
    }

    pub fn slice(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let value = self.nodes[src].value.slice(start, len)?;
        Ok(self.push(Op::Slice { src, start }, value))
    }

    /// Scalar node holding `log softmax(energies)[index]`.
    pub fn log_softmax_pick(&mut self, energies: NodeId, index: usize) -> Result<NodeId> {
        let e = self.nodes[energies].value.data();
        if index >= e.len() {
            return Err(Error::InvalidInput(format!(
                "token id {index} out of vocabulary range {}",
                e.len()
            )));
        }
        let log_probs = log_softmax(e);
        let probs: Vec<T> = log_probs.iter().map(|&v| v.exp()).collect();
        let value = Tensor::scalar(log_probs[index]);
        Ok(self.push(
            Op::LogSoftmaxPick {
                energies,
                index,
                probs,
            },
            value,
        ))
    }

    /// Affine-plus-activation helper: tanh(W x + b).
    pub fn affine_tanh(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let wx = self.matvec(w, x)?;
        let pre = self.add(wx, b)?;
        Ok(self.tanh(pre))
    }

    /// Reverse sweep from a scalar root with the given seed adjoint,
    /// accumulating parameter gradients into `grads`.
    pub fn backward_into(&self, root: NodeId, seed: T, grads: &mut GradientSet<T>) -> Result<()> {
        if self.nodes.is_empty() || root >= self.nodes.len() {
            return Err(Error::InvalidInput(
                "backward called before any forward pass".into(),
            ));
        }
        if self.nodes[root].value.len() != 1 {
            return Err(Error::InvalidInput(
                "backward root must be a scalar node".into(),
            ));
        }
        let mut adjoints: Vec<Option<Tensor<T>>> = (0..=root).map(|_| None).collect();
        adjoints[root] = Some(Tensor::scalar(seed));

        for id in (0..=root).rev() {
            let Some(dy) = adjoints[id].take() else {
                continue;
            };
            match &self.nodes[id].op {
                Op::Param(p) => {
                    let g = grads.by_index_mut(*p);
                    for (gv, dv) in g.data_mut().iter_mut().zip(dy.data()) {
                        *gv += *dv;
                    }
                }
                Op::Constant => {}
                Op::Col { src, col } => {
                    let n = self.nodes[*src].value.shape()[1];
                    let acc = Self::adjoint_for(&mut adjoints, *src, &self.nodes[*src].value);
                    for (i, dv) in dy.data().iter().enumerate() {
                        acc.data_mut()[i * n + col] += *dv;
                    }
                }
                Op::MatVec { w, x } => {
                    let (wv, xv) = (&self.nodes[*w].value, &self.nodes[*x].value);
                    let n = wv.shape()[1];
                    {
                        let acc = Self::adjoint_for(&mut adjoints, *w, wv);
                        for (i, dyi) in dy.data().iter().enumerate() {
                            let row = &mut acc.data_mut()[i * n..(i + 1) * n];
                            for (r, xj) in row.iter_mut().zip(xv.data()) {
                                *r += *dyi * *xj;
                            }
                        }
                    }
                    let dx = wv.matvec_t(&dy)?;
                    Self::accumulate(&mut adjoints, *x, &dx, &self.nodes[*x].value);
                }
                Op::MatTVec { w, y } => {
                    let (wv, yv) = (&self.nodes[*w].value, &self.nodes[*y].value);
                    let n = wv.shape()[1];
                    {
                        let acc = Self::adjoint_for(&mut adjoints, *w, wv);
                        for (i, yi) in yv.data().iter().enumerate() {
                            let row = &mut acc.data_mut()[i * n..(i + 1) * n];
                            for (r, dj) in row.iter_mut().zip(dy.data()) {
                                *r += *yi * *dj;
                            }
                        }
                    }
                    let dyv = wv.matvec(&dy)?;
                    Self::accumulate(&mut adjoints, *y, &dyv, &self.nodes[*y].value);
                }
                Op::Add(a, b) => {
                    Self::accumulate(&mut adjoints, *a, &dy, &self.nodes[*a].value);
                    Self::accumulate(&mut adjoints, *b, &dy, &self.nodes[*b].value);
                }
                Op::Sub(a, b) => {
                    Self::accumulate(&mut adjoints, *a, &dy, &self.nodes[*a].value);
                    let neg = dy.map(|v| -v);
                    Self::accumulate(&mut adjoints, *b, &neg, &self.nodes[*b].value);
                }
                Op::Mul(a, b) => {
                    let da = dy.mul(&self.nodes[*b].value)?;
                    Self::accumulate(&mut adjoints, *a, &da, &self.nodes[*a].value);
                    let db = dy.mul(&self.nodes[*a].value)?;
                    Self::accumulate(&mut adjoints, *b, &db, &self.nodes[*b].value);
                }
                Op::Scale { src, factor } => {
                    let ds = dy.map(|v| v * *factor);
                    Self::accumulate(&mut adjoints, *src, &ds, &self.nodes[*src].value);
                }
                Op::Sigmoid(src) => {
                    let s = &self.nodes[id].value;
                    let mut ds = dy.clone();
                    for (d, sv) in ds.data_mut().iter_mut().zip(s.data()) {
                        *d = *d * *sv * (T::one() - *sv);
                    }
                    Self::accumulate(&mut adjoints, *src, &ds, &self.nodes[*src].value);
                }
                Op::Tanh(src) => {
                    let t = &self.nodes[id].value;
                    let mut ds = dy.clone();
                    for (d, tv) in ds.data_mut().iter_mut().zip(t.data()) {
                        *d = *d * (T::one() - *tv * *tv);
                    }
                    Self::accumulate(&mut adjoints, *src, &ds, &self.nodes[*src].value);
                }
                Op::Concat(a, b) => {
                    let la = self.nodes[*a].value.len();
                    let da = Tensor::vector(dy.data()[..la].to_vec());
                    let db = Tensor::vector(dy.data()[la..].to_vec());
                    Self::accumulate(&mut adjoints, *a, &da, &self.nodes[*a].value);
                    Self::accumulate(&mut adjoints, *b, &db, &self.nodes[*b].value);
                }
                Op::Slice { src, start } => {
                    let acc = Self::adjoint_for(&mut adjoints, *src, &self.nodes[*src].value);
                    for (i, dv) in dy.data().iter().enumerate() {
                        acc.data_mut()[start + i] += *dv;
                    }
                }
                Op::LogSoftmaxPick {
                    energies,
                    index,
                    probs,
                } => {
                    let d = dy.item();
                    let mut de = Tensor::zeros(&[probs.len()]);
                    for (j, (ev, pj)) in de.data_mut().iter_mut().zip(probs.iter()).enumerate() {
                        let indicator = if j == *index { T::one() } else { T::zero() };
                        *ev = d * (indicator - *pj);
                    }
                    Self::accumulate(&mut adjoints, *energies, &de, &self.nodes[*energies].value);
                }
            }
        }
        Ok(())
    }

    /// Gradients of a scalar loss node with respect to every parameter.
    pub fn backward(&self, root: NodeId) -> Result<GradientSet<T>> {
        let mut grads = GradientSet::zeros_like(self.params);
        self.backward_into(root, T::one(), &mut grads)?;
        Ok(grads)
    }

    fn adjoint_for<'a>(
        adjoints: &'a mut [Option<Tensor<T>>],
        id: NodeId,
        like: &Tensor<T>,
    ) -> &'a mut Tensor<T> {
        adjoints[id].get_or_insert_with(|| Tensor::zeros(like.shape()))
    }

    fn accumulate(
        adjoints: &mut [Option<Tensor<T>>],
        id: NodeId,
        contribution: &Tensor<T>,
        like: &Tensor<T>,
    ) {
        let acc = Self::adjoint_for(adjoints, id, like);
        for (a, c) in acc.data_mut().iter_mut().zip(contribution.data()) {
            *a += *c;
        }
    }
}

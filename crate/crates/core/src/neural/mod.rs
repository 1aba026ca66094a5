//! Numeric substrate: named parameter tensors, recurrent cells, softmax
//! readout, exact reverse-mode gradients on a recorded graph, finite
//! difference checking, Adam, and gradient clipping.

mod adam;
mod cells;
mod gradcheck;
mod graph;
mod init;
mod serialize;

pub use adam::{adam_update, OptimizerState};
pub use cells::{gru_step, lstm_step, CellSpec, Gate};
pub use gradcheck::check_gradients;
pub use graph::{Graph, NodeId};
pub use serialize::{read_named_tensor, write_named_tensor};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// How a parameter tensor is filled when the set is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Gaussian with the given standard deviation.
    Gaussian(f64),
    /// Random orthogonal square matrix (recurrent weights).
    Orthogonal,
}

/// Named parameter tensors with a fixed registration order; shapes are
/// immutable after registration and iteration order is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T> {
    names: Vec<String>,
    index: HashMap<String, usize>,
    tensors: Vec<Tensor<T>>,
    inits: Vec<Init>,
}

impl<T: Real> Default for ParameterSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParameterSet<T> {
    pub fn new() -> Self {
        ParameterSet {
            names: Vec::new(),
            index: HashMap::new(),
            tensors: Vec::new(),
            inits: Vec::new(),
        }
    }

    pub fn register(&mut self, name: &str, shape: &[usize], init: Init) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidInput(format!("duplicate parameter: {name}")));
        }
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.tensors.push(Tensor::zeros(shape));
        self.inits.push(init);
        Ok(())
    }

    /// Fill every tensor from its registered initializer, in registration
    /// order, so a fixed seed yields a bit-identical parameter set.
    pub fn initialize(&mut self, seed: u64) {
        let mut rng = init::rng(seed);
        for (tensor, &init) in self.tensors.iter_mut().zip(self.inits.iter()) {
            init::fill(tensor, init, &mut rng);
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.index_of(name)
            .map(|i| &self.tensors[i])
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter: {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter: {name}")))?;
        Ok(&mut self.tensors[i])
    }

    pub fn by_index(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub fn by_index_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.tensors[i]
    }

    /// Replace a tensor's values; the shape must match the registration.
    pub fn set(&mut self, name: &str, tensor: Tensor<T>) -> Result<()> {
        let current = self.get(name)?;
        if current.shape() != tensor.shape() {
            return Err(Error::Shape {
                name: name.to_string(),
                expected: current.shape().to_vec(),
                got: tensor.shape().to_vec(),
            });
        }
        let i = self.index_of(name).unwrap();
        self.tensors[i] = tensor;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter())
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.is_finite())
    }
}

/// Gradients shape-congruent with a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> GradientSet<T> {
    pub fn zeros_like(params: &ParameterSet<T>) -> Self {
        GradientSet {
            names: params.names.clone(),
            tensors: params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn by_index(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub fn by_index_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.tensors[i]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter())
    }

    /// Global L2 norm over every entry, accumulated in iteration order.
    pub fn global_norm(&self) -> T {
        self.tensors
            .iter()
            .map(|t| t.norm_sq())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for t in &mut self.tensors {
            t.scale_in_place(factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.is_finite())
    }
}

/// Rescale all entries by `threshold / norm` when the global L2 norm
/// exceeds the threshold; otherwise the identity. Idempotent, norm
/// bounding, direction preserving.
pub fn clip_gradients<T: Real>(mut grads: GradientSet<T>, threshold: T) -> GradientSet<T> {
    let norm = grads.global_norm();
    if norm > threshold {
        grads.scale(threshold / norm);
    }
    grads
}

/// Stable softmax: `h = 0` gives the uniform distribution; entries are
/// positive and sum to one.
pub fn softmax<T: Real>(energies: &[T]) -> Vec<T> {
    log_softmax(energies).into_iter().map(|v| v.exp()).collect()
}

/// Log-softmax with max subtraction.
pub fn log_softmax<T: Real>(energies: &[T]) -> Vec<T> {
    let max = energies
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut sum = T::zero();
    for &e in energies {
        sum += (e - max).exp();
    }
    let log_z = max + sum.ln();
    energies.iter().map(|&e| e - log_z).collect()
}

/// Output distribution of Eq. softmax(O^T h) for O of shape [d, |V|].
pub fn output_distribution<T: Real>(h: &Tensor<T>, output_matrix: &Tensor<T>) -> Result<Tensor<T>> {
    let energies = output_matrix.matvec_t(h)?;
    Ok(Tensor::vector(softmax(energies.data())))
}

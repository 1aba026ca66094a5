//! Multiresolution recurrent neural networks for dialogue response generation.
//!
//! The crate models a dialogue as two aligned token streams: the natural
//! language utterances and a coarse high-level sequence per utterance
//! (nouns, or activities/entities with tense and command markers). It
//! provides the full pipeline:
//!
//! - [`corpus`]: tokenization, dialogue/coarse file formats, vocabularies
//! - [`extraction`]: rule-based coarse-token extraction (noun and
//!   activity-entity procedures, tense and command detection)
//! - [`neural`]: tensors, GRU/LSTM cells, reverse-mode gradients, Adam,
//!   gradient clipping and finite-difference checking
//! - [`models`]: RNNLM, HRED, HRED with activity-entity features, and the
//!   multiresolution model trained on the exact joint log-likelihood
//! - [`generation`]: beam search and two-stage coarse-then-natural decoding
//! - [`evaluation`]: overlap precision/recall/F1, tense/command accuracy,
//!   embedding similarity metrics and n-gram bits-per-word
//!
//! All numeric kernels are generic over the scalar type through [`Real`]
//! (`f32` or `f64`); `f64` is the default used by every test and gradient
//! check.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod generation;
pub mod models;
pub mod neural;
pub mod scalar;
mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tensor::Tensor;

/// Single-precision tensor.
pub type Tensor32 = Tensor<f32>;
/// Double-precision tensor (the default for training and checking).
pub type Tensor64 = Tensor<f64>;
/// Single-precision model.
pub type Model32 = models::ModelInstance<f32>;
/// Double-precision model.
pub type Model64 = models::ModelInstance<f64>;

//! Value-path decoder sessions driving beam search. These run the same
//! tensor kernels as the training graph, so stepwise log-probabilities
//! agree bit-for-bit with the scored likelihoods.

use crate::corpus::EncodedDialogue;
use crate::error::{Error, Result};
use crate::generation::NextTokenModel;
use crate::models::net::{flat_encoder, rnnlm_cell, StreamNames};
use crate::models::{ModelInstance, ModelKind};
use crate::neural::{log_softmax, CellSpec, ParameterSet};
use crate::scalar::Real;
use crate::tensor::Tensor;

fn encode_utterance_value<T: Real>(
    params: &ParameterSet<T>,
    names: &StreamNames,
    tokens: &[u32],
) -> Result<Tensor<T>> {
    let emb = params.get(&names.emb)?;
    let run = |cell: &CellSpec, order: &mut dyn Iterator<Item = &u32>| -> Result<Tensor<T>> {
        let mut state = Tensor::zeros(&[cell.state_dim()]);
        for &tok in order {
            let x = emb.column(tok as usize)?;
            state = cell.step_value(params, &state, &x)?;
        }
        cell.output_value(&state)
    };
    let forward = run(&names.enc, &mut tokens.iter())?;
    match &names.enc_back {
        Some(back) => Ok(forward.concat(&run(back, &mut tokens.iter().rev())?)),
        None => Ok(forward),
    }
}

/// Context output after consuming every utterance in order.
fn context_output_value<T: Real>(
    params: &ParameterSet<T>,
    names: &StreamNames,
    utterances: &[Vec<u32>],
) -> Result<Tensor<T>> {
    let mut state = Tensor::zeros(&[names.ctx.state_dim()]);
    for utterance in utterances {
        if utterance.is_empty() {
            return Err(Error::InvalidInput("empty utterance".into()));
        }
        let e = encode_utterance_value(params, names, utterance)?;
        state = names.ctx.step_value(params, &state, &e)?;
    }
    names.ctx.output_value(&state)
}

/// Flat GRU state after consuming the given coarse sequences.
fn flat_state_value<T: Real>(
    params: &ParameterSet<T>,
    emb_name: &str,
    cell: &CellSpec,
    sequences: &[Vec<u32>],
) -> Result<Tensor<T>> {
    let emb = params.get(emb_name)?;
    let mut state = Tensor::zeros(&[cell.state_dim()]);
    for seq in sequences {
        for &tok in seq {
            let x = emb.column(tok as usize)?;
            state = cell.step_value(params, &state, &x)?;
        }
    }
    Ok(state)
}

/// A conditioned decoder exposed as a next-token model: the conditioning
/// vector initializes the state through the tanh affine map and is
/// appended to every input step.
pub struct DecoderSession<'m, T: Real> {
    params: &'m ParameterSet<T>,
    names: StreamNames,
    cond: Tensor<T>,
}

impl<'m, T: Real> DecoderSession<'m, T> {
    fn new(params: &'m ParameterSet<T>, names: StreamNames, cond: Tensor<T>) -> Result<Self> {
        if cond.len() != names.cond_dim {
            return Err(Error::Shape {
                name: format!("{} conditioning", names.dec.prefix),
                expected: vec![names.cond_dim],
                got: cond.shape().to_vec(),
            });
        }
        Ok(DecoderSession { params, names, cond })
    }
}

impl<T: Real> NextTokenModel<T> for DecoderSession<'_, T> {
    type State = Tensor<T>;

    fn vocab_size(&self) -> usize {
        self.names.vocab_size
    }

    fn initial_state(&self) -> Result<Tensor<T>> {
        let w = self.params.get(&self.names.dec_init_w)?;
        let b = self.params.get(&self.names.dec_init_b)?;
        Ok(w.matvec(&self.cond)?.add(b)?.map(|v| v.tanh()))
    }

    fn log_probs(&self, state: &Tensor<T>) -> Result<Vec<T>> {
        let h = self.names.dec.output_value(state)?;
        let energies = self.params.get(&self.names.out)?.matvec_t(&h)?;
        Ok(log_softmax(energies.data()))
    }

    fn advance(&self, state: &Tensor<T>, token: u32) -> Result<Tensor<T>> {
        let e = self.params.get(&self.names.emb)?.column(token as usize)?;
        let x = e.concat(&self.cond);
        self.names.dec.step_value(self.params, state, &x)
    }
}

/// Token-level session for the RNNLM: the state is the recurrent state
/// after the whole flattened context.
pub struct RnnlmSession<'m, T: Real> {
    params: &'m ParameterSet<T>,
    cell: CellSpec,
    vocab_size: usize,
    start: Tensor<T>,
}

impl<T: Real> NextTokenModel<T> for RnnlmSession<'_, T> {
    type State = Tensor<T>;

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn initial_state(&self) -> Result<Tensor<T>> {
        Ok(self.start.clone())
    }

    fn log_probs(&self, state: &Tensor<T>) -> Result<Vec<T>> {
        let h = self.cell.output_value(state)?;
        let energies = self.params.get("out")?.matvec_t(&h)?;
        Ok(log_softmax(energies.data()))
    }

    fn advance(&self, state: &Tensor<T>, token: u32) -> Result<Tensor<T>> {
        let x = self.params.get("emb")?.column(token as usize)?;
        self.cell.step_value(self.params, state, &x)
    }
}

/// Session for a plain HRED: condition on the context RNN output over
/// all context utterances.
pub fn hred_session<'m, T: Real>(
    model: &'m ModelInstance<T>,
    context: &EncodedDialogue,
) -> Result<DecoderSession<'m, T>> {
    require_kind(model, ModelKind::Hred)?;
    require_context(context)?;
    let names = StreamNames::natural(&model.config, model.natural_vocab.size());
    let cond = context_output_value(&model.params, &names, &context.natural)?;
    DecoderSession::new(&model.params, names, cond)
}

/// Session for HRED + activity-entity features: the context output
/// concatenated with the feature encoding of all past coarse sequences.
pub fn actent_session<'m, T: Real>(
    model: &'m ModelInstance<T>,
    context: &EncodedDialogue,
) -> Result<DecoderSession<'m, T>> {
    require_kind(model, ModelKind::HredActEnt)?;
    require_context(context)?;
    let coarse = context
        .coarse
        .as_ref()
        .ok_or_else(|| Error::Config("context has no aligned coarse sequences".into()))?;
    let names = StreamNames::natural(&model.config, model.natural_vocab.size());
    let ctx_out = context_output_value(&model.params, &names, &context.natural)?;
    let (emb, cell) = flat_encoder(&model.config, coarse_size(model)?, "feat");
    let feat_state = flat_state_value(&model.params, &emb, &cell, coarse)?;
    let cond = ctx_out.concat(&cell.output_value(&feat_state)?);
    DecoderSession::new(&model.params, names, cond)
}

pub fn rnnlm_session<'m, T: Real>(
    model: &'m ModelInstance<T>,
    context: &EncodedDialogue,
) -> Result<RnnlmSession<'m, T>> {
    require_kind(model, ModelKind::Rnnlm)?;
    require_context(context)?;
    let cell = rnnlm_cell(&model.config);
    let emb = model.params.get("emb")?;
    let mut state = Tensor::zeros(&[cell.state_dim()]);
    for utterance in &context.natural {
        for &tok in utterance {
            let x = emb.column(tok as usize)?;
            state = cell.step_value(&model.params, &state, &x)?;
        }
    }
    Ok(RnnlmSession {
        params: &model.params,
        cell,
        vocab_size: model.natural_vocab.size(),
        start: state,
    })
}

/// Prepared context for two-stage multiresolution generation.
pub struct MrrnnStages<'m, T: Real> {
    model: &'m ModelInstance<T>,
    coarse_cond: Tensor<T>,
    natural_ctx_out: Tensor<T>,
    pred_state: Tensor<T>,
}

impl<'m, T: Real> MrrnnStages<'m, T> {
    pub fn prepare(model: &'m ModelInstance<T>, context: &EncodedDialogue) -> Result<Self> {
        require_kind(model, ModelKind::MrRnn)?;
        require_context(context)?;
        let coarse = context
            .coarse
            .as_ref()
            .ok_or_else(|| Error::Config("context has no aligned coarse sequences".into()))?;
        if coarse.len() != context.natural.len() {
            return Err(Error::alignment(
                0,
                format!(
                    "{} coarse sequences for {} utterances",
                    coarse.len(),
                    context.natural.len()
                ),
            ));
        }
        let coarse_names = StreamNames::coarse(&model.config, coarse_size(model)?);
        let coarse_cond = context_output_value(&model.params, &coarse_names, coarse)?;
        let natural_names = StreamNames::natural(&model.config, model.natural_vocab.size());
        let natural_ctx_out = context_output_value(&model.params, &natural_names, &context.natural)?;
        let (emb, cell) = flat_encoder(&model.config, coarse_size(model)?, "pred");
        let pred_state = flat_state_value(&model.params, &emb, &cell, coarse)?;
        Ok(MrrnnStages {
            model,
            coarse_cond,
            natural_ctx_out,
            pred_state,
        })
    }

    /// Stage 1: the coarse decoder conditioned on the coarse context.
    pub fn coarse_session(&self) -> DecoderSession<'_, T> {
        let names = StreamNames::coarse(&self.model.config, self.coarse_cond_vocab());
        DecoderSession::new(&self.model.params, names, self.coarse_cond.clone())
            .expect("coarse conditioning dims fixed by config")
    }

    /// Stage 2: the natural decoder conditioned on the natural context
    /// and the coarse prediction encoding of past coarse plus `z_hat`
    /// (the generated coarse sequence, terminal eot included).
    pub fn natural_session(&self, z_hat: &[u32]) -> Result<DecoderSession<'_, T>> {
        let (emb_name, cell) = flat_encoder(&self.model.config, self.coarse_cond_vocab(), "pred");
        let emb = self.model.params.get(&emb_name)?;
        let mut pred = self.pred_state.clone();
        for &tok in z_hat {
            let x = emb.column(tok as usize)?;
            pred = cell.step_value(&self.model.params, &pred, &x)?;
        }
        let cond = self.natural_ctx_out.concat(&cell.output_value(&pred)?);
        let names = StreamNames::natural(&self.model.config, self.model.natural_vocab.size());
        DecoderSession::new(&self.model.params, names, cond)
    }

    fn coarse_cond_vocab(&self) -> usize {
        self.model
            .coarse_vocab
            .as_ref()
            .map(|v| v.size())
            .expect("mrrnn has a coarse vocabulary")
    }
}

fn require_kind<T: Real>(model: &ModelInstance<T>, kind: ModelKind) -> Result<()> {
    if model.config.kind != kind {
        return Err(Error::Config(format!(
            "expected a {} model, got {}",
            kind.as_str(),
            model.config.kind.as_str()
        )));
    }
    Ok(())
}

fn require_context(context: &EncodedDialogue) -> Result<()> {
    if context.natural.is_empty() {
        return Err(Error::InvalidInput("context has no utterances".into()));
    }
    Ok(())
}

fn coarse_size<T: Real>(model: &ModelInstance<T>) -> Result<usize> {
    model
        .coarse_vocab
        .as_ref()
        .map(|v| v.size())
        .ok_or_else(|| Error::Config("model has no coarse vocabulary".into()))
}

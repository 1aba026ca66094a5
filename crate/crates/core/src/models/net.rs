//! Graph builders shared by likelihood evaluation and training.
//!
//! A stream (natural or coarse) is one HRED: an encoder RNN per
//! utterance, a context RNN across utterances, and a decoder that scores
//! the next utterance token by token. The decoder's conditioning vector
//! (context output, optionally concatenated with a coarse-prediction
//! encoding) initializes its state through a tanh affine map and is also
//! appended to every decoder input step.
//!
//! Utterance `n` is always scored from the context state left by
//! utterances `1..n-1`, so later inputs never feed earlier scores.

use crate::corpus::EncodedDialogue;
use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelInstance, ModelKind};
use crate::neural::{CellSpec, Gate, Graph, Init, NodeId, ParameterSet};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Parameter names and cell specs for one HRED stream.
#[derive(Debug, Clone)]
pub(crate) struct StreamNames {
    pub emb: String,
    pub out: String,
    pub dec_init_w: String,
    pub dec_init_b: String,
    pub enc: CellSpec,
    pub enc_back: Option<CellSpec>,
    pub ctx: CellSpec,
    pub dec: CellSpec,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub cond_dim: usize,
}

impl StreamNames {
    pub fn natural(cfg: &ModelConfig, nat_vocab: usize) -> StreamNames {
        let extra = match cfg.kind {
            ModelKind::HredActEnt | ModelKind::MrRnn => cfg.pred_encoder_size,
            _ => 0,
        };
        Self::stream(
            "nat",
            nat_vocab,
            cfg.embedding_dim,
            cfg.encoder_size,
            cfg.context_size,
            cfg.decoder_size,
            cfg.encoder_gate,
            cfg.context_gate,
            cfg.decoder_gate,
            cfg.bidirectional_encoder,
            extra,
        )
    }

    pub fn coarse(cfg: &ModelConfig, coarse_vocab: usize) -> StreamNames {
        Self::stream(
            "crs",
            coarse_vocab,
            cfg.coarse_embedding_dim,
            cfg.coarse_encoder_size,
            cfg.coarse_context_size,
            cfg.coarse_decoder_size,
            cfg.coarse_encoder_gate,
            cfg.coarse_context_gate,
            cfg.coarse_decoder_gate,
            cfg.coarse_bidirectional_encoder,
            0,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn stream(
        prefix: &str,
        vocab_size: usize,
        embedding_dim: usize,
        enc_size: usize,
        ctx_size: usize,
        dec_size: usize,
        enc_gate: Gate,
        ctx_gate: Gate,
        dec_gate: Gate,
        bidirectional: bool,
        extra_cond: usize,
    ) -> StreamNames {
        let enc = CellSpec::new(enc_gate, embedding_dim, enc_size, format!("{prefix}.enc"));
        let enc_back = bidirectional
            .then(|| CellSpec::new(enc_gate, embedding_dim, enc_size, format!("{prefix}.enc_b")));
        let enc_out = enc_size * if bidirectional { 2 } else { 1 };
        let ctx = CellSpec::new(ctx_gate, enc_out, ctx_size, format!("{prefix}.ctx"));
        let cond_dim = ctx_size + extra_cond;
        let dec = CellSpec::new(dec_gate, embedding_dim + cond_dim, dec_size, format!("{prefix}.dec"));
        StreamNames {
            emb: format!("{prefix}.emb"),
            out: format!("{prefix}.out"),
            dec_init_w: format!("{prefix}.dec_init_w"),
            dec_init_b: format!("{prefix}.dec_init_b"),
            enc,
            enc_back,
            ctx,
            dec,
            vocab_size,
            embedding_dim,
            cond_dim,
        }
    }

    pub fn register<T: Real>(&self, params: &mut ParameterSet<T>) -> Result<()> {
        params.register(&self.emb, &[self.embedding_dim, self.vocab_size], Init::Gaussian(0.01))?;
        self.enc.register(params)?;
        if let Some(back) = &self.enc_back {
            back.register(params)?;
        }
        self.ctx.register(params)?;
        self.dec.register(params)?;
        params.register(
            &self.dec_init_w,
            &[self.dec.state_dim(), self.cond_dim],
            Init::Gaussian(0.01),
        )?;
        params.register(&self.dec_init_b, &[self.dec.state_dim()], Init::Zeros)?;
        params.register(
            &self.out,
            &[self.dec.output_dim(), self.vocab_size],
            Init::Gaussian(0.01),
        )?;
        Ok(())
    }
}

/// Cell and names for the flat GRU encoders over coarse tokens: the
/// coarse prediction encoder (MrRNN) and the feature encoder (act-ent).
pub(crate) fn flat_encoder(cfg: &ModelConfig, coarse_vocab: usize, prefix: &str) -> (String, CellSpec) {
    let cell = CellSpec::new(
        Gate::Gru,
        cfg.coarse_embedding_dim,
        cfg.pred_encoder_size,
        format!("{prefix}.gru"),
    );
    let _ = coarse_vocab;
    (format!("{prefix}.emb"), cell)
}

pub(crate) fn register_flat_encoder<T: Real>(
    params: &mut ParameterSet<T>,
    cfg: &ModelConfig,
    coarse_vocab: usize,
    prefix: &str,
) -> Result<()> {
    let (emb, cell) = flat_encoder(cfg, coarse_vocab, prefix);
    params.register(&emb, &[cfg.coarse_embedding_dim, coarse_vocab], Init::Gaussian(0.01))?;
    cell.register(params)
}

/// Hidden states carried across truncation windows, detached from the
/// gradient graph.
#[derive(Debug, Clone, Default)]
pub(crate) struct CarryState<T> {
    pub nat_ctx: Option<Tensor<T>>,
    pub crs_ctx: Option<Tensor<T>>,
    pub pred: Option<Tensor<T>>,
    pub rnnlm: Option<Tensor<T>>,
}

/// Per-token log-likelihood nodes for one window of a dialogue.
pub(crate) struct WindowGraph<T> {
    pub natural_lls: Vec<Vec<NodeId>>,
    pub coarse_lls: Vec<Vec<NodeId>>,
    pub carry: CarryState<T>,
}

fn carried<T: Real>(g: &mut Graph<T>, carry: &Option<Tensor<T>>, dim: usize) -> NodeId {
    match carry {
        Some(t) => g.constant(t.clone()),
        None => g.zeros(dim),
    }
}

/// Final encoder output vector for one utterance.
fn encode_utterance<T: Real>(
    g: &mut Graph<T>,
    names: &StreamNames,
    tokens: &[u32],
) -> Result<NodeId> {
    let emb = g.param(&names.emb)?;
    let run = |g: &mut Graph<T>, cell: &CellSpec, order: &mut dyn Iterator<Item = &u32>| -> Result<NodeId> {
        let mut state = g.zeros(cell.state_dim());
        for &tok in order {
            let x = g.col(emb, tok as usize)?;
            state = cell.step(g, state, x)?;
        }
        cell.output(g, state)
    };
    let forward = run(g, &names.enc, &mut tokens.iter())?;
    match &names.enc_back {
        Some(back) => {
            let backward = run(g, back, &mut tokens.iter().rev())?;
            Ok(g.concat(forward, backward))
        }
        None => Ok(forward),
    }
}

/// Score one utterance with the decoder, conditioned on `cond`.
fn decode_utterance<T: Real>(
    g: &mut Graph<T>,
    names: &StreamNames,
    cond: NodeId,
    tokens: &[u32],
) -> Result<Vec<NodeId>> {
    let emb = g.param(&names.emb)?;
    let out = g.param(&names.out)?;
    let init_w = g.param(&names.dec_init_w)?;
    let init_b = g.param(&names.dec_init_b)?;
    let mut state = g.affine_tanh(init_w, cond, init_b)?;
    let mut lls = Vec::with_capacity(tokens.len());
    for (i, &tok) in tokens.iter().enumerate() {
        let h = names.dec.output(g, state)?;
        let energies = g.matvec_t(out, h)?;
        lls.push(g.log_softmax_pick(energies, tok as usize)?);
        if i + 1 < tokens.len() {
            let e = g.col(emb, tok as usize)?;
            let x = g.concat(e, cond);
            state = names.dec.step(g, state, x)?;
        }
    }
    Ok(lls)
}

/// Score a window of utterances under one stream. `extra_cond[n]` is
/// concatenated to the context output when present. Returns per-token
/// log-likelihood nodes and the detached final context state.
pub(crate) fn score_stream<T: Real>(
    g: &mut Graph<T>,
    names: &StreamNames,
    utterances: &[Vec<u32>],
    extra_cond: Option<&[NodeId]>,
    ctx_carry: &Option<Tensor<T>>,
) -> Result<(Vec<Vec<NodeId>>, Tensor<T>)> {
    if let Some(extra) = extra_cond {
        debug_assert_eq!(extra.len(), utterances.len());
    }
    let mut ctx_state = carried(g, ctx_carry, names.ctx.state_dim());
    let mut lls = Vec::with_capacity(utterances.len());
    for (n, utterance) in utterances.iter().enumerate() {
        if utterance.is_empty() {
            return Err(Error::InvalidInput("empty utterance".into()));
        }
        let ctx_out = names.ctx.output(g, ctx_state)?;
        let cond = match extra_cond {
            Some(extra) => g.concat(ctx_out, extra[n]),
            None => ctx_out,
        };
        lls.push(decode_utterance(g, names, cond, utterance)?);
        let encoded = encode_utterance(g, names, utterance)?;
        ctx_state = names.ctx.step(g, ctx_state, encoded)?;
    }
    Ok((lls, g.value(ctx_state).clone()))
}

/// Run a flat GRU over concatenated coarse sequences. Returns the output
/// vector before any sequence, the output after each sequence, and the
/// detached final state.
pub(crate) fn consume_flat<T: Real>(
    g: &mut Graph<T>,
    emb_name: &str,
    cell: &CellSpec,
    sequences: &[Vec<u32>],
    carry: &Option<Tensor<T>>,
) -> Result<(NodeId, Vec<NodeId>, Tensor<T>)> {
    let emb = g.param(emb_name)?;
    let mut state = carried(g, carry, cell.state_dim());
    let before = cell.output(g, state)?;
    let mut after = Vec::with_capacity(sequences.len());
    for seq in sequences {
        for &tok in seq {
            let x = g.col(emb, tok as usize)?;
            state = cell.step(g, state, x)?;
        }
        after.push(cell.output(g, state)?);
    }
    Ok((before, after, g.value(state).clone()))
}

/// Token-level RNNLM over a flat stream.
pub(crate) fn score_rnnlm<T: Real>(
    g: &mut Graph<T>,
    cfg: &ModelConfig,
    vocab_size: usize,
    tokens: &[u32],
    carry: &Option<Tensor<T>>,
) -> Result<(Vec<NodeId>, Tensor<T>)> {
    let cell = rnnlm_cell(cfg);
    let _ = vocab_size;
    let emb = g.param("emb")?;
    let out = g.param("out")?;
    let mut state = carried(g, carry, cell.state_dim());
    let mut lls = Vec::with_capacity(tokens.len());
    for &tok in tokens {
        let h = cell.output(g, state)?;
        let energies = g.matvec_t(out, h)?;
        lls.push(g.log_softmax_pick(energies, tok as usize)?);
        let x = g.col(emb, tok as usize)?;
        state = cell.step(g, state, x)?;
    }
    Ok((lls, g.value(state).clone()))
}

pub(crate) fn rnnlm_cell(cfg: &ModelConfig) -> CellSpec {
    CellSpec::new(cfg.decoder_gate, cfg.embedding_dim, cfg.decoder_size, "rnn")
}

/// Build the scoring graph for a window of utterances `[start, end)` of a
/// dialogue, under the model's factorization, starting from `carry`.
pub(crate) fn build_window<T: Real>(
    g: &mut Graph<T>,
    model: &ModelInstance<T>,
    dialogue: &EncodedDialogue,
    range: std::ops::Range<usize>,
    carry: &CarryState<T>,
) -> Result<WindowGraph<T>> {
    let cfg = &model.config;
    let natural = &dialogue.natural[range.clone()];
    for u in natural {
        if u.is_empty() {
            return Err(Error::InvalidInput("empty utterance".into()));
        }
    }
    match cfg.kind {
        ModelKind::Rnnlm => {
            let flat: Vec<u32> = natural.iter().flatten().copied().collect();
            let (lls, state) = score_rnnlm(g, cfg, model.natural_vocab.size(), &flat, &carry.rnnlm)?;
            // keep per-utterance grouping for reporting
            let mut grouped = Vec::new();
            let mut it = lls.into_iter();
            for u in natural {
                grouped.push((&mut it).take(u.len()).collect());
            }
            Ok(WindowGraph {
                natural_lls: grouped,
                coarse_lls: Vec::new(),
                carry: CarryState {
                    rnnlm: Some(state),
                    ..CarryState::default()
                },
            })
        }
        ModelKind::Hred => {
            let names = StreamNames::natural(cfg, model.natural_vocab.size());
            let (lls, ctx) = score_stream(g, &names, natural, None, &carry.nat_ctx)?;
            Ok(WindowGraph {
                natural_lls: lls,
                coarse_lls: Vec::new(),
                carry: CarryState {
                    nat_ctx: Some(ctx),
                    ..CarryState::default()
                },
            })
        }
        ModelKind::HredActEnt => {
            let coarse = coarse_window(dialogue, &range)?;
            let (emb, cell) = flat_encoder(cfg, coarse_vocab_size(model)?, "feat");
            let (before, after, pred_state) = consume_flat(g, &emb, &cell, coarse, &carry.pred)?;
            // utterance n sees strictly past coarse sequences
            let mut extra = Vec::with_capacity(coarse.len());
            extra.push(before);
            extra.extend_from_slice(&after[..after.len().saturating_sub(1)]);
            let names = StreamNames::natural(cfg, model.natural_vocab.size());
            let (lls, ctx) = score_stream(g, &names, natural, Some(&extra), &carry.nat_ctx)?;
            Ok(WindowGraph {
                natural_lls: lls,
                coarse_lls: Vec::new(),
                carry: CarryState {
                    nat_ctx: Some(ctx),
                    pred: Some(pred_state),
                    ..CarryState::default()
                },
            })
        }
        ModelKind::MrRnn => {
            let coarse = coarse_window(dialogue, &range)?;
            let coarse_names = StreamNames::coarse(cfg, coarse_vocab_size(model)?);
            let (coarse_lls, crs_ctx) = score_stream(g, &coarse_names, coarse, None, &carry.crs_ctx)?;
            let (emb, cell) = flat_encoder(cfg, coarse_vocab_size(model)?, "pred");
            let (_, after, pred_state) = consume_flat(g, &emb, &cell, coarse, &carry.pred)?;
            // utterance n sees coarse sequences up to and including its own
            let names = StreamNames::natural(cfg, model.natural_vocab.size());
            let (natural_lls, nat_ctx) = score_stream(g, &names, natural, Some(&after), &carry.nat_ctx)?;
            Ok(WindowGraph {
                natural_lls,
                coarse_lls,
                carry: CarryState {
                    nat_ctx: Some(nat_ctx),
                    crs_ctx: Some(crs_ctx),
                    pred: Some(pred_state),
                    rnnlm: None,
                },
            })
        }
    }
}

fn coarse_window<'d>(
    dialogue: &'d EncodedDialogue,
    range: &std::ops::Range<usize>,
) -> Result<&'d [Vec<u32>]> {
    let coarse = dialogue
        .coarse
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("dialogue has no aligned coarse sequences".into()))?;
    if coarse.len() != dialogue.natural.len() {
        return Err(Error::alignment(
            0,
            format!(
                "{} coarse sequences for {} utterances",
                coarse.len(),
                dialogue.natural.len()
            ),
        ));
    }
    for z in &coarse[range.clone()] {
        if z.is_empty() {
            return Err(Error::InvalidInput("empty coarse sequence".into()));
        }
    }
    Ok(&coarse[range.clone()])
}

fn coarse_vocab_size<T: Real>(model: &ModelInstance<T>) -> Result<usize> {
    model
        .coarse_vocab
        .as_ref()
        .map(|v| v.size())
        .ok_or_else(|| Error::Config("model has no coarse vocabulary".into()))
}

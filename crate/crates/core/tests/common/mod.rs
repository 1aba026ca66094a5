//! Shared helpers for the model integration tests: tiny configurations,
//! deterministic token generators, and an independent scalar (plain f64
//! loop) reimplementation of every model's forward pass used as the
//! likelihood oracle.

#![allow(dead_code)]

use mrnn_core::corpus::{EncodedDialogue, Vocabulary};
use mrnn_core::models::{ModelConfig, ModelInstance, ModelKind};
use mrnn_core::neural::{Gate, ParameterSet};

/// Small deterministic generator for test data (not the model RNG).
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next_u64(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn token(&mut self, vocab: usize) -> u32 {
        self.below(vocab) as u32
    }
}

/// A vocabulary of exactly `size` entries (reserved + content words).
pub fn toy_vocab(size: usize) -> Vocabulary {
    assert!(size >= 4);
    let words: Vec<String> = (0..size - 3).map(|i| format!("w{i}")).collect();
    // every content word once, so ids follow lexicographic order
    Vocabulary::build(words.iter().map(|s| s.as_str()), size).unwrap()
}

pub fn tiny_config(kind: ModelKind) -> ModelConfig {
    ModelConfig {
        kind,
        natural_vocab_size: 5,
        coarse_vocab_size: 5,
        embedding_dim: 3,
        coarse_embedding_dim: 2,
        encoder_size: 3,
        context_size: 2,
        decoder_size: 3,
        coarse_encoder_size: 2,
        coarse_context_size: 2,
        coarse_decoder_size: 2,
        pred_encoder_size: 2,
        encoder_gate: Gate::Gru,
        context_gate: Gate::Gru,
        decoder_gate: Gate::Gru,
        coarse_encoder_gate: Gate::Gru,
        coarse_context_gate: Gate::Gru,
        coarse_decoder_gate: Gate::Gru,
        bidirectional_encoder: false,
        coarse_bidirectional_encoder: true,
        learning_rate: 0.002,
        clip_threshold: 1.0,
        bptt_tokens: 80,
        batch_size: 2,
        patience: 5,
        validate_every: 50,
        max_steps: 100,
    }
}

pub fn tiny_model(kind: ModelKind, seed: u64) -> ModelInstance<f64> {
    tiny_model_with(tiny_config(kind), seed)
}

pub fn tiny_model_with(config: ModelConfig, seed: u64) -> ModelInstance<f64> {
    let nat = toy_vocab(config.natural_vocab_size);
    let coarse = config
        .kind
        .needs_coarse()
        .then(|| toy_vocab(config.coarse_vocab_size));
    let mut model = ModelInstance::new(config, nat, coarse, seed).unwrap();
    // push weights away from the near-uniform init so oracles bite
    for i in 0..model.params.len() {
        model.params.by_index_mut(i).scale_in_place(25.0);
    }
    model
}

pub fn random_dialogue(
    rng: &mut XorShift,
    utterances: usize,
    max_len: usize,
    nat_vocab: usize,
    coarse_vocab: Option<usize>,
) -> EncodedDialogue {
    let seq = |rng: &mut XorShift, vocab: usize| -> Vec<u32> {
        let len = 1 + rng.below(max_len);
        (0..len).map(|_| rng.token(vocab)).collect()
    };
    let natural: Vec<Vec<u32>> = (0..utterances).map(|_| seq(rng, nat_vocab)).collect();
    let coarse = coarse_vocab.map(|v| (0..utterances).map(|_| seq(rng, v)).collect());
    EncodedDialogue { natural, coarse }
}

/// Independent scalar reimplementation of the model forward passes.
/// Everything is plain f64 loops over raw parameter buffers; nothing
/// here calls the graph, the cells, or the tensor ops.
pub mod scalar_ref {
    use super::*;

    struct Mat {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    fn mat(ps: &ParameterSet<f64>, name: &str) -> Mat {
        let t = ps.get(name).unwrap();
        assert_eq!(t.shape().len(), 2, "{name} is not a matrix");
        Mat {
            rows: t.shape()[0],
            cols: t.shape()[1],
            data: t.data().to_vec(),
        }
    }

    fn vec_param(ps: &ParameterSet<f64>, name: &str) -> Vec<f64> {
        ps.get(name).unwrap().data().to_vec()
    }

    fn matvec(m: &Mat, x: &[f64]) -> Vec<f64> {
        assert_eq!(m.cols, x.len());
        (0..m.rows)
            .map(|i| (0..m.cols).map(|j| m.data[i * m.cols + j] * x[j]).sum())
            .collect()
    }

    fn matvec_t(m: &Mat, y: &[f64]) -> Vec<f64> {
        assert_eq!(m.rows, y.len());
        (0..m.cols)
            .map(|j| (0..m.rows).map(|i| m.data[i * m.cols + j] * y[i]).sum())
            .collect()
    }

    fn column(m: &Mat, j: usize) -> Vec<f64> {
        (0..m.rows).map(|i| m.data[i * m.cols + j]).collect()
    }

    fn sigmoid(v: f64) -> f64 {
        1.0 / (1.0 + (-v).exp())
    }

    fn gate(ps: &ParameterSet<f64>, prefix: &str, g: &str, x: &[f64], h: &[f64]) -> Vec<f64> {
        let w = mat(ps, &format!("{prefix}.w_{g}"));
        let u = mat(ps, &format!("{prefix}.u_{g}"));
        let b = vec_param(ps, &format!("{prefix}.b_{g}"));
        let wx = matvec(&w, x);
        let uh = matvec(&u, h);
        (0..b.len()).map(|i| wx[i] + uh[i] + b[i]).collect()
    }

    pub fn state_dim(g: Gate, d: usize) -> usize {
        match g {
            Gate::Gru => d,
            Gate::Lstm => 2 * d,
        }
    }

    pub fn cell_step(
        ps: &ParameterSet<f64>,
        kind: Gate,
        prefix: &str,
        d: usize,
        state: &[f64],
        x: &[f64],
    ) -> Vec<f64> {
        match kind {
            Gate::Gru => {
                let h = state;
                let z: Vec<f64> = gate(ps, prefix, "z", x, h).into_iter().map(sigmoid).collect();
                let r: Vec<f64> = gate(ps, prefix, "r", x, h).into_iter().map(sigmoid).collect();
                let rh: Vec<f64> = (0..d).map(|i| r[i] * h[i]).collect();
                let cand: Vec<f64> = gate(ps, prefix, "h", x, &rh)
                    .into_iter()
                    .map(f64::tanh)
                    .collect();
                (0..d).map(|i| (1.0 - z[i]) * cand[i] + z[i] * h[i]).collect()
            }
            Gate::Lstm => {
                let (c, h) = state.split_at(d);
                let i_g: Vec<f64> = gate(ps, prefix, "i", x, h).into_iter().map(sigmoid).collect();
                let f_g: Vec<f64> = gate(ps, prefix, "f", x, h).into_iter().map(sigmoid).collect();
                let o_g: Vec<f64> = gate(ps, prefix, "o", x, h).into_iter().map(sigmoid).collect();
                let cand: Vec<f64> = gate(ps, prefix, "c", x, h)
                    .into_iter()
                    .map(f64::tanh)
                    .collect();
                let mut out = vec![0.0; 2 * d];
                for i in 0..d {
                    let cn = f_g[i] * c[i] + i_g[i] * cand[i];
                    out[i] = cn;
                    out[d + i] = o_g[i] * cn.tanh();
                }
                out
            }
        }
    }

    pub fn cell_out(kind: Gate, d: usize, state: &[f64]) -> Vec<f64> {
        match kind {
            Gate::Gru => state.to_vec(),
            Gate::Lstm => state[d..].to_vec(),
        }
    }

    fn log_softmax_pick(energies: &[f64], idx: usize) -> f64 {
        let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = energies.iter().map(|e| (e - max).exp()).sum();
        energies[idx] - (max + z.ln())
    }

    struct Stream {
        prefix: &'static str,
        emb_dim: usize,
        enc_size: usize,
        ctx_size: usize,
        dec_size: usize,
        enc_gate: Gate,
        ctx_gate: Gate,
        dec_gate: Gate,
        bidirectional: bool,
    }

    fn natural_stream(cfg: &ModelConfig) -> Stream {
        Stream {
            prefix: "nat",
            emb_dim: cfg.embedding_dim,
            enc_size: cfg.encoder_size,
            ctx_size: cfg.context_size,
            dec_size: cfg.decoder_size,
            enc_gate: cfg.encoder_gate,
            ctx_gate: cfg.context_gate,
            dec_gate: cfg.decoder_gate,
            bidirectional: cfg.bidirectional_encoder,
        }
    }

    fn coarse_stream(cfg: &ModelConfig) -> Stream {
        Stream {
            prefix: "crs",
            emb_dim: cfg.coarse_embedding_dim,
            enc_size: cfg.coarse_encoder_size,
            ctx_size: cfg.coarse_context_size,
            dec_size: cfg.coarse_decoder_size,
            enc_gate: cfg.coarse_encoder_gate,
            ctx_gate: cfg.coarse_context_gate,
            dec_gate: cfg.coarse_decoder_gate,
            bidirectional: cfg.coarse_bidirectional_encoder,
        }
    }

    fn encode(ps: &ParameterSet<f64>, s: &Stream, tokens: &[u32]) -> Vec<f64> {
        let emb = mat(ps, &format!("{}.emb", s.prefix));
        let run = |cell: &str, toks: Box<dyn Iterator<Item = u32> + '_>| -> Vec<f64> {
            let mut state = vec![0.0; state_dim(s.enc_gate, s.enc_size)];
            for tok in toks {
                let x = column(&emb, tok as usize);
                state = cell_step(ps, s.enc_gate, cell, s.enc_size, &state, &x);
            }
            cell_out(s.enc_gate, s.enc_size, &state)
        };
        let mut out = run(
            &format!("{}.enc", s.prefix),
            Box::new(tokens.iter().copied()),
        );
        if s.bidirectional {
            out.extend(run(
                &format!("{}.enc_b", s.prefix),
                Box::new(tokens.iter().rev().copied()),
            ));
        }
        out
    }

    /// Decoder score of one utterance given the conditioning vector:
    /// the first token is scored from tanh(W cond + b), and each input
    /// step consumes [embedding ++ cond].
    fn decode(ps: &ParameterSet<f64>, s: &Stream, cond: &[f64], tokens: &[u32]) -> f64 {
        let emb = mat(ps, &format!("{}.emb", s.prefix));
        let out = mat(ps, &format!("{}.out", s.prefix));
        let init_w = mat(ps, &format!("{}.dec_init_w", s.prefix));
        let init_b = vec_param(ps, &format!("{}.dec_init_b", s.prefix));
        let wc = matvec(&init_w, cond);
        let mut state: Vec<f64> = (0..wc.len()).map(|i| (wc[i] + init_b[i]).tanh()).collect();
        let dec_prefix = format!("{}.dec", s.prefix);
        let mut ll = 0.0;
        for (i, &tok) in tokens.iter().enumerate() {
            let h = cell_out(s.dec_gate, s.dec_size, &state);
            let energies = matvec_t(&out, &h);
            ll += log_softmax_pick(&energies, tok as usize);
            if i + 1 < tokens.len() {
                let mut x = column(&emb, tok as usize);
                x.extend_from_slice(cond);
                state = cell_step(ps, s.dec_gate, &dec_prefix, s.dec_size, &state, &x);
            }
        }
        ll
    }

    fn stream_ll(
        ps: &ParameterSet<f64>,
        s: &Stream,
        utterances: &[Vec<u32>],
        extra: Option<&[Vec<f64>]>,
    ) -> Vec<f64> {
        let ctx_prefix = format!("{}.ctx", s.prefix);
        let mut ctx = vec![0.0; state_dim(s.ctx_gate, s.ctx_size)];
        let mut lls = Vec::new();
        for (n, utt) in utterances.iter().enumerate() {
            let mut cond = cell_out(s.ctx_gate, s.ctx_size, &ctx);
            if let Some(extra) = extra {
                cond.extend_from_slice(&extra[n]);
            }
            lls.push(decode(ps, s, &cond, utt));
            let e = encode(ps, s, utt);
            ctx = cell_step(ps, s.ctx_gate, &ctx_prefix, s.ctx_size, &ctx, &e);
        }
        lls
    }

    /// Flat GRU over coarse sequences: output before any sequence and
    /// after each one.
    fn flat_outputs(
        ps: &ParameterSet<f64>,
        prefix: &str,
        hidden: usize,
        sequences: &[Vec<u32>],
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        let emb = mat(ps, &format!("{prefix}.emb"));
        let cell = format!("{prefix}.gru");
        let mut state = vec![0.0; hidden];
        let before = state.clone();
        let mut after = Vec::new();
        for seq in sequences {
            for &tok in seq {
                let x = column(&emb, tok as usize);
                state = cell_step(ps, Gate::Gru, &cell, hidden, &state, &x);
            }
            after.push(state.clone());
        }
        (before, after)
    }

    /// Per-utterance (coarse, natural) log-likelihoods of a dialogue.
    pub fn model_ll(model: &ModelInstance<f64>, d: &EncodedDialogue) -> (Vec<f64>, Vec<f64>) {
        let cfg = &model.config;
        let ps = &model.params;
        match cfg.kind {
            ModelKind::Rnnlm => {
                let emb = mat(ps, "emb");
                let out = mat(ps, "out");
                let dsz = cfg.decoder_size;
                let mut state = vec![0.0; state_dim(cfg.decoder_gate, dsz)];
                let mut lls = Vec::new();
                for utt in &d.natural {
                    let mut total = 0.0;
                    for &tok in utt {
                        let h = cell_out(cfg.decoder_gate, dsz, &state);
                        let energies = matvec_t(&out, &h);
                        total += log_softmax_pick(&energies, tok as usize);
                        let x = column(&emb, tok as usize);
                        state = cell_step(ps, cfg.decoder_gate, "rnn", dsz, &state, &x);
                    }
                    lls.push(total);
                }
                (Vec::new(), lls)
            }
            ModelKind::Hred => (
                Vec::new(),
                stream_ll(ps, &natural_stream(cfg), &d.natural, None),
            ),
            ModelKind::HredActEnt => {
                let coarse = d.coarse.as_ref().unwrap();
                let (before, after) = flat_outputs(ps, "feat", cfg.pred_encoder_size, coarse);
                let mut extra = vec![before];
                extra.extend(after[..after.len() - 1].iter().cloned());
                (
                    Vec::new(),
                    stream_ll(ps, &natural_stream(cfg), &d.natural, Some(&extra)),
                )
            }
            ModelKind::MrRnn => {
                let coarse = d.coarse.as_ref().unwrap();
                let coarse_lls = stream_ll(ps, &coarse_stream(cfg), coarse, None);
                let (_, after) = flat_outputs(ps, "pred", cfg.pred_encoder_size, coarse);
                let natural_lls = stream_ll(ps, &natural_stream(cfg), &d.natural, Some(&after));
                (coarse_lls, natural_lls)
            }
        }
    }
}

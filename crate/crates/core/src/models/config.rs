//! Model configuration: `key = value` text files with unknown keys
//! rejected, plus the paper-scale defaults.

use crate::error::{Error, Result};
use crate::neural::Gate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rnnlm,
    Hred,
    /// HRED whose decoder also sees an encoding of past coarse sequences.
    HredActEnt,
    /// The multiresolution model: coarse HRED + conditional natural HRED.
    MrRnn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Rnnlm => "rnnlm",
            ModelKind::Hred => "hred",
            ModelKind::HredActEnt => "hred-actent",
            ModelKind::MrRnn => "mrrnn",
        }
    }

    pub fn needs_coarse(&self) -> bool {
        matches!(self, ModelKind::HredActEnt | ModelKind::MrRnn)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnnlm" => Ok(ModelKind::Rnnlm),
            "hred" => Ok(ModelKind::Hred),
            "hred-actent" => Ok(ModelKind::HredActEnt),
            "mrrnn" => Ok(ModelKind::MrRnn),
            other => Err(Error::Config(format!("unknown model kind: {other}"))),
        }
    }
}

/// Every field has a config key of the same name (`model` for `kind`).
/// Vocabulary sizes count the reserved tokens. For the RNNLM the decoder
/// size and gate describe its single recurrent cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub natural_vocab_size: usize,
    pub coarse_vocab_size: usize,
    pub embedding_dim: usize,
    pub coarse_embedding_dim: usize,
    pub encoder_size: usize,
    pub context_size: usize,
    pub decoder_size: usize,
    pub coarse_encoder_size: usize,
    pub coarse_context_size: usize,
    pub coarse_decoder_size: usize,
    /// Coarse prediction encoder (MrRNN) / feature encoder (HRED act-ent).
    pub pred_encoder_size: usize,
    pub encoder_gate: Gate,
    pub context_gate: Gate,
    pub decoder_gate: Gate,
    pub coarse_encoder_gate: Gate,
    pub coarse_context_gate: Gate,
    pub coarse_decoder_gate: Gate,
    pub bidirectional_encoder: bool,
    pub coarse_bidirectional_encoder: bool,
    pub learning_rate: f64,
    pub clip_threshold: f64,
    /// Truncated-BPTT token budget per gradient window.
    pub bptt_tokens: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub validate_every: usize,
    pub max_steps: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::MrRnn,
            natural_vocab_size: 20000,
            coarse_vocab_size: 10000,
            embedding_dim: 300,
            coarse_embedding_dim: 300,
            encoder_size: 500,
            context_size: 1000,
            decoder_size: 2000,
            coarse_encoder_size: 1000,
            coarse_context_size: 1000,
            coarse_decoder_size: 2000,
            pred_encoder_size: 500,
            encoder_gate: Gate::Gru,
            context_gate: Gate::Gru,
            decoder_gate: Gate::Gru,
            coarse_encoder_gate: Gate::Gru,
            coarse_context_gate: Gate::Gru,
            coarse_decoder_gate: Gate::Gru,
            bidirectional_encoder: false,
            coarse_bidirectional_encoder: true,
            learning_rate: 0.0002,
            clip_threshold: 1.0,
            bptt_tokens: 80,
            batch_size: 80,
            patience: 5,
            validate_every: 5000,
            max_steps: 100000,
        }
    }
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key = value, got {line}")))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn usize_of(key: &str, value: &str) -> Result<usize> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected integer, got {value}")))
        }
        fn f64_of(key: &str, value: &str) -> Result<f64> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected number, got {value}")))
        }
        fn bool_of(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Config(format!("{key}: expected true/false, got {value}"))),
            }
        }
        match key {
            "model" => self.kind = value.parse()?,
            "natural_vocab_size" => self.natural_vocab_size = usize_of(key, value)?,
            "coarse_vocab_size" => self.coarse_vocab_size = usize_of(key, value)?,
            "embedding_dim" => self.embedding_dim = usize_of(key, value)?,
            "coarse_embedding_dim" => self.coarse_embedding_dim = usize_of(key, value)?,
            "encoder_size" => self.encoder_size = usize_of(key, value)?,
            "context_size" => self.context_size = usize_of(key, value)?,
            "decoder_size" => self.decoder_size = usize_of(key, value)?,
            "coarse_encoder_size" => self.coarse_encoder_size = usize_of(key, value)?,
            "coarse_context_size" => self.coarse_context_size = usize_of(key, value)?,
            "coarse_decoder_size" => self.coarse_decoder_size = usize_of(key, value)?,
            "pred_encoder_size" => self.pred_encoder_size = usize_of(key, value)?,
            "encoder_gate" => self.encoder_gate = value.parse()?,
            "context_gate" => self.context_gate = value.parse()?,
            "decoder_gate" => self.decoder_gate = value.parse()?,
            "coarse_encoder_gate" => self.coarse_encoder_gate = value.parse()?,
            "coarse_context_gate" => self.coarse_context_gate = value.parse()?,
            "coarse_decoder_gate" => self.coarse_decoder_gate = value.parse()?,
            "bidirectional_encoder" => self.bidirectional_encoder = bool_of(key, value)?,
            "coarse_bidirectional_encoder" => {
                self.coarse_bidirectional_encoder = bool_of(key, value)?
            }
            "learning_rate" => self.learning_rate = f64_of(key, value)?,
            "clip_threshold" => self.clip_threshold = f64_of(key, value)?,
            "bptt_tokens" => self.bptt_tokens = usize_of(key, value)?,
            "batch_size" => self.batch_size = usize_of(key, value)?,
            "patience" => self.patience = usize_of(key, value)?,
            "validate_every" => self.validate_every = usize_of(key, value)?,
            "max_steps" => self.max_steps = usize_of(key, value)?,
            other => return Err(Error::Config(format!("unknown config key: {other}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("natural_vocab_size", self.natural_vocab_size),
            ("embedding_dim", self.embedding_dim),
            ("decoder_size", self.decoder_size),
            ("batch_size", self.batch_size),
            ("bptt_tokens", self.bptt_tokens),
            ("validate_every", self.validate_every),
            ("max_steps", self.max_steps),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.kind != ModelKind::Rnnlm {
            for (name, v) in [
                ("encoder_size", self.encoder_size),
                ("context_size", self.context_size),
            ] {
                if v == 0 {
                    return Err(Error::Config(format!("{name} must be at least 1")));
                }
            }
        }
        if self.kind.needs_coarse() {
            for (name, v) in [
                ("coarse_vocab_size", self.coarse_vocab_size),
                ("coarse_embedding_dim", self.coarse_embedding_dim),
                ("pred_encoder_size", self.pred_encoder_size),
            ] {
                if v == 0 {
                    return Err(Error::Config(format!("{name} must be at least 1")));
                }
            }
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.clip_threshold <= 0.0 {
            return Err(Error::Config("clip_threshold must be positive".into()));
        }
        Ok(())
    }

    /// Deterministic `key = value` rendering (the checkpoint echo).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let _ = writeln!(s, "model = {}", self.kind.as_str());
        let _ = writeln!(s, "natural_vocab_size = {}", self.natural_vocab_size);
        let _ = writeln!(s, "coarse_vocab_size = {}", self.coarse_vocab_size);
        let _ = writeln!(s, "embedding_dim = {}", self.embedding_dim);
        let _ = writeln!(s, "coarse_embedding_dim = {}", self.coarse_embedding_dim);
        let _ = writeln!(s, "encoder_size = {}", self.encoder_size);
        let _ = writeln!(s, "context_size = {}", self.context_size);
        let _ = writeln!(s, "decoder_size = {}", self.decoder_size);
        let _ = writeln!(s, "coarse_encoder_size = {}", self.coarse_encoder_size);
        let _ = writeln!(s, "coarse_context_size = {}", self.coarse_context_size);
        let _ = writeln!(s, "coarse_decoder_size = {}", self.coarse_decoder_size);
        let _ = writeln!(s, "pred_encoder_size = {}", self.pred_encoder_size);
        let _ = writeln!(s, "encoder_gate = {}", self.encoder_gate.as_str());
        let _ = writeln!(s, "context_gate = {}", self.context_gate.as_str());
        let _ = writeln!(s, "decoder_gate = {}", self.decoder_gate.as_str());
        let _ = writeln!(s, "coarse_encoder_gate = {}", self.coarse_encoder_gate.as_str());
        let _ = writeln!(s, "coarse_context_gate = {}", self.coarse_context_gate.as_str());
        let _ = writeln!(s, "coarse_decoder_gate = {}", self.coarse_decoder_gate.as_str());
        let _ = writeln!(s, "bidirectional_encoder = {}", self.bidirectional_encoder);
        let _ = writeln!(
            s,
            "coarse_bidirectional_encoder = {}",
            self.coarse_bidirectional_encoder
        );
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "clip_threshold = {}", self.clip_threshold);
        let _ = writeln!(s, "bptt_tokens = {}", self.bptt_tokens);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "patience = {}", self.patience);
        let _ = writeln!(s, "validate_every = {}", self.validate_every);
        let _ = writeln!(s, "max_steps = {}", self.max_steps);
        s
    }
}

//! The four sequence models — RNNLM, HRED, HRED with activity-entity
//! features, and the multiresolution model — with exact (joint)
//! log-likelihood, teacher-forced training and perplexity.

mod config;
pub mod decode;
mod net;
mod train;

pub use config::{ModelConfig, ModelKind};
pub use train::{train, ResumeState, TrainLogRecord, TrainOutcome};

pub(crate) use net::{build_window, CarryState};

use crate::corpus::{EncodedDialogue, Vocabulary};
use crate::error::{Error, Result};
use crate::neural::{Graph, NodeId, ParameterSet};
use crate::scalar::Real;

/// A model: its configuration, parameters and vocabularies. The config's
/// vocabulary sizes are snapped to the actual vocabulary sizes at
/// construction so parameter shapes and the config echo always agree.
#[derive(Debug, Clone)]
pub struct ModelInstance<T> {
    pub config: ModelConfig,
    pub params: ParameterSet<T>,
    pub natural_vocab: Vocabulary,
    pub coarse_vocab: Option<Vocabulary>,
}

impl<T: Real> ModelInstance<T> {
    /// Register all parameters for the configured kind and initialize
    /// them from the seed.
    pub fn new(
        mut config: ModelConfig,
        natural_vocab: Vocabulary,
        coarse_vocab: Option<Vocabulary>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if config.kind.needs_coarse() && coarse_vocab.is_none() {
            return Err(Error::Config(format!(
                "model kind {} needs a coarse vocabulary",
                config.kind.as_str()
            )));
        }
        config.natural_vocab_size = natural_vocab.size();
        if let Some(v) = &coarse_vocab {
            config.coarse_vocab_size = v.size();
        }
        let mut params = ParameterSet::new();
        Self::register(
            &config,
            natural_vocab.size(),
            coarse_vocab.as_ref().map(|v| v.size()),
            &mut params,
        )?;
        params.initialize(seed);
        Ok(ModelInstance {
            config,
            params,
            natural_vocab,
            coarse_vocab,
        })
    }

    /// Rebuild an instance around existing parameters (checkpoint load).
    pub fn from_parts(
        config: ModelConfig,
        params: ParameterSet<T>,
        natural_vocab: Vocabulary,
        coarse_vocab: Option<Vocabulary>,
    ) -> Result<Self> {
        let mut expected = ParameterSet::<T>::new();
        Self::register(
            &config,
            natural_vocab.size(),
            coarse_vocab.as_ref().map(|v| v.size()),
            &mut expected,
        )?;
        if expected.names() != params.names() {
            return Err(Error::Config(
                "checkpoint parameters do not match the configured model".into(),
            ));
        }
        for (name, tensor) in expected.iter() {
            let got = params.get(name)?;
            if got.shape() != tensor.shape() {
                return Err(Error::Shape {
                    name: name.to_string(),
                    expected: tensor.shape().to_vec(),
                    got: got.shape().to_vec(),
                });
            }
        }
        Ok(ModelInstance {
            config,
            params,
            natural_vocab,
            coarse_vocab,
        })
    }

    fn register(
        config: &ModelConfig,
        nat_vocab: usize,
        coarse_vocab: Option<usize>,
        params: &mut ParameterSet<T>,
    ) -> Result<()> {
        use crate::neural::Init;
        match config.kind {
            ModelKind::Rnnlm => {
                params.register("emb", &[config.embedding_dim, nat_vocab], Init::Gaussian(0.01))?;
                net::rnnlm_cell(config).register(params)?;
                params.register("out", &[config.decoder_size, nat_vocab], Init::Gaussian(0.01))?;
            }
            ModelKind::Hred => {
                net::StreamNames::natural(config, nat_vocab).register(params)?;
            }
            ModelKind::HredActEnt => {
                let cv = coarse_vocab
                    .ok_or_else(|| Error::Config("missing coarse vocabulary".into()))?;
                net::register_flat_encoder(params, config, cv, "feat")?;
                net::StreamNames::natural(config, nat_vocab).register(params)?;
            }
            ModelKind::MrRnn => {
                let cv = coarse_vocab
                    .ok_or_else(|| Error::Config("missing coarse vocabulary".into()))?;
                net::StreamNames::coarse(config, cv).register(params)?;
                net::register_flat_encoder(params, config, cv, "pred")?;
                net::StreamNames::natural(config, nat_vocab).register(params)?;
            }
        }
        Ok(())
    }
}

/// Log-likelihoods in nats per stream; `joint` is defined as
/// `coarse + natural` in one addition, so the identity holds bitwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodReport<T> {
    pub coarse: T,
    pub natural: T,
    pub joint: T,
    pub coarse_tokens: usize,
    pub natural_tokens: usize,
}

impl<T: Real> LikelihoodReport<T> {
    fn new(coarse: T, natural: T, coarse_tokens: usize, natural_tokens: usize) -> Self {
        LikelihoodReport {
            coarse,
            natural,
            joint: coarse + natural,
            coarse_tokens,
            natural_tokens,
        }
    }
}

/// Per-utterance log-likelihoods for both streams of one dialogue,
/// summed token by token in a fixed order.
pub fn utterance_log_likelihoods<T: Real>(
    model: &ModelInstance<T>,
    dialogue: &EncodedDialogue,
) -> Result<(Vec<T>, Vec<T>)> {
    if dialogue.natural.is_empty() {
        return Err(Error::InvalidInput("empty dialogue".into()));
    }
    let mut graph = Graph::new(&model.params);
    let window = build_window(
        &mut graph,
        model,
        dialogue,
        0..dialogue.natural.len(),
        &CarryState::default(),
    )?;
    let sum_stream = |lls: &[Vec<crate::neural::NodeId>]| -> Vec<T> {
        lls.iter()
            .map(|utt| {
                let mut total = T::zero();
                for &id in utt {
                    total += graph.value(id).item();
                }
                total
            })
            .collect()
    };
    Ok((sum_stream(&window.coarse_lls), sum_stream(&window.natural_lls)))
}

/// Scoring graph over a whole dialogue together with the node holding
/// the summed log-likelihood of both streams (gradient entry point).
pub fn dialogue_log_likelihood_graph<'m, T: Real>(
    model: &'m ModelInstance<T>,
    dialogue: &EncodedDialogue,
) -> Result<(Graph<'m, T>, NodeId)> {
    if dialogue.natural.is_empty() {
        return Err(Error::InvalidInput("empty dialogue".into()));
    }
    let mut graph = Graph::new(&model.params);
    let window = build_window(
        &mut graph,
        model,
        dialogue,
        0..dialogue.natural.len(),
        &CarryState::default(),
    )?;
    let mut root: Option<NodeId> = None;
    for stream in [&window.coarse_lls, &window.natural_lls] {
        for utterance in stream {
            for &ll in utterance {
                root = Some(match root {
                    None => ll,
                    Some(r) => graph.add(r, ll)?,
                });
            }
        }
    }
    let root = root.ok_or_else(|| Error::InvalidInput("no tokens to score".into()))?;
    Ok((graph, root))
}

fn report_for<T: Real>(
    model: &ModelInstance<T>,
    dialogue: &EncodedDialogue,
) -> Result<LikelihoodReport<T>> {
    let (coarse, natural) = utterance_log_likelihoods(model, dialogue)?;
    let coarse_total = coarse.into_iter().fold(T::zero(), |a, b| a + b);
    let natural_total = natural.into_iter().fold(T::zero(), |a, b| a + b);
    let coarse_tokens = if model.config.kind == ModelKind::MrRnn {
        dialogue.coarse_token_count()
    } else {
        0
    };
    Ok(LikelihoodReport::new(
        coarse_total,
        natural_total,
        coarse_tokens,
        dialogue.natural_token_count(),
    ))
}

/// Log-likelihood of a flat token stream under an RNNLM.
pub fn rnnlm_log_likelihood<T: Real>(model: &ModelInstance<T>, tokens: &[u32]) -> Result<T> {
    if model.config.kind != ModelKind::Rnnlm {
        return Err(Error::Config("model is not an rnnlm".into()));
    }
    if tokens.is_empty() {
        return Err(Error::InvalidInput("empty sequence".into()));
    }
    let dialogue = EncodedDialogue {
        natural: vec![tokens.to_vec()],
        coarse: None,
    };
    Ok(report_for(model, &dialogue)?.natural)
}

/// Natural-stream likelihood of a dialogue under HRED.
pub fn hred_log_likelihood<T: Real>(
    model: &ModelInstance<T>,
    dialogue: &EncodedDialogue,
) -> Result<LikelihoodReport<T>> {
    if model.config.kind != ModelKind::Hred {
        return Err(Error::Config("model is not an hred".into()));
    }
    report_for(model, dialogue)
}

/// Natural-stream likelihood where the decoder is additionally
/// conditioned on an encoding of strictly past coarse sequences.
pub fn hred_actent_features_log_likelihood<T: Real>(
    model: &ModelInstance<T>,
    dialogue: &EncodedDialogue,
) -> Result<LikelihoodReport<T>> {
    if model.config.kind != ModelKind::HredActEnt {
        return Err(Error::Config("model is not an hred-actent".into()));
    }
    report_for(model, dialogue)
}

/// Exact joint log-likelihood over the coarse and natural streams.
pub fn mrrnn_joint_log_likelihood<T: Real>(
    model: &ModelInstance<T>,
    dialogue: &EncodedDialogue,
) -> Result<LikelihoodReport<T>> {
    if model.config.kind != ModelKind::MrRnn {
        return Err(Error::Config("model is not an mrrnn".into()));
    }
    report_for(model, dialogue)
}

/// Dispatch on the model kind.
pub fn score_dialogue<T: Real>(
    model: &ModelInstance<T>,
    dialogue: &EncodedDialogue,
) -> Result<LikelihoodReport<T>> {
    report_for(model, dialogue)
}

/// Per-token perplexity per stream: exp(-LL / token count).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerplexityReport<T> {
    pub natural: T,
    pub coarse: Option<T>,
    pub joint: T,
}

pub fn perplexity<T: Real>(
    model: &ModelInstance<T>,
    corpus: &[EncodedDialogue],
) -> Result<PerplexityReport<T>> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let mut natural_ll = T::zero();
    let mut coarse_ll = T::zero();
    let mut natural_tokens = 0usize;
    let mut coarse_tokens = 0usize;
    for d in corpus {
        let r = report_for(model, d)?;
        natural_ll += r.natural;
        coarse_ll += r.coarse;
        natural_tokens += r.natural_tokens;
        coarse_tokens += r.coarse_tokens;
    }
    let ppl = |ll: T, count: usize| -> T {
        if count == 0 {
            T::one()
        } else {
            (-ll / T::of(count as f64)).exp()
        }
    };
    let has_coarse = model.config.kind == ModelKind::MrRnn;
    Ok(PerplexityReport {
        natural: ppl(natural_ll, natural_tokens),
        coarse: has_coarse.then(|| ppl(coarse_ll, coarse_tokens)),
        joint: ppl(natural_ll + coarse_ll, natural_tokens + coarse_tokens),
    })
}

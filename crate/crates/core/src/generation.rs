//! Beam-search decoding and the two-stage MAP approximation: generate
//! the coarse sequence first, then the natural-language utterance
//! conditioned on it.
//!
//! Expansion ranks partial hypotheses by raw log-likelihood; length
//! normalization applies only to the final ranking of completed
//! hypotheses. Hypotheses reaching the end-of-utterance token retire to
//! a completed pool and the search stops once the pool holds a beam's
//! worth of them (or at the length bound). All ties break
//! lexicographically on token ids, so decoding is deterministic.

use crate::corpus::{EncodedDialogue, EOT_ID, UNK_ID};
use crate::error::{Error, Result};
use crate::models::decode::{actent_session, hred_session, rnnlm_session, MrrnnStages};
use crate::models::{ModelInstance, ModelKind};
use crate::scalar::Real;

/// A partial or completed hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis<T> {
    pub tokens: Vec<u32>,
    /// Raw log-likelihood in nats.
    pub log_likelihood: T,
    /// Set iff the last token is the end-of-utterance token.
    pub terminated: bool,
}

impl<T: Real> BeamHypothesis<T> {
    /// Negative log-likelihood divided by the token count.
    pub fn normalized_cost(&self) -> T {
        -self.log_likelihood / T::of(self.tokens.len().max(1) as f64)
    }

    /// Token sequence without the terminal end-of-utterance marker.
    pub fn surface_tokens(&self) -> &[u32] {
        match self.tokens.split_last() {
            Some((&last, rest)) if last == EOT_ID => rest,
            _ => &self.tokens,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationOptions {
    pub beam_width: usize,
    /// Bound on natural-language hypothesis length (tokens incl. eot).
    pub max_len: usize,
    /// Bound on coarse hypothesis length.
    pub coarse_max_len: usize,
    /// Never expand the unknown token.
    pub forbid_unknown: bool,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            beam_width: 5,
            max_len: 50,
            coarse_max_len: 20,
            forbid_unknown: false,
        }
    }
}

/// Ranked hypotheses; `truncated` is set when nothing terminated within
/// the length bound and the best unterminated hypotheses are returned.
#[derive(Debug, Clone)]
pub struct BeamResult<T> {
    pub hypotheses: Vec<BeamHypothesis<T>>,
    pub truncated: bool,
}

impl<T: Real> BeamResult<T> {
    pub fn best(&self) -> Result<&BeamHypothesis<T>> {
        self.hypotheses
            .first()
            .ok_or_else(|| Error::Numerical("beam search returned no hypotheses".into()))
    }
}

/// A conditional next-token distribution that beam search can drive.
pub trait NextTokenModel<T: Real> {
    type State: Clone;
    fn vocab_size(&self) -> usize;
    fn initial_state(&self) -> Result<Self::State>;
    /// Normalized log-probabilities over the vocabulary.
    fn log_probs(&self, state: &Self::State) -> Result<Vec<T>>;
    fn advance(&self, state: &Self::State, token: u32) -> Result<Self::State>;
}

struct Live<T, S> {
    tokens: Vec<u32>,
    log_likelihood: T,
    state: S,
}

fn cmp_virtual(a_prefix: &[u32], a_tok: u32, b_prefix: &[u32], b_tok: u32) -> std::cmp::Ordering {
    let a = a_prefix.iter().copied().chain(std::iter::once(a_tok));
    let b = b_prefix.iter().copied().chain(std::iter::once(b_tok));
    a.cmp(b)
}

fn cmp_t<T: Real>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
}

/// Width-B beam search over a conditional model view.
pub fn beam_search<T: Real, M: NextTokenModel<T>>(
    model: &M,
    options: &GenerationOptions,
) -> Result<BeamResult<T>> {
    beam_search_to(model, options, options.max_len)
}

fn beam_search_to<T: Real, M: NextTokenModel<T>>(
    model: &M,
    options: &GenerationOptions,
    max_len: usize,
) -> Result<BeamResult<T>> {
    if options.beam_width == 0 || max_len == 0 {
        return Err(Error::InvalidInput("beam width and max length must be at least 1".into()));
    }
    let width = options.beam_width;
    let vocab = model.vocab_size();
    let mut live: Vec<Live<T, M::State>> = vec![Live {
        tokens: Vec::new(),
        log_likelihood: T::zero(),
        state: model.initial_state()?,
    }];
    let mut pool: Vec<BeamHypothesis<T>> = Vec::new();

    for _ in 0..max_len {
        // (parent index, token, candidate log-likelihood)
        let mut candidates: Vec<(usize, u32, T)> = Vec::new();
        for (pi, hyp) in live.iter().enumerate() {
            let log_probs = model.log_probs(&hyp.state)?;
            if log_probs.len() != vocab {
                return Err(Error::Config(format!(
                    "model view returned {} log-probs for vocabulary {vocab}",
                    log_probs.len()
                )));
            }
            for tok in 0..vocab as u32 {
                if options.forbid_unknown && tok == UNK_ID {
                    continue;
                }
                let lp = log_probs[tok as usize];
                if lp == T::neg_infinity() || lp.is_nan() {
                    continue;
                }
                candidates.push((pi, tok, hyp.log_likelihood + lp));
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| {
            cmp_t(b.2, a.2).then_with(|| {
                cmp_virtual(&live[a.0].tokens, a.1, &live[b.0].tokens, b.1)
            })
        });
        candidates.truncate(width);

        let mut next_live = Vec::with_capacity(width);
        for (pi, tok, ll) in candidates {
            let parent = &live[pi];
            let mut tokens = parent.tokens.clone();
            tokens.push(tok);
            if tok == EOT_ID {
                pool.push(BeamHypothesis {
                    tokens,
                    log_likelihood: ll,
                    terminated: true,
                });
            } else if tokens.len() < max_len {
                next_live.push(Live {
                    state: model.advance(&parent.state, tok)?,
                    tokens,
                    log_likelihood: ll,
                });
            } else {
                // length bound reached without termination
                next_live.push(Live {
                    state: parent.state.clone(),
                    tokens,
                    log_likelihood: ll,
                });
            }
        }
        live = next_live;
        if pool.len() >= width || live.is_empty() {
            break;
        }
        if live.iter().all(|h| h.tokens.len() >= max_len) {
            break;
        }
        live.retain(|h| h.tokens.len() < max_len);
    }

    let rank = |mut hyps: Vec<BeamHypothesis<T>>| -> Vec<BeamHypothesis<T>> {
        hyps.sort_by(|a, b| {
            cmp_t(a.normalized_cost(), b.normalized_cost()).then_with(|| a.tokens.cmp(&b.tokens))
        });
        hyps.truncate(width);
        hyps
    };

    if pool.is_empty() {
        let hyps = live
            .into_iter()
            .map(|h| BeamHypothesis {
                tokens: h.tokens,
                log_likelihood: h.log_likelihood,
                terminated: false,
            })
            .collect();
        Ok(BeamResult {
            hypotheses: rank(hyps),
            truncated: true,
        })
    } else {
        Ok(BeamResult {
            hypotheses: rank(pool),
            truncated: false,
        })
    }
}

/// The two-stage response: the generated coarse sequence and the natural
/// utterance conditioned on it, with their normalized costs.
#[derive(Debug, Clone)]
pub struct GeneratedResponse<T> {
    pub coarse: BeamHypothesis<T>,
    pub natural: BeamHypothesis<T>,
    pub coarse_truncated: bool,
    pub natural_truncated: bool,
}

/// MAP approximation for the multiresolution model: beam-search the
/// coarse sub-model, then the natural sub-model conditioned on the
/// winning coarse sequence through the coarse prediction encoder.
pub fn generate_response<T: Real>(
    model: &ModelInstance<T>,
    context: &EncodedDialogue,
    options: &GenerationOptions,
) -> Result<GeneratedResponse<T>> {
    if model.config.kind != ModelKind::MrRnn {
        return Err(Error::Config("two-stage generation needs an mrrnn model".into()));
    }
    let stages = MrrnnStages::prepare(model, context)?;
    let coarse_result = beam_search_to(&stages.coarse_session(), options, options.coarse_max_len)?;
    let coarse_best = coarse_result.best()?.clone();
    let natural_view = stages.natural_session(&coarse_best.tokens)?;
    let natural_result = beam_search_to(&natural_view, options, options.max_len)?;
    let natural_best = natural_result.best()?.clone();
    Ok(GeneratedResponse {
        coarse: coarse_best,
        natural: natural_best,
        coarse_truncated: coarse_result.truncated,
        natural_truncated: natural_result.truncated,
    })
}

/// Single-stage generation for RNNLM, HRED and HRED act-ent models.
pub fn generate_response_hred<T: Real>(
    model: &ModelInstance<T>,
    context: &EncodedDialogue,
    options: &GenerationOptions,
) -> Result<(BeamHypothesis<T>, bool)> {
    let result = match model.config.kind {
        ModelKind::Hred => beam_search(&hred_session(model, context)?, options)?,
        ModelKind::HredActEnt => beam_search(&actent_session(model, context)?, options)?,
        ModelKind::Rnnlm => beam_search(&rnnlm_session(model, context)?, options)?,
        ModelKind::MrRnn => {
            return Err(Error::Config(
                "use generate_response for the multiresolution model".into(),
            ))
        }
    };
    let best = result.best()?.clone();
    Ok((best, result.truncated))
}

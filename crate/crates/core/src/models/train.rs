//! Minibatch Adam on the negative (joint) log-likelihood with gradient
//! clipping, truncated BPTT and early stopping with patience.
//!
//! Truncation windows cover whole utterances: a window is the longest run
//! of consecutive utterances within the configured token budget (counting
//! both streams), never fewer than one utterance. Hidden states are
//! carried across windows detached from the gradient graph; gradients
//! accumulate over every window of a batch before one Adam step, so a
//! training step always sees one whole batch of dialogues.

use crate::corpus::EncodedDialogue;
use crate::error::{Error, Result};
use crate::models::net::{build_window, CarryState};
use crate::models::{ModelInstance, ModelKind};
use crate::neural::{adam_update, clip_gradients, GradientSet, Graph, OptimizerState, ParameterSet};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRecord<T> {
    pub step: u64,
    /// Mean negative log-likelihood per scored token (nats).
    pub train_loss: T,
    /// Total joint log-likelihood of the validation set, when validated.
    pub valid_joint_ll: Option<T>,
    pub valid_per_token_ll: Option<T>,
}

/// State needed to continue an interrupted run bit-identically.
#[derive(Debug, Clone)]
pub struct ResumeState<T> {
    pub optimizer: OptimizerState<T>,
    pub step: u64,
    pub best_valid_joint_ll: Option<T>,
    pub bad_validations: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters at the best validation (final parameters if the run
    /// never validated).
    pub best_params: ParameterSet<T>,
    pub best_step: u64,
    pub best_valid_joint_ll: Option<T>,
    pub final_step: u64,
    pub optimizer: OptimizerState<T>,
    pub bad_validations: usize,
    pub stopped_early: bool,
    pub log: Vec<TrainLogRecord<T>>,
}

/// Split a dialogue into utterance ranges within the token budget.
fn windows(dialogue: &EncodedDialogue, budget: usize, with_coarse: bool) -> Vec<std::ops::Range<usize>> {
    let n = dialogue.natural.len();
    let weight = |i: usize| -> usize {
        let mut w = dialogue.natural[i].len();
        if with_coarse {
            if let Some(c) = &dialogue.coarse {
                w += c[i].len();
            }
        }
        w
    };
    let mut ranges = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        let mut used = weight(start);
        while end < n && used + weight(end) <= budget {
            used += weight(end);
            end += 1;
        }
        ranges.push(start..end);
        start = end;
    }
    ranges
}

/// Accumulate gradients and log-likelihood for one dialogue, window by
/// window, carrying detached hidden states in between. Returns the total
/// log-likelihood and the number of scored tokens.
fn accumulate_dialogue<T: Real>(
    model: &ModelInstance<T>,
    dialogue: &EncodedDialogue,
    grads: &mut GradientSet<T>,
) -> Result<(T, usize)> {
    let with_coarse = model.config.kind == ModelKind::MrRnn;
    let mut carry = CarryState::default();
    let mut total_ll = T::zero();
    let mut total_tokens = 0usize;
    for range in windows(dialogue, model.config.bptt_tokens, with_coarse) {
        let mut graph = Graph::new(&model.params);
        let window = build_window(&mut graph, model, dialogue, range, &carry)?;
        let mut sum = None;
        for stream in [&window.coarse_lls, &window.natural_lls] {
            for utterance in stream {
                for &ll in utterance {
                    total_tokens += 1;
                    sum = Some(match sum {
                        None => ll,
                        Some(s) => graph.add(s, ll)?,
                    });
                }
            }
        }
        if let Some(root) = sum {
            total_ll += graph.value(root).item();
            graph.backward_into(root, -T::one(), grads)?;
        }
        carry = window.carry;
    }
    Ok((total_ll, total_tokens))
}

fn validate<T: Real>(model: &ModelInstance<T>, valid: &[EncodedDialogue]) -> Result<(T, T)> {
    let mut total = T::zero();
    let mut tokens = 0usize;
    for d in valid {
        let report = crate::models::score_dialogue(model, d)?;
        total += report.joint;
        tokens += report.natural_tokens + report.coarse_tokens;
    }
    let per_token = if tokens == 0 { T::zero() } else { total / T::of(tokens as f64) };
    Ok((total, per_token))
}

/// Train in place. The best-validation parameters are returned in the
/// outcome; `model.params` holds the final parameters.
pub fn train<T: Real>(
    model: &mut ModelInstance<T>,
    train_set: &[EncodedDialogue],
    valid_set: &[EncodedDialogue],
    resume: Option<ResumeState<T>>,
) -> Result<TrainOutcome<T>> {
    if train_set.is_empty() {
        return Err(Error::InvalidInput("empty training corpus".into()));
    }
    if model.config.kind.needs_coarse() || model.config.kind == ModelKind::MrRnn {
        for (i, d) in train_set.iter().chain(valid_set.iter()).enumerate() {
            if d.coarse.is_none() {
                return Err(Error::alignment(i + 1, "dialogue has no coarse sequences"));
            }
        }
    }
    let cfg = model.config.clone();
    let (mut optimizer, mut step, mut best_valid, mut bad_validations) = match resume {
        Some(r) => (r.optimizer, r.step, r.best_valid_joint_ll, r.bad_validations),
        None => (
            OptimizerState::new(&model.params, T::of(cfg.learning_rate)),
            0,
            None,
            0,
        ),
    };
    let mut best_params = model.params.clone();
    let mut best_step = step;
    let mut log = Vec::new();
    let mut stopped_early = false;
    let mut last_validated_step = None;

    while step < cfg.max_steps as u64 {
        let mut grads = GradientSet::zeros_like(&model.params);
        let mut batch_ll = T::zero();
        let mut batch_tokens = 0usize;
        let start = (step as usize * cfg.batch_size) % train_set.len();
        for i in 0..cfg.batch_size.min(train_set.len()) {
            let dialogue = &train_set[(start + i) % train_set.len()];
            let (ll, tokens) = accumulate_dialogue(model, dialogue, &mut grads)?;
            batch_ll += ll;
            batch_tokens += tokens;
        }
        if batch_tokens == 0 {
            return Err(Error::InvalidInput("batch contains no tokens".into()));
        }
        let loss = -batch_ll / T::of(batch_tokens as f64);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "training loss diverged at step {step}: {loss}"
            )));
        }
        grads.scale(T::one() / T::of(batch_tokens as f64));
        if !grads.all_finite() {
            return Err(Error::Numerical(format!(
                "non-finite gradient at step {step}"
            )));
        }
        let clipped = clip_gradients(grads, T::of(cfg.clip_threshold));
        adam_update(&mut model.params, &clipped, &mut optimizer)?;
        step += 1;

        let mut record = TrainLogRecord {
            step,
            train_loss: loss,
            valid_joint_ll: None,
            valid_per_token_ll: None,
        };
        if !valid_set.is_empty() && step % cfg.validate_every as u64 == 0 {
            let (total, per_token) = validate(model, valid_set)?;
            record.valid_joint_ll = Some(total);
            record.valid_per_token_ll = Some(per_token);
            last_validated_step = Some(step);
            if best_valid.map_or(true, |b| total > b) {
                best_valid = Some(total);
                best_params = model.params.clone();
                best_step = step;
                bad_validations = 0;
            } else {
                bad_validations += 1;
                if bad_validations > cfg.patience {
                    log.push(record);
                    stopped_early = true;
                    break;
                }
            }
        }
        log.push(record);
    }

    // a run that never hit a validation boundary still reports one
    if !valid_set.is_empty() && last_validated_step != Some(step) {
        let (total, per_token) = validate(model, valid_set)?;
        if best_valid.map_or(true, |b| total > b) {
            best_valid = Some(total);
            best_params = model.params.clone();
            best_step = step;
            bad_validations = 0;
        } else {
            bad_validations += 1;
        }
        log.push(TrainLogRecord {
            step,
            train_loss: log.last().map(|r| r.train_loss).unwrap_or_else(T::zero),
            valid_joint_ll: Some(total),
            valid_per_token_ll: Some(per_token),
        });
    }
    if valid_set.is_empty() {
        best_params = model.params.clone();
        best_step = step;
    }

    Ok(TrainOutcome {
        best_params,
        best_step,
        best_valid_joint_ll: best_valid,
        final_step: step,
        optimizer,
        bad_validations,
        stopped_early,
        log,
    })
}

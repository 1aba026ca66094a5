//! Coarse-token extraction: the noun procedure and the activity-entity
//! procedure, with tense and terminal-command detection.
//!
//! Both procedures run per utterance and always emit a tense token first,
//! so the one-to-one alignment with utterances holds by construction. The
//! activity-entity procedure additionally ends each sequence with `cmd` or
//! `no_cmd`.

mod resources;
mod tagger;

pub use resources::ExtractionResources;
pub use tagger::{parse_pretagged_utterance, pos_tag, tag_token, tag_view, TaggedToken};

use crate::corpus::{is_placeholder, is_url_or_path, CoarseSequence, Mode, Utterance};

pub const NO_NOUNS: &str = "no_nouns";
pub const NONE_ACTIVITY: &str = "none_activity";
pub const CMD: &str = "cmd";
pub const NO_CMD: &str = "no_cmd";
pub const NO_TENSES: &str = "no_tenses";

/// Modal verbs that mark the future tense.
const FUTURE_MODALS: [&str; 5] = ["will", "'ll", "shall", "wo", "gonna"];

/// Which of the three time tenses an utterance contains.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TenseToken {
    pub past: bool,
    pub present: bool,
    pub future: bool,
}

impl TenseToken {
    /// One of the 2^3 combination tokens, `no_tenses` when all flags are
    /// off: e.g. `present_tenses`, `past_present_tenses`.
    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.past {
            parts.push("past");
        }
        if self.present {
            parts.push("present");
        }
        if self.future {
            parts.push("future");
        }
        if parts.is_empty() {
            return NO_TENSES.to_string();
        }
        format!("{}_tenses", parts.join("_"))
    }

    pub fn all_tokens() -> Vec<String> {
        let mut out = Vec::new();
        for past in [false, true] {
            for present in [false, true] {
                for future in [false, true] {
                    out.push(TenseToken { past, present, future }.render());
                }
            }
        }
        out
    }
}

pub fn is_tense_token(token: &str) -> bool {
    token == NO_TENSES || (token.ends_with("_tenses") && TenseToken::all_tokens().contains(&token.to_string()))
}

/// Detect tenses from POS tags: past from VBD/VBN, present from
/// VBP/VBZ/VBG, future from a modal in the `will`-class.
pub fn detect_tenses(tagged: &[TaggedToken]) -> TenseToken {
    let mut t = TenseToken::default();
    for tok in tagged {
        match tok.tag.as_str() {
            "VBD" | "VBN" => t.past = true,
            "VBP" | "VBZ" | "VBG" => t.present = true,
            "MD" => {
                if FUTURE_MODALS.contains(&tok.surface.to_lowercase().as_str()) {
                    t.future = true;
                }
            }
            _ => {}
        }
    }
    t
}

/// An entity dictionary match covering `len` source tokens from `start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub start: usize,
    pub len: usize,
    pub token: String,
}

/// Greedy left-to-right entity matching; at each position the two-word key
/// is tried before the one-word key, and matched tokens are consumed.
pub fn match_entity_spans(tokens: &[String], resources: &ExtractionResources) -> Vec<EntitySpan> {
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() {
            let key = (lower[i].clone(), lower[i + 1].clone());
            if let Some(token) = resources.entity_two.get(&key) {
                spans.push(EntitySpan {
                    start: i,
                    len: 2,
                    token: token.clone(),
                });
                i += 2;
                continue;
            }
        }
        if let Some(token) = resources.entity_one.get(&lower[i]) {
            spans.push(EntitySpan {
                start: i,
                len: 1,
                token: token.clone(),
            });
        }
        i += 1;
    }
    spans
}

/// Substitute matched entities into the token stream; a two-word match
/// becomes a single entity token, everything else passes through.
pub fn map_entities(tokens: &[String], resources: &ExtractionResources) -> Vec<String> {
    let spans = match_entity_spans(tokens, resources);
    let mut by_start: Vec<Option<&EntitySpan>> = vec![None; tokens.len()];
    let mut consumed = vec![false; tokens.len()];
    for s in &spans {
        by_start[s.start] = Some(s);
        for k in s.start..s.start + s.len {
            consumed[k] = true;
        }
    }
    let mut out = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if let Some(span) = by_start[i] {
            out.push(span.token.clone());
        } else if !consumed[i] {
            out.push(tok.clone());
        }
    }
    out
}

/// `cmd` iff any token surface is in the command set.
pub fn detect_command(tokens: &[String], resources: &ExtractionResources) -> &'static str {
    if tokens.iter().any(|t| resources.is_command(&t.to_lowercase())) {
        CMD
    } else {
        NO_CMD
    }
}

fn is_alphabetic_word(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_alphabetic())
}

/// Noun procedure: tense token, then first occurrences of noun-tagged
/// alphabetic non-stop-word surfaces in order (urls and paths kept,
/// placeholder tokens dropped); `no_nouns` when nothing survives.
pub fn extract_nouns(tagged: &[TaggedToken], resources: &ExtractionResources) -> CoarseSequence {
    let tense = detect_tenses(tagged).render();
    let mut seen = std::collections::HashSet::new();
    let mut content = Vec::new();
    for tok in tagged {
        let surface = tok.surface.as_str();
        let keep = if is_placeholder(surface) {
            false
        } else if is_url_or_path(surface) {
            true
        } else {
            tok.is_noun()
                && is_alphabetic_word(surface)
                && !resources.stop_words.contains(&surface.to_lowercase())
        };
        if keep && seen.insert(surface.to_string()) {
            content.push(surface.to_string());
        }
    }
    let mut tokens = vec![tense];
    if content.is_empty() {
        tokens.push(NO_NOUNS.to_string());
    } else {
        tokens.extend(content);
    }
    CoarseSequence::new(tokens)
}

/// Activity-entity procedure: tense token, activities in source order
/// (or `none_activity`), then entities and kept urls/paths in source
/// order, ending with the command flag. Tokens matched as activities
/// are not command candidates, which is what the dictionary data
/// requires (`find` is both an activity synonym and a command).
pub fn extract_activity_entity(
    tagged: &[TaggedToken],
    raw_tokens: &[String],
    resources: &ExtractionResources,
) -> CoarseSequence {
    let tense = detect_tenses(tagged).render();
    let spans = match_entity_spans(raw_tokens, resources);
    let mut consumed = vec![false; raw_tokens.len()];
    for s in &spans {
        for k in s.start..s.start + s.len {
            consumed[k] = true;
        }
    }

    let mut activity_positions = Vec::new();
    let mut activities = Vec::new();
    {
        let mut seen = std::collections::HashSet::new();
        let mut push = |pos: usize, token: &str, seen: &mut std::collections::HashSet<String>| {
            activity_positions.push(pos);
            if seen.insert(token.to_string()) {
                activities.push(token.to_string());
            }
        };
        let any_verb = tagged.iter().any(|t| t.is_verb());
        if any_verb {
            for (i, tok) in tagged.iter().enumerate() {
                if consumed.get(i).copied().unwrap_or(false) || !tok.is_verb() {
                    continue;
                }
                if let Some(token) = resources.activity_map.get(&tok.surface.to_lowercase()) {
                    push(i, token, &mut seen);
                }
            }
        } else if let Some(first) = tagged.first() {
            // the tagger mis-tags imperatives ("upgrade firefox"): treat a
            // leading noun as a verb when the utterance has no verbs at all
            if first.is_noun() && !consumed.first().copied().unwrap_or(false) {
                if let Some(token) = resources.activity_map.get(&first.surface.to_lowercase()) {
                    push(0, token, &mut seen);
                }
            }
        }
    }

    // entities and kept urls/paths, merged in source order
    let mut tail: Vec<(usize, String)> = spans.iter().map(|s| (s.start, s.token.clone())).collect();
    for (i, tok) in raw_tokens.iter().enumerate() {
        if !consumed[i] && !is_placeholder(tok) && is_url_or_path(tok) {
            tail.push((i, tok.clone()));
        }
    }
    tail.sort_by_key(|(pos, _)| *pos);

    let mut tokens = vec![tense];
    if activities.is_empty() {
        tokens.push(NONE_ACTIVITY.to_string());
    } else {
        tokens.extend(activities);
    }
    let mut seen = std::collections::HashSet::new();
    for (_, token) in tail {
        if seen.insert(token.clone()) {
            tokens.push(token);
        }
    }

    let command_candidates: Vec<String> = raw_tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| !activity_positions.contains(i))
        .map(|(_, t)| t.clone())
        .collect();
    tokens.push(detect_command(&command_candidates, resources).to_string());
    CoarseSequence::new(tokens)
}

/// Which extraction procedure to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Procedure {
    Noun,
    ActivityEntity,
}

impl std::str::FromStr for Procedure {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "noun" => Ok(Procedure::Noun),
            "actent" => Ok(Procedure::ActivityEntity),
            other => Err(crate::Error::InvalidInput(format!(
                "unknown extraction procedure: {other}"
            ))),
        }
    }
}

/// Build the tagger view for a procedure. For Ubuntu the noun procedure
/// substitutes entity words and commands with "something"; the
/// activity-entity procedure substitutes matched entities only.
fn procedure_view(
    utterance: &Utterance,
    procedure: Procedure,
    mode: Mode,
    resources: &ExtractionResources,
) -> Vec<String> {
    let mut view = utterance.tagger_tokens.clone();
    if mode == Mode::Ubuntu {
        match procedure {
            Procedure::Noun => {
                for v in view.iter_mut() {
                    let lower = v.to_lowercase();
                    if resources.is_entity_word(&lower) || resources.is_command(&lower) {
                        *v = "something".to_string();
                    }
                }
            }
            Procedure::ActivityEntity => {
                let spans = match_entity_spans(&utterance.tokens, resources);
                for s in &spans {
                    for k in s.start..s.start + s.len {
                        view[k] = "something".to_string();
                    }
                }
            }
        }
    }
    view
}

/// Run one extraction procedure over an utterance with the built-in tagger.
pub fn extract_utterance(
    utterance: &Utterance,
    procedure: Procedure,
    mode: Mode,
    resources: &ExtractionResources,
) -> CoarseSequence {
    let view = procedure_view(utterance, procedure, mode, resources);
    let tagged = tag_view(&utterance.tokens, &view, resources);
    extract_tagged(&tagged, &utterance.tokens, procedure, resources)
}

/// Run one extraction procedure over a pre-tagged utterance.
pub fn extract_tagged(
    tagged: &[TaggedToken],
    raw_tokens: &[String],
    procedure: Procedure,
    resources: &ExtractionResources,
) -> CoarseSequence {
    match procedure {
        Procedure::Noun => extract_nouns(tagged, resources),
        Procedure::ActivityEntity => extract_activity_entity(tagged, raw_tokens, resources),
    }
}

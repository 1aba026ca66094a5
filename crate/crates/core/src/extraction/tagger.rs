//! Built-in lexicon tagger with suffix fallback, plus the pre-tagged
//! input path.
//!
//! Tag precedence per token (lowercased lookup): bundled lexicon,
//! placeholder rule, suffix rules (-ing -> VBG, -ed -> VBD, -s -> VBZ
//! after a known verb stem else NNS), activity-dictionary verbs (VB),
//! entity-dictionary words (NN), default NN.

use crate::corpus::{is_placeholder, Utterance};
use crate::error::{Error, Result};
use crate::extraction::resources::ExtractionResources;

/// A surface paired with its PTB-style part-of-speech tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub surface: String,
    pub tag: String,
}

impl TaggedToken {
    pub fn new(surface: impl Into<String>, tag: impl Into<String>) -> Self {
        TaggedToken {
            surface: surface.into(),
            tag: tag.into(),
        }
    }

    pub fn is_noun(&self) -> bool {
        self.tag.starts_with("NN")
    }

    pub fn is_verb(&self) -> bool {
        self.tag.starts_with("VB")
    }
}

fn known_verb_stem(stem: &str, resources: &ExtractionResources) -> bool {
    resources.activity_map.contains_key(stem)
        || resources
            .tagger_lexicon
            .get(stem)
            .is_some_and(|t| t.starts_with("VB"))
}

/// Tag one token from its (possibly substituted) tagger-view surface.
pub fn tag_token(view: &str, resources: &ExtractionResources) -> String {
    let lower = view.to_lowercase();
    if let Some(tag) = resources.tagger_lexicon.get(&lower) {
        return tag.clone();
    }
    if is_placeholder(view) {
        return "UH".to_string();
    }
    if lower.len() >= 5 && lower.ends_with("ing") {
        return "VBG".to_string();
    }
    if lower.len() >= 4 && lower.ends_with("ed") {
        return "VBD".to_string();
    }
    if lower.len() >= 3 && lower.ends_with('s') && !lower.ends_with("ss") {
        let stem = &lower[..lower.len() - 1];
        if known_verb_stem(stem, resources) {
            return "VBZ".to_string();
        }
        return "NNS".to_string();
    }
    if resources.activity_map.contains_key(&lower) {
        return "VB".to_string();
    }
    if resources.is_entity_word(&lower) {
        return "NN".to_string();
    }
    "NN".to_string()
}

/// Tag a substituted view, pairing each tag with the original surface.
pub fn tag_view(
    surfaces: &[String],
    view: &[String],
    resources: &ExtractionResources,
) -> Vec<TaggedToken> {
    debug_assert_eq!(surfaces.len(), view.len());
    surfaces
        .iter()
        .zip(view.iter())
        .map(|(surface, v)| TaggedToken::new(surface.clone(), tag_token(v, resources)))
        .collect()
}

/// Tag an utterance from its preprocessed tagger view.
pub fn pos_tag(utterance: &Utterance, resources: &ExtractionResources) -> Vec<TaggedToken> {
    tag_view(&utterance.tokens, &utterance.tagger_tokens, resources)
}

/// Parse one pre-tagged utterance: `surface/TAG` pairs, space separated.
/// The tag is taken after the last slash so surfaces may contain slashes.
pub fn parse_pretagged_utterance(text: &str, lineno: usize) -> Result<Vec<TaggedToken>> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        let (surface, tag) = tok
            .rsplit_once('/')
            .ok_or_else(|| Error::parse(lineno, format!("expected surface/TAG, got {tok}")))?;
        if surface.is_empty() || tag.is_empty() {
            return Err(Error::parse(lineno, format!("expected surface/TAG, got {tok}")));
        }
        out.push(TaggedToken::new(surface, tag));
    }
    if out.is_empty() {
        return Err(Error::parse(lineno, "empty pre-tagged utterance"));
    }
    Ok(out)
}

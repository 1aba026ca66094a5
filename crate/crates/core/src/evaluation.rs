//! Automatic metrics: activity/entity/noun precision-recall-F1, tense and
//! command accuracy, embedding-based Average/Greedy/Extrema similarity,
//! and n-gram bits-per-word. All metrics are pure functions on f64.

use std::collections::HashMap;
use std::path::Path;

use crate::corpus::{is_placeholder, CoarseSequence, PADDING, SEPARATOR, UNKNOWN};
use crate::error::{Error, Result};
use crate::extraction::{is_tense_token, CMD, NONE_ACTIVITY, NO_CMD, NO_NOUNS};

/// Which coarse tokens a metric counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Activity,
    Entity,
    /// Content tokens of noun sequences.
    Noun,
}

impl TokenClass {
    fn matches(&self, token: &str) -> bool {
        if is_special_coarse_token(token) {
            return false;
        }
        match self {
            TokenClass::Activity => token.ends_with("_activity"),
            TokenClass::Entity => token.ends_with("_entity"),
            TokenClass::Noun => !token.ends_with("_activity") && !token.ends_with("_entity"),
        }
    }
}

/// Structural tokens excluded from every overlap and n-gram count.
pub fn is_special_coarse_token(token: &str) -> bool {
    token == NO_NOUNS
        || token == NONE_ACTIVITY
        || token == CMD
        || token == NO_CMD
        || token == SEPARATOR
        || token == UNKNOWN
        || token == PADDING
        || is_tense_token(token)
        || is_placeholder(token)
}

fn class_tokens<'a>(seq: &'a CoarseSequence, class: TokenClass) -> Vec<&'a str> {
    seq.tokens
        .iter()
        .map(|t| t.as_str())
        .filter(|t| class.matches(t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted_count: usize,
    pub truth_count: usize,
    pub intersection: usize,
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Multiset-intersection precision/recall/F1 over one class of tokens.
pub fn overlap_prf(
    predicted: &CoarseSequence,
    truth: &CoarseSequence,
    class: TokenClass,
) -> OverlapScore {
    let pred = class_tokens(predicted, class);
    let gold = class_tokens(truth, class);
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold {
        *gold_counts.entry(t).or_insert(0) += 1;
    }
    let mut intersection = 0usize;
    for t in &pred {
        if let Some(c) = gold_counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                intersection += 1;
            }
        }
    }
    let precision = if pred.is_empty() {
        0.0
    } else {
        intersection as f64 / pred.len() as f64
    };
    let recall = if gold.is_empty() {
        0.0
    } else {
        intersection as f64 / gold.len() as f64
    };
    OverlapScore {
        precision,
        recall,
        f1: f1_of(precision, recall),
        predicted_count: pred.len(),
        truth_count: gold.len(),
        intersection,
    }
}

/// Macro-averaged corpus score: responses whose ground-truth class set is
/// empty are skipped (and counted in `skipped`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusOverlap {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Responses contributing to the average.
    pub evaluated: usize,
    /// Responses skipped for an empty ground-truth class.
    pub skipped: usize,
}

pub fn corpus_prf(
    pairs: &[(CoarseSequence, CoarseSequence)],
    class: TokenClass,
) -> CorpusOverlap {
    let mut sums = (0.0, 0.0, 0.0);
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for (pred, truth) in pairs {
        if class_tokens(truth, class).is_empty() {
            skipped += 1;
            continue;
        }
        let s = overlap_prf(pred, truth, class);
        sums.0 += s.precision;
        sums.1 += s.recall;
        sums.2 += s.f1;
        evaluated += 1;
    }
    let n = evaluated.max(1) as f64;
    CorpusOverlap {
        precision: if evaluated == 0 { 0.0 } else { sums.0 / n },
        recall: if evaluated == 0 { 0.0 } else { sums.1 / n },
        f1: if evaluated == 0 { 0.0 } else { sums.2 / n },
        evaluated,
        skipped,
    }
}

/// Fraction of responses whose leading tense token matches the truth's.
pub fn tense_accuracy(pairs: &[(CoarseSequence, CoarseSequence)]) -> f64 {
    exact_position_accuracy(pairs, |s| s.tokens.first())
}

/// Fraction of responses whose trailing cmd flag matches the truth's.
pub fn command_accuracy(pairs: &[(CoarseSequence, CoarseSequence)]) -> f64 {
    exact_position_accuracy(pairs, |s| s.tokens.last())
}

fn exact_position_accuracy(
    pairs: &[(CoarseSequence, CoarseSequence)],
    pick: impl Fn(&CoarseSequence) -> Option<&String>,
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs
        .iter()
        .filter(|(p, t)| pick(p).is_some() && pick(p) == pick(t))
        .count();
    hits as f64 / pairs.len() as f64
}

/// Word vectors of a fixed dimension; missing words are zero vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::InvalidInput(format!(
                "embedding dimension {} does not match table dimension {}",
                vector.len(),
                self.dimension
            )));
        }
        self.vectors.insert(word.into(), vector);
        Ok(())
    }

    /// In-table vector, when present and non-zero.
    fn known(&self, word: &str) -> Option<&Vec<f64>> {
        self.vectors
            .get(word)
            .filter(|v| v.iter().any(|&x| x != 0.0))
    }

    /// Parse `word v1 v2 ... vd` lines.
    pub fn parse(text: &str) -> Result<EmbeddingTable> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts
                .next()
                .ok_or_else(|| Error::parse(i + 1, "empty embedding line"))?;
            let values: Vec<f64> = parts
                .map(|p| {
                    p.parse()
                        .map_err(|_| Error::parse(i + 1, format!("bad float: {p}")))
                })
                .collect::<Result<_>>()?;
            if values.is_empty() {
                return Err(Error::parse(i + 1, "embedding line with no values"));
            }
            let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
            t.insert(word, values)?;
        }
        table.ok_or_else(|| Error::InvalidInput("empty embedding file".into()))
    }

    pub fn load(path: &Path) -> Result<EmbeddingTable> {
        if !path.is_file() {
            return Err(Error::MissingResource(path.display().to_string()));
        }
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na / 1.0 * nb)
    }
}

/// Cosine of the mean word vectors (zero mean gives similarity 0).
pub fn embedding_average(pred: &[String], truth: &[String], table: &EmbeddingTable) -> f64 {
    let mean = |tokens: &[String]| -> Vec<f64> {
        let mut acc = vec![0.0; table.dimension];
        if tokens.is_empty() {
            return acc;
        }
        for t in tokens {
            if let Some(v) = table.known(t) {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
        }
        for a in acc.iter_mut() {
            *a /= tokens.len() as f64;
        }
        acc
    };
    cosine(&mean(pred), &mean(truth))
}

/// For each direction, the average over tokens of the maximum cosine to
/// any token on the other side; the final score is the mean of the two
/// directions. Out-of-table words are excluded.
pub fn embedding_greedy(pred: &[String], truth: &[String], table: &EmbeddingTable) -> f64 {
    let filter = |tokens: &[String]| -> Vec<&Vec<f64>> {
        tokens.iter().filter_map(|t| table.known(t)).collect()
    };
    let a = filter(pred);
    let b = filter(truth);
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let direction = |from: &[&Vec<f64>], to: &[&Vec<f64>]| -> f64 {
        let total: f64 = from
            .iter()
            .map(|v| {
                to.iter()
                    .map(|w| cosine(v, w))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum();
        total / from.len() as f64
    };
    (direction(&a, &b) + direction(&b, &a)) / 2.0
}

/// Per-dimension extrema vector (largest magnitude, sign preserved, ties
/// positive) for each sentence, then the cosine between them.
pub fn embedding_extrema(pred: &[String], truth: &[String], table: &EmbeddingTable) -> f64 {
    let extrema = |tokens: &[String]| -> Vec<f64> {
        let vectors: Vec<&Vec<f64>> = tokens.iter().filter_map(|t| table.known(t)).collect();
        let mut out = vec![0.0; table.dimension];
        for (d, o) in out.iter_mut().enumerate() {
            let mut best = 0.0f64;
            for v in &vectors {
                let x = v[d];
                if x.abs() > best.abs() || (x.abs() == best.abs() && x > best) {
                    best = x;
                }
            }
            *o = best;
        }
        out
    };
    cosine(&extrema(pred), &extrema(truth))
}

/// Cross-entropy in bits per token of an unsmoothed MLE n-gram model,
/// estimated on the corpus it scores, special tokens excluded. Each
/// sequence starts from a begin-of-sequence context for the bigram.
pub fn ngram_bits_per_word(corpus: &[CoarseSequence], order: usize) -> Result<f64> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidInput(format!("order must be 1 or 2, got {order}")));
    }
    let sequences: Vec<Vec<&str>> = corpus
        .iter()
        .map(|seq| {
            seq.tokens
                .iter()
                .map(|t| t.as_str())
                .filter(|t| !is_special_coarse_token(t))
                .collect()
        })
        .filter(|s: &Vec<&str>| !s.is_empty())
        .collect();
    let total: usize = sequences.iter().map(|s| s.len()).sum();
    if total == 0 {
        return Err(Error::InvalidInput(
            "no scorable tokens in corpus (all special)".into(),
        ));
    }
    if order == 1 {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in &sequences {
            for t in s {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        let mut bits = 0.0;
        for s in &sequences {
            for t in s {
                let p = counts[t] as f64 / total as f64;
                bits -= p.log2();
            }
        }
        Ok(bits / total as f64)
    } else {
        const BOS: &str = "\u{1}<s>";
        let mut pair_counts: HashMap<(&str, &str), usize> = HashMap::new();
        let mut ctx_counts: HashMap<&str, usize> = HashMap::new();
        for s in &sequences {
            let mut prev = BOS;
            for t in s {
                *pair_counts.entry((prev, t)).or_insert(0) += 1;
                *ctx_counts.entry(prev).or_insert(0) += 1;
                prev = t;
            }
        }
        let mut bits = 0.0;
        for s in &sequences {
            let mut prev = BOS;
            for t in s {
                let p = pair_counts[&(prev, *t)] as f64 / ctx_counts[prev] as f64;
                bits -= p.log2();
                prev = t;
            }
        }
        Ok(bits / total as f64)
    }
}

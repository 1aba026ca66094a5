//! Dialogue corpora: tokenization and preprocessing, the dialogue /
//! coarse-sequence file formats, and vocabularies.
//!
//! File formats:
//! - dialogue file: UTF-8, one dialogue per line, utterances separated by
//!   the literal token ` __eot__ ` (a trailing separator is canonical);
//! - coarse file: same shape, aligned line-by-line and utterance-by-utterance;
//! - vocabulary file: one `surface<TAB>id` per line, sorted by id.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Utterance separator token.
pub const SEPARATOR: &str = "__eot__";
/// Surface of the reserved unknown token.
pub const UNKNOWN: &str = "<unk>";
/// Surface of the reserved padding token (excluded from likelihoods).
pub const PADDING: &str = "<pad>";

pub const UNK_ID: u32 = 0;
pub const EOT_ID: u32 = 1;
pub const PAD_ID: u32 = 2;

/// Reserved surfaces in id order.
pub const RESERVED: [&str; 3] = [UNKNOWN, SEPARATOR, PADDING];

/// Preprocessing / resource domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Ubuntu,
    Twitter,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ubuntu" => Ok(Mode::Ubuntu),
            "twitter" => Ok(Mode::Twitter),
            other => Err(Error::InvalidInput(format!("unknown mode: {other}"))),
        }
    }
}

/// A surface form paired with its vocabulary id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub id: u32,
}

/// One dialogue turn. `tokens` are the surfaces used for modeling;
/// `tagger_tokens` is the aligned view fed to the POS tagger, with the
/// mode-specific lexical substitutions already applied (numbers -> "some",
/// urls -> "somewhere", heart emoticons -> "love" for Twitter). Dictionary
/// driven substitutions (entities/commands -> "something" for Ubuntu)
/// happen in the extraction module where the dictionaries live.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub tokens: Vec<String>,
    pub tagger_tokens: Vec<String>,
    pub speaker: Option<String>,
}

/// The coarse token sequence aligned with one utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseSequence {
    pub tokens: Vec<String>,
}

impl CoarseSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        CoarseSequence { tokens }
    }

    pub fn render(&self) -> String {
        self.tokens.join(" ")
    }
}

/// A dialogue: ordered utterances plus, optionally, the aligned coarse
/// sequences (exactly one per utterance).
#[derive(Debug, Clone, PartialEq)]
pub struct Dialogue {
    pub utterances: Vec<Utterance>,
    pub coarse: Option<Vec<CoarseSequence>>,
}

impl Dialogue {
    pub fn attach_coarse(&mut self, coarse: Vec<CoarseSequence>, line: usize) -> Result<()> {
        if coarse.len() != self.utterances.len() {
            return Err(Error::alignment(
                line,
                format!(
                    "{} coarse sequences for {} utterances",
                    coarse.len(),
                    self.utterances.len()
                ),
            ));
        }
        self.coarse = Some(coarse);
        Ok(())
    }
}

pub fn is_url(token: &str) -> bool {
    token.starts_with("http://")
        || token.starts_with("https://")
        || token.starts_with("www.")
        || token.contains("://")
}

/// Urls and filesystem paths are kept by the extraction procedures even
/// though they contain non-alphabet characters. Slash-bearing emoticons
/// (":/") carry no alphanumerics and do not count.
pub fn is_url_or_path(token: &str) -> bool {
    if is_url(token) {
        return true;
    }
    if (token.starts_with('/') || token.starts_with("~/")) && token.len() > 1 {
        return true;
    }
    token.contains('/') && token.chars().filter(|c| c.is_ascii_alphanumeric()).count() >= 2
}

pub fn is_placeholder(token: &str) -> bool {
    token.len() > 2 && token.starts_with('<') && token.ends_with('>')
}

fn is_number(token: &str) -> bool {
    let mut saw_digit = false;
    for c in token.chars() {
        if c.is_ascii_digit() {
            saw_digit = true;
        } else if !matches!(c, '.' | ',' | ':' | '%' | '+' | '-') {
            return false;
        }
    }
    saw_digit
}

fn tagger_substitute(token: &str, mode: Mode) -> String {
    if mode == Mode::Twitter {
        if token == "<3" {
            return "love".to_string();
        }
        if is_url(token) {
            return "somewhere".to_string();
        }
        if is_number(token) {
            return "some".to_string();
        }
    }
    token.to_string()
}

fn speaker_label(token: &str) -> bool {
    is_placeholder(token) && token.ends_with("_speaker>")
}

/// Tokenize and preprocess one raw utterance. Consecutive whitespace is
/// collapsed by tokenization; the original tokens are retained for
/// modeling while `tagger_tokens` carries the substituted tagger view.
pub fn preprocess_utterance(raw: &str, mode: Mode) -> Result<Utterance> {
    let tokens: Vec<String> = raw.split_whitespace().map(|t| t.to_string()).collect();
    preprocess_tokens(tokens, mode)
}

pub fn preprocess_tokens(tokens: Vec<String>, mode: Mode) -> Result<Utterance> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput("empty utterance".into()));
    }
    let tagger_tokens = tokens.iter().map(|t| tagger_substitute(t, mode)).collect();
    let speaker = tokens.first().filter(|t| speaker_label(t)).cloned();
    Ok(Utterance {
        tokens,
        tagger_tokens,
        speaker,
    })
}

/// Split one dialogue line into utterance token groups on the `__eot__`
/// separator token. A trailing separator is accepted; an empty utterance
/// or an empty line is an error naming the line.
pub fn split_dialogue_line(line: &str, lineno: usize) -> Result<Vec<Vec<String>>> {
    let mut utterances = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for tok in line.split_whitespace() {
        if tok == SEPARATOR {
            if current.is_empty() {
                return Err(Error::parse(lineno, "empty utterance before __eot__"));
            }
            utterances.push(std::mem::take(&mut current));
        } else {
            current.push(tok.to_string());
        }
    }
    if !current.is_empty() {
        utterances.push(current);
    }
    if utterances.is_empty() {
        return Err(Error::parse(lineno, "dialogue with zero utterances"));
    }
    Ok(utterances)
}

fn render_dialogue_line(utterances: &[Vec<String>]) -> String {
    let mut line = String::new();
    for (i, utt) in utterances.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        let _ = write!(line, "{} {}", utt.join(" "), SEPARATOR);
    }
    line
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Load a dialogue file. Tokens are kept verbatim; the tagger view equals
/// the token view until `preprocess_utterance` is applied with a mode.
pub fn load_corpus(path: &Path) -> Result<Vec<Dialogue>> {
    let text = read_to_string(path)?;
    let mut dialogues = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let groups = split_dialogue_line(line, lineno)?;
        let utterances = groups
            .into_iter()
            .map(|tokens| {
                let speaker = tokens.first().filter(|t| speaker_label(t)).cloned();
                Utterance {
                    tagger_tokens: tokens.clone(),
                    tokens,
                    speaker,
                }
            })
            .collect();
        dialogues.push(Dialogue {
            utterances,
            coarse: None,
        });
    }
    if dialogues.is_empty() {
        return Err(Error::InvalidInput(format!(
            "empty corpus file: {}",
            path.display()
        )));
    }
    Ok(dialogues)
}

/// Save dialogues in the canonical format (trailing separator per
/// utterance). `load_corpus(save_corpus(d)) == d` token-for-token.
pub fn save_corpus(dialogues: &[Dialogue], path: &Path) -> Result<()> {
    let mut out = String::new();
    for d in dialogues {
        let groups: Vec<Vec<String>> = d.utterances.iter().map(|u| u.tokens.clone()).collect();
        out.push_str(&render_dialogue_line(&groups));
        out.push('\n');
    }
    write_string(path, &out)
}

/// Load a coarse file (same line/utterance structure as a dialogue file).
pub fn load_coarse(path: &Path) -> Result<Vec<Vec<CoarseSequence>>> {
    let text = read_to_string(path)?;
    let mut all = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let groups = split_dialogue_line(line, i + 1)?;
        all.push(groups.into_iter().map(CoarseSequence::new).collect());
    }
    Ok(all)
}

pub fn save_coarse(coarse: &[Vec<CoarseSequence>], path: &Path) -> Result<()> {
    let mut out = String::new();
    for line in coarse {
        let groups: Vec<Vec<String>> = line.iter().map(|c| c.tokens.clone()).collect();
        out.push_str(&render_dialogue_line(&groups));
        out.push('\n');
    }
    write_string(path, &out)
}

/// Load a dialogue file together with its aligned coarse file; the
/// per-line utterance counts must match exactly.
pub fn load_aligned(dialogue_path: &Path, coarse_path: &Path) -> Result<Vec<Dialogue>> {
    let mut dialogues = load_corpus(dialogue_path)?;
    let coarse = load_coarse(coarse_path)?;
    if coarse.len() != dialogues.len() {
        return Err(Error::alignment(
            coarse.len().min(dialogues.len()) + 1,
            format!(
                "{} coarse lines for {} dialogue lines",
                coarse.len(),
                dialogues.len()
            ),
        ));
    }
    for (i, (d, c)) in dialogues.iter_mut().zip(coarse).enumerate() {
        d.attach_coarse(c, i + 1)?;
    }
    Ok(dialogues)
}

/// Vocabulary stream level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Natural,
    Coarse,
}

/// Surface <-> dense id mapping with the three reserved entries at ids
/// 0..3. Unknown surfaces encode to [`UNK_ID`].
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build from an iterator of token surfaces. `size` is the total
    /// vocabulary size including the reserved entries; the most frequent
    /// surfaces fill the remaining slots, ties broken lexicographically.
    pub fn build<'a>(tokens: impl Iterator<Item = &'a str>, size: usize) -> Result<Vocabulary> {
        if size < RESERVED.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "vocabulary size {size} leaves no room beyond {} reserved tokens",
                RESERVED.len()
            )));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut any = false;
        for t in tokens {
            any = true;
            if RESERVED.contains(&t) {
                continue;
            }
            *counts.entry(t).or_insert(0) += 1;
        }
        if !any {
            return Err(Error::InvalidInput("empty corpus".into()));
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(size - RESERVED.len());

        let mut surfaces: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        surfaces.extend(ranked.into_iter().map(|(s, _)| s.to_string()));
        Ok(Vocabulary::from_surfaces(surfaces))
    }

    fn from_surfaces(surfaces: Vec<String>) -> Vocabulary {
        let index = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Vocabulary { surfaces, index }
    }

    pub fn size(&self) -> usize {
        self.surfaces.len()
    }

    pub fn encode(&self, surface: &str) -> u32 {
        self.index.get(surface).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, surface: &str) -> Token {
        Token {
            surface: surface.to_string(),
            id: self.encode(surface),
        }
    }

    pub fn decode(&self, id: u32) -> Option<&str> {
        self.surfaces.get(id as usize).map(|s| s.as_str())
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.index.contains_key(surface)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_string(path, &self.to_text())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.surfaces.iter().enumerate() {
            let _ = writeln!(out, "{s}\t{i}");
        }
        out
    }

    pub fn load(path: &Path) -> Result<Vocabulary> {
        Self::from_text(&read_to_string(path)?)
    }

    pub fn from_text(text: &str) -> Result<Vocabulary> {
        let mut surfaces = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let (surface, id) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected surface<TAB>id"))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad id: {id}")))?;
            if id != i {
                return Err(Error::parse(lineno, format!("ids not dense: got {id}")));
            }
            surfaces.push(surface.to_string());
        }
        for (i, want) in RESERVED.iter().enumerate() {
            if surfaces.get(i).map(|s| s.as_str()) != Some(*want) {
                return Err(Error::InvalidInput(format!(
                    "vocabulary must reserve id {i} for {want}"
                )));
            }
        }
        Ok(Vocabulary::from_surfaces(surfaces))
    }
}

/// Build a vocabulary over a corpus at the requested level. `size` is the
/// total size including reserved entries (natural default 20000, coarse
/// default 10000).
pub fn build_vocabulary(corpus: &[Dialogue], size: usize, level: Level) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    match level {
        Level::Natural => {
            let tokens = corpus
                .iter()
                .flat_map(|d| d.utterances.iter())
                .flat_map(|u| u.tokens.iter())
                .map(|s| s.as_str());
            Vocabulary::build(tokens, size)
        }
        Level::Coarse => {
            let mut tokens = Vec::new();
            for d in corpus {
                let coarse = d.coarse.as_ref().ok_or_else(|| {
                    Error::InvalidInput("corpus has no coarse sequences".into())
                })?;
                for c in coarse {
                    tokens.extend(c.tokens.iter().map(|s| s.as_str()));
                }
            }
            Vocabulary::build(tokens.into_iter(), size)
        }
    }
}

/// A dialogue encoded to vocabulary ids, one id sequence per utterance
/// (and per coarse sequence when aligned). Each sequence carries a
/// terminal [`EOT_ID`] when `append_eot` is set, which is how training
/// and generation model utterance lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDialogue {
    pub natural: Vec<Vec<u32>>,
    pub coarse: Option<Vec<Vec<u32>>>,
}

impl EncodedDialogue {
    pub fn natural_token_count(&self) -> usize {
        self.natural.iter().map(|u| u.len()).sum()
    }

    pub fn coarse_token_count(&self) -> usize {
        self.coarse
            .as_ref()
            .map(|c| c.iter().map(|z| z.len()).sum())
            .unwrap_or(0)
    }
}

pub fn encode_dialogue(
    dialogue: &Dialogue,
    natural_vocab: &Vocabulary,
    coarse_vocab: Option<&Vocabulary>,
    append_eot: bool,
) -> EncodedDialogue {
    let encode_seq = |tokens: &[String], vocab: &Vocabulary| -> Vec<u32> {
        let mut ids: Vec<u32> = tokens.iter().map(|t| vocab.encode(t)).collect();
        if append_eot {
            ids.push(EOT_ID);
        }
        ids
    };
    let natural = dialogue
        .utterances
        .iter()
        .map(|u| encode_seq(&u.tokens, natural_vocab))
        .collect();
    let coarse = match (&dialogue.coarse, coarse_vocab) {
        (Some(coarse), Some(vocab)) => Some(
            coarse
                .iter()
                .map(|c| encode_seq(&c.tokens, vocab))
                .collect(),
        ),
        _ => None,
    };
    EncodedDialogue { natural, coarse }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_collapse_and_order() {
        let u = preprocess_utterance("hello   world", Mode::Ubuntu).unwrap();
        assert_eq!(u.tokens, vec!["hello", "world"]);
        let u = preprocess_utterance("a b a", Mode::Ubuntu).unwrap();
        assert_eq!(u.tokens, vec!["a", "b", "a"]);
    }

    #[test]
    fn empty_utterance_rejected() {
        assert!(preprocess_utterance("   ", Mode::Ubuntu).is_err());
    }

    #[test]
    fn twitter_tagger_view_substitutions() {
        let u = preprocess_utterance("see http://x.io at 10 <3", Mode::Twitter).unwrap();
        assert_eq!(u.tokens, vec!["see", "http://x.io", "at", "10", "<3"]);
        assert_eq!(u.tagger_tokens, vec!["see", "somewhere", "at", "some", "love"]);
        // ubuntu mode leaves the view untouched
        let u = preprocess_utterance("see http://x.io at 10", Mode::Ubuntu).unwrap();
        assert_eq!(u.tagger_tokens, u.tokens);
    }

    #[test]
    fn speaker_label_detected() {
        let u = preprocess_utterance("<first_speaker> hi there", Mode::Twitter).unwrap();
        assert_eq!(u.speaker.as_deref(), Some("<first_speaker>"));
        assert_eq!(u.tokens.len(), 3);
    }

    #[test]
    fn dialogue_line_split() {
        let groups = split_dialogue_line("hi __eot__ hello __eot__", 1).unwrap();
        assert_eq!(groups, vec![vec!["hi".to_string()], vec!["hello".to_string()]]);
        assert!(split_dialogue_line("", 3).is_err());
        assert!(split_dialogue_line("__eot__ hi", 4).is_err());
    }

    #[test]
    fn vocabulary_frequency_cutoff_and_ties() {
        // {a x3, b x2, c x1}, room for 2 content surfaces
        let toks = ["a", "a", "a", "b", "b", "c"];
        let v = Vocabulary::build(toks.iter().copied(), RESERVED.len() + 2).unwrap();
        assert!(v.contains("a") && v.contains("b"));
        assert_eq!(v.encode("c"), UNK_ID);
        assert_eq!(v.encode("a"), 3);
        assert_eq!(v.encode("b"), 4);
    }

    #[test]
    fn vocabulary_tie_break_is_lexicographic() {
        // brute-force oracle over a 10-token fixture: counts b=3, a=3, d=2, c=2
        let toks = ["b", "a", "d", "c", "b", "a", "d", "c", "b", "a"];
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in &toks {
            *counts.entry(t).or_default() += 1;
        }
        let mut oracle: Vec<(&str, usize)> = counts.into_iter().collect();
        oracle.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        let keep: Vec<&str> = oracle.iter().take(3).map(|(s, _)| *s).collect();
        assert_eq!(keep, vec!["a", "b", "c"]);

        let v = Vocabulary::build(toks.iter().copied(), RESERVED.len() + 3).unwrap();
        for s in keep {
            assert!(v.contains(s));
        }
        assert_eq!(v.encode("d"), UNK_ID);
    }

    #[test]
    fn vocabulary_determinism_and_unknown_closure() {
        let toks = ["x", "y", "z", "y", "x", "x"];
        let v1 = Vocabulary::build(toks.iter().copied(), RESERVED.len() + 2).unwrap();
        let v2 = Vocabulary::build(toks.iter().copied(), RESERVED.len() + 2).unwrap();
        assert_eq!(v1, v2);
        for id in 0..v1.size() as u32 {
            let surface = v1.decode(id).unwrap();
            assert_eq!(v1.encode(surface), id);
        }
        assert_eq!(v1.encode("never-seen"), UNK_ID);
    }

    #[test]
    fn vocabulary_too_small_rejected() {
        assert!(Vocabulary::build(["a"].iter().copied(), RESERVED.len()).is_err());
    }

    #[test]
    fn corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        std::fs::write(&path, "hi there __eot__ hello __eot__\nok __eot__\n").unwrap();
        let dialogues = load_corpus(&path).unwrap();
        assert_eq!(dialogues.len(), 2);
        assert_eq!(dialogues[0].utterances.len(), 2);

        let out = dir.path().join("d2.txt");
        save_corpus(&dialogues, &out).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            std::fs::read_to_string(&out).unwrap()
        );
        let reloaded = load_corpus(&out).unwrap();
        assert_eq!(reloaded, dialogues);
    }

    #[test]
    fn aligned_coarse_mismatch_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("d.txt");
        let c = dir.path().join("c.txt");
        std::fs::write(&d, "a __eot__ b __eot__\nx __eot__\n").unwrap();
        std::fs::write(&c, "t1 __eot__ t2 __eot__\nu1 __eot__ u2 __eot__\n").unwrap();
        let err = load_aligned(&d, &c).unwrap_err();
        match err {
            Error::Alignment { line, .. } => assert_eq!(line, 2),
            other => panic!("expected alignment error, got {other:?}"),
        }
    }

    #[test]
    fn encode_appends_eot() {
        let d = Dialogue {
            utterances: vec![Utterance {
                tokens: vec!["a".into(), "q".into()],
                tagger_tokens: vec!["a".into(), "q".into()],
                speaker: None,
            }],
            coarse: None,
        };
        let v = Vocabulary::build(["a"].iter().copied(), RESERVED.len() + 1).unwrap();
        let e = encode_dialogue(&d, &v, None, true);
        assert_eq!(e.natural, vec![vec![3, UNK_ID, EOT_ID]]);
        let e = encode_dialogue(&d, &v, None, false);
        assert_eq!(e.natural, vec![vec![3, UNK_ID]]);
    }
}

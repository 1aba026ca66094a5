//! Extraction resource files: stop words, the activity and entity
//! dictionaries, the terminal command list, and the tagger lexicon.
//!
//! Formats: stop words and commands one surface per line; activity map
//! `surface<TAB>activity_token`; entity map `surface[ surface2]<TAB>entity_token`
//! (keys are one or two words); lexicon `surface<TAB>TAG`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::corpus::Mode;
use crate::error::{Error, Result};

const BUNDLED_STOPWORDS_UBUNTU: &str = include_str!("../../resources/stopwords_ubuntu.txt");
const BUNDLED_STOPWORDS_TWITTER: &str = include_str!("../../resources/stopwords_twitter.txt");
const BUNDLED_ACTIVITIES: &str = include_str!("../../resources/activities.tsv");
const BUNDLED_ENTITIES: &str = include_str!("../../resources/entities.tsv");
const BUNDLED_COMMANDS: &str = include_str!("../../resources/commands.txt");
const BUNDLED_LEXICON: &str = include_str!("../../resources/lexicon.tsv");

#[derive(Debug, Clone)]
pub struct ExtractionResources {
    pub stop_words: HashSet<String>,
    /// verb surface (lowercase) -> activity token, e.g. "works" -> "work_activity"
    pub activity_map: HashMap<String, String>,
    /// one-word entity keys (lowercase) -> entity token
    pub entity_one: HashMap<String, String>,
    /// two-word entity keys (lowercase) -> entity token
    pub entity_two: HashMap<(String, String), String>,
    pub command_set: HashSet<String>,
    /// surface (lowercase) -> most likely PTB-style tag
    pub tagger_lexicon: HashMap<String, String>,
}

impl ExtractionResources {
    /// The dictionaries bundled with the crate.
    pub fn bundled(mode: Mode) -> ExtractionResources {
        let stop = match mode {
            Mode::Ubuntu => BUNDLED_STOPWORDS_UBUNTU,
            Mode::Twitter => BUNDLED_STOPWORDS_TWITTER,
        };
        Self::from_texts(
            stop,
            BUNDLED_ACTIVITIES,
            BUNDLED_ENTITIES,
            BUNDLED_COMMANDS,
            BUNDLED_LEXICON,
        )
        .expect("bundled resources parse")
    }

    /// Load from a resource directory holding `stopwords_ubuntu.txt`,
    /// `stopwords_twitter.txt`, `activities.tsv`, `entities.tsv`,
    /// `commands.txt` and `lexicon.tsv`.
    pub fn from_dir(dir: &Path, mode: Mode) -> Result<ExtractionResources> {
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(Error::MissingResource(path.display().to_string()));
            }
            std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))
        };
        let stop_name = match mode {
            Mode::Ubuntu => "stopwords_ubuntu.txt",
            Mode::Twitter => "stopwords_twitter.txt",
        };
        Self::from_texts(
            &read(stop_name)?,
            &read("activities.tsv")?,
            &read("entities.tsv")?,
            &read("commands.txt")?,
            &read("lexicon.tsv")?,
        )
    }

    pub fn from_texts(
        stopwords: &str,
        activities: &str,
        entities: &str,
        commands: &str,
        lexicon: &str,
    ) -> Result<ExtractionResources> {
        let stop_words = stopwords
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().to_lowercase())
            .collect();
        let command_set = commands
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().to_lowercase())
            .collect();

        let mut activity_map = HashMap::new();
        for (i, line) in activities.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (surface, token) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "activities.tsv: expected surface<TAB>token"))?;
            activity_map.insert(surface.trim().to_lowercase(), token.trim().to_string());
        }

        let mut entity_one = HashMap::new();
        let mut entity_two = HashMap::new();
        for (i, line) in entities.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (key, token) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "entities.tsv: expected key<TAB>token"))?;
            let words: Vec<&str> = key.split_whitespace().collect();
            let token = token.trim().to_string();
            match words.as_slice() {
                [one] => {
                    entity_one.insert(one.to_lowercase(), token);
                }
                [one, two] => {
                    entity_two.insert((one.to_lowercase(), two.to_lowercase()), token);
                }
                _ => {
                    return Err(Error::parse(
                        i + 1,
                        format!("entity key must be one or two words: {key}"),
                    ))
                }
            }
        }

        let mut tagger_lexicon = HashMap::new();
        for (i, line) in lexicon.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (surface, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "lexicon.tsv: expected surface<TAB>tag"))?;
            tagger_lexicon.insert(surface.trim().to_lowercase(), tag.trim().to_string());
        }

        Ok(ExtractionResources {
            stop_words,
            activity_map,
            entity_one,
            entity_two,
            command_set,
            tagger_lexicon,
        })
    }

    pub fn is_entity_word(&self, token_lower: &str) -> bool {
        self.entity_one.contains_key(token_lower)
    }

    pub fn is_command(&self, token_lower: &str) -> bool {
        self.command_set.contains(token_lower)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lists_have_expected_sizes() {
        let r = ExtractionResources::bundled(Mode::Ubuntu);
        assert_eq!(r.command_set.len(), 230);
        // 192 canonical activities (identity entries) plus conjugations
        let canon: HashSet<&str> = r.activity_map.values().map(|v| v.as_str()).collect();
        assert_eq!(canon.len(), 192);
        assert!(r.activity_map.len() > 192);
        assert!(r.stop_words.contains("anybody"));
        assert_eq!(r.activity_map.get("find").unwrap(), "discover_activity");
        assert!(r.is_command("sudo"));
        assert!(r.is_command("apt-get"));

        let tw = ExtractionResources::bundled(Mode::Twitter);
        assert!(tw.stop_words.contains("lol"));
        assert!(tw.stop_words.len() > r.stop_words.len());
    }

    #[test]
    fn missing_resource_dir_errors() {
        let err = ExtractionResources::from_dir(Path::new("/nonexistent"), Mode::Ubuntu);
        assert!(matches!(err, Err(Error::MissingResource(_))));
    }
}

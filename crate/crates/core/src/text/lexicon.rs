use std::collections::HashMap;
use std::path::Path;

use super::TextError;

const PAPER_FIXTURE: &str = include_str!("../../fixtures/concreteness_paper.tsv");

/// Word concreteness ratings on the 1 to 5 scale, keyed by case-folded word.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcretenessLexicon {
    entries: HashMap<String, f64>,
    source: String,
}

impl ConcretenessLexicon {
    /// Builds a lexicon from `(word, rating)` pairs. Later duplicates replace earlier ones.
    pub fn from_entries<S: AsRef<str>>(
        source: impl Into<String>,
        entries: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self, TextError> {
        let mut map = HashMap::new();
        for (word, rating) in entries {
            let word = word.as_ref();
            if !(1.0..=5.0).contains(&rating) {
                return Err(TextError::RatingOutOfRange {
                    word: word.to_string(),
                    rating,
                });
            }
            if map.insert(word.to_lowercase(), rating).is_some() {
                log::warn!("duplicate lexicon entry {word:?}; keeping the last rating");
            }
        }
        Ok(Self {
            entries: map,
            source: source.into(),
        })
    }

    /// Parses the `word\tconcreteness` TSV format (header row required).
    pub fn parse_tsv(source: impl Into<String>, text: &str) -> Result<Self, TextError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header))
                if header.trim_end_matches('\r').split('\t').collect::<Vec<_>>()
                    == ["word", "concreteness"] => {}
            _ => {
                return Err(TextError::LexiconFormat {
                    line: 1,
                    message: "expected header `word\\tconcreteness`".into(),
                })
            }
        }
        let mut entries = Vec::new();
        for (idx, line) in lines {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (word, rating) = line.split_once('\t').ok_or_else(|| TextError::LexiconFormat {
                line: idx + 1,
                message: "expected two tab-separated fields".into(),
            })?;
            let rating: f64 = rating.trim().parse().map_err(|_| TextError::LexiconFormat {
                line: idx + 1,
                message: format!("invalid rating {rating:?}"),
            })?;
            entries.push((word.trim().to_string(), rating));
        }
        Self::from_entries(source, entries)
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path).map_err(|e| TextError::LexiconIo {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_tsv(path.display().to_string(), &text)
    }

    /// The packaged lexicon holding the reference concrete and abstract example words.
    pub fn paper_fixture() -> Self {
        Self::parse_tsv("packaged:concreteness_paper.tsv", PAPER_FIXTURE)
            .expect("packaged lexicon is valid")
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.entries.get(&word.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::TextError;

/// A word surface together with its byte offset into the raw text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub surface: String,
    pub offset: usize,
}

impl Word {
    pub fn end(&self) -> usize {
        self.offset + self.surface.len()
    }
}

/// Segmented text: words, sentence spans over word indices and optional POS tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedText {
    pub raw: String,
    pub sentences: Vec<Range<usize>>,
    pub words: Vec<Word>,
    pub tags: Option<Vec<String>>,
}

impl TokenizedText {
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.surface.as_str()).collect()
    }

    /// Attach tags, one per word.
    pub fn with_tags<S: Into<String>>(
        mut self,
        tags: impl IntoIterator<Item = S>,
    ) -> Result<Self, TextError> {
        let tags: Vec<String> = tags.into_iter().map(Into::into).collect();
        if tags.len() != self.words.len() {
            return Err(TextError::TagLengthMismatch {
                words: self.words.len(),
                tags: tags.len(),
            });
        }
        self.tags = Some(tags);
        Ok(self)
    }

    /// Text of the sentence at `index`, sliced from the raw input.
    pub fn sentence_text(&self, index: usize) -> &str {
        let range = &self.sentences[index];
        let start = self.words[range.start].offset;
        let last = &self.words[range.end - 1];
        let mut end = last.end();
        // Keep trailing punctuation glued to the last word.
        for (i, c) in self.raw[end..].char_indices() {
            if c.is_whitespace() {
                break;
            }
            end = last.end() + i + c.len_utf8();
        }
        &self.raw[start..end]
    }
}

fn is_sentence_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Finds the word inside a whitespace-delimited chunk by trimming punctuation from both ends.
fn trim_punctuation(chunk: &str) -> Option<(usize, &str)> {
    let start = chunk.char_indices().find(|(_, c)| c.is_alphanumeric())?.0;
    let end = chunk
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, c)| i + c.len_utf8())?;
    Some((start, &chunk[start..end]))
}

/// Splits `text` into words and sentences.
///
/// Words are whitespace-delimited chunks with leading and trailing punctuation removed;
/// chunks with no alphanumeric character are not words. A sentence ends at a chunk whose
/// trailing punctuation contains `.`, `!` or `?` (the chunk is followed by whitespace or EOF).
pub fn tokenize(text: &str) -> Result<TokenizedText, TextError> {
    let mut words = Vec::new();
    let mut sentences = Vec::new();
    let mut sentence_start = 0usize;

    for chunk in text.split_whitespace() {
        // split_whitespace yields subslices of `text`
        let chunk_offset = chunk.as_ptr() as usize - text.as_ptr() as usize;

        let terminates = match trim_punctuation(chunk) {
            Some((rel, surface)) => {
                words.push(Word {
                    surface: surface.to_string(),
                    offset: chunk_offset + rel,
                });
                chunk[rel + surface.len()..]
                    .chars()
                    .any(is_sentence_terminator)
            }
            None => chunk.chars().any(is_sentence_terminator),
        };
        if terminates && words.len() > sentence_start {
            sentences.push(sentence_start..words.len());
            sentence_start = words.len();
        }
    }
    if words.is_empty() {
        return Err(TextError::EmptyText);
    }
    if sentence_start < words.len() {
        sentences.push(sentence_start..words.len());
    }
    Ok(TokenizedText {
        raw: text.to_string(),
        sentences,
        words,
        tags: None,
    })
}

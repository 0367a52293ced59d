//! `[PAUSE]` token injection after conjunctions.
//!
//! A prompt is cut after every trigger word (tag `CC` by default). Each chunk before a cut
//! is scored for abstractness and followed by 2, 5 or 10 pause tokens: highly abstract
//! chunks need fewer pauses, concrete or low scoring chunks more. The final chunk never
//! receives pauses.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::text::{concreteness, tokenize, Analyzer, TextError, TokenizedText};

pub const DEFAULT_PAUSE_TOKEN: &str = "[PAUSE]";

/// Cut points calibrated with [`calibrate_thresholds`] on `fixtures/pause_corpus.txt`.
pub const DEFAULT_LOW_CUT: f64 = 0.061_899_843_600_139_864;
pub const DEFAULT_HIGH_CUT: f64 = 0.144_224_985_110_579_77;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PauseError {
    #[error("pause token {0:?} already occurs in the input text")]
    TokenCollision(String),
    #[error("low cut {low} must be below high cut {high}")]
    InvalidThresholds { low: f64, high: f64 },
    #[error("pause counts must be positive")]
    InvalidCounts,
    #[error("pause token must be non-blank and contain no whitespace")]
    InvalidToken,
    #[error("threshold calibration failed: {0}")]
    CalibrationInsufficient(CalibrationFailure),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationFailure {
    #[error("only {found} scorable texts, need at least {needed}")]
    TooFew { found: usize, needed: usize },
    #[error("scores have zero spread")]
    DegenerateSpread,
}

/// Which chunk score drives the pause count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauseMeasure {
    #[default]
    Abstractness,
    Concreteness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PauseCounts {
    pub low: usize,
    pub mid: usize,
    pub high: usize,
}

impl Default for PauseCounts {
    fn default() -> Self {
        Self {
            low: 10,
            mid: 5,
            high: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PauseConfig {
    pub trigger_tags: BTreeSet<String>,
    pub extra_trigger_words: BTreeSet<String>,
    pub low_cut: f64,
    pub high_cut: f64,
    pub counts: PauseCounts,
    pub token: String,
    pub measure: PauseMeasure,
}

impl Default for PauseConfig {
    fn default() -> Self {
        Self {
            trigger_tags: BTreeSet::from(["CC".to_string()]),
            extra_trigger_words: BTreeSet::new(),
            low_cut: DEFAULT_LOW_CUT,
            high_cut: DEFAULT_HIGH_CUT,
            counts: PauseCounts::default(),
            token: DEFAULT_PAUSE_TOKEN.to_string(),
            measure: PauseMeasure::Abstractness,
        }
    }
}

impl PauseConfig {
    pub fn validate(&self) -> Result<(), PauseError> {
        if !(self.low_cut < self.high_cut) {
            return Err(PauseError::InvalidThresholds {
                low: self.low_cut,
                high: self.high_cut,
            });
        }
        let c = self.counts;
        if c.low == 0 || c.mid == 0 || c.high == 0 {
            return Err(PauseError::InvalidCounts);
        }
        if self.token.trim().is_empty() || self.token.chars().any(char::is_whitespace) {
            return Err(PauseError::InvalidToken);
        }
        Ok(())
    }

    pub fn with_cuts(mut self, low_cut: f64, high_cut: f64) -> Self {
        self.low_cut = low_cut;
        self.high_cut = high_cut;
        self
    }

    fn separator(&self) -> String {
        format!(" {}", self.token)
    }
}

/// Word indices after which pauses are inserted, in increasing order.
pub fn find_injection_points(t: &TokenizedText, cfg: &PauseConfig) -> Vec<usize> {
    t.words
        .iter()
        .enumerate()
        .filter(|(i, w)| {
            let tag_hit = t
                .tags
                .as_ref()
                .is_some_and(|tags| cfg.trigger_tags.contains(&tags[*i]));
            tag_hit || cfg.extra_trigger_words.contains(&w.surface.to_lowercase())
        })
        .map(|(i, _)| i)
        .collect()
}

/// 2 above the high cut, 10 below the low cut, 5 otherwise.
pub fn pause_count_for_chunk(value: f64, cfg: &PauseConfig) -> usize {
    if value > cfg.high_cut {
        cfg.counts.high
    } else if value < cfg.low_cut {
        cfg.counts.low
    } else {
        cfg.counts.mid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Exact slice of the original text; segments concatenate back to it.
    pub text: String,
    /// Chunk score under the configured measure, `None` if not scorable.
    pub score: Option<f64>,
    pub pause_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauseAnnotatedPrompt {
    pub original: String,
    pub segments: Vec<Segment>,
    pub rendered: String,
}

impl PauseAnnotatedPrompt {
    pub fn injection_groups(&self) -> usize {
        self.segments.iter().filter(|s| s.pause_count > 0).count()
    }
}

/// Removes every inserted `" " + token`.
pub fn strip_pauses(rendered: &str, token: &str) -> String {
    rendered.replace(&format!(" {token}"), "")
}

/// Byte offset just past the whitespace-delimited chunk holding `word`.
fn chunk_end(raw: &str, word_end: usize) -> usize {
    raw[word_end..]
        .find(char::is_whitespace)
        .map_or(raw.len(), |i| word_end + i)
}

fn chunk_score(
    analyzer: &Analyzer<'_>,
    whole: &TokenizedText,
    words: std::ops::Range<usize>,
    text: &str,
    measure: PauseMeasure,
) -> Result<Option<f64>, PauseError> {
    if words.is_empty() {
        return Ok(None);
    }
    let mut sub = tokenize(text)?;
    debug_assert_eq!(sub.words.len(), words.len());
    // reuse tags assigned with full-sentence context
    if let Some(tags) = &whole.tags {
        sub.tags = Some(tags[words].to_vec());
    }
    Ok(match measure {
        PauseMeasure::Abstractness => analyzer.abstractness_of(&sub)?,
        PauseMeasure::Concreteness => concreteness(&sub, analyzer.lexicon).score,
    })
}

pub fn inject_pauses(
    text: &str,
    cfg: &PauseConfig,
    analyzer: &Analyzer<'_>,
) -> Result<PauseAnnotatedPrompt, PauseError> {
    cfg.validate()?;
    if text.contains(&cfg.token) {
        return Err(PauseError::TokenCollision(cfg.token.clone()));
    }
    let t = analyzer.tokenize_tagged(text)?;
    let points = find_injection_points(&t, cfg);
    let separator = cfg.separator();

    let mut segments = Vec::with_capacity(points.len() + 1);
    let mut rendered = String::with_capacity(text.len() + points.len() * 10 * separator.len());
    let mut byte_start = 0usize;
    let mut word_start = 0usize;
    for &p in &points {
        let byte_end = chunk_end(text, t.words[p].end());
        let slice = &text[byte_start..byte_end];
        let score = chunk_score(analyzer, &t, word_start..p + 1, slice, cfg.measure)?;
        let pause_count = match score {
            Some(v) => pause_count_for_chunk(v, cfg),
            None => {
                log::warn!("chunk {slice:?} has no score; using the mid pause count");
                cfg.counts.mid
            }
        };
        rendered.push_str(slice);
        for _ in 0..pause_count {
            rendered.push_str(&separator);
        }
        segments.push(Segment {
            text: slice.to_string(),
            score,
            pause_count,
        });
        byte_start = byte_end;
        word_start = p + 1;
    }
    let tail = &text[byte_start..];
    let score = chunk_score(analyzer, &t, word_start..t.words.len(), tail, cfg.measure)?;
    rendered.push_str(tail);
    segments.push(Segment {
        text: tail.to_string(),
        score,
        pause_count: 0,
    });

    Ok(PauseAnnotatedPrompt {
        original: text.to_string(),
        segments,
        rendered,
    })
}

/// Mean minus and plus one population standard deviation.
pub fn cuts_from_values(values: &[f64]) -> Result<(f64, f64), PauseError> {
    if values.is_empty() {
        return Err(PauseError::CalibrationInsufficient(
            CalibrationFailure::TooFew {
                found: 0,
                needed: 1,
            },
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    // zero spread up to rounding in the mean
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(PauseError::CalibrationInsufficient(
            CalibrationFailure::DegenerateSpread,
        ));
    }
    Ok((mean - sd, mean + sd))
}

pub const MIN_CALIBRATION_TEXTS: usize = 10;

/// Derives `(low_cut, high_cut)` from the abstractness distribution of `corpus`.
pub fn calibrate_thresholds<S: AsRef<str>>(
    corpus: &[S],
    analyzer: &Analyzer<'_>,
    measure: PauseMeasure,
) -> Result<(f64, f64), PauseError> {
    let mut values = Vec::with_capacity(corpus.len());
    for text in corpus {
        let Ok(t) = analyzer.tokenize_tagged(text.as_ref()) else {
            continue;
        };
        let v = match measure {
            PauseMeasure::Abstractness => analyzer.abstractness_of(&t)?,
            PauseMeasure::Concreteness => concreteness(&t, analyzer.lexicon).score,
        };
        values.extend(v);
    }
    if values.len() < MIN_CALIBRATION_TEXTS {
        return Err(PauseError::CalibrationInsufficient(
            CalibrationFailure::TooFew {
                found: values.len(),
                needed: MIN_CALIBRATION_TEXTS,
            },
        ));
    }
    cuts_from_values(&values)
}

//! Tokenization, tagging and the readability, formality, concreteness and abstractness scores.

mod lexicon;
mod scores;
mod syllables;
mod tagger;
mod tokenize;

pub use lexicon::ConcretenessLexicon;
pub use scores::{
    abstractness, bin_score, concreteness, formality, formality_from_tags, fres_from_counts,
    profile, readability_fres, AbstractnessParams, Analyzer, Aspect, Bin, Binned, Concreteness,
    FrequencyBase, LinguisticProfile, PosClass, ProfileBins,
};
pub use syllables::count_syllables;
pub use tagger::{PosTagger, RuleTagger};
pub use tokenize::{tokenize, TokenizedText, Word};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TextError {
    #[error("text contains no words")]
    EmptyText,
    #[error("syllables undefined for {0:?}: no alphabetic characters")]
    SyllableUndefined(String),
    #[error("POS tags are required")]
    TagsRequired,
    #[error("{tags} tags supplied for {words} words")]
    TagLengthMismatch { words: usize, tags: usize },
    #[error("word count is zero")]
    DivisionByZeroLength,
    #[error("abstractness weights must be non-negative with a positive sum (got {delta1}, {delta2})")]
    InvalidAbstractnessParams { delta1: f64, delta2: f64 },
    #[error("score is not finite: {0}")]
    NonFiniteScore(f64),
    #[error("rating {rating} for {word:?} is outside [1, 5]")]
    RatingOutOfRange { word: String, rating: f64 },
    #[error("lexicon line {line}: {message}")]
    LexiconFormat { line: usize, message: String },
    #[error("cannot read lexicon {path}: {message}")]
    LexiconIo { path: String, message: String },
}

use serde::{Deserialize, Serialize};

use super::lexicon::ConcretenessLexicon;
use super::syllables::count_syllables;
use super::tagger::PosTagger;
use super::tokenize::{tokenize, TokenizedText};
use super::TextError;

/// Flesch Reading Ease over the tokenized text. Not clamped.
///
/// Words without any letter (numerals) count as one syllable.
pub fn readability_fres(t: &TokenizedText) -> Result<f64, TextError> {
    if t.words.is_empty() || t.sentences.is_empty() {
        return Err(TextError::EmptyText);
    }
    let syllables: usize = t
        .words
        .iter()
        .map(|w| count_syllables(&w.surface).unwrap_or(1))
        .sum();
    Ok(fres_from_counts(t.word_count(), t.sentence_count(), syllables))
}

pub fn fres_from_counts(words: usize, sentences: usize, syllables: usize) -> f64 {
    let words = words as f64;
    206.835 - 1.015 * (words / sentences as f64) - 84.6 * (syllables as f64 / words)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PosClass {
    Noun,
    Adjective,
    Preposition,
    Article,
    Pronoun,
    Verb,
    Adverb,
    Interjection,
}

impl PosClass {
    pub fn of_tag(tag: &str) -> Option<Self> {
        use PosClass::*;
        Some(match tag {
            "NN" | "NNS" | "NNP" | "NNPS" => Noun,
            "JJ" | "JJR" | "JJS" => Adjective,
            "IN" | "TO" => Preposition,
            "DT" => Article,
            "PRP" | "PRP$" | "WP" | "WP$" => Pronoun,
            "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" | "MD" => Verb,
            "RB" | "RBR" | "RBS" | "WRB" => Adverb,
            "UH" => Interjection,
            _ => return None,
        })
    }

    /// +1 for the classes that raise formality, -1 for those that lower it.
    fn sign(self) -> f64 {
        use PosClass::*;
        match self {
            Noun | Adjective | Preposition | Article => 1.0,
            Pronoun | Verb | Adverb | Interjection => -1.0,
        }
    }
}

/// How part-of-speech frequencies enter the formality formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyBase {
    /// Raw occurrence counts.
    #[default]
    Count,
    /// Percentage of tagged words; keeps the score within [0, 100] for any text length.
    Percent,
}

/// Heylighen-style formality: (noun + adj + prep + article - pronoun - verb - adverb - interjection + 100) / 2.
pub fn formality(t: &TokenizedText, base: FrequencyBase) -> Result<f64, TextError> {
    let tags = t.tags.as_ref().ok_or(TextError::TagsRequired)?;
    formality_from_tags(tags, base)
}

pub fn formality_from_tags<S: AsRef<str>>(
    tags: &[S],
    base: FrequencyBase,
) -> Result<f64, TextError> {
    if tags.is_empty() {
        return Err(TextError::EmptyText);
    }
    let net: f64 = tags
        .iter()
        .filter_map(|t| PosClass::of_tag(t.as_ref()))
        .map(PosClass::sign)
        .sum();
    let net = match base {
        FrequencyBase::Count => net,
        FrequencyBase::Percent => 100.0 * net / tags.len() as f64,
    };
    Ok((net + 100.0) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concreteness {
    /// Mean rating over in-lexicon words; `None` when every word is out of vocabulary.
    pub score: Option<f64>,
    pub covered_fraction: f64,
}

pub fn concreteness(t: &TokenizedText, lex: &ConcretenessLexicon) -> Concreteness {
    let ratings: Vec<f64> = t.words.iter().filter_map(|w| lex.get(&w.surface)).collect();
    let total = t.words.len();
    let covered_fraction = if total == 0 {
        0.0
    } else {
        ratings.len() as f64 / total as f64
    };
    let score = if ratings.is_empty() {
        None
    } else {
        Some(ratings.iter().sum::<f64>() / ratings.len() as f64)
    };
    Concreteness {
        score,
        covered_fraction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstractnessParams {
    delta1: f64,
    delta2: f64,
    normalize: bool,
}

impl AbstractnessParams {
    pub fn new(delta1: f64, delta2: f64, normalize: bool) -> Result<Self, TextError> {
        let valid = delta1.is_finite() && delta2.is_finite() && delta1 >= 0.0 && delta2 >= 0.0;
        if !valid || delta1 + delta2 <= 0.0 {
            return Err(TextError::InvalidAbstractnessParams { delta1, delta2 });
        }
        Ok(Self {
            delta1,
            delta2,
            normalize,
        })
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }
}

impl Default for AbstractnessParams {
    fn default() -> Self {
        Self {
            delta1: 1.0,
            delta2: 1.0,
            normalize: true,
        }
    }
}

/// `(delta1 * F + delta2 * C) / word_count`.
///
/// In normalized mode F is mapped through `F / 100` and C through `(C - 1) / 4`, each clamped
/// to [0, 1].
pub fn abstractness(
    formality: f64,
    concreteness: f64,
    word_count: usize,
    p: &AbstractnessParams,
) -> Result<f64, TextError> {
    if word_count == 0 {
        return Err(TextError::DivisionByZeroLength);
    }
    let (f, c) = if p.normalize {
        (
            (formality / 100.0).clamp(0.0, 1.0),
            ((concreteness - 1.0) / 4.0).clamp(0.0, 1.0),
        )
    } else {
        (formality.max(0.0), concreteness.max(0.0))
    };
    Ok((p.delta1 * f + p.delta2 * c) / word_count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aspect {
    Readability,
    Formality,
    Concreteness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bin {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binned {
    pub bin: Bin,
    /// Set when the value fell outside the aspect's outer range and was clamped.
    pub out_of_range: bool,
}

impl Aspect {
    /// (outer floor, low ceiling, mid ceiling, outer ceiling). Values at a ceiling belong to
    /// the lower bin.
    pub fn ranges(self) -> (f64, f64, f64, f64) {
        match self {
            Aspect::Readability => (0.0, 13.68, 52.42, 100.0),
            Aspect::Formality => (0.0, 45.65, 70.0, 100.0),
            Aspect::Concreteness => (1.0, 3.03, 3.47, 5.0),
        }
    }
}

pub fn bin_score(aspect: Aspect, value: f64) -> Result<Binned, TextError> {
    if !value.is_finite() {
        return Err(TextError::NonFiniteScore(value));
    }
    let (floor, low, mid, ceil) = aspect.ranges();
    let out_of_range = value < floor || value > ceil;
    let bin = if value <= low {
        Bin::Low
    } else if value <= mid {
        Bin::Mid
    } else {
        Bin::High
    };
    if out_of_range {
        log::warn!("{aspect:?} value {value} outside [{floor}, {ceil}]; clamped to {bin:?}");
    }
    Ok(Binned { bin, out_of_range })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileBins {
    pub readability: Binned,
    pub formality: Binned,
    pub concreteness: Option<Binned>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticProfile {
    pub readability: f64,
    pub formality: f64,
    pub concreteness: Option<f64>,
    pub abstractness: Option<f64>,
    pub bins: ProfileBins,
    pub covered_word_fraction: f64,
    pub word_count: usize,
}

/// Shared inputs for the scoring functions.
pub struct Analyzer<'a> {
    pub lexicon: &'a ConcretenessLexicon,
    pub tagger: &'a dyn PosTagger,
    pub abstractness: AbstractnessParams,
    pub frequency_base: FrequencyBase,
}

impl<'a> Analyzer<'a> {
    pub fn new(lexicon: &'a ConcretenessLexicon, tagger: &'a dyn PosTagger) -> Self {
        Self {
            lexicon,
            tagger,
            abstractness: AbstractnessParams::default(),
            frequency_base: FrequencyBase::default(),
        }
    }

    pub fn tokenize_tagged(&self, text: &str) -> Result<TokenizedText, TextError> {
        let t = tokenize(text)?;
        let tags = self.tagger.tag(&t.surfaces());
        t.with_tags(tags)
    }

    pub fn profile(&self, text: &str) -> Result<LinguisticProfile, TextError> {
        let t = self.tokenize_tagged(text)?;
        self.profile_tokens(&t)
    }

    pub fn profile_tokens(&self, t: &TokenizedText) -> Result<LinguisticProfile, TextError> {
        let readability = readability_fres(t)?;
        let formality = formality(t, self.frequency_base)?;
        let conc = concreteness(t, self.lexicon);
        let abstractness = match conc.score {
            Some(c) => Some(abstractness(
                formality,
                c,
                t.word_count(),
                &self.abstractness,
            )?),
            None => None,
        };
        let bins = ProfileBins {
            readability: bin_score(Aspect::Readability, readability)?,
            formality: bin_score(Aspect::Formality, formality)?,
            concreteness: conc
                .score
                .map(|c| bin_score(Aspect::Concreteness, c))
                .transpose()?,
        };
        Ok(LinguisticProfile {
            readability,
            formality,
            concreteness: conc.score,
            abstractness,
            bins,
            covered_word_fraction: conc.covered_fraction,
            word_count: t.word_count(),
        })
    }

    /// Abstractness of a span of text, or `None` when no word is in the lexicon.
    pub fn abstractness_of(&self, t: &TokenizedText) -> Result<Option<f64>, TextError> {
        let conc = concreteness(t, self.lexicon);
        let Some(c) = conc.score else {
            return Ok(None);
        };
        let f = formality(t, self.frequency_base)?;
        abstractness(f, c, t.word_count(), &self.abstractness).map(Some)
    }
}

/// Convenience wrapper over [`Analyzer::profile`].
pub fn profile(
    text: &str,
    lexicon: &ConcretenessLexicon,
    tagger: &dyn PosTagger,
    params: AbstractnessParams,
) -> Result<LinguisticProfile, TextError> {
    let mut analyzer = Analyzer::new(lexicon, tagger);
    analyzer.abstractness = params;
    analyzer.profile(text)
}

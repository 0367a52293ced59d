//! Factuality check of generated text against retrieved evidence.
//!
//! Evidence documents are split into sentences and ranked by term-frequency cosine against
//! the prompt. Each generated sentence is then scored by an entailment model against every
//! top evidence sentence, and labelled by its strongest support or contradiction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::nli::NliProvider;
use crate::provider::{bounded_map, endpoint, ProviderError, SharedTransport};
use crate::text::tokenize;
use crate::topic::topic_words;

pub const SEARCH_PATH: &str = "/v1/search";
pub const SEARCH_KEY_ENV: &str = "SCA_SEARCH_KEY";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HallucinationError {
    #[error("evidence retrieval failed: {0}")]
    Retrieval(ProviderError),
    #[error("no evidence found")]
    EmptyEvidence,
    #[error("generated text has no sentences")]
    NoSentences,
    #[error("invalid evidence configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvidenceConfig {
    pub results_n: usize,
    pub sentences_k: usize,
    pub nli_threshold: f64,
    pub concurrency: usize,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            results_n: 20,
            sentences_k: 20,
            nli_threshold: 0.5,
            concurrency: 4,
        }
    }
}

impl EvidenceConfig {
    pub fn validate(&self) -> Result<(), HallucinationError> {
        if self.results_n == 0 || self.sentences_k == 0 {
            return Err(HallucinationError::InvalidConfig(
                "results_n and sentences_k must be at least 1".into(),
            ));
        }
        if !(self.nli_threshold > 0.0 && self.nli_threshold < 1.0) {
            return Err(HallucinationError::InvalidConfig(format!(
                "nli_threshold {} outside (0, 1)",
                self.nli_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub id: String,
    pub text: String,
}

pub trait SearchProvider: Send + Sync {
    fn search(&self, query: &str, n: usize) -> Result<Vec<SearchResult>, ProviderError>;
}

/// Every file of a directory is one result; files are ranked by name.
#[derive(Debug, Clone)]
pub struct FixtureSearch {
    dir: PathBuf,
}

impl FixtureSearch {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl SearchProvider for FixtureSearch {
    fn search(&self, _query: &str, n: usize) -> Result<Vec<SearchResult>, ProviderError> {
        let fail = |e: std::io::Error| ProviderError::Fixture(format!("{}: {e}", self.dir.display()));
        let mut names = Vec::new();
        for entry in std::fs::read_dir(&self.dir).map_err(fail)? {
            let entry = entry.map_err(fail)?;
            if entry.file_type().map_err(fail)?.is_file() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        names
            .into_iter()
            .take(n)
            .map(|name| {
                let text = std::fs::read_to_string(self.dir.join(&name)).map_err(fail)?;
                Ok(SearchResult { id: name, text })
            })
            .collect()
    }
}

/// Search over HTTP: `POST /v1/search` with `{query, n}` answering `{results: [{id, text}]}`.
pub struct HttpSearch {
    transport: SharedTransport,
    url: String,
}

impl HttpSearch {
    /// The transport is expected to carry the bearer key read from [`SEARCH_KEY_ENV`].
    pub fn new(transport: SharedTransport, base_url: &str) -> Self {
        Self {
            transport,
            url: endpoint(base_url, SEARCH_PATH),
        }
    }
}

#[derive(Deserialize)]
struct SearchResponse {
    results: Vec<SearchResult>,
}

impl SearchProvider for HttpSearch {
    fn search(&self, query: &str, n: usize) -> Result<Vec<SearchResult>, ProviderError> {
        let resp = self
            .transport
            .post_json(&self.url, &json!({ "query": query, "n": n }))?;
        let parsed: SearchResponse = serde_json::from_value(resp)
            .map_err(|e| ProviderError::Schema(format!("search response: {e}")))?;
        Ok(parsed.results.into_iter().take(n).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSentence {
    pub source_id: String,
    /// Rank of the source document in the search results.
    pub rank: usize,
    /// Sentence position within its document.
    pub position: usize,
    pub text: String,
    pub similarity: Option<f64>,
}

/// Searches for `prompt` and splits the top `results_n` documents into sentences.
pub fn retrieve_evidence(
    prompt: &str,
    search: &dyn SearchProvider,
    cfg: &EvidenceConfig,
) -> Result<Vec<EvidenceSentence>, HallucinationError> {
    let results = search
        .search(prompt, cfg.results_n)
        .map_err(HallucinationError::Retrieval)?;
    let mut out = Vec::new();
    for (rank, doc) in results.iter().take(cfg.results_n).enumerate() {
        let Ok(t) = tokenize(&doc.text) else {
            continue;
        };
        for position in 0..t.sentence_count() {
            out.push(EvidenceSentence {
                source_id: doc.id.clone(),
                rank,
                position,
                text: t.sentence_text(position).trim().to_string(),
                similarity: None,
            });
        }
    }
    if out.is_empty() {
        return Err(HallucinationError::EmptyEvidence);
    }
    Ok(out)
}

fn tf_bag(text: &str) -> BTreeMap<String, f64> {
    let mut bag = BTreeMap::new();
    for w in topic_words(text) {
        *bag.entry(w).or_insert(0.0) += 1.0;
    }
    bag
}

/// Cosine between term-frequency bags of two texts after case folding and stopword removal.
pub fn tf_cosine(a: &str, b: &str) -> f64 {
    let (a, b) = (tf_bag(a), tf_bag(b));
    // fold from +0.0; an empty f64 sum is -0.0
    let dot = a
        .iter()
        .filter_map(|(w, x)| b.get(w).map(|y| x * y))
        .fold(0.0, |acc, v| acc + v);
    let na: f64 = a.values().map(|x| x * x).sum();
    let nb: f64 = b.values().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb).sqrt()
}

/// Orders sentences by similarity to the prompt and keeps the top `sentences_k`.
pub fn rank_sentences(
    prompt: &str,
    sentences: &[EvidenceSentence],
    cfg: &EvidenceConfig,
) -> Vec<EvidenceSentence> {
    let mut scored: Vec<EvidenceSentence> = sentences
        .iter()
        .map(|s| EvidenceSentence {
            similarity: Some(tf_cosine(prompt, &s.text)),
            ..s.clone()
        })
        .collect();
    scored.sort_by(|a, b| {
        b.similarity
            .unwrap()
            .total_cmp(&a.similarity.unwrap())
            .then(a.rank.cmp(&b.rank))
            .then(a.position.cmp(&b.position))
    });
    scored.truncate(cfg.sentences_k);
    scored
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Support,
    Refute,
    #[serde(rename = "NEI")]
    Nei,
}

/// The decision rule applied to the strongest entailment and contradiction.
pub fn label_for(best_entail: f64, best_contradict: f64, threshold: f64) -> Label {
    if best_entail >= threshold && best_entail > best_contradict {
        Label::Support
    } else if best_contradict >= threshold && best_contradict > best_entail {
        Label::Refute
    } else {
        Label::Nei
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceVerdict {
    pub sentence: String,
    pub label: Label,
    pub best_entail: f64,
    pub best_contradict: f64,
    pub best_evidence_id: Option<String>,
    /// Set when every entailment call failed; the label is then NEI.
    pub undetermined: bool,
    pub errors: Vec<String>,
}

/// Scores `sentence` against each evidence sentence and applies [`label_for`].
pub fn classify_sentence(
    sentence: &str,
    evidence: &[EvidenceSentence],
    nli: &dyn NliProvider,
    cfg: &EvidenceConfig,
) -> SentenceVerdict {
    let results = bounded_map(evidence, cfg.concurrency, |e| nli.score(&e.text, sentence));
    let mut best_e = (0.0, None::<usize>);
    let mut best_c = (0.0, None::<usize>);
    let mut errors = Vec::new();
    let mut ok = 0;
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(s) => {
                ok += 1;
                if best_e.1.is_none() || s.entail > best_e.0 {
                    best_e = (s.entail, Some(i));
                }
                if best_c.1.is_none() || s.contradict > best_c.0 {
                    best_c = (s.contradict, Some(i));
                }
            }
            Err(e) => errors.push(format!("{}: {e}", evidence[i].source_id)),
        }
    }
    let label = label_for(best_e.0, best_c.0, cfg.nli_threshold);
    let decisive = if label == Label::Refute { best_c.1 } else { best_e.1 };
    SentenceVerdict {
        sentence: sentence.to_string(),
        label,
        best_entail: best_e.0,
        best_contradict: best_c.0,
        best_evidence_id: decisive.map(|i| evidence[i].source_id.clone()),
        undetermined: ok == 0,
        errors,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub support: f64,
    pub refute: f64,
    pub nei: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallucinationVerdict {
    pub per_sentence: Vec<SentenceVerdict>,
    pub fractions: Fractions,
    pub evidence: Vec<EvidenceSentence>,
    pub empty_evidence: bool,
}

pub fn fractions(labels: &[Label]) -> Fractions {
    let m = labels.len() as f64;
    let count = |l: Label| labels.iter().filter(|&&x| x == l).count() as f64 / m;
    let support = count(Label::Support);
    let refute = count(Label::Refute);
    Fractions {
        support,
        refute,
        nei: 1.0 - support - refute,
    }
}

/// Splits generated text into sentences.
pub fn generated_sentences(text: &str) -> Vec<String> {
    let Ok(t) = tokenize(text) else {
        return Vec::new();
    };
    (0..t.sentence_count())
        .map(|i| t.sentence_text(i).trim().to_string())
        .collect()
}

pub fn evaluate(
    prompt: &str,
    generated: &str,
    search: &dyn SearchProvider,
    nli: &dyn NliProvider,
    cfg: &EvidenceConfig,
) -> Result<HallucinationVerdict, HallucinationError> {
    cfg.validate()?;
    let sentences = generated_sentences(generated);
    if sentences.is_empty() {
        return Err(HallucinationError::NoSentences);
    }
    let evidence = match retrieve_evidence(prompt, search, cfg) {
        Ok(all) => rank_sentences(prompt, &all, cfg),
        Err(HallucinationError::EmptyEvidence) => {
            let per_sentence: Vec<SentenceVerdict> = sentences
                .into_iter()
                .map(|s| SentenceVerdict {
                    sentence: s,
                    label: Label::Nei,
                    best_entail: 0.0,
                    best_contradict: 0.0,
                    best_evidence_id: None,
                    undetermined: false,
                    errors: Vec::new(),
                })
                .collect();
            let labels: Vec<Label> = per_sentence.iter().map(|s| s.label).collect();
            return Ok(HallucinationVerdict {
                fractions: fractions(&labels),
                per_sentence,
                evidence: Vec::new(),
                empty_evidence: true,
            });
        }
        Err(e) => return Err(e),
    };
    let per_sentence: Vec<SentenceVerdict> = sentences
        .iter()
        .map(|s| classify_sentence(s, &evidence, nli, cfg))
        .collect();
    let labels: Vec<Label> = per_sentence.iter().map(|s| s.label).collect();
    Ok(HallucinationVerdict {
        fractions: fractions(&labels),
        per_sentence,
        evidence,
        empty_evidence: false,
    })
}

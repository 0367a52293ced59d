//! Natural language inference providers.
//!
//! Wire contract: `POST /v1/nli` with `{premise, hypothesis}` answering
//! `{entail, contradict, neutral}`, probabilities summing to 1 within 1e-6.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::provider::{endpoint, ProviderError, SharedTransport};
use crate::text::tokenize;

pub const NLI_PATH: &str = "/v1/nli";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliScores {
    pub entail: f64,
    pub contradict: f64,
    pub neutral: f64,
}

impl NliScores {
    /// Checks the probability simplex contract of the wire format.
    pub fn validated(self) -> Result<Self, ProviderError> {
        let parts = [self.entail, self.contradict, self.neutral];
        if parts.iter().any(|p| !p.is_finite() || *p < -1e-9 || *p > 1.0 + 1e-9) {
            return Err(ProviderError::Schema(format!(
                "NLI probabilities out of range: {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ProviderError::Schema(format!(
                "NLI probabilities sum to {sum}"
            )));
        }
        Ok(self)
    }
}

pub trait NliProvider: Send + Sync {
    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError>;
}

pub struct HttpNli {
    transport: SharedTransport,
    url: String,
}

impl HttpNli {
    pub fn new(transport: SharedTransport, base_url: &str) -> Self {
        Self {
            transport,
            url: endpoint(base_url, NLI_PATH),
        }
    }
}

impl NliProvider for HttpNli {
    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        let body = json!({ "premise": premise, "hypothesis": hypothesis });
        let resp = self.transport.post_json(&self.url, &body)?;
        let scores: NliScores = serde_json::from_value(resp)
            .map_err(|e| ProviderError::Schema(format!("NLI response: {e}")))?;
        scores.validated()
    }
}

const NEGATIONS: &[&str] = &["not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "cannot"];

const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "of", "to", "in", "on", "at",
    "and", "or", "it", "its", "this", "that", "for", "with", "by", "as",
];

fn content_terms(text: &str) -> (BTreeSet<String>, bool) {
    let Ok(t) = tokenize(text) else {
        return (BTreeSet::new(), false);
    };
    let mut negated = false;
    let mut terms = BTreeSet::new();
    for w in &t.words {
        let lower = w.surface.to_lowercase();
        if NEGATIONS.contains(&lower.as_str()) || lower.ends_with("n't") {
            negated = true;
        } else if !FUNCTION_WORDS.contains(&lower.as_str()) {
            terms.insert(lower);
        }
    }
    (terms, negated)
}

/// Deterministic lexical-overlap stand-in for an entailment model.
///
/// The hypothesis is supported in proportion to how many of its content terms the premise
/// contains; a negation present in exactly one side turns that support into contradiction.
#[derive(Debug, Clone, Default)]
pub struct LexicalNli;

impl NliProvider for LexicalNli {
    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        let (p_terms, p_neg) = content_terms(premise);
        let (h_terms, h_neg) = content_terms(hypothesis);
        if h_terms.is_empty() {
            return Ok(NliScores {
                entail: 0.0,
                contradict: 0.0,
                neutral: 1.0,
            });
        }
        let overlap = h_terms.intersection(&p_terms).count() as f64 / h_terms.len() as f64;
        let strength = 0.95 * overlap * overlap;
        let (entail, contradict) = if p_neg != h_neg {
            (0.02 * overlap, strength)
        } else {
            (strength, 0.02 * (1.0 - overlap))
        };
        Ok(NliScores {
            entail,
            contradict,
            neutral: 1.0 - entail - contradict,
        })
    }
}

/// Scores read from a JSON array of `{premise, hypothesis, entail, contradict, neutral}`;
/// pairs not listed fall back to another provider.
pub struct FixtureNli<F> {
    table: HashMap<(String, String), NliScores>,
    fallback: F,
}

#[derive(Deserialize)]
struct FixtureRow {
    premise: String,
    hypothesis: String,
    #[serde(flatten)]
    scores: NliScores,
}

impl<F: NliProvider> FixtureNli<F> {
    pub fn from_json(text: &str, fallback: F) -> Result<Self, ProviderError> {
        let rows: Vec<FixtureRow> = serde_json::from_str(text)
            .map_err(|e| ProviderError::Fixture(format!("NLI fixture: {e}")))?;
        let mut table = HashMap::new();
        for row in rows {
            table.insert((row.premise, row.hypothesis), row.scores.validated()?);
        }
        Ok(Self { table, fallback })
    }

    pub fn load(path: &Path, fallback: F) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, fallback)
    }
}

impl<F: NliProvider> NliProvider for FixtureNli<F> {
    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        match self
            .table
            .get(&(premise.to_string(), hypothesis.to_string()))
        {
            Some(s) => Ok(*s),
            None => self.fallback.score(premise, hypothesis),
        }
    }
}

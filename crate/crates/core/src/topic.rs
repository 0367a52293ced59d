//! Seeded LDA by collapsed Gibbs sampling, with a deterministic fold-in for new documents.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::tokenize;

pub const FOLD_IN_ROUNDS: usize = 50;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopicError {
    #[error("corpus has no words")]
    EmptyCorpus,
    #[error("need at least {needed} non-empty documents, found {found}")]
    TooFewDocuments { found: usize, needed: usize },
    #[error("vocabulary of {vocab} words is smaller than {k} topics")]
    VocabTooSmall { vocab: usize, k: usize },
    #[error("invalid LDA parameters: {0}")]
    InvalidParams(String),
    #[error("topic mixtures have {0} and {1} components")]
    DimensionMismatch(usize, usize),
    #[error("cannot read background corpus {path}: {message}")]
    Background { path: String, message: String },
}

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves", "also", "may", "might", "must", "shall", "yet", "although", "though", "s", "t",
    "don", "doesn", "didn", "isn", "aren", "wasn", "weren", "won", "can't", "don't", "it's",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

/// Lowercased words of `text` with stopwords and tokens without letters removed.
pub fn topic_words(text: &str) -> Vec<String> {
    let Ok(t) = tokenize(text) else {
        return Vec::new();
    };
    t.words
        .iter()
        .map(|w| w.surface.to_lowercase())
        .filter(|w| w.chars().any(char::is_alphabetic) && !is_stopword(w))
        .collect()
}

/// Reads a background corpus with one document per line.
pub fn load_background(path: &Path) -> Result<Vec<Vec<String>>, TopicError> {
    let text = std::fs::read_to_string(path).map_err(|e| TopicError::Background {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(text
        .lines()
        .map(topic_words)
        .filter(|d| !d.is_empty())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaParams {
    pub k: usize,
    /// Document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub seed: u64,
    pub iters: usize,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self {
            k: 3,
            alpha: None,
            beta: 0.01,
            seed: 0,
            iters: 200,
        }
    }
}

impl LdaParams {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }

    fn validate(&self) -> Result<(), TopicError> {
        if self.k < 2 {
            return Err(TopicError::InvalidParams(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.alpha() > 0.0) || !(self.beta > 0.0) {
            return Err(TopicError::InvalidParams("alpha and beta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub k: usize,
    pub vocab: Vec<String>,
    /// `k` rows of topic-word probabilities over `vocab`.
    pub phi: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iters: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMixture {
    pub theta: Vec<f64>,
}

/// Collapsed Gibbs state: topic assignment per token plus the count tables.
pub(crate) struct GibbsState {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<usize>>,
    pub(crate) z: Vec<Vec<usize>>,
    n_dk: Vec<Vec<usize>>,
    n_kw: Vec<Vec<usize>>,
    n_k: Vec<usize>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl GibbsState {
    pub(crate) fn new(docs: Vec<Vec<usize>>, v: usize, k: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n_dk = vec![vec![0; k]; docs.len()];
        let mut n_kw = vec![vec![0; v]; k];
        let mut n_k = vec![0; k];
        let z: Vec<Vec<usize>> = docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        n_dk[d][t] += 1;
                        n_kw[t][w] += 1;
                        n_k[t] += 1;
                        t
                    })
                    .collect()
            })
            .collect();
        Self {
            k,
            v,
            alpha,
            beta,
            docs,
            z,
            n_dk,
            n_kw,
            n_k,
            rng,
            weights: vec![0.0; k],
        }
    }

    /// One systematic-scan sweep over every token.
    pub(crate) fn sweep(&mut self) {
        let vbeta = self.v as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.z[d][i];
                self.n_dk[d][old] -= 1;
                self.n_kw[old][w] -= 1;
                self.n_k[old] -= 1;

                let mut total = 0.0;
                for t in 0..self.k {
                    let p = (self.n_dk[d][t] as f64 + self.alpha)
                        * (self.n_kw[t][w] as f64 + self.beta)
                        / (self.n_k[t] as f64 + vbeta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(self.k - 1);

                self.z[d][i] = new;
                self.n_dk[d][new] += 1;
                self.n_kw[new][w] += 1;
                self.n_k[new] += 1;
            }
        }
    }

    fn phi(&self) -> Vec<Vec<f64>> {
        let vbeta = self.v as f64 * self.beta;
        (0..self.k)
            .map(|t| {
                let denom = self.n_k[t] as f64 + vbeta;
                self.n_kw[t].iter().map(|&n| (n as f64 + self.beta) / denom).collect()
            })
            .collect()
    }
}

/// Fits LDA on `docs`. Vocabulary order is first appearance, so results depend only on
/// document order, parameters and seed.
pub fn fit_lda(docs: &[Vec<String>], params: &LdaParams) -> Result<LdaModel, TopicError> {
    params.validate()?;
    let mut vocab = Vec::new();
    let mut index = HashMap::new();
    let encoded: Vec<Vec<usize>> = docs
        .iter()
        .filter(|d| !d.is_empty())
        .map(|d| {
            d.iter()
                .map(|w| {
                    *index.entry(w.clone()).or_insert_with(|| {
                        vocab.push(w.clone());
                        vocab.len() - 1
                    })
                })
                .collect()
        })
        .collect();
    if encoded.is_empty() {
        return Err(TopicError::EmptyCorpus);
    }
    if encoded.len() < 2 {
        return Err(TopicError::TooFewDocuments {
            found: encoded.len(),
            needed: 2,
        });
    }
    if vocab.len() < params.k {
        return Err(TopicError::VocabTooSmall {
            vocab: vocab.len(),
            k: params.k,
        });
    }
    let mut state = GibbsState::new(
        encoded,
        vocab.len(),
        params.k,
        params.alpha(),
        params.beta,
        params.seed,
    );
    for _ in 0..params.iters {
        state.sweep();
    }
    Ok(LdaModel {
        k: params.k,
        phi: state.phi(),
        vocab,
        alpha: params.alpha(),
        beta: params.beta,
        seed: params.seed,
        iters: params.iters,
        index,
    })
}

impl LdaModel {
    /// Builds a model from explicit topic-word rows.
    pub fn from_phi(vocab: Vec<String>, phi: Vec<Vec<f64>>, alpha: f64, beta: f64) -> Self {
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self {
            k: phi.len(),
            vocab,
            phi,
            alpha,
            beta,
            seed: 0,
            iters: 0,
            index,
        }
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        if self.index.is_empty() && !self.vocab.is_empty() {
            // deserialized models skip the index
            return self.vocab.iter().position(|w| w == word);
        }
        self.index.get(word).copied()
    }

    /// The `n` most probable words of topic `k`, ties broken by vocabulary order.
    pub fn top_words(&self, k: usize, n: usize) -> Vec<&str> {
        let mut ids: Vec<usize> = (0..self.vocab.len()).collect();
        ids.sort_by(|&a, &b| self.phi[k][b].total_cmp(&self.phi[k][a]).then(a.cmp(&b)));
        ids.into_iter().take(n).map(|i| self.vocab[i].as_str()).collect()
    }

    /// Deterministic fold-in: starting from uniform, iterates
    /// `theta_k ∝ alpha + sum_w count(w) * phi_k(w) * theta_k / sum_j phi_j(w) * theta_j`.
    pub fn infer_theta(&self, doc: &[String]) -> TopicMixture {
        let mut counts: Vec<(usize, f64)> = Vec::new();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for w in doc {
            if let Some(i) = self.word_index(w) {
                match seen.get(&i) {
                    Some(&slot) => counts[slot].1 += 1.0,
                    None => {
                        seen.insert(i, counts.len());
                        counts.push((i, 1.0));
                    }
                }
            }
        }
        let uniform = vec![1.0 / self.k as f64; self.k];
        if counts.is_empty() {
            log::warn!("document has no in-vocabulary words; using a uniform topic mixture");
            return TopicMixture { theta: uniform };
        }
        // summing in vocabulary order keeps the result independent of word order
        counts.sort_by_key(|&(i, _)| i);
        let mut theta = uniform;
        let mut next = vec![0.0; self.k];
        for _ in 0..FOLD_IN_ROUNDS {
            next.iter_mut().for_each(|x| *x = self.alpha);
            for &(w, c) in &counts {
                let norm: f64 = (0..self.k).map(|j| self.phi[j][w] * theta[j]).sum();
                if norm > 0.0 {
                    for t in 0..self.k {
                        next[t] += c * self.phi[t][w] * theta[t] / norm;
                    }
                }
            }
            let total: f64 = next.iter().sum();
            for t in 0..self.k {
                theta[t] = next[t] / total;
            }
        }
        TopicMixture { theta }
    }
}

/// Cosine of two topic mixtures, clamped to [0, 1].
pub fn topic_similarity(a: &TopicMixture, b: &TopicMixture) -> Result<f64, TopicError> {
    if a.theta.len() != b.theta.len() {
        return Err(TopicError::DimensionMismatch(a.theta.len(), b.theta.len()));
    }
    Ok(cosine(&a.theta, &b.theta).clamp(0.0, 1.0))
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

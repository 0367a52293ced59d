//! Paraphrase candidate gating: coverage by word edit distance, correctness by two-way
//! entailment, and diversity by inverse BLEU.

mod bleu;
mod med;
mod source;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu, dissimilarity, DEFAULT_EPSILON};
pub use med::word_edit_distance;
pub use source::{FileParaphrases, HttpParaphrase, ParaphraseSource, StaticParaphrases, PARAPHRASE_PATH};

use crate::nli::NliProvider;
use crate::provider::bounded_map;
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GateError {
    #[error("BLEU is undefined for an empty word sequence")]
    BleuUndefined,
    #[error("diversity needs at least two texts")]
    DiversityUndefined,
    #[error("invalid gate configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateStatus {
    Kept,
    DroppedCoverage,
    DroppedCorrectness,
    /// Passed both filters but lost the diversity selection to the kept set.
    DroppedDiversity,
    /// The entailment provider failed for this candidate.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseCandidate {
    pub text: String,
    pub med_from_original: usize,
    pub entail_fwd: Option<f64>,
    pub entail_bwd: Option<f64>,
    pub dissimilarity_avg: Option<f64>,
    pub status: CandidateStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    /// Candidates need an edit distance strictly above this.
    pub min_med: usize,
    pub nli_threshold: f64,
    pub max_kept: usize,
    pub epsilon: f64,
    pub concurrency: usize,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            min_med: 2,
            nli_threshold: 0.5,
            max_kept: 5,
            epsilon: DEFAULT_EPSILON,
            concurrency: 4,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), GateError> {
        if !(0.0..=1.0).contains(&self.nli_threshold) {
            return Err(GateError::InvalidConfig(format!(
                "nli_threshold {} outside [0, 1]",
                self.nli_threshold
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(GateError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_kept == 0 {
            return Err(GateError::InvalidConfig("max_kept must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub original: String,
    pub candidates: Vec<ParaphraseCandidate>,
    /// Indices into `candidates` of the kept ones, in selection order.
    pub kept_order: Vec<usize>,
    /// Mean inverse BLEU over all pairs of {original, survivors}; absent with fewer than two survivors.
    pub diversity: Option<f64>,
    pub original_only: bool,
}

impl GateReport {
    pub fn kept(&self) -> impl Iterator<Item = &ParaphraseCandidate> {
        self.kept_order.iter().map(|&i| &self.candidates[i])
    }

    pub fn kept_texts(&self) -> Vec<String> {
        self.kept().map(|c| c.text.clone()).collect()
    }
}

/// Case-folded word sequence used by the edit-distance and BLEU comparisons.
pub fn gate_words(text: &str) -> Vec<String> {
    tokenize(text)
        .map(|t| t.words.iter().map(|w| w.surface.to_lowercase()).collect())
        .unwrap_or_default()
}

fn new_candidate(original_words: &[String], text: &str) -> ParaphraseCandidate {
    ParaphraseCandidate {
        text: text.to_string(),
        med_from_original: word_edit_distance(original_words, &gate_words(text)),
        entail_fwd: None,
        entail_bwd: None,
        dissimilarity_avg: None,
        status: CandidateStatus::Kept,
        error: None,
    }
}

/// Marks candidates whose edit distance from the original does not exceed `min_med`.
pub fn coverage_filter<S: AsRef<str>>(
    original: &str,
    candidates: &[S],
    cfg: &GateConfig,
) -> Vec<ParaphraseCandidate> {
    let original_words = gate_words(original);
    candidates
        .iter()
        .map(|c| {
            let mut cand = new_candidate(&original_words, c.as_ref());
            if cand.med_from_original <= cfg.min_med {
                cand.status = CandidateStatus::DroppedCoverage;
            }
            cand
        })
        .collect()
}

/// Scores still-kept candidates with entailment in both directions.
pub fn correctness_filter(
    original: &str,
    candidates: &mut [ParaphraseCandidate],
    nli: &dyn NliProvider,
    cfg: &GateConfig,
) {
    let pending: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.status == CandidateStatus::Kept)
        .map(|(i, _)| i)
        .collect();
    let texts: Vec<String> = pending.iter().map(|&i| candidates[i].text.clone()).collect();
    let results = bounded_map(&texts, cfg.concurrency, |text| {
        let fwd = nli.score(original, text)?;
        let bwd = nli.score(text, original)?;
        Ok::<_, crate::provider::ProviderError>((fwd.entail, bwd.entail))
    });
    for (idx, result) in pending.into_iter().zip(results) {
        let cand = &mut candidates[idx];
        match result {
            Ok((fwd, bwd)) => {
                cand.entail_fwd = Some(fwd);
                cand.entail_bwd = Some(bwd);
                if fwd.min(bwd) < cfg.nli_threshold {
                    cand.status = CandidateStatus::DroppedCorrectness;
                }
            }
            Err(e) => {
                cand.status = CandidateStatus::Undetermined;
                cand.error = Some(e.to_string());
            }
        }
    }
}

/// Pairwise inverse-BLEU matrix over word sequences (entry 0 is conventionally the original).
pub fn dissimilarity_matrix(texts: &[Vec<String>], epsilon: f64) -> Vec<Vec<f64>> {
    let n = texts.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            // empty word lists cannot be compared; treat them as maximally distant
            let d = dissimilarity(&texts[i], &texts[j], epsilon).unwrap_or(1.0 / epsilon);
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    m
}

/// Greedy max-min selection over candidate indices `1..n` of `dist`, seeded with `seed`.
///
/// At each step picks the remaining index whose smallest distance to the selected set is
/// largest; ties go to the lower index.
pub fn greedy_max_min(dist: &[Vec<f64>], pool: &[usize], seed: usize, k: usize) -> Vec<usize> {
    let mut chosen = vec![seed];
    let mut remaining: Vec<usize> = pool.iter().copied().filter(|&i| i != seed).collect();
    while chosen.len() < k && !remaining.is_empty() {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let closest = chosen.iter().map(|&c| dist[i][c]).fold(f64::INFINITY, f64::min);
                (pos, closest)
            })
            .fold((usize::MAX, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        chosen.push(remaining.remove(pos));
    }
    chosen
}

/// Runs coverage, then correctness, then diversity selection down to `cfg.max_kept`.
pub fn gate<S: AsRef<str>>(
    original: &str,
    raw_candidates: &[S],
    nli: &dyn NliProvider,
    cfg: &GateConfig,
) -> Result<GateReport, GateError> {
    cfg.validate()?;
    let mut candidates = coverage_filter(original, raw_candidates, cfg);
    correctness_filter(original, &mut candidates, nli, cfg);

    let survivors: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.status == CandidateStatus::Kept)
        .map(|(i, _)| i)
        .collect();

    // texts[0] is the original, texts[k + 1] is survivor k
    let mut texts = vec![gate_words(original)];
    texts.extend(survivors.iter().map(|&i| gate_words(&candidates[i].text)));
    let dist = dissimilarity_matrix(&texts, cfg.epsilon);

    let mut diversity = None;
    if survivors.len() >= 2 {
        let n = texts.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                total += dist[i][j];
            }
        }
        diversity = Some(total / (n * (n - 1) / 2) as f64);
        for (k, &ci) in survivors.iter().enumerate() {
            let row = &dist[k + 1];
            let sum: f64 = (0..n).filter(|&j| j != k + 1).map(|j| row[j]).sum();
            candidates[ci].dissimilarity_avg = Some(sum / (n - 1) as f64);
        }
    }

    let kept_order = if survivors.len() > cfg.max_kept {
        // seed: greatest edit distance from the original, first in input order on ties
        let seed_k = survivors
            .iter()
            .enumerate()
            .fold(0usize, |best, (k, &ci)| {
                if candidates[ci].med_from_original > candidates[survivors[best]].med_from_original {
                    k
                } else {
                    best
                }
            });
        let pool: Vec<usize> = (1..=survivors.len()).collect();
        let picked = greedy_max_min(&dist, &pool, seed_k + 1, cfg.max_kept);
        let order: Vec<usize> = picked.iter().map(|&p| survivors[p - 1]).collect();
        for &ci in &survivors {
            if !order.contains(&ci) {
                candidates[ci].status = CandidateStatus::DroppedDiversity;
            }
        }
        order
    } else {
        survivors
    };

    Ok(GateReport {
        original: original.to_string(),
        original_only: kept_order.is_empty(),
        candidates,
        kept_order,
        diversity,
    })
}

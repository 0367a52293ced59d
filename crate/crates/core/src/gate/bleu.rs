use std::collections::HashMap;

use super::GateError;

fn ngram_counts<S: AsRef<str>>(words: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    for window in words.windows(n) {
        let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU of `candidate` against a single `reference`.
///
/// Uses clipped n-gram precision up to order `min(4, shorter length)`, a geometric mean with
/// uniform weights, the usual brevity penalty, and add-one smoothing for orders of 2 and up.
/// Unigram precision is not smoothed, so fully disjoint texts score 0.
pub fn bleu<A: AsRef<str>, B: AsRef<str>>(candidate: &[A], reference: &[B]) -> Result<f64, GateError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(GateError::BleuUndefined);
    }
    let max_order = 4.min(candidate.len()).min(reference.len());
    let mut log_sum = 0.0;
    for n in 1..=max_order {
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let total: usize = cand.values().sum();
        let matched: usize = cand
            .iter()
            .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        let precision = if n == 1 {
            matched as f64 / total as f64
        } else {
            (matched as f64 + 1.0) / (total as f64 + 1.0)
        };
        if precision == 0.0 {
            return Ok(0.0);
        }
        log_sum += precision.ln();
    }
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(brevity * (log_sum / max_order as f64).exp())
}

pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Inverse BLEU, `1 / (BLEU + epsilon)`, using the mean of both BLEU directions.
pub fn dissimilarity<A: AsRef<str>, B: AsRef<str>>(
    a: &[A],
    b: &[B],
    epsilon: f64,
) -> Result<f64, GateError> {
    let sym = 0.5 * (bleu(a, b)? + bleu(b, a)?);
    Ok(1.0 / (sym + epsilon))
}

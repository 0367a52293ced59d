//! Picks the most comprehensible prompt among the original and its kept paraphrases.
//!
//! Each pool member gets an attribution descriptor and a topic mixture. Its comprehension
//! score is `w1 * alignment + w2 * topic_sim`, where alignment is the cosine between its
//! descriptor and the pool's mean descriptor, and topic_sim is the cosine between its topic
//! mixture and the original's.

use serde::{Deserialize, Serialize};

use crate::attribution::{
    attribution_profile, AttributionError, AttributionProfile, AttributionProvider,
    AttributionRequest, Method, ProfileOptions,
};
use crate::provider::bounded_map;
use crate::topic::{cosine, fit_lda, topic_similarity, topic_words, LdaParams, TopicError, TopicMixture};

/// Scores closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectorError {
    #[error("invalid selector configuration: {0}")]
    InvalidConfig(String),
    #[error("descriptor is the zero vector")]
    ZeroVector,
    #[error("descriptors have {0} and {1} components")]
    DimensionMismatch(usize, usize),
    #[error("selection aborted: attribution failed for {failed:?}: {source}")]
    Aborted {
        failed: Vec<usize>,
        source: AttributionError,
        partial: Box<SelectionReport>,
    },
    #[error("selection aborted: {0}")]
    Topic(#[from] TopicError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorConfig {
    pub w1: f64,
    pub w2: f64,
    /// Descriptor threshold; `None` means half the uniform share of each text.
    pub tau: Option<f64>,
    pub include_original_in_mean: bool,
    pub signed: bool,
    pub model_id: String,
    pub methods: Vec<Method>,
    pub steps: u32,
    pub concurrency: usize,
    /// Topic model settings; the pipeline fills these from its own `lda` section.
    #[serde(skip)]
    pub lda: LdaParams,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 0.5,
            tau: None,
            include_original_in_mean: true,
            signed: false,
            model_id: "gpt2".into(),
            methods: Method::ALL.to_vec(),
            steps: 64,
            concurrency: 4,
            lda: LdaParams::default(),
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<(), SelectorError> {
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) {
            return Err(SelectorError::InvalidConfig("weights must be non-negative".into()));
        }
        if (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return Err(SelectorError::InvalidConfig(format!(
                "weights must sum to 1, got {} + {}",
                self.w1, self.w2
            )));
        }
        Ok(())
    }

    fn request(&self, text: &str) -> AttributionRequest {
        AttributionRequest {
            model_id: self.model_id.clone(),
            text: text.to_string(),
            methods: self.methods.clone(),
            steps: self.steps,
            baseline: Default::default(),
        }
    }
}

/// Cosine similarity of two descriptors.
pub fn alignment(d: &[f64], mean: &[f64]) -> Result<f64, SelectorError> {
    if d.len() != mean.len() {
        return Err(SelectorError::DimensionMismatch(d.len(), mean.len()));
    }
    if d.iter().all(|x| *x == 0.0) || mean.iter().all(|x| *x == 0.0) {
        return Err(SelectorError::ZeroVector);
    }
    Ok(cosine(d, mean).clamp(-1.0, 1.0))
}

pub fn comprehension_score(alignment: f64, topic_sim: f64, cfg: &SelectorConfig) -> f64 {
    cfg.w1 * alignment + cfg.w2 * topic_sim
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    /// 0 is the original; candidate `i` is at `i + 1`.
    pub index: usize,
    pub text: String,
    pub is_original: bool,
    pub descriptor: Option<[f64; 5]>,
    pub alignment: Option<f64>,
    pub topic_sim: Option<f64>,
    pub comprehension: Option<f64>,
    pub theta: Option<Vec<f64>>,
    /// Share of this text's words among its dominant topic's top ten that reach the threshold.
    pub topic_word_attention: Option<f64>,
    pub profile: Option<AttributionProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub records: Vec<PoolRecord>,
    pub mean_descriptor: Option<[f64; 5]>,
    pub chosen_index: usize,
    pub chosen_is_original: bool,
    pub tie_break_applied: bool,
    /// True when there were no candidates and nothing was scored.
    pub degenerate: bool,
}

impl SelectionReport {
    pub fn chosen_text(&self) -> &str {
        &self.records[self.chosen_index].text
    }
}

/// Elementwise mean of descriptors.
pub fn mean_descriptor(ds: &[[f64; 5]]) -> [f64; 5] {
    let mut m = [0.0; 5];
    for d in ds {
        for (a, b) in m.iter_mut().zip(d) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|a| *a /= ds.len() as f64);
    m
}

/// Index of the best score; ties (within [`TIE_TOLERANCE`]) go to the lowest index, which
/// puts the original first. Returns whether a tie was broken.
pub fn argmax_with_ties(scores: &[f64]) -> (usize, bool) {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| best - **s <= TIE_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    (winners[0], winners.len() > 1)
}

/// Scores descriptors and mixtures for a pool whose first member is the original.
pub fn score_pool(
    descriptors: &[[f64; 5]],
    thetas: &[TopicMixture],
    cfg: &SelectorConfig,
) -> Result<(Vec<(f64, f64, f64)>, [f64; 5]), SelectorError> {
    let mean_over = if cfg.include_original_in_mean || descriptors.len() == 1 {
        descriptors
    } else {
        &descriptors[1..]
    };
    let mean = mean_descriptor(mean_over);
    let mut out = Vec::with_capacity(descriptors.len());
    for (d, theta) in descriptors.iter().zip(thetas) {
        let a = alignment(d, &mean)?;
        let t = topic_similarity(theta, &thetas[0])?;
        out.push((a, t, comprehension_score(a, t, cfg)));
    }
    Ok((out, mean))
}

fn blank_record(index: usize, text: &str) -> PoolRecord {
    PoolRecord {
        index,
        text: text.to_string(),
        is_original: index == 0,
        descriptor: None,
        alignment: None,
        topic_sim: None,
        comprehension: None,
        theta: None,
        topic_word_attention: None,
        profile: None,
    }
}

/// Runs the selection over `{original} ∪ candidates`.
///
/// The topic model is fitted on the pool texts followed by `background`; candidates are
/// fed to it in sorted order, so only exact score ties depend on how they were listed.
pub fn select_optimal<S: AsRef<str>>(
    original: &str,
    candidates: &[S],
    provider: &dyn AttributionProvider,
    background: &[Vec<String>],
    cfg: &SelectorConfig,
) -> Result<SelectionReport, SelectorError> {
    cfg.validate()?;
    let mut pool: Vec<&str> = vec![original];
    pool.extend(candidates.iter().map(|c| c.as_ref()));
    let mut records: Vec<PoolRecord> = pool.iter().enumerate().map(|(i, t)| blank_record(i, t)).collect();

    if candidates.is_empty() {
        return Ok(SelectionReport {
            records,
            mean_descriptor: None,
            chosen_index: 0,
            chosen_is_original: true,
            tie_break_applied: false,
            degenerate: true,
        });
    }

    let opts = ProfileOptions {
        signed: cfg.signed,
        tau: cfg.tau,
    };
    let profiles = bounded_map(&pool, cfg.concurrency, |text| {
        attribution_profile(provider, &cfg.request(text), opts)
    });
    let mut failed = Vec::new();
    let mut first_error = None;
    for (i, p) in profiles.into_iter().enumerate() {
        match p {
            Ok(p) => {
                records[i].descriptor = Some(p.descriptor);
                records[i].profile = Some(p);
            }
            Err(e) => {
                failed.push(i);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(source) = first_error {
        return Err(SelectorError::Aborted {
            failed,
            source,
            partial: Box::new(SelectionReport {
                records,
                mean_descriptor: None,
                chosen_index: 0,
                chosen_is_original: true,
                tie_break_applied: false,
                degenerate: false,
            }),
        });
    }

    let pool_words: Vec<Vec<String>> = pool.iter().map(|t| topic_words(t)).collect();
    // candidates enter the sampler in sorted order so their listing order cannot matter
    let mut corpus = vec![pool_words[0].clone()];
    let mut rest: Vec<&Vec<String>> = pool_words[1..].iter().collect();
    rest.sort();
    corpus.extend(rest.into_iter().cloned());
    corpus.extend(background.iter().cloned());
    let model = fit_lda(&corpus, &cfg.lda)?;
    let thetas: Vec<TopicMixture> = pool_words.iter().map(|w| model.infer_theta(w)).collect();

    let descriptors: Vec<[f64; 5]> = records.iter().map(|r| r.descriptor.expect("fetched")).collect();
    let (scores, mean) = score_pool(&descriptors, &thetas, cfg)?;

    for (i, rec) in records.iter_mut().enumerate() {
        let (a, t, c) = scores[i];
        rec.alignment = Some(a);
        rec.topic_sim = Some(t);
        rec.comprehension = Some(c);
        let theta = &thetas[i].theta;
        let dominant = argmax_with_ties(theta).0;
        let top = model.top_words(dominant, 10);
        let profile = rec.profile.as_ref().expect("fetched");
        let mut hits = 0;
        let mut total = 0;
        for (w, s) in profile.words.iter().zip(&profile.averaged) {
            if top.contains(&w.to_lowercase().as_str()) {
                total += 1;
                if *s >= profile.tau {
                    hits += 1;
                }
            }
        }
        rec.topic_word_attention = (total > 0).then(|| hits as f64 / total as f64);
        rec.theta = Some(theta.clone());
    }

    let comp: Vec<f64> = scores.iter().map(|s| s.2).collect();
    let (chosen_index, tie_break_applied) = argmax_with_ties(&comp);
    Ok(SelectionReport {
        records,
        mean_descriptor: Some(mean),
        chosen_index,
        chosen_is_original: chosen_index == 0,
        tie_break_applied,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::{FixtureAttribution, MockAttribution};
    use crate::provider::{ProviderError, TransportError};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn alignment_examples() {
        let d = [0.2, 0.1, 0.4, 0.1, 1.0];
        assert_abs_diff_eq!(alignment(&d, &d).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(alignment(&[1.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            alignment(&[1.0, 2.0, 2.0, 0.0, 0.0], &[2.0, 4.0, 4.0, 0.0, 0.0]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(alignment(&[0.0; 5], &d), Err(SelectorError::ZeroVector));
    }

    #[test]
    fn comprehension_examples() {
        let cfg = SelectorConfig::default();
        assert_eq!((cfg.w1, cfg.w2), (0.5, 0.5));
        assert_abs_diff_eq!(comprehension_score(0.8, 0.6, &cfg), 0.7, epsilon = 1e-15);
        let skew = SelectorConfig { w1: 0.3, w2: 0.7, ..cfg.clone() };
        assert_abs_diff_eq!(comprehension_score(0.42, 0.42, &skew), 0.42, epsilon = 1e-15);
        let edge = SelectorConfig { w1: 1.0, w2: 0.0, ..cfg };
        assert_eq!(comprehension_score(0.37, 0.9, &edge), 0.37);
    }

    #[test]
    fn weights_must_be_convex() {
        let bad = SelectorConfig { w1: 0.6, w2: 0.6, ..SelectorConfig::default() };
        assert!(matches!(bad.validate(), Err(SelectorError::InvalidConfig(_))));
        let neg = SelectorConfig { w1: -0.5, w2: 1.5, ..SelectorConfig::default() };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn ties_prefer_the_original_then_lowest_index() {
        assert_eq!(argmax_with_ties(&[0.5, 0.5, 0.4]), (0, true));
        assert_eq!(argmax_with_ties(&[0.4, 0.6, 0.6]), (1, true));
        assert_eq!(argmax_with_ties(&[0.4, 0.6, 0.5]), (1, false));
    }

    #[test]
    fn empty_candidates_choose_original() {
        struct Never;
        impl AttributionProvider for Never {
            fn attribute(
                &self,
                _: &AttributionRequest,
            ) -> Result<crate::attribution::AttributionResponse, AttributionError> {
                panic!("no attribution needed");
            }
        }
        let none: [&str; 0] = [];
        let r = select_optimal("Why is the sky blue?", &none, &Never, &[], &SelectorConfig::default()).unwrap();
        assert!(r.chosen_is_original && r.degenerate);
        assert_eq!(r.records.len(), 1);
    }

    #[test]
    fn provider_failure_aborts_with_partial_report() {
        struct FailOn(&'static str);
        impl AttributionProvider for FailOn {
            fn attribute(
                &self,
                req: &AttributionRequest,
            ) -> Result<crate::attribution::AttributionResponse, AttributionError> {
                if req.text == self.0 {
                    return Err(ProviderError::Transport(TransportError::Disabled { url: "x".into() }).into());
                }
                MockAttribution::new(1).attribute(req)
            }
        }
        let cands = ["Tell me why the sky is blue", "What colour is the sky and why"];
        let err = select_optimal(
            "Why is the sky blue?",
            &cands,
            &FailOn(cands[1]),
            &[],
            &SelectorConfig::default(),
        )
        .unwrap_err();
        match err {
            SelectorError::Aborted { failed, partial, .. } => {
                assert_eq!(failed, [2]);
                assert!(partial.records[0].descriptor.is_some());
                assert!(partial.records[2].descriptor.is_none());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fixture_candidate_matching_mean_and_topics_wins() {
        let original = "blue sky light scatters";
        let c1 = "sunlight scattering makes colour";
        let c2 = "light scatters blue sky";
        let d2 = [0.4, 0.25, 0.2, 0.15];
        let o = [0.45, 0.24, 0.18, 0.13];
        // choose c1 so that mean(d_o, d_1) matches d_2 in every descriptor component
        let sd = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let target = 2.0 * sd(&d2) - sd(&o);
        let (mut lo, mut hi) = (0.24, 0.31);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if sd(&[0.35, mid, 0.48 - mid, 0.17]) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c1_scores = [0.35, lo, 0.48 - lo, 0.17];
        let provider = FixtureAttribution::new()
            .with_word_scores(original, &o)
            .with_word_scores(c1, &c1_scores)
            .with_word_scores(c2, &d2);
        let r = select_optimal(original, &[c1, c2], &provider, &[], &SelectorConfig::default()).unwrap();
        assert_eq!(r.chosen_index, 2);
        assert_eq!(r.chosen_text(), c2);
        assert_eq!(r.records[2].theta, r.records[0].theta);
        let mean = r.mean_descriptor.unwrap();
        for (a, b) in r.records[2].descriptor.unwrap().iter().zip(&mean) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn candidate_order_does_not_change_the_choice() {
        let original = "Why does the sky look blue during the day?";
        let mut cands = vec![
            "Explain why the daytime sky is blue.",
            "What makes the sky blue at noon?",
            "How does sunlight make the sky look blue by day?",
            "For what reason is the sky blue in daylight?",
        ];
        let provider = MockAttribution::new(4);
        let cfg = SelectorConfig::default();
        let first = select_optimal(original, &cands, &provider, &[], &cfg).unwrap();
        cands.reverse();
        let second = select_optimal(original, &cands, &provider, &[], &cfg).unwrap();
        assert_eq!(first.chosen_text(), second.chosen_text());
        assert_eq!(first.records[0].theta, second.records[0].theta);
    }

    fn descriptor_strategy() -> impl Strategy<Value = [f64; 5]> {
        proptest::array::uniform5(0.01f64..1.0)
    }

    proptest! {
        #[test]
        fn scale_invariance_and_bounds(
            ds in proptest::collection::vec(descriptor_strategy(), 2..6),
            raw_thetas in proptest::collection::vec(proptest::array::uniform3(0.01f64..1.0), 6),
            scale in 0.1f64..10.0,
        ) {
            let thetas: Vec<TopicMixture> = raw_thetas[..ds.len()]
                .iter()
                .map(|t| { let s: f64 = t.iter().sum(); TopicMixture { theta: t.iter().map(|x| x / s).collect() } })
                .collect();
            let cfg = SelectorConfig::default();
            let (a, _) = score_pool(&ds, &thetas, &cfg).unwrap();
            let scaled: Vec<[f64; 5]> = ds.iter().map(|d| d.map(|x| x * scale)).collect();
            let (b, _) = score_pool(&scaled, &thetas, &cfg).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.2 - y.2).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&x.2));
            }
        }

        #[test]
        fn comprehension_is_monotone(a in -1.0f64..1.0, t in 0.0f64..1.0, da in 0.0f64..0.5, w1 in 0.0f64..1.0) {
            let cfg = SelectorConfig { w1, w2: 1.0 - w1, ..SelectorConfig::default() };
            prop_assert!(comprehension_score(a + da, t, &cfg) >= comprehension_score(a, t, &cfg));
            prop_assert!(comprehension_score(a, t + da, &cfg) >= comprehension_score(a, t, &cfg));
        }
    }
}

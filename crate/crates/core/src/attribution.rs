//! Word-level attribution profiles built from token attributions.
//!
//! Wire contract: `POST /v1/attribution` with exactly `{model_id, text, methods, steps, baseline}`,
//! answered by `{tokens, scores: {method: [..]}, model_id, version}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::provider::{endpoint, ProviderError, SharedTransport};
use crate::text::tokenize;

pub const ATTRIBUTION_PATH: &str = "/v1/attribution";
pub const MIN_STEPS: u32 = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttributionError {
    #[error("text is empty")]
    EmptyText,
    #[error("invalid attribution request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("unknown attribution method {0:?}")]
    UnknownMethod(String),
    #[error("response lacks requested method {0}")]
    MissingMethod(Method),
    #[error("response contains unrequested method {0}")]
    UnexpectedMethod(Method),
    #[error("attribution response violates the wire schema: {0}")]
    Schema(String),
    #[error("tokens do not align with words at character {offset} (token {token:?})")]
    Alignment { offset: usize, token: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    IG,
    DIG,
    SIG,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::IG, Method::DIG, Method::SIG];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::IG => "IG",
            Method::DIG => "DIG",
            Method::SIG => "SIG",
        }
    }

    pub fn parse(s: &str) -> Result<Self, AttributionError> {
        match s {
            "IG" => Ok(Method::IG),
            "DIG" => Ok(Method::DIG),
            "SIG" => Ok(Method::SIG),
            other => Err(AttributionError::UnknownMethod(other.to_string())),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    ZeroEmbedding,
    #[default]
    PadToken,
    MaskToken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRequest {
    pub model_id: String,
    pub text: String,
    pub methods: Vec<Method>,
    pub steps: u32,
    pub baseline: Baseline,
}

impl AttributionRequest {
    pub fn new(model_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            text: text.into(),
            methods: Method::ALL.to_vec(),
            steps: 64,
            baseline: Baseline::default(),
        }
    }

    pub fn validate(&self) -> Result<(), AttributionError> {
        if self.text.trim().is_empty() {
            return Err(AttributionError::EmptyText);
        }
        if self.methods.is_empty() {
            return Err(AttributionError::InvalidRequest("no methods requested".into()));
        }
        if self.steps < MIN_STEPS {
            return Err(AttributionError::InvalidRequest(format!(
                "steps must be at least {MIN_STEPS}, got {}",
                self.steps
            )));
        }
        Ok(())
    }
}

/// Raw provider answer as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResponse {
    pub tokens: Vec<String>,
    pub scores: BTreeMap<String, Vec<f64>>,
    pub model_id: String,
    pub version: String,
}

/// A response checked against the request it answers.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenAttributions {
    pub tokens: Vec<String>,
    pub scores: BTreeMap<Method, Vec<f64>>,
    pub model_id: String,
    pub version: String,
}

pub trait AttributionProvider: Send + Sync {
    fn attribute(&self, req: &AttributionRequest) -> Result<AttributionResponse, AttributionError>;
}

/// Validates the request, calls the provider and checks the answer's schema.
pub fn fetch_attribution(
    provider: &dyn AttributionProvider,
    req: &AttributionRequest,
) -> Result<TokenAttributions, AttributionError> {
    req.validate()?;
    let resp = provider.attribute(req)?;
    if resp.tokens.is_empty() {
        return Err(AttributionError::Schema("empty token list".into()));
    }
    let mut scores = BTreeMap::new();
    for (name, values) in resp.scores {
        let method = Method::parse(&name)?;
        if !req.methods.contains(&method) {
            return Err(AttributionError::UnexpectedMethod(method));
        }
        if values.len() != resp.tokens.len() {
            return Err(AttributionError::Schema(format!(
                "{method} has {} scores for {} tokens",
                values.len(),
                resp.tokens.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(AttributionError::Schema(format!("{method} score {bad} is not finite")));
        }
        scores.insert(method, values);
    }
    for m in &req.methods {
        if !scores.contains_key(m) {
            return Err(AttributionError::MissingMethod(*m));
        }
    }
    Ok(TokenAttributions {
        tokens: resp.tokens,
        scores,
        model_id: resp.model_id,
        version: resp.version,
    })
}

pub struct HttpAttribution {
    transport: SharedTransport,
    url: String,
}

impl HttpAttribution {
    pub fn new(transport: SharedTransport, base_url: &str) -> Self {
        Self {
            transport,
            url: endpoint(base_url, ATTRIBUTION_PATH),
        }
    }
}

impl AttributionProvider for HttpAttribution {
    fn attribute(&self, req: &AttributionRequest) -> Result<AttributionResponse, AttributionError> {
        let body = serde_json::to_value(req).expect("request serializes");
        let resp = self
            .transport
            .post_json(&self.url, &body)
            .map_err(ProviderError::from)?;
        serde_json::from_value(resp).map_err(|e| AttributionError::Schema(e.to_string()))
    }
}

/// Splits text the way the mock provider "tokenizes": punctuation runs become their own
/// tokens and words longer than six characters are cut into a head and a `##` continuation.
pub fn mock_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let start = chunk.find(|c: char| c.is_alphanumeric());
        let Some(start) = start else {
            out.push(chunk.to_string());
            continue;
        };
        let end = chunk
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_alphanumeric())
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(chunk.len());
        if start > 0 {
            out.push(chunk[..start].to_string());
        }
        let word = &chunk[start..end];
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > 6 {
            out.push(chars[..4].iter().collect());
            out.push(format!("##{}", chars[4..].iter().collect::<String>()));
        } else {
            out.push(word.to_string());
        }
        if end < chunk.len() {
            out.push(chunk[end..].to_string());
        }
    }
    out
}

fn mock_score(seed: u64, token: &str, position: usize, method: Method) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((position as u64).to_le_bytes());
    h.update(method.as_str().as_bytes());
    h.update([0]);
    h.update(token.as_bytes());
    let digest = h.finalize();
    let bits = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    // 53 high bits give a uniform value in [0, 1); recentre to [-1, 1)
    ((bits >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

/// Builds the response the mock provider returns for `text`.
pub fn mock_attribution(seed: u64, text: &str, methods: &[Method]) -> AttributionResponse {
    let tokens = mock_tokens(text);
    let scores = methods
        .iter()
        .map(|&m| {
            let v = tokens
                .iter()
                .enumerate()
                .map(|(i, t)| mock_score(seed, t, i, m))
                .collect();
            (m.as_str().to_string(), v)
        })
        .collect();
    AttributionResponse {
        tokens,
        scores,
        model_id: "mock".into(),
        version: "mock-1".into(),
    }
}

/// Deterministic stand-in provider; scores come from a seeded hash of token, position and method.
#[derive(Debug, Clone)]
pub struct MockAttribution {
    pub seed: u64,
}

impl MockAttribution {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl AttributionProvider for MockAttribution {
    fn attribute(&self, req: &AttributionRequest) -> Result<AttributionResponse, AttributionError> {
        let mut resp = mock_attribution(self.seed, &req.text, &req.methods);
        resp.model_id = req.model_id.clone();
        Ok(resp)
    }
}

/// Responses looked up by exact text. Unknown texts are a provider error.
#[derive(Debug, Clone, Default)]
pub struct FixtureAttribution {
    table: HashMap<String, AttributionResponse>,
}

impl FixtureAttribution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers one score per word of `text`, identical for every method.
    pub fn with_word_scores(mut self, text: &str, scores: &[f64]) -> Self {
        let tokens: Vec<String> = tokenize(text)
            .map(|t| t.surfaces().into_iter().map(String::from).collect())
            .unwrap_or_default();
        assert_eq!(tokens.len(), scores.len(), "one score per word of {text:?}");
        let scores = Method::ALL
            .iter()
            .map(|m| (m.as_str().to_string(), scores.to_vec()))
            .collect();
        self.table.insert(
            text.to_string(),
            AttributionResponse {
                tokens,
                scores,
                model_id: "fixture".into(),
                version: "fixture-1".into(),
            },
        );
        self
    }

    pub fn insert(&mut self, text: impl Into<String>, resp: AttributionResponse) {
        self.table.insert(text.into(), resp);
    }

    /// Reads a JSON object mapping text to a wire response.
    pub fn load(path: &Path) -> Result<Self, AttributionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        let table: HashMap<String, AttributionResponse> = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        Ok(Self { table })
    }
}

impl AttributionProvider for FixtureAttribution {
    fn attribute(&self, req: &AttributionRequest) -> Result<AttributionResponse, AttributionError> {
        let resp = self.table.get(&req.text).ok_or_else(|| {
            ProviderError::Fixture(format!("no attribution fixture for {:?}", req.text))
        })?;
        let scores = resp
            .scores
            .iter()
            .filter(|(k, _)| req.methods.iter().any(|m| m.as_str() == k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(AttributionResponse {
            scores,
            ..resp.clone()
        })
    }
}

fn strip_markers(token: &str) -> &str {
    token
        .strip_prefix("##")
        .unwrap_or(token)
        .trim_start_matches(['\u{0120}', '\u{2581}', '\u{010A}'])
}

fn is_special(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
        || (token.starts_with('<') && token.ends_with('>'))
        || (token.starts_with('[') && token.ends_with(']'))
}

/// Result of mapping token scores onto words.
#[derive(Debug, Clone, PartialEq)]
pub struct WordScores {
    pub scores: Vec<f64>,
    /// Summed magnitude of tokens that belong to no word (punctuation, special tokens).
    pub unaligned_mass: f64,
}

/// Sums token scores per word and L1-normalizes.
///
/// Tokens are matched case-insensitively against the concatenated words after removing
/// continuation markers. Tokens that cannot be matched are skipped when they carry no
/// letters or digits or look like special tokens; anything else is an alignment error.
pub fn aggregate_to_words(
    tokens: &[String],
    token_scores: &[f64],
    words: &[String],
    signed: bool,
) -> Result<WordScores, AttributionError> {
    if tokens.len() != token_scores.len() {
        return Err(AttributionError::Schema(format!(
            "{} scores for {} tokens",
            token_scores.len(),
            tokens.len()
        )));
    }
    // every character of the concatenated words, labelled with its word
    let target: Vec<(char, usize)> = words
        .iter()
        .enumerate()
        .flat_map(|(w, s)| s.chars().flat_map(char::to_lowercase).map(move |c| (c, w)))
        .collect();
    let mut pos = 0;
    let mut sums = vec![0.0; words.len()];
    let mut unaligned = 0.0;
    for (token, &score) in tokens.iter().zip(token_scores) {
        let piece: Vec<char> = strip_markers(token)
            .chars()
            .flat_map(char::to_lowercase)
            .collect();
        if piece.is_empty() {
            unaligned += score.abs();
            continue;
        }
        let fits = pos + piece.len() <= target.len()
            && piece.iter().zip(&target[pos..]).all(|(a, (b, _))| a == b);
        if fits {
            let word = target[pos].1;
            sums[word] += if signed { score } else { score.abs() };
            pos += piece.len();
        } else if is_special(token) {
            unaligned += score.abs();
        } else {
            return Err(AttributionError::Alignment {
                offset: pos,
                token: token.clone(),
            });
        }
    }
    if pos < target.len() {
        return Err(AttributionError::Alignment {
            offset: pos,
            token: String::new(),
        });
    }
    Ok(WordScores {
        scores: l1_normalize(&sums),
        unaligned_mass: unaligned,
    })
}

/// Scales to unit L1 norm. An all-zero vector becomes uniform, with a warning.
pub fn l1_normalize(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().map(|x| x.abs()).sum();
    if total == 0.0 || !total.is_finite() {
        if !v.is_empty() {
            log::warn!("attribution vector has no mass; using uniform scores");
        }
        return vec![1.0 / v.len() as f64; v.len()];
    }
    v.iter().map(|x| x / total).collect()
}

/// Elementwise mean of the supplied method vectors, re-normalized.
pub fn average_methods(per_method: &BTreeMap<Method, Vec<f64>>) -> Result<Vec<f64>, AttributionError> {
    let Some(first) = per_method.values().next() else {
        return Err(AttributionError::InvalidRequest("no method scores to average".into()));
    };
    let missing: Vec<&str> = Method::ALL
        .iter()
        .filter(|m| !per_method.contains_key(m))
        .map(|m| m.as_str())
        .collect();
    if !missing.is_empty() {
        log::warn!("averaging without {}", missing.join(", "));
    }
    let n = first.len();
    let mut mean = vec![0.0; n];
    for v in per_method.values() {
        if v.len() != n {
            return Err(AttributionError::Schema("method vectors differ in length".into()));
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let k = per_method.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    Ok(l1_normalize(&mean))
}

/// Default threshold: half the uniform share.
pub fn default_tau(n: usize) -> f64 {
    1.0 / (2.0 * n as f64)
}

/// (mean, population std, max, min, fraction of scores at or above `tau`).
pub fn descriptor(scores: &[f64], tau: f64) -> [f64; 5] {
    if scores.is_empty() {
        return [0.0; 5];
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let above = scores.iter().filter(|&&s| s >= tau).count() as f64 / n;
    [mean, var.sqrt(), max, min, above]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionProfile {
    pub words: Vec<String>,
    pub per_method: BTreeMap<Method, Vec<f64>>,
    pub averaged: Vec<f64>,
    pub descriptor: [f64; 5],
    pub tau: f64,
    /// Share of token attribution mass that landed on words.
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileOptions {
    pub signed: bool,
    /// Fixed threshold; when absent it is `1/(2n)` for an `n`-word text.
    pub tau: Option<f64>,
}

/// Turns validated token attributions into a word-level profile for `text`.
pub fn build_profile(
    text: &str,
    attrs: &TokenAttributions,
    opts: ProfileOptions,
) -> Result<AttributionProfile, AttributionError> {
    let words: Vec<String> = tokenize(text)
        .map_err(|_| AttributionError::EmptyText)?
        .surfaces()
        .into_iter()
        .map(String::from)
        .collect();
    let mut per_method = BTreeMap::new();
    let mut aligned = 0.0;
    let mut total = 0.0;
    for (&m, scores) in &attrs.scores {
        let ws = aggregate_to_words(&attrs.tokens, scores, &words, opts.signed)?;
        let mass: f64 = scores.iter().map(|s| s.abs()).sum();
        total += mass;
        aligned += mass - ws.unaligned_mass;
        per_method.insert(m, ws.scores);
    }
    let averaged = average_methods(&per_method)?;
    let tau = opts.tau.unwrap_or_else(|| default_tau(words.len()));
    Ok(AttributionProfile {
        descriptor: descriptor(&averaged, tau),
        coverage: if total > 0.0 { aligned / total } else { 1.0 },
        words,
        per_method,
        averaged,
        tau,
    })
}

/// Fetches attributions for `req.text` and builds its profile.
pub fn attribution_profile(
    provider: &dyn AttributionProvider,
    req: &AttributionRequest,
    opts: ProfileOptions,
) -> Result<AttributionProfile, AttributionError> {
    let attrs = fetch_attribution(provider, req)?;
    build_profile(&req.text, &attrs, opts)
}

//! Where paraphrase candidates come from.
//!
//! Wire contract: `POST /v1/paraphrase` with `{prompt, n}` answering `{candidates: [..]}`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::json;

use crate::provider::{endpoint, ProviderError, SharedTransport};

pub const PARAPHRASE_PATH: &str = "/v1/paraphrase";

pub trait ParaphraseSource: Send + Sync {
    fn candidates(&self, prompt: &str, n: usize) -> Result<Vec<String>, ProviderError>;
}

/// A fixed list, returned regardless of the prompt.
#[derive(Debug, Clone, Default)]
pub struct StaticParaphrases(pub Vec<String>);

impl ParaphraseSource for StaticParaphrases {
    fn candidates(&self, _prompt: &str, n: usize) -> Result<Vec<String>, ProviderError> {
        Ok(self.0.iter().take(n).cloned().collect())
    }
}

/// One candidate per non-empty line of a text file, or a JSON array of strings.
#[derive(Debug, Clone)]
pub struct FileParaphrases {
    path: PathBuf,
}

impl FileParaphrases {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub(crate) fn parse_candidates(text: &str) -> Result<Vec<String>, String> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str::<Vec<String>>(text).map_err(|e| e.to_string());
    }
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

impl ParaphraseSource for FileParaphrases {
    fn candidates(&self, _prompt: &str, n: usize) -> Result<Vec<String>, ProviderError> {
        let text = std::fs::read_to_string(&self.path)
            .map_err(|e| ProviderError::Fixture(format!("{}: {e}", self.path.display())))?;
        let mut all = parse_candidates(&text)
            .map_err(|e| ProviderError::Fixture(format!("{}: {e}", self.path.display())))?;
        all.truncate(n);
        Ok(all)
    }
}

pub struct HttpParaphrase {
    transport: SharedTransport,
    url: String,
}

impl HttpParaphrase {
    pub fn new(transport: SharedTransport, base_url: &str) -> Self {
        Self {
            transport,
            url: endpoint(base_url, PARAPHRASE_PATH),
        }
    }
}

#[derive(Deserialize)]
struct ParaphraseResponse {
    candidates: Vec<String>,
}

impl ParaphraseSource for HttpParaphrase {
    fn candidates(&self, prompt: &str, n: usize) -> Result<Vec<String>, ProviderError> {
        let resp = self
            .transport
            .post_json(&self.url, &json!({ "prompt": prompt, "n": n }))?;
        let parsed: ParaphraseResponse = serde_json::from_value(resp)
            .map_err(|e| ProviderError::Schema(format!("paraphrase response: {e}")))?;
        if parsed.candidates.len() > n {
            log::warn!(
                "paraphrase provider returned {} candidates for n={n}; truncating",
                parsed.candidates.len()
            );
        }
        Ok(parsed.candidates.into_iter().take(n).collect())
    }
}

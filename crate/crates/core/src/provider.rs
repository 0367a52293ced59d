//! JSON-over-HTTP transport shared by every remote provider.
//!
//! Providers never talk to the network directly; they hold an `Arc<dyn Transport>`. This
//! lets the pipeline wrap the live transport in a response cache, and lets tests swap in a
//! transport that fails on any call to prove a run made no network requests.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::Value;

/// Version of the wire schemas spoken with remote providers. Part of every cache key.
pub const WIRE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("request to {url} failed: {message}")]
    Network { url: String, message: String },
    #[error("{url} answered with HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("cannot decode response from {url}: {message}")]
    Decode { url: String, message: String },
    #[error("network access is disabled (attempted {url})")]
    Disabled { url: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("response violates the wire schema: {0}")]
    Schema(String),
    #[error("{0}")]
    Fixture(String),
}

pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError>;
}

/// Blocking HTTP transport backed by `ureq`.
pub struct HttpTransport {
    agent: ureq::Agent,
    bearer: Option<String>,
}

impl HttpTransport {
    pub fn new(timeout: Duration, bearer: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, bearer }
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        let mut req = self
            .agent
            .post(url)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| TransportError::Network {
            url: url.to_string(),
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TransportError::Status {
                url: url.to_string(),
                status,
            });
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| TransportError::Decode {
                url: url.to_string(),
                message: e.to_string(),
            })
    }
}

impl HttpTransport {
    pub fn get_json(&self, url: &str) -> Result<Value, TransportError> {
        let mut req = self.agent.get(url);
        if let Some(token) = &self.bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.call().map_err(|e| TransportError::Network {
            url: url.to_string(),
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TransportError::Status {
                url: url.to_string(),
                status,
            });
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| TransportError::Decode {
                url: url.to_string(),
                message: e.to_string(),
            })
    }
}

pub const HEALTH_PATH: &str = "/v1/health";

/// `GET /v1/health`; the service is healthy when it answers `{"status": "ok", ...}`.
pub fn check_health(transport: &HttpTransport, base_url: &str) -> Result<Value, ProviderError> {
    let body = transport.get_json(&endpoint(base_url, HEALTH_PATH))?;
    match body.get("status").and_then(Value::as_str) {
        Some("ok") => Ok(body),
        Some(other) => Err(ProviderError::Schema(format!("service reports status {other:?}"))),
        None => Err(ProviderError::Schema("health response lacks \"status\"".into())),
    }
}

/// Transport that refuses every request and counts the attempts.
#[derive(Debug, Default)]
pub struct DisabledTransport {
    attempts: AtomicUsize,
}

impl DisabledTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl Transport for DisabledTransport {
    fn post_json(&self, url: &str, _body: &Value) -> Result<Value, TransportError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Disabled {
            url: url.to_string(),
        })
    }
}

/// Joins a base URL and an endpoint path without doubling slashes.
pub fn endpoint(base: &str, path: &str) -> String {
    format!(
        "{}/{}",
        base.trim_end_matches('/'),
        path.trim_start_matches('/')
    )
}

/// Applies `f` to every item with at most `bound` calls in flight. Output order matches input.
pub fn bounded_map<T, R, F>(items: &[T], bound: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let bound = bound.max(1);
    if bound == 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let mut out = Vec::with_capacity(items.len());
    for batch in items.chunks(bound) {
        let results: Vec<R> = std::thread::scope(|s| {
            let handles: Vec<_> = batch.iter().map(|item| s.spawn(|| f(item))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("provider worker panicked"))
                .collect()
        });
        out.extend(results);
    }
    out
}

pub type SharedTransport = Arc<dyn Transport>;

impl Transport for SharedTransport {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        (**self).post_json(url, body)
    }
}

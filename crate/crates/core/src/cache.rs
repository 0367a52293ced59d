//! On-disk cache for provider responses.
//!
//! Entries are keyed by the SHA-256 of the canonical JSON of the request record (keys sorted,
//! no whitespace) together with the wire schema version. Each schema version lives in its
//! own directory, so a version bump never reads stale entries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::provider::{Transport, TransportError};

/// Serializes `value` with object keys sorted recursively and no insignificant whitespace.
pub fn canonical_json(value: &Value) -> String {
    fn sort(v: &Value) -> Value {
        match v {
            Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                let mut out = Map::new();
                for k in keys {
                    out.insert(k.clone(), sort(&map[k]));
                }
                Value::Object(out)
            }
            Value::Array(items) => Value::Array(items.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    // serde_json writes maps in insertion order, which is now sorted
    serde_json::to_string(&sort(value)).expect("JSON values always serialize")
}

pub fn cache_key(schema_version: u32, material: &Value) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("sca-cache-v{schema_version}\n").as_bytes());
    hasher.update(canonical_json(material).as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
    schema_version: u32,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>, schema_version: u32) -> Self {
        Self {
            root: root.into(),
            schema_version,
        }
    }

    fn dir(&self) -> PathBuf {
        self.root.join(format!("v{}", self.schema_version))
    }

    fn path_for(&self, material: &Value) -> PathBuf {
        self.dir()
            .join(format!("{}.json", cache_key(self.schema_version, material)))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Returns the cached response, treating unreadable or corrupt entries as misses.
    pub fn get(&self, material: &Value) -> Option<Value> {
        let path = self.path_for(material);
        let bytes = fs::read(&path).ok()?;
        match serde_json::from_slice::<Value>(&bytes) {
            Ok(Value::Object(mut entry)) => match (entry.remove("request"), entry.remove("response")) {
                (Some(req), Some(resp)) if canonical_json(&req) == canonical_json(material) => {
                    Some(resp)
                }
                _ => {
                    log::warn!("cache entry {} does not match its key; ignoring", path.display());
                    None
                }
            },
            _ => {
                log::warn!("corrupt cache entry {}; ignoring", path.display());
                None
            }
        }
    }

    pub fn put(&self, material: &Value, response: &Value) -> std::io::Result<()> {
        let dir = self.dir();
        fs::create_dir_all(&dir)?;
        let path = self.path_for(material);
        let entry = serde_json::json!({ "request": material, "response": response });
        // write-then-rename keeps readers from seeing partial files
        let mut tmp = tempfile_in(&dir)?;
        tmp.1.write_all(canonical_json(&entry).as_bytes())?;
        tmp.1.sync_all()?;
        drop(tmp.1);
        fs::rename(&tmp.0, &path)
    }
}

fn tempfile_in(dir: &Path) -> std::io::Result<(PathBuf, fs::File)> {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let n = COUNTER.fetch_add(1, Ordering::SeqCst);
    let path = dir.join(format!(".tmp-{}-{n}", std::process::id()));
    let file = fs::File::create(&path)?;
    Ok((path, file))
}

/// Transport decorator that answers repeated requests from a [`ResponseCache`].
pub struct CachingTransport<T> {
    inner: T,
    cache: ResponseCache,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl<T: Transport> CachingTransport<T> {
    pub fn new(inner: T, cache: ResponseCache) -> Self {
        Self {
            inner,
            cache,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }
}

impl<T: Transport> Transport for CachingTransport<T> {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        let material = serde_json::json!({ "url": url, "body": body });
        if let Some(hit) = self.cache.get(&material) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let response = self.inner.post_json(url, body)?;
        if let Err(e) = self.cache.put(&material, &response) {
            log::warn!("cannot write cache entry: {e}");
        }
        Ok(response)
    }
}

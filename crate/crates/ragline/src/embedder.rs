//! Text-to-vector conversion via a remote embeddings endpoint or a
//! deterministic local hash embedder.
//!
//! The hash embedder exists because the production embedder is a paid
//! remote service: every pipeline invariant must be testable offline, so a
//! seeded feature-hashing scheme (unigrams and bigrams of lowercased
//! alphanumeric tokens, signed by one hash bit) stands in. Both providers
//! answer through [`embed_batch`]; which one produced a vector is captured
//! by the config's `fingerprint`, and stores refuse queries from a
//! different fingerprint (see the retriever).
//!
//! Remote requests go out in sub-batches of 64 with up to 4 in flight and
//! bounded retries; outputs are reassembled in input order.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fnv::fnv1a64;
use crate::remote::{self, RemoteError, RetryPolicy};

/// Texts per remote request.
const SUB_BATCH: usize = 64;
/// Remote sub-batch requests in flight at once.
const MAX_IN_FLIGHT: usize = 4;
/// Inputs longer than this (in chars) are forwarded anyway but flagged,
/// since the service will silently truncate them.
const LONG_INPUT_WARN: usize = 8000;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no texts to embed")]
    EmptyInput,
    #[error("invalid embedder config: {0}")]
    Config(String),
    #[error("missing API key: set {}", remote::API_KEY_VAR)]
    MissingApiKey,
    #[error("embedding service error: {0}")]
    Service(RemoteError),
    #[error("dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed embedding response: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<RemoteError> for EmbedError {
    fn from(err: RemoteError) -> Self {
        match err {
            RemoteError::MissingApiKey => EmbedError::MissingApiKey,
            RemoteError::Malformed(m) => EmbedError::Malformed(m),
            other => EmbedError::Service(other),
        }
    }
}

/// A fixed-dimension vector of finite 32-bit floats. Serializes as a bare
/// JSON array so records stay readable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Euclidean norm, accumulated in f64 for stability.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderProvider {
    Remote,
    Hash,
}

/// Which embedder to use and how it is parameterized.
///
/// `fingerprint()` condenses every embedding-relevant field; `base_url` is
/// transport, not identity, so two deployments of the same remote model
/// fingerprint identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub provider: EmbedderProvider,
    #[serde(default)]
    pub model_id: String,
    pub dim: usize,
    #[serde(default = "default_normalize")]
    pub normalize: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
}

fn default_normalize() -> bool {
    true
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            provider: EmbedderProvider::Hash,
            model_id: String::new(),
            dim: 1536,
            normalize: true,
            seed: 0,
            base_url: None,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::Config("dim must be at least 1".into()));
        }
        if self.provider == EmbedderProvider::Remote {
            if self.model_id.is_empty() {
                return Err(EmbedError::Config("remote provider needs model_id".into()));
            }
            if self.base_url.as_deref().map_or(true, str::is_empty) {
                return Err(EmbedError::Config("remote provider needs base_url".into()));
            }
        }
        Ok(())
    }

    /// Stable identity of the embedding scheme. Equal fingerprints guarantee
    /// identical embeddings for identical text.
    pub fn fingerprint(&self) -> String {
        match self.provider {
            EmbedderProvider::Hash => format!(
                "hash:d{}:s{:016x}:{}",
                self.dim,
                self.seed,
                if self.normalize { "n1" } else { "n0" }
            ),
            EmbedderProvider::Remote => format!("remote:{}:d{}", self.model_id, self.dim),
        }
    }
}

/// Deterministic feature-hash embedding.
///
/// Tokens are maximal alphanumeric runs, lowercased; features are the
/// tokens plus adjacent-token bigrams. Each feature hashes (FNV-1a, xor
/// `seed`) to a coordinate `h mod dim`, contributing +1 or -1 by hash bit
/// 63; the result is L2-normalized on request unless it is the zero vector.
pub fn hash_embed(text: &str, dim: usize, seed: u64, normalize: bool) -> EmbeddingVector {
    assert!(dim >= 1, "hash_embed requires dim >= 1");
    let tokens: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();

    let mut values = vec![0.0f32; dim];
    let mut add = |feature: &str| {
        let h = fnv1a64(feature.as_bytes()) ^ seed;
        let index = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        values[index] += sign;
    };
    for token in &tokens {
        add(token);
    }
    for pair in tokens.windows(2) {
        add(&format!("{} {}", pair[0], pair[1]));
    }

    let mut vector = EmbeddingVector { values };
    if normalize {
        let norm = vector.l2_norm();
        if norm > 0.0 {
            for v in &mut vector.values {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
    }
    vector
}

/// Embed `texts` in order with the configured provider.
pub fn embed_batch(
    texts: &[String],
    config: &EmbedderConfig,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    embed_batch_with_policy(texts, config, &RetryPolicy::default())
}

/// [`embed_batch`] with an explicit retry schedule for the remote provider.
pub fn embed_batch_with_policy(
    texts: &[String],
    config: &EmbedderConfig,
    policy: &RetryPolicy,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    config.validate()?;
    if texts.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    for text in texts {
        let units = text.chars().count();
        if units > LONG_INPUT_WARN {
            log::warn!("input of {units} chars exceeds {LONG_INPUT_WARN}; the service may truncate it");
        }
    }
    match config.provider {
        EmbedderProvider::Hash => Ok(texts
            .iter()
            .map(|t| hash_embed(t, config.dim, config.seed, config.normalize))
            .collect()),
        EmbedderProvider::Remote => embed_remote(texts, config, policy),
    }
}

fn embed_remote(
    texts: &[String],
    config: &EmbedderConfig,
    policy: &RetryPolicy,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let api_key = remote::api_key().map_err(EmbedError::from)?;
    let base_url = config.base_url.as_deref().expect("validated above");
    let url = format!("{}/embeddings", base_url.trim_end_matches('/'));
    let client = remote::http_client();

    let batches: Vec<&[String]> = texts.chunks(SUB_BATCH).collect();
    let slots: Vec<Mutex<Option<Result<Vec<EmbeddingVector>, EmbedError>>>> =
        batches.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..MAX_IN_FLIGHT.min(batches.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= batches.len() {
                    break;
                }
                let result = embed_sub_batch(&client, &url, &api_key, batches[i], config, policy);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut out = Vec::with_capacity(texts.len());
    for slot in slots {
        let result = slot.into_inner().unwrap().expect("every slot is filled");
        out.extend(result?);
    }
    Ok(out)
}

fn embed_sub_batch(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: &str,
    batch: &[String],
    config: &EmbedderConfig,
    policy: &RetryPolicy,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    #[derive(Deserialize)]
    struct Item {
        index: usize,
        embedding: Vec<f32>,
    }
    #[derive(Deserialize)]
    struct Reply {
        data: Vec<Item>,
    }

    let body = serde_json::json!({ "model": config.model_id, "input": batch });
    let reply = remote::post_json(client, url, api_key, &body, policy)?;
    let reply: Reply = serde_json::from_value(reply)
        .map_err(|e| EmbedError::Malformed(format!("embeddings reply: {e}")))?;
    if reply.data.len() != batch.len() {
        return Err(EmbedError::Malformed(format!(
            "expected {} embeddings, got {}",
            batch.len(),
            reply.data.len()
        )));
    }

    let mut out: Vec<Option<EmbeddingVector>> = vec![None; batch.len()];
    for item in reply.data {
        if item.embedding.len() != config.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: config.dim,
                got: item.embedding.len(),
            });
        }
        if !item.embedding.iter().all(|v| v.is_finite()) {
            return Err(EmbedError::Malformed("non-finite embedding value".into()));
        }
        let slot = out
            .get_mut(item.index)
            .ok_or_else(|| EmbedError::Malformed(format!("index {} out of range", item.index)))?;
        if slot.is_some() {
            return Err(EmbedError::Malformed(format!(
                "duplicate index {}",
                item.index
            )));
        }
        *slot = Some(EmbeddingVector {
            values: item.embedding,
        });
    }
    out.into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| EmbedError::Malformed("missing embedding index".into()))
}

/// On-disk embedding cache: an append-only JSONL file keyed by
/// `(fingerprint, text hash)`. A file, not a service — it exists so
/// re-indexing an unchanged corpus does not re-bill the remote embedder.
pub struct EmbeddingCache {
    path: PathBuf,
    entries: HashMap<(String, u64), EmbeddingVector>,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    fingerprint: String,
    text_hash: u64,
    vector: EmbeddingVector,
}

impl EmbeddingCache {
    /// Open (or start) a cache file, loading existing entries.
    pub fn open(path: &Path) -> Result<Self, EmbedError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (line_no, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: CacheLine = serde_json::from_str(&line).map_err(|e| {
                    EmbedError::Malformed(format!("cache line {}: {e}", line_no + 1))
                })?;
                entries.insert((parsed.fingerprint, parsed.text_hash), parsed.vector);
            }
        }
        Ok(EmbeddingCache {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, fingerprint: &str, text: &str) -> Option<&EmbeddingVector> {
        self.entries
            .get(&(fingerprint.to_string(), fnv1a64(text.as_bytes())))
    }

    pub fn put(
        &mut self,
        fingerprint: &str,
        text: &str,
        vector: EmbeddingVector,
    ) -> Result<(), EmbedError> {
        let line = CacheLine {
            fingerprint: fingerprint.to_string(),
            text_hash: fnv1a64(text.as_bytes()),
            vector,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        serde_json::to_writer(&mut file, &line)
            .map_err(|e| EmbedError::Malformed(e.to_string()))?;
        file.write_all(b"\n")?;
        self.entries
            .insert((line.fingerprint, line.text_hash), line.vector);
        Ok(())
    }

    /// [`embed_batch`] that serves hits from the cache and stores misses.
    pub fn embed_batch_cached(
        &mut self,
        texts: &[String],
        config: &EmbedderConfig,
    ) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let fingerprint = config.fingerprint();
        let misses: Vec<String> = texts
            .iter()
            .filter(|t| self.get(&fingerprint, t).is_none())
            .cloned()
            .collect();
        if !misses.is_empty() {
            let vectors = embed_batch(&misses, config)?;
            for (text, vector) in misses.iter().zip(vectors) {
                self.put(&fingerprint, text, vector)?;
            }
        }
        Ok(texts
            .iter()
            .map(|t| self.get(&fingerprint, t).expect("just filled").clone())
            .collect())
    }
}

//! Retrieval agent: embed a query with the index's own embedder, take the
//! top-k records, and score retrieval quality against labeled cases.
//!
//! The agent adds nothing on top of the store — no re-ranking, no query
//! rewriting — so `retrieve(query).results` is exactly
//! `store.query(embed(query), k)`. What it does add is a safety check: the
//! query embedder's fingerprint must equal the fingerprint recorded in the
//! index manifest, otherwise vectors from different models would be
//! compared as if they shared a space.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedder::{embed_batch, EmbedError, EmbedderConfig};
use crate::vector_store::{Metric, QueryResult, StoreError, VectorStore};

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("embedder/index mismatch: query embedder is {query}, index was built with {index}")]
    FingerprintMismatch { query: String, index: String },
    #[error("retrieval config: k must be at least 1")]
    ZeroK,
    #[error("no evaluation cases")]
    NoCases,
    #[error("evaluation case {0}: relevant_doc_ids must be non-empty")]
    EmptyRelevantSet(usize),
    #[error("eval case line {line}: {message}")]
    BadCaseLine { line: usize, message: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How many chunks to retrieve and under which metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k: usize,
    pub metric: Metric,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k: 10,
            metric: Metric::Cosine,
        }
    }
}

/// A query with its ranked retrieved chunks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub query: String,
    pub results: Vec<QueryResult>,
    pub embedder_fingerprint: String,
    /// Set when the index had no records at all — retrieval "succeeded"
    /// but generation would run contextless.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_store: bool,
}

/// A labeled retrieval query: which documents count as relevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalEvalCase {
    pub query: String,
    pub relevant_doc_ids: Vec<String>,
}

/// Aggregate retrieval quality over a case set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub hit_rate_at_k: f64,
    pub mrr: f64,
    pub mean_top_score: f64,
}

/// Embed `query` and fetch the top-k chunks.
pub fn retrieve(
    query: &str,
    store: &VectorStore,
    embedder: &EmbedderConfig,
    config: &RetrievalConfig,
) -> Result<ContextBundle, RetrieveError> {
    if config.k == 0 {
        return Err(RetrieveError::ZeroK);
    }
    let fingerprint = embedder.fingerprint();
    if fingerprint != store.embedder_fingerprint() {
        return Err(RetrieveError::FingerprintMismatch {
            query: fingerprint,
            index: store.embedder_fingerprint().to_string(),
        });
    }

    let vector = embed_batch(&[query.to_string()], embedder)?
        .pop()
        .expect("one vector per input");
    let results = store.query_with_metric(&vector, config.k, config.metric, None)?;
    if store.is_empty() {
        log::warn!("retrieval against an empty index: no context available");
    }
    Ok(ContextBundle {
        query: query.to_string(),
        results,
        embedder_fingerprint: fingerprint,
        empty_store: store.is_empty(),
    })
}

/// Score retrieval over labeled cases.
///
/// `hit_rate_at_k`: fraction of cases whose top-k includes at least one
/// chunk from a relevant document. `mrr`: mean of 1/rank of the first
/// relevant chunk, 0 when absent. `mean_top_score`: mean of each case's
/// rank-1 score (0 for cases with no results).
pub fn evaluate_retrieval(
    cases: &[RetrievalEvalCase],
    store: &VectorStore,
    embedder: &EmbedderConfig,
    config: &RetrievalConfig,
) -> Result<RetrievalMetrics, RetrieveError> {
    if cases.is_empty() {
        return Err(RetrieveError::NoCases);
    }
    for (i, case) in cases.iter().enumerate() {
        if case.relevant_doc_ids.is_empty() {
            return Err(RetrieveError::EmptyRelevantSet(i + 1));
        }
    }

    let mut hits = 0usize;
    let mut reciprocal_ranks = 0.0;
    let mut top_scores = 0.0;
    for case in cases {
        let bundle = retrieve(&case.query, store, embedder, config)?;
        if let Some(first) = bundle.results.first() {
            top_scores += first.score;
        }
        let first_relevant = bundle.results.iter().position(|result| {
            result
                .metadata
                .get("doc_id")
                .is_some_and(|doc| case.relevant_doc_ids.iter().any(|want| want == doc))
        });
        if let Some(rank0) = first_relevant {
            hits += 1;
            reciprocal_ranks += 1.0 / (rank0 + 1) as f64;
        }
    }

    let n = cases.len() as f64;
    Ok(RetrievalMetrics {
        hit_rate_at_k: hits as f64 / n,
        mrr: reciprocal_ranks / n,
        mean_top_score: top_scores / n,
    })
}

/// Read eval cases from a JSON Lines file
/// (`{"query": ..., "relevant_doc_ids": [...]}` per line).
pub fn read_eval_cases(path: &Path) -> Result<Vec<RetrievalEvalCase>, RetrieveError> {
    let reader = BufReader::new(File::open(path)?);
    let mut cases = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let case: RetrievalEvalCase =
            serde_json::from_str(&line).map_err(|e| RetrieveError::BadCaseLine {
                line: line_no + 1,
                message: e.to_string(),
            })?;
        cases.push(case);
    }
    Ok(cases)
}

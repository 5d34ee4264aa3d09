//! End-to-end retrieval-augmented generation pipeline with a grading
//! statistics harness.
//!
//! The crate is organised as a chain of small, synchronous components:
//!
//! ```text
//! corpus    -- load documents, normalise text, page-aware extraction
//! chunker   -- recursive splitter with exact character spans
//! embedder  -- remote embeddings API client + deterministic hash embedder
//! vector_store -- exact (brute force) similarity search, disk persistence
//! retriever -- top-k retrieval and retrieval-quality metrics
//! generator -- prompt assembly and chat-completion providers
//! evaluator -- graded-answer aggregation, accuracy tables, model comparison
//! stats     -- Cohen's h, confidence intervals, 2x2 chi-square
//! ```
//!
//! Components talk through plain data types (`Document`, `Chunk`,
//! `EmbeddingVector`, `ScoredChunk`, ...), so each stage can be exercised or
//! replaced in isolation; the `ragline` binary wires them into commands.
//!
//! Nothing here spawns a runtime or a server: remote calls use a blocking
//! HTTP client and CPU-bound stages use scoped threads where it pays off.

pub mod chunker;
pub mod corpus;
pub mod embedder;
pub mod evaluator;
mod fnv;
pub mod generator;
pub mod remote;
pub mod retriever;
pub mod stats;
pub mod vector_store;

pub use fnv::fnv1a64;

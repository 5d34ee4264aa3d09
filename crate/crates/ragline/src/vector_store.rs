//! Exact in-process vector index: a flat record list scanned brute-force.
//!
//! With a corpus of a few dozen documents there is nothing to gain from
//! approximate structures, so every query scores every record and the
//! results are exact and reproducible. Three metrics are supported;
//! euclidean results are exposed as *negated* distance so all metrics sort
//! by "larger is better" through one code path. Ties break by ascending id
//! to keep golden tests stable.
//!
//! Persistence is a directory holding `manifest.json` (dimensions, metric,
//! count, embedder fingerprint, records-file checksum) and `records.jsonl`
//! (one record per line; f32 values round-trip exactly through their JSON
//! decimal form). The manifest is written after the records, so a torn
//! write is caught as a checksum or count mismatch at load time.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedder::EmbeddingVector;
use crate::fnv::fnv1a64;

/// Current on-disk format version.
pub const STORE_VERSION: u32 = 1;

const MANIFEST_FILE: &str = "manifest.json";
const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("dimension mismatch for {id:?} (expected {expected}, got {got})")]
    RecordDimMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("dimension mismatch (expected {expected}, got {got})")]
    DimMismatch { expected: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("unsupported index version {0} (this build reads version {STORE_VERSION})")]
    UnsupportedVersion(u32),
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Similarity metric. Cosine is the default throughout the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
    Dot,
}

/// An embedded chunk: id, vector, flat string metadata (title, page_no,
/// doc_id, guideline_no), and the original text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub id: String,
    pub vector: EmbeddingVector,
    pub metadata: BTreeMap<String, String>,
    pub text: String,
}

/// Index identity and shape, persisted alongside the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub version: u32,
    pub dim: usize,
    pub metric: Metric,
    pub count: usize,
    pub embedder_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct DiskManifest {
    #[serde(flatten)]
    manifest: StoreManifest,
    records_checksum: u64,
}

/// One ranked hit. `score` is similarity for cosine/dot and negated
/// distance for euclidean, so larger is always better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub id: String,
    pub score: f64,
    pub metadata: BTreeMap<String, String>,
    pub text: String,
}

/// Exact-match metadata predicate: a record passes if every listed key has
/// exactly the listed value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetadataFilter(pub BTreeMap<String, String>);

impl MetadataFilter {
    pub fn matches(&self, metadata: &BTreeMap<String, String>) -> bool {
        self.0
            .iter()
            .all(|(key, want)| metadata.get(key) == Some(want))
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Raw metric value: cosine similarity (0 when either norm is 0, so
/// empty-text embeddings neither crash nor outrank real matches),
/// euclidean *distance*, or dot product.
pub fn similarity(
    a: &EmbeddingVector,
    b: &EmbeddingVector,
    metric: Metric,
) -> Result<f64, StoreError> {
    if a.dim() != b.dim() {
        return Err(StoreError::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(match metric {
        Metric::Cosine => {
            let norm_a = a.l2_norm();
            let norm_b = b.l2_norm();
            if norm_a == 0.0 || norm_b == 0.0 {
                0.0
            } else {
                dot(&a.values, &b.values) / (norm_a * norm_b)
            }
        }
        Metric::Euclidean => a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| {
                let d = f64::from(x) - f64::from(y);
                d * d
            })
            .sum::<f64>()
            .sqrt(),
        Metric::Dot => dot(&a.values, &b.values),
    })
}

/// Ranking score under `metric` (euclidean distance negated).
fn score(query: &EmbeddingVector, record: &EmbeddingVector, metric: Metric) -> f64 {
    let value = similarity(query, record, metric).expect("dims pre-checked by caller");
    match metric {
        Metric::Euclidean => -value,
        _ => value,
    }
}

/// Flat exact vector index.
#[derive(Debug)]
pub struct VectorStore {
    dim: usize,
    metric: Metric,
    embedder_fingerprint: String,
    records: Vec<VectorRecord>,
    index_of: HashMap<String, usize>,
}

impl VectorStore {
    pub fn new(dim: usize, metric: Metric, embedder_fingerprint: impl Into<String>) -> Self {
        VectorStore {
            dim,
            metric,
            embedder_fingerprint: embedder_fingerprint.into(),
            records: Vec::new(),
            index_of: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn embedder_fingerprint(&self) -> &str {
        &self.embedder_fingerprint
    }

    pub fn manifest(&self) -> StoreManifest {
        StoreManifest {
            version: STORE_VERSION,
            dim: self.dim,
            metric: self.metric,
            count: self.records.len(),
            embedder_fingerprint: self.embedder_fingerprint.clone(),
        }
    }

    /// Insert records, replacing any with the same id. All-or-nothing: a
    /// dimension mismatch anywhere rejects the whole batch. Returns how
    /// many records were applied.
    pub fn upsert(&mut self, records: Vec<VectorRecord>) -> Result<usize, StoreError> {
        for record in &records {
            if record.vector.dim() != self.dim {
                return Err(StoreError::RecordDimMismatch {
                    id: record.id.clone(),
                    expected: self.dim,
                    got: record.vector.dim(),
                });
            }
        }
        let applied = records.len();
        for record in records {
            match self.index_of.get(&record.id) {
                Some(&slot) => self.records[slot] = record,
                None => {
                    self.index_of.insert(record.id.clone(), self.records.len());
                    self.records.push(record);
                }
            }
        }
        Ok(applied)
    }

    /// Top-k under the store's configured metric.
    pub fn query(
        &self,
        q: &EmbeddingVector,
        k: usize,
        filter: Option<&MetadataFilter>,
    ) -> Result<Vec<QueryResult>, StoreError> {
        self.query_with_metric(q, k, self.metric, filter)
    }

    /// Top-k under an explicit metric: the `k` highest-scoring records that
    /// pass `filter`, sorted by score descending then id ascending. Fewer
    /// than `k` results means fewer candidates existed; an empty store
    /// yields an empty list.
    pub fn query_with_metric(
        &self,
        q: &EmbeddingVector,
        k: usize,
        metric: Metric,
        filter: Option<&MetadataFilter>,
    ) -> Result<Vec<QueryResult>, StoreError> {
        if k == 0 {
            return Err(StoreError::ZeroK);
        }
        if q.dim() != self.dim {
            return Err(StoreError::DimMismatch {
                expected: self.dim,
                got: q.dim(),
            });
        }
        let mut scored: Vec<(f64, &VectorRecord)> = self
            .records
            .iter()
            .filter(|r| filter.is_none_or(|f| f.matches(&r.metadata)))
            .map(|r| (score(q, &r.vector, metric), r))
            .collect();
        scored.sort_by(|(sa, ra), (sb, rb)| {
            sb.partial_cmp(sa)
                .expect("scores are finite")
                .then_with(|| ra.id.cmp(&rb.id))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(score, record)| QueryResult {
                id: record.id.clone(),
                score,
                metadata: record.metadata.clone(),
                text: record.text.clone(),
            })
            .collect())
    }

    /// Persist to `dir` as `records.jsonl` + `manifest.json`.
    ///
    /// Each file lands via a temp-file rename, manifest last, so a crash
    /// mid-save leaves either the old index or a detectably corrupt one,
    /// never a silently wrong one.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir)?;

        let mut records_bytes = Vec::new();
        for record in &self.records {
            serde_json::to_writer(&mut records_bytes, record)
                .map_err(|e| StoreError::CorruptIndex(format!("serialize record: {e}")))?;
            records_bytes.push(b'\n');
        }
        write_atomically(&dir.join(RECORDS_FILE), &records_bytes)?;

        let disk = DiskManifest {
            manifest: self.manifest(),
            records_checksum: fnv1a64(&records_bytes),
        };
        let manifest_bytes = serde_json::to_vec_pretty(&disk)
            .map_err(|e| StoreError::CorruptIndex(format!("serialize manifest: {e}")))?;
        write_atomically(&dir.join(MANIFEST_FILE), &manifest_bytes)?;
        Ok(())
    }

    /// Load a store saved by [`VectorStore::save`]. Verifies version,
    /// records checksum, record count, dimensions, and id uniqueness.
    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let manifest_bytes = fs::read(dir.join(MANIFEST_FILE))?;
        let disk: DiskManifest = serde_json::from_slice(&manifest_bytes)
            .map_err(|e| StoreError::CorruptIndex(format!("manifest: {e}")))?;
        if disk.manifest.version != STORE_VERSION {
            return Err(StoreError::UnsupportedVersion(disk.manifest.version));
        }

        let records_bytes = fs::read(dir.join(RECORDS_FILE))?;
        if fnv1a64(&records_bytes) != disk.records_checksum {
            return Err(StoreError::CorruptIndex(
                "records file checksum mismatch".into(),
            ));
        }

        let mut store = VectorStore::new(
            disk.manifest.dim,
            disk.manifest.metric,
            disk.manifest.embedder_fingerprint,
        );
        for (line_no, line) in records_bytes.split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let record: VectorRecord = serde_json::from_slice(line)
                .map_err(|e| StoreError::CorruptIndex(format!("record line {}: {e}", line_no + 1)))?;
            if record.vector.dim() != store.dim {
                return Err(StoreError::CorruptIndex(format!(
                    "record {:?} has dim {}, manifest says {}",
                    record.id,
                    record.vector.dim(),
                    store.dim
                )));
            }
            if store.index_of.contains_key(&record.id) {
                return Err(StoreError::CorruptIndex(format!(
                    "duplicate record id {:?}",
                    record.id
                )));
            }
            store.index_of.insert(record.id.clone(), store.records.len());
            store.records.push(record);
        }
        if store.records.len() != disk.manifest.count {
            return Err(StoreError::CorruptIndex(format!(
                "manifest count {} but {} records present",
                disk.manifest.count,
                store.records.len()
            )));
        }
        Ok(store)
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vec2(x: f32, y: f32) -> EmbeddingVector {
        EmbeddingVector { values: vec![x, y] }
    }

    fn record(id: &str, vector: EmbeddingVector) -> VectorRecord {
        VectorRecord {
            id: id.into(),
            vector,
            metadata: BTreeMap::new(),
            text: format!("text of {id}"),
        }
    }

    #[test]
    fn upsert_counts_and_replaces() {
        let mut store = VectorStore::new(2, Metric::Cosine, "fp");
        let applied = store
            .upsert(vec![
                record("a", vec2(1.0, 0.0)),
                record("b", vec2(0.0, 1.0)),
                record("c", vec2(1.0, 1.0)),
            ])
            .unwrap();
        assert_eq!(applied, 3);
        assert_eq!(store.len(), 3);

        store.upsert(vec![record("a", vec2(0.5, 0.5))]).unwrap();
        assert_eq!(store.len(), 1 + 2, "replacement must not grow the store");
        let top = store.query(&vec2(1.0, 1.0), 1, None).unwrap();
        assert_eq!(top[0].id, "a", "latest vector wins");
    }

    #[test]
    fn upsert_rejects_wrong_dims_naming_the_id() {
        let mut store = VectorStore::new(1536, Metric::Cosine, "fp");
        let bad = VectorRecord {
            id: "tiny".into(),
            vector: EmbeddingVector::zeros(8),
            metadata: BTreeMap::new(),
            text: String::new(),
        };
        let err = store.upsert(vec![bad]).unwrap_err();
        assert!(err.to_string().contains("tiny"));
        assert_eq!(store.len(), 0);
    }

    #[test]
    fn similarity_worked_examples() {
        assert_eq!(
            similarity(&vec2(1.0, 0.0), &vec2(0.0, 1.0), Metric::Cosine).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            similarity(&vec2(1.0, 2.0), &vec2(2.0, 4.0), Metric::Cosine).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let v = vec2(3.0, -4.0);
        assert_eq!(similarity(&v, &v, Metric::Euclidean).unwrap(), 0.0);
        assert_eq!(
            similarity(&vec2(1.0, 2.0), &vec2(3.0, 4.0), Metric::Dot).unwrap(),
            11.0
        );
    }

    #[test]
    fn zero_norm_cosine_is_zero_not_nan() {
        let zero = EmbeddingVector::zeros(2);
        assert_eq!(similarity(&zero, &vec2(1.0, 0.0), Metric::Cosine).unwrap(), 0.0);
        assert_eq!(similarity(&zero, &zero, Metric::Cosine).unwrap(), 0.0);
    }

    #[test]
    fn similarity_rejects_mismatched_dims() {
        let err = similarity(
            &vec2(1.0, 0.0),
            &EmbeddingVector::zeros(3),
            Metric::Dot,
        )
        .unwrap_err();
        assert!(matches!(err, StoreError::DimMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn query_ranks_by_cosine() {
        let mut store = VectorStore::new(2, Metric::Cosine, "fp");
        store
            .upsert(vec![
                record("e1", vec2(1.0, 0.0)),
                record("e2", vec2(0.0, 1.0)),
                record("e3", vec2(0.6, 0.8)),
            ])
            .unwrap();
        let results = store.query(&vec2(1.0, 0.0), 2, None).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].id, "e1");
        assert_abs_diff_eq!(results[0].score, 1.0, epsilon = 1e-12);
        assert_eq!(results[1].id, "e3");
        assert_abs_diff_eq!(results[1].score, 0.6, epsilon = 1e-6);
    }

    #[test]
    fn query_edge_cases() {
        let mut store = VectorStore::new(2, Metric::Cosine, "fp");
        assert!(store.query(&vec2(1.0, 0.0), 5, None).unwrap().is_empty());

        store
            .upsert(vec![record("a", vec2(1.0, 0.0)), record("b", vec2(0.0, 1.0))])
            .unwrap();
        assert_eq!(store.query(&vec2(1.0, 0.0), 10, None).unwrap().len(), 2);

        let err = store.query(&EmbeddingVector::zeros(3), 1, None).unwrap_err();
        assert!(matches!(err, StoreError::DimMismatch { .. }));
        assert!(matches!(
            store.query(&vec2(1.0, 0.0), 0, None),
            Err(StoreError::ZeroK)
        ));
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let mut store = VectorStore::new(2, Metric::Cosine, "fp");
        store
            .upsert(vec![
                record("zeta", vec2(1.0, 0.0)),
                record("alpha", vec2(2.0, 0.0)),
                record("mid", vec2(3.0, 0.0)),
            ])
            .unwrap();
        let ids: Vec<String> = store
            .query(&vec2(1.0, 0.0), 3, None)
            .unwrap()
            .into_iter()
            .map(|r| r.id)
            .collect();
        assert_eq!(ids, vec!["alpha", "mid", "zeta"]);
    }

    #[test]
    fn euclidean_scores_are_negated_distance() {
        let mut store = VectorStore::new(2, Metric::Euclidean, "fp");
        store
            .upsert(vec![record("near", vec2(1.0, 0.0)), record("far", vec2(5.0, 0.0))])
            .unwrap();
        let results = store.query(&vec2(0.0, 0.0), 2, None).unwrap();
        assert_eq!(results[0].id, "near");
        assert_eq!(results[0].score, -1.0);
        assert_eq!(results[1].score, -5.0);
    }

    #[test]
    fn metadata_filter_restricts_candidates() {
        let mut store = VectorStore::new(2, Metric::Cosine, "fp");
        let with_page = |id: &str, page: &str, v: EmbeddingVector| {
            let mut r = record(id, v);
            r.metadata.insert("page_no".into(), page.into());
            r
        };
        store
            .upsert(vec![
                with_page("a", "1", vec2(1.0, 0.0)),
                with_page("b", "2", vec2(1.0, 0.1)),
            ])
            .unwrap();

        let filter = MetadataFilter(BTreeMap::from([("page_no".into(), "2".into())]));
        let results = store.query(&vec2(1.0, 0.0), 5, Some(&filter)).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].id, "b");

        let missing = MetadataFilter(BTreeMap::from([("page_no".into(), "3".into())]));
        assert!(store.query(&vec2(1.0, 0.0), 5, Some(&missing)).unwrap().is_empty());
    }

    #[test]
    fn scaling_the_query_preserves_ranking() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store_cos = VectorStore::new(4, Metric::Cosine, "fp");
        let mut store_dot = VectorStore::new(4, Metric::Dot, "fp");
        for i in 0..50 {
            let v = EmbeddingVector {
                values: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            store_cos.upsert(vec![record(&format!("r{i:02}"), v.clone())]).unwrap();
            store_dot.upsert(vec![record(&format!("r{i:02}"), v)]).unwrap();
        }
        let q = EmbeddingVector {
            values: vec![0.3, -0.7, 0.2, 0.9],
        };
        let scaled = EmbeddingVector {
            values: q.values.iter().map(|v| v * 7.5).collect(),
        };
        for store in [&store_cos, &store_dot] {
            let base: Vec<String> = store
                .query(&q, 50, None)
                .unwrap()
                .into_iter()
                .map(|r| r.id)
                .collect();
            let after: Vec<String> = store
                .query(&scaled, 50, None)
                .unwrap()
                .into_iter()
                .map(|r| r.id)
                .collect();
            assert_eq!(base, after);
        }
    }

    #[test]
    fn cosine_scores_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let a = EmbeddingVector {
                values: (0..8).map(|_| rng.gen_range(-10.0..10.0)).collect(),
            };
            let b = EmbeddingVector {
                values: (0..8).map(|_| rng.gen_range(-10.0..10.0)).collect(),
            };
            let c = similarity(&a, &b, Metric::Cosine).unwrap();
            assert!((-1.0 - 1e-6..=1.0 + 1e-6).contains(&c), "cosine {c} out of range");
        }
    }

    #[test]
    fn save_load_round_trip_preserves_queries_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut store = VectorStore::new(8, Metric::Cosine, "fingerprint-x");
        for i in 0..100 {
            let mut r = record(&format!("rec{i:03}"), EmbeddingVector {
                values: (0..8).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
            });
            r.metadata.insert("doc_id".into(), format!("doc{}", i % 7));
            store.upsert(vec![r]).unwrap();
        }

        let dir = tempfile::tempdir().unwrap();
        let index_dir = dir.path().join("index");
        store.save(&index_dir).unwrap();
        let loaded = VectorStore::load(&index_dir).unwrap();

        assert_eq!(loaded.manifest(), store.manifest());
        for metric in [Metric::Cosine, Metric::Euclidean, Metric::Dot] {
            for _ in 0..20 {
                let q = EmbeddingVector {
                    values: (0..8).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
                };
                let a = store.query_with_metric(&q, 10, metric, None).unwrap();
                let b = loaded.query_with_metric(&q, 10, metric, None).unwrap();
                assert_eq!(a, b, "round-trip must be score-exact");
            }
        }
    }

    #[test]
    fn rebuilding_over_an_existing_directory_replaces_it() {
        let dir = tempfile::tempdir().unwrap();
        let index_dir = dir.path().join("index");

        let mut first = VectorStore::new(2, Metric::Cosine, "fp");
        first.upsert(vec![record("old", vec2(1.0, 0.0))]).unwrap();
        first.save(&index_dir).unwrap();

        let mut second = VectorStore::new(2, Metric::Cosine, "fp");
        second.upsert(vec![record("new", vec2(0.0, 1.0))]).unwrap();
        second.save(&index_dir).unwrap();

        let loaded = VectorStore::load(&index_dir).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded.query(&vec2(0.0, 1.0), 1, None).unwrap()[0].id, "new");
    }

    #[test]
    fn load_rejects_missing_and_corrupt_indexes() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            VectorStore::load(&dir.path().join("nope")),
            Err(StoreError::Io(_))
        ));

        let index_dir = dir.path().join("index");
        let mut store = VectorStore::new(2, Metric::Cosine, "fp");
        store.upsert(vec![record("a", vec2(1.0, 0.0))]).unwrap();
        store.save(&index_dir).unwrap();

        // Tamper with the records file: checksum must catch it.
        let records_path = index_dir.join("records.jsonl");
        let mut bytes = fs::read(&records_path).unwrap();
        bytes.extend_from_slice(b"{\"junk\":true}\n");
        fs::write(&records_path, bytes).unwrap();
        assert!(matches!(
            VectorStore::load(&index_dir),
            Err(StoreError::CorruptIndex(_))
        ));
    }

    #[test]
    fn load_rejects_count_mismatch_and_bad_version() {
        let dir = tempfile::tempdir().unwrap();
        let index_dir = dir.path().join("index");
        let mut store = VectorStore::new(2, Metric::Cosine, "fp");
        store
            .upsert(vec![record("a", vec2(1.0, 0.0)), record("b", vec2(0.0, 1.0))])
            .unwrap();
        store.save(&index_dir).unwrap();

        let manifest_path = index_dir.join("manifest.json");
        let text = fs::read_to_string(&manifest_path).unwrap();

        fs::write(&manifest_path, text.replace("\"count\": 2", "\"count\": 3")).unwrap();
        match VectorStore::load(&index_dir) {
            Err(StoreError::CorruptIndex(msg)) => assert!(msg.contains("count")),
            other => panic!("expected corrupt index, got {other:?}"),
        }

        fs::write(&manifest_path, text.replace("\"version\": 1", "\"version\": 9")).unwrap();
        assert!(matches!(
            VectorStore::load(&index_dir),
            Err(StoreError::UnsupportedVersion(9))
        ));
    }

    /// Small in-module oracle check; the full-size sweep lives in the
    /// workspace acceptance suite.
    #[test]
    fn query_agrees_with_linear_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let mut store = VectorStore::new(8, Metric::Cosine, "fp");
        let mut raw: Vec<(String, Vec<f32>)> = Vec::new();
        for i in 0..100 {
            let values: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let id = format!("rec{i:03}");
            raw.push((id.clone(), values.clone()));
            store
                .upsert(vec![record(&id, EmbeddingVector { values })])
                .unwrap();
        }

        for metric in [Metric::Cosine, Metric::Euclidean, Metric::Dot] {
            for _ in 0..20 {
                let q: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let got = store
                    .query_with_metric(&EmbeddingVector { values: q.clone() }, 10, metric, None)
                    .unwrap();

                // Oracle: naive arithmetic written independently of
                // `similarity`, full sort, same tie rule.
                let mut expected: Vec<(String, f64)> = raw
                    .iter()
                    .map(|(id, v)| {
                        let dot_qv: f64 = q
                            .iter()
                            .zip(v)
                            .map(|(&x, &y)| x as f64 * y as f64)
                            .sum();
                        let nq = q.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
                        let nv = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
                        let s = match metric {
                            Metric::Cosine => {
                                if nq == 0.0 || nv == 0.0 {
                                    0.0
                                } else {
                                    dot_qv / (nq * nv)
                                }
                            }
                            Metric::Dot => dot_qv,
                            Metric::Euclidean => -q
                                .iter()
                                .zip(v)
                                .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                                .sum::<f64>()
                                .sqrt(),
                        };
                        (id.clone(), s)
                    })
                    .collect();
                expected.sort_by(|(ida, sa), (idb, sb)| {
                    sb.partial_cmp(sa).unwrap().then_with(|| ida.cmp(idb))
                });

                for (result, (id, s)) in got.iter().zip(&expected) {
                    assert_eq!(&result.id, id);
                    assert_abs_diff_eq!(result.score, *s, epsilon = 1e-9);
                }
            }
        }
    }
}

//! Corpus loading: a directory of guideline documents becomes normalized,
//! page-addressed text with title and numbering metadata preserved.
//!
//! Native loaders cover `.txt` and `.md`; PDFs are delegated to an external
//! extractor command that prints UTF-8 page texts separated by form feeds
//! (U+000C). All text is NFC-normalized with CRLF collapsed to LF so that
//! checksums and chunk offsets do not depend on the producing platform.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::fnv::fnv1a64;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus directory {0} does not exist or is not a directory")]
    MissingDirectory(PathBuf),
    #[error("empty corpus: no loadable documents in {0}")]
    EmptyCorpus(PathBuf),
    #[error("empty document")]
    EmptyDocument,
    #[error("encoding error: content is not valid UTF-8")]
    Encoding,
    #[error("extractor unavailable: no page extractor configured for PDF input")]
    ExtractorUnavailable,
    #[error("extractor failed: {0}")]
    ExtractorFailed(String),
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Source file format, by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocFormat {
    PlainText,
    Markdown,
    PdfExtracted,
}

/// One page of normalized text; `page_no` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageText {
    pub page_no: u32,
    pub text: String,
}

/// A loaded document: normalized pages plus identification metadata.
///
/// `checksum` hashes the concatenated page text, so it changes exactly when
/// the text content changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub title: String,
    pub guideline_no: Option<u32>,
    pub pages: Vec<PageText>,
    pub source_path: String,
    pub format: DocFormat,
    pub checksum: u64,
}

/// Outcome of a corpus load: documents sorted by `doc_id`, plus the files
/// that were skipped (unrecognized extension) or failed (with the reason).
#[derive(Debug)]
pub struct CorpusLoad {
    pub documents: Vec<SourceDocument>,
    pub skipped: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, CorpusError)>,
}

/// Entry of `corpus.manifest.json`: maps a file name to its display title
/// and (optional) guideline number.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guideline_no: Option<u32>,
}

/// Checksum over the concatenated page text.
pub fn checksum_pages(pages: &[PageText]) -> u64 {
    let joined: String = pages.iter().map(|p| p.text.as_str()).collect();
    fnv1a64(joined.as_bytes())
}

/// Load every recognized document under `dir`.
///
/// `manifest` overrides the default `corpus.manifest.json` discovered inside
/// the directory. Unreadable or malformed files are collected as failures
/// while the rest of the corpus loads; a corpus with no loadable documents
/// at all is an error.
pub fn load_corpus(dir: &Path, manifest: Option<&Path>) -> Result<CorpusLoad, CorpusError> {
    load_corpus_with(dir, manifest, None)
}

/// [`load_corpus`] with an external PDF extractor command. The command is
/// run once per PDF with the file path appended and must print page texts
/// separated by form feeds on stdout.
pub fn load_corpus_with(
    dir: &Path,
    manifest: Option<&Path>,
    extractor: Option<&str>,
) -> Result<CorpusLoad, CorpusError> {
    if !dir.is_dir() {
        return Err(CorpusError::MissingDirectory(dir.to_path_buf()));
    }

    let manifest_path = manifest.map(Path::to_path_buf).or_else(|| {
        let default = dir.join("corpus.manifest.json");
        default.is_file().then_some(default)
    });
    let manifest_map = match &manifest_path {
        Some(path) => read_manifest(path)?,
        None => HashMap::new(),
    };

    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|path| path.is_file() && Some(path) != manifest_path.as_ref())
        .collect();
    paths.sort();

    let mut load = CorpusLoad {
        documents: Vec::new(),
        skipped: Vec::new(),
        failures: Vec::new(),
    };
    for path in paths {
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("txt") => DocFormat::PlainText,
            Some("md") | Some("markdown") => DocFormat::Markdown,
            Some("pdf") => DocFormat::PdfExtracted,
            _ => {
                load.skipped.push(path);
                continue;
            }
        };
        match load_document(&path, format, extractor, &manifest_map) {
            Ok(doc) => {
                if load.documents.iter().any(|d| d.doc_id == doc.doc_id) {
                    load.failures
                        .push((path, CorpusError::DuplicateDocId(doc.doc_id)));
                } else {
                    load.documents.push(doc);
                }
            }
            Err(err) => load.failures.push((path, err)),
        }
    }

    if load.documents.is_empty() {
        return Err(CorpusError::EmptyCorpus(dir.to_path_buf()));
    }
    load.documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(load)
}

fn read_manifest(path: &Path) -> Result<HashMap<String, ManifestEntry>, CorpusError> {
    let bytes = fs::read(path)?;
    let entries: Vec<ManifestEntry> = serde_json::from_slice(&bytes)
        .map_err(|e| CorpusError::Manifest(format!("{}: {e}", path.display())))?;
    Ok(entries
        .into_iter()
        .map(|entry| (entry.file.clone(), entry))
        .collect())
}

fn load_document(
    path: &Path,
    format: DocFormat,
    extractor: Option<&str>,
    manifest: &HashMap<String, ManifestEntry>,
) -> Result<SourceDocument, CorpusError> {
    let bytes = match format {
        DocFormat::PdfExtracted => run_extractor(path, extractor)?,
        _ => fs::read(path)?,
    };
    let pages = extract_text(&bytes, format)?;

    let doc_id = path
        .file_stem()
        .and_then(|stem| stem.to_str())
        .unwrap_or_default()
        .to_string();
    let file_name = path
        .file_name()
        .and_then(|name| name.to_str())
        .unwrap_or_default();
    let entry = manifest.get(file_name);
    let checksum = checksum_pages(&pages);
    Ok(SourceDocument {
        title: entry.map(|e| e.title.clone()).unwrap_or_else(|| doc_id.clone()),
        guideline_no: entry.and_then(|e| e.guideline_no),
        doc_id,
        pages,
        source_path: path.display().to_string(),
        format,
        checksum,
    })
}

fn run_extractor(path: &Path, extractor: Option<&str>) -> Result<Vec<u8>, CorpusError> {
    let command_line = extractor
        .filter(|cmd| !cmd.trim().is_empty())
        .ok_or(CorpusError::ExtractorUnavailable)?;
    let mut parts = command_line.split_whitespace();
    let program = parts.next().ok_or(CorpusError::ExtractorUnavailable)?;
    let output = Command::new(program)
        .args(parts)
        .arg(path)
        .output()
        .map_err(|e| CorpusError::ExtractorFailed(format!("{program}: {e}")))?;
    if !output.status.success() {
        return Err(CorpusError::ExtractorFailed(format!(
            "{program} exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    Ok(output.stdout)
}

/// Decode and normalize raw document bytes into pages.
///
/// Plain text and markdown become a single page; extractor output is split
/// on form feeds into one page per segment.
pub fn extract_text(bytes: &[u8], format: DocFormat) -> Result<Vec<PageText>, CorpusError> {
    if bytes.is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    let raw = std::str::from_utf8(bytes).map_err(|_| CorpusError::Encoding)?;

    let page_texts: Vec<String> = match format {
        DocFormat::PlainText | DocFormat::Markdown => vec![normalize(raw)],
        DocFormat::PdfExtracted => raw.split('\u{000C}').map(normalize).collect(),
    };

    let mut pages: Vec<PageText> = page_texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| PageText {
            page_no: i as u32 + 1,
            text,
        })
        .collect();
    while pages.len() > 1 && pages.last().is_some_and(|p| p.text.is_empty()) {
        pages.pop();
    }
    if pages.iter().all(|p| p.text.is_empty()) {
        return Err(CorpusError::EmptyDocument);
    }
    Ok(pages)
}

fn normalize(raw: &str) -> String {
    raw.replace("\r\n", "\n").nfc().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn plain_text_loads_as_single_page() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "alpha.txt", "first document");
        write(dir.path(), "beta.txt", "second document");

        let load = load_corpus(dir.path(), None).unwrap();
        assert_eq!(load.documents.len(), 2);
        assert!(load.skipped.is_empty() && load.failures.is_empty());
        let alpha = &load.documents[0];
        assert_eq!(alpha.doc_id, "alpha");
        assert_eq!(alpha.title, "alpha");
        assert_eq!(alpha.pages.len(), 1);
        assert_eq!(alpha.pages[0].page_no, 1);
        assert_eq!(alpha.pages[0].text, "first document");
        assert_eq!(alpha.guideline_no, None);
    }

    #[test]
    fn documents_sort_by_doc_id() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "zeta.txt", "z");
        write(dir.path(), "alpha.md", "a");
        let load = load_corpus(dir.path(), None).unwrap();
        let ids: Vec<&str> = load.documents.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["alpha", "zeta"]);
        assert_eq!(load.documents[0].format, DocFormat::Markdown);
    }

    #[test]
    fn empty_directory_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_corpus(dir.path(), None).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyCorpus(_)));
    }

    #[test]
    fn missing_directory_is_fatal() {
        let err = load_corpus(Path::new("/nonexistent/corpus"), None).unwrap_err();
        assert!(matches!(err, CorpusError::MissingDirectory(_)));
    }

    #[test]
    fn crlf_collapses_to_lf() {
        let pages = extract_text(b"abc\r\ndef", DocFormat::PlainText).unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!(pages[0].text, "abc\ndef");
    }

    #[test]
    fn text_is_nfc_normalized() {
        // "e" + combining acute accent composes to U+00E9.
        let pages = extract_text("caf\u{0065}\u{0301}".as_bytes(), DocFormat::PlainText).unwrap();
        assert_eq!(pages[0].text, "caf\u{00E9}");
    }

    #[test]
    fn empty_bytes_reject() {
        assert!(matches!(
            extract_text(b"", DocFormat::PlainText),
            Err(CorpusError::EmptyDocument)
        ));
    }

    #[test]
    fn invalid_utf8_rejects() {
        assert!(matches!(
            extract_text(&[0xFF, 0xFE, 0x00], DocFormat::PlainText),
            Err(CorpusError::Encoding)
        ));
    }

    #[test]
    fn form_feed_output_splits_into_ordered_pages() {
        let pages =
            extract_text(b"page one\x0Cpage two\x0Cpage three", DocFormat::PdfExtracted).unwrap();
        let numbers: Vec<u32> = pages.iter().map(|p| p.page_no).collect();
        assert_eq!(numbers, vec![1, 2, 3]);
        assert_eq!(pages[2].text, "page three");
    }

    #[test]
    fn trailing_form_feed_adds_no_page() {
        let pages = extract_text(b"one\x0Ctwo\x0C", DocFormat::PdfExtracted).unwrap();
        assert_eq!(pages.len(), 2);
    }

    #[test]
    fn manifest_supplies_titles_and_numbers() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "g01.txt", "content one");
        write(dir.path(), "g02.txt", "content two");
        write(
            dir.path(),
            "corpus.manifest.json",
            r#"[
                {"file": "g01.txt", "title": "Anticoagulation Management", "guideline_no": 1},
                {"file": "g02.txt", "title": "Fasting Before Surgery", "guideline_no": 2}
            ]"#,
        );

        let load = load_corpus(dir.path(), None).unwrap();
        assert_eq!(load.documents.len(), 2);
        assert_eq!(load.documents[0].title, "Anticoagulation Management");
        assert_eq!(load.documents[0].guideline_no, Some(1));
        assert_eq!(load.documents[1].guideline_no, Some(2));
        // The manifest itself must not appear as skipped or loaded.
        assert!(load.skipped.is_empty());
    }

    #[test]
    fn unrecognized_extensions_are_reported_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "doc.txt", "fine");
        write(dir.path(), "notes.rtf", "binary-ish");
        let load = load_corpus(dir.path(), None).unwrap();
        assert_eq!(load.documents.len(), 1);
        assert_eq!(load.skipped.len(), 1);
        assert!(load.skipped[0].ends_with("notes.rtf"));
    }

    #[test]
    fn per_file_failures_do_not_abort_the_load() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "good.txt", "loads fine");
        write(dir.path(), "empty.txt", "");
        let load = load_corpus(dir.path(), None).unwrap();
        assert_eq!(load.documents.len(), 1);
        assert_eq!(load.failures.len(), 1);
        assert!(matches!(load.failures[0].1, CorpusError::EmptyDocument));
    }

    #[test]
    fn pdf_without_extractor_is_a_per_file_failure() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "doc.txt", "fine");
        write(dir.path(), "scan.pdf", "%PDF-1.4 ...");
        let load = load_corpus(dir.path(), None).unwrap();
        assert_eq!(load.documents.len(), 1);
        assert!(matches!(
            load.failures[0].1,
            CorpusError::ExtractorUnavailable
        ));
    }

    #[test]
    fn extractor_command_provides_pages() {
        // `cat` stands in for a real extractor: the fixture already contains
        // form-feed-separated page text.
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "scan.pdf", "alpha page\x0Cbeta page");
        let load = load_corpus_with(dir.path(), None, Some("cat")).unwrap();
        assert_eq!(load.documents.len(), 1);
        let doc = &load.documents[0];
        assert_eq!(doc.format, DocFormat::PdfExtracted);
        assert_eq!(doc.pages.len(), 2);
        assert_eq!(doc.pages[1].text, "beta page");
    }

    #[test]
    fn failing_extractor_is_collected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "scan.pdf", "whatever");
        write(dir.path(), "ok.txt", "fine");
        let load = load_corpus_with(dir.path(), None, Some("false")).unwrap();
        assert!(matches!(
            load.failures[0].1,
            CorpusError::ExtractorFailed(_)
        ));
    }

    #[test]
    fn checksum_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.txt", "same text");
        write(dir.path(), "b.txt", "same text");
        write(dir.path(), "c.txt", "different text");
        let load = load_corpus(dir.path(), None).unwrap();
        let [a, b, c] = &load.documents[..] else {
            panic!("expected three documents");
        };
        assert_eq!(a.checksum, b.checksum);
        assert_ne!(a.checksum, c.checksum);
        for doc in &load.documents {
            assert_eq!(doc.checksum, checksum_pages(&doc.pages));
        }
    }

    #[test]
    fn duplicate_stems_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "guide.txt", "one");
        write(dir.path(), "guide.md", "two");
        let load = load_corpus(dir.path(), None).unwrap();
        assert_eq!(load.documents.len(), 1);
        assert!(matches!(
            load.failures[0].1,
            CorpusError::DuplicateDocId(_)
        ));
    }

    #[test]
    fn loading_twice_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "one.txt", "alpha\n\nbeta");
        write(dir.path(), "two.md", "# gamma");
        let first = load_corpus(dir.path(), None).unwrap();
        let second = load_corpus(dir.path(), None).unwrap();
        assert_eq!(first.documents, second.documents);
    }
}

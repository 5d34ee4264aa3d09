//! Recursive text splitting with exact character spans.
//!
//! A page is split by the first separator (from an ordered cascade) that
//! occurs in the text, each separator staying attached to the end of the
//! piece it terminates so that offsets reconstruct the source exactly.
//! Pieces still longer than `chunk_size` are re-split with the remaining
//! separators; the final `""` separator hard-splits at character granularity
//! into windows that already overlap by `overlap`. Pieces are then greedily
//! merged into chunks, and each emitted chunk hands the next one a trailing
//! run of pieces no longer than `overlap`.
//!
//! Sizes are measured in `chars` (Unicode scalar values) or `tokens` via a
//! pluggable [`TokenCounter`]; hard-split windows are character-addressed in
//! both modes, which keeps them under `chunk_size` because no token is
//! smaller than one character.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChunkerError {
    #[error("chunk_size must be positive")]
    ZeroChunkSize,
    #[error("overlap ({overlap}) must be smaller than chunk_size ({chunk_size})")]
    OverlapTooLarge { overlap: usize, chunk_size: usize },
    #[error("separator list must end with \"\" so splitting always terminates")]
    MissingFallbackSeparator,
}

/// How chunk sizes are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LengthFn {
    #[default]
    Chars,
    Tokens,
}

/// Splitting parameters. Defaults: 1000-unit chunks, 100-unit overlap,
/// paragraph/newline/space/hard-split cascade, sizes in characters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitterConfig {
    pub chunk_size: usize,
    pub overlap: usize,
    pub separators: Vec<String>,
    pub length_fn: LengthFn,
}

impl Default for SplitterConfig {
    fn default() -> Self {
        SplitterConfig {
            chunk_size: 1000,
            overlap: 100,
            separators: vec!["\n\n".into(), "\n".into(), " ".into(), String::new()],
            length_fn: LengthFn::Chars,
        }
    }
}

impl SplitterConfig {
    pub fn validate(&self) -> Result<(), ChunkerError> {
        if self.chunk_size == 0 {
            return Err(ChunkerError::ZeroChunkSize);
        }
        if self.overlap >= self.chunk_size {
            return Err(ChunkerError::OverlapTooLarge {
                overlap: self.overlap,
                chunk_size: self.chunk_size,
            });
        }
        if self.separators.last().map(String::as_str) != Some("") {
            return Err(ChunkerError::MissingFallbackSeparator);
        }
        Ok(())
    }
}

/// A contiguous span of one page.
///
/// `char_start`/`char_end` are 0-based offsets in Unicode scalar values, and
/// `text` always equals the page substring `[char_start, char_end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub page_no: u32,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub unit_len: usize,
}

/// Token counting scheme, identified by a stable fingerprint.
///
/// Implementations must be deterministic, return 0 for the empty string, and
/// be subadditive under concatenation (`count(a + b) <= count(a) + count(b)`),
/// which the merge phase relies on when summing piece lengths.
pub trait TokenCounter {
    fn count(&self, text: &str) -> usize;
    fn fingerprint(&self) -> &str;
}

/// Default counter: one token per maximal alphanumeric run plus one per
/// non-whitespace punctuation character. A crude stand-in for a BPE
/// tokenizer, but deterministic and dependency-free.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordPieceCounter;

impl TokenCounter for WordPieceCounter {
    fn count(&self, text: &str) -> usize {
        let mut tokens = 0;
        let mut in_run = false;
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                if !in_run {
                    tokens += 1;
                    in_run = true;
                }
            } else {
                in_run = false;
                if !ch.is_whitespace() {
                    tokens += 1;
                }
            }
        }
        tokens
    }

    fn fingerprint(&self) -> &str {
        "wordpiece-v1"
    }
}

/// Unit length of `text` under the configured measure.
pub fn count_units(text: &str, length_fn: LengthFn, counter: &dyn TokenCounter) -> usize {
    match length_fn {
        LengthFn::Chars => text.chars().count(),
        LengthFn::Tokens => counter.count(text),
    }
}

/// A piece produced by the split phase: a slice of the page plus its char
/// span and unit length. Pieces tile the page in order, except inside a
/// hard-split run where consecutive windows overlap by `overlap`.
struct Piece<'a> {
    text: &'a str,
    char_start: usize,
    char_end: usize,
    units: usize,
}

/// Split one page into chunks with exact spans.
///
/// Empty text yields no chunks. Every character of the page lands in at
/// least one chunk, `char_start` is strictly increasing, and every chunk's
/// `unit_len` is at most `config.chunk_size`.
pub fn split_page(
    doc_id: &str,
    page_no: u32,
    text: &str,
    config: &SplitterConfig,
    counter: &dyn TokenCounter,
) -> Result<Vec<Chunk>, ChunkerError> {
    config.validate()?;
    if text.is_empty() {
        return Ok(Vec::new());
    }

    let separators: Vec<&str> = config.separators.iter().map(String::as_str).collect();
    let mut pieces = Vec::new();
    split_region(text, 0, &separators, config, counter, &mut pieces);
    Ok(merge_pieces(doc_id, page_no, pieces, config, counter))
}

/// Recursive descent: pick the first separator present in the region, split
/// inclusively, and re-split over-long pieces with the remaining separators.
fn split_region<'a>(
    region: &'a str,
    region_char_start: usize,
    separators: &[&str],
    config: &SplitterConfig,
    counter: &dyn TokenCounter,
    out: &mut Vec<Piece<'a>>,
) {
    let chosen = separators
        .iter()
        .position(|sep| sep.is_empty() || region.contains(sep))
        .expect("separator list ends with the always-matching \"\"");
    let sep = separators[chosen];
    if sep.is_empty() {
        hard_split(region, region_char_start, config, counter, out);
        return;
    }

    let mut char_cursor = region_char_start;
    for part in region.split_inclusive(sep) {
        let char_len = part.chars().count();
        let units = count_units(part, config.length_fn, counter);
        if units > config.chunk_size {
            split_region(
                part,
                char_cursor,
                &separators[chosen + 1..],
                config,
                counter,
                out,
            );
        } else {
            out.push(Piece {
                text: part,
                char_start: char_cursor,
                char_end: char_cursor + char_len,
                units,
            });
        }
        char_cursor += char_len;
    }
}

/// Fallback for separator-free text: fixed windows of `chunk_size` chars
/// advancing by `chunk_size - overlap`, so the overlap is already built into
/// the window positions. The merge phase emits full windows as-is (nothing
/// fits beside them) and lets only the final, shorter window merge onward.
fn hard_split<'a>(
    region: &'a str,
    region_char_start: usize,
    config: &SplitterConfig,
    counter: &dyn TokenCounter,
    out: &mut Vec<Piece<'a>>,
) {
    let byte_of_char: Vec<usize> = region.char_indices().map(|(b, _)| b).collect();
    let n_chars = byte_of_char.len();
    let byte_at = |char_idx: usize| {
        byte_of_char
            .get(char_idx)
            .copied()
            .unwrap_or_else(|| region.len())
    };
    let stride = config.chunk_size - config.overlap;

    let mut start = 0;
    loop {
        let last = start + config.chunk_size >= n_chars;
        let end = if last { n_chars } else { start + config.chunk_size };
        let window = &region[byte_at(start)..byte_at(end)];
        out.push(Piece {
            text: window,
            char_start: region_char_start + start,
            char_end: region_char_start + end,
            units: count_units(window, config.length_fn, counter),
        });
        if last {
            return;
        }
        start += stride;
    }
}

/// Greedy merge with overlap carry.
///
/// Pieces accumulate while they stay contiguous and within `chunk_size`.
/// When a piece will not fit, the open chunk is emitted and the next one
/// starts from the longest proper trailing run of its pieces whose total is
/// at most `overlap` (trimmed further if the incoming piece needs the room).
/// A non-contiguous piece — the next window of a hard-split run — always
/// starts a fresh chunk with no carry, since its position already overlaps.
fn merge_pieces(
    doc_id: &str,
    page_no: u32,
    pieces: Vec<Piece<'_>>,
    config: &SplitterConfig,
    counter: &dyn TokenCounter,
) -> Vec<Chunk> {
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut open: Vec<Piece<'_>> = Vec::new();
    let mut open_units = 0;

    for piece in pieces {
        if let Some(tail) = open.last() {
            let contiguous = piece.char_start == tail.char_end;
            if contiguous && open_units + piece.units <= config.chunk_size {
                open_units += piece.units;
                open.push(piece);
                continue;
            }

            emit(&mut chunks, doc_id, page_no, &open, config, counter);
            if contiguous {
                let carry = carry_range(&open, &piece, config);
                open.drain(..carry);
            } else {
                open.clear();
            }
            open_units = open.iter().map(|p| p.units).sum();
        }
        open_units += piece.units;
        open.push(piece);
    }
    if !open.is_empty() {
        emit(&mut chunks, doc_id, page_no, &open, config, counter);
    }
    chunks
}

/// Index into `open` where the carried suffix begins: the longest proper
/// suffix totalling at most `overlap`, shortened until `incoming` fits next
/// to it within `chunk_size`.
fn carry_range(open: &[Piece<'_>], incoming: &Piece<'_>, config: &SplitterConfig) -> usize {
    let mut begin = open.len();
    let mut total = 0;
    while begin > 1 && total + open[begin - 1].units <= config.overlap {
        total += open[begin - 1].units;
        begin -= 1;
    }
    while begin < open.len() && total + incoming.units > config.chunk_size {
        total -= open[begin].units;
        begin += 1;
    }
    begin
}

fn emit(
    chunks: &mut Vec<Chunk>,
    doc_id: &str,
    page_no: u32,
    open: &[Piece<'_>],
    config: &SplitterConfig,
    counter: &dyn TokenCounter,
) {
    let text: String = open.iter().map(|p| p.text).collect();
    let char_start = open[0].char_start;
    let char_end = open[open.len() - 1].char_end;
    let unit_len = match config.length_fn {
        LengthFn::Chars => char_end - char_start,
        LengthFn::Tokens => counter.count(&text),
    };
    let seq = chunks.len();
    chunks.push(Chunk {
        chunk_id: format!("{doc_id}#{page_no}#{seq}"),
        doc_id: doc_id.to_string(),
        page_no,
        char_start,
        char_end,
        text,
        unit_len,
    });
}

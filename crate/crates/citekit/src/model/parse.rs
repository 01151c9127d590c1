//! Citation marker parsing and the deterministic sentence splitter shared by
//! answer decomposition and document span segmentation.
//!
//! Marker grammar: consecutive `[` digits `]` groups, e.g. `[1][2][3]`.
//! Forms like `[1,2]` or `[1-3]` are plain text. A sentence ends at a
//! terminator (`.` `!` `?`) that is followed, after any directly trailing
//! markers, by whitespace or end of text.

use super::{Answer, Citation, DocId, Document, SpanRef, Statement};

const TERMINATORS: [char; 3] = ['.', '!', '?'];

/// If `text[pos..]` starts with a citation marker `[k]`, return
/// (doc id, byte offset just past the marker).
fn scan_marker(text: &str, pos: usize) -> Option<(u32, usize)> {
    let bytes = text.as_bytes();
    if pos >= bytes.len() || bytes[pos] != b'[' {
        return None;
    }
    let mut i = pos + 1;
    let digits_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == digits_start || i >= bytes.len() || bytes[i] != b']' {
        return None;
    }
    let id: u32 = text[digits_start..i].parse().ok()?;
    Some((id, i + 1))
}

/// Consume a maximal run of markers starting at `pos`, returning the offset
/// just past the run (`pos` itself when there is none).
fn skip_marker_run(text: &str, pos: usize) -> usize {
    let mut at = pos;
    while let Some((_, next)) = scan_marker(text, at) {
        at = next;
    }
    at
}

/// Sentence segmentation over raw text: half-open byte ranges, each starting
/// at the first non-whitespace character of its sentence and ending just past
/// the terminator plus any directly trailing markers. Text after the last
/// terminator forms a final range when non-blank.
pub fn segment_text(text: &str) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let bytes = text.as_bytes();
    let len = bytes.len();
    let mut start = next_non_ws(text, 0);
    let mut pos = start;
    while pos < len {
        let ch = text[pos..].chars().next().unwrap();
        let ch_end = pos + ch.len_utf8();
        if TERMINATORS.contains(&ch) {
            let after_markers = skip_marker_run(text, ch_end);
            let at_break = after_markers >= len
                || text[after_markers..]
                    .chars()
                    .next()
                    .is_some_and(char::is_whitespace);
            if at_break {
                ranges.push((start, after_markers));
                start = next_non_ws(text, after_markers);
                pos = start;
                continue;
            }
        }
        pos = ch_end;
    }
    if start < len {
        let end = trim_end_offset(text, start);
        if end > start {
            ranges.push((start, end));
        }
    }
    ranges
}

fn next_non_ws(text: &str, from: usize) -> usize {
    text[from..]
        .char_indices()
        .find(|(_, c)| !c.is_whitespace())
        .map(|(i, _)| from + i)
        .unwrap_or(text.len())
}

fn trim_end_offset(text: &str, from: usize) -> usize {
    from + text[from..].trim_end().len()
}

/// Remove every maximal run of bracketed-integer markers and normalize the
/// leftover whitespace: runs collapse to one space, spaces directly before
/// punctuation drop, ends are trimmed.
pub fn strip_citations(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    let bytes = text.as_bytes();
    while pos < bytes.len() {
        let after = skip_marker_run(text, pos);
        if after > pos {
            pos = after;
            continue;
        }
        let ch = text[pos..].chars().next().unwrap();
        out.push(ch);
        pos += ch.len_utf8();
    }
    normalize_spacing(&out)
}

fn normalize_spacing(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space && !matches!(ch, '.' | '!' | '?' | ',' | ';' | ':') {
            out.push(' ');
        }
        pending_space = false;
        out.push(ch);
    }
    out
}

/// Collapse whitespace runs to single spaces and trim. The comparison form
/// used by "equal modulo whitespace normalization" contracts.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Decompose generation output into sentence-level statements carrying
/// document-level citations. Empty text yields an answer with no statements.
pub fn parse_answer(text: &str) -> Answer {
    let statements = segment_text(text)
        .into_iter()
        .map(|(start, end)| {
            let raw = &text[start..end];
            Statement {
                text: strip_citations(raw),
                raw: raw.to_string(),
                citations: collect_citations(raw),
            }
        })
        .collect();
    Answer {
        statements,
        full_text: text.to_string(),
    }
}

/// Markers of `raw` as document-level citations, first occurrence order,
/// repeated indices deduplicated.
fn collect_citations(raw: &str) -> Vec<Citation> {
    let mut seen = Vec::new();
    let mut pos = 0;
    while pos < raw.len() {
        match scan_marker(raw, pos) {
            Some((id, next)) => {
                if id > 0 && !seen.contains(&id) {
                    seen.push(id);
                }
                pos = next;
            }
            None => pos += raw[pos..].chars().next().unwrap().len_utf8(),
        }
    }
    seen.into_iter()
        .map(|id| Citation::document(DocId(id)))
        .collect()
}

/// Sentence segmentation of a document, by the same rule as [`parse_answer`].
pub fn segment_spans(doc: &Document) -> Vec<SpanRef> {
    segment_text(&doc.text)
        .into_iter()
        .enumerate()
        .map(|(i, (start, end))| SpanRef {
            doc_id: doc.doc_id,
            span_idx: i as u32,
            start,
            end,
        })
        .collect()
}

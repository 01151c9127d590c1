//! Reference-based text metrics: ROUGE-L, STR-EM recall, answer length.

use crate::dataset::QaPair;
use crate::model::strip_citations;

/// Lowercased whitespace tokens of citation-stripped text.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    strip_citations(text)
        .to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Longest common subsequence length via the usual DP table.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            row[j + 1] = if x == y {
                prev[j] + 1
            } else {
                row[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure over pre-tokenized sequences; 0 when either is empty.
pub fn rouge_l_tokens(pred: &[String], reference: &[String]) -> f64 {
    if pred.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(pred, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / pred.len() as f64;
    let r = lcs / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-L between a prediction and a reference, both citation-stripped and
/// lowercased before whitespace tokenization.
pub fn rouge_l(prediction: &str, reference: &str) -> f64 {
    rouge_l_tokens(&rouge_tokens(prediction), &rouge_tokens(reference))
}

/// Lowercase and drop punctuation, collapsing to single spaces; the
/// normalization applied to both sides of the STR-EM substring check.
pub fn em_normalize(text: &str) -> String {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// STR-EM recall: a qa pair is hit when any of its short answers occurs as a
/// substring of the normalized, citation-stripped answer.
pub fn str_em_recall(answer_text: &str, qa_pairs: &[QaPair]) -> Option<f64> {
    if qa_pairs.is_empty() {
        return None;
    }
    let haystack = em_normalize(&strip_citations(answer_text));
    let hits = qa_pairs
        .iter()
        .filter(|pair| {
            pair.short_answers
                .iter()
                .any(|short| haystack.contains(&em_normalize(short)))
        })
        .count();
    Some(hits as f64 / qa_pairs.len() as f64)
}

/// Whitespace token count of the citation-stripped text.
pub fn answer_length(answer_text: &str) -> f64 {
    strip_citations(answer_text).split_whitespace().count() as f64
}

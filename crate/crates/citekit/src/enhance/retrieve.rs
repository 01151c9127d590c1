//! Real-time retrievers: BM25 relevance ranking, index lookup, and inner
//! (recitation-style) sampling from the generation backend itself.

use serde::{Deserialize, Serialize};

use super::EnhanceError;
use crate::backend::{generate, BackendError, GenParams, LlmBackend};
use crate::dataset::RawDoc;
use crate::model::{DocId, DocOrigin, DocStore, Document};

/// BM25 term-frequency saturation.
pub const BM25_K1: f64 = 1.2;
/// BM25 length normalization.
pub const BM25_B: f64 = 0.75;

/// Retrieved documents with their parallel, non-increasing scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub docs: Vec<Document>,
    pub scores: Vec<f64>,
}

impl RetrievalResult {
    pub fn doc_ids(&self) -> Vec<DocId> {
        self.docs.iter().map(|d| d.doc_id).collect()
    }
}

/// Where relevance retrieval draws candidates from.
#[derive(Debug, Clone)]
pub enum Corpus {
    /// The item's document store itself.
    Store,
    /// An external candidate pool (record docs or a corpus file); hits are
    /// added to the store at retrieval time with origin `retrieved_runtime`.
    Pool(Vec<RawDoc>),
}

fn bm25_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Okapi BM25 with non-negative idf `ln(1 + (N - df + 0.5) / (df + 0.5))`,
/// summed over distinct query terms. Returns per-candidate scores in input
/// order.
pub fn bm25_scores(query: &str, candidate_texts: &[String]) -> Vec<f64> {
    let docs: Vec<Vec<String>> = candidate_texts.iter().map(|t| bm25_tokens(t)).collect();
    let n = docs.len() as f64;
    let avgdl = if docs.is_empty() {
        0.0
    } else {
        docs.iter().map(Vec::len).sum::<usize>() as f64 / n
    };

    let mut terms = bm25_tokens(query);
    terms.sort();
    terms.dedup();

    let mut scores = vec![0.0f64; docs.len()];
    for term in &terms {
        let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
        if df == 0.0 {
            continue;
        }
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        for (i, doc) in docs.iter().enumerate() {
            let tf = doc.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let dl = doc.len() as f64;
            let norm = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
            scores[i] += idf * (tf * (BM25_K1 + 1.0)) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * norm));
        }
    }
    scores
}

/// Candidate indices ranked by descending score, ties to the lower index,
/// truncated to `k`.
pub fn bm25_top_k(query: &str, candidate_texts: &[String], k: usize) -> Vec<(usize, f64)> {
    let scores = bm25_scores(query, candidate_texts);
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// BM25 top-k retrieval over the corpus. Pool hits are added to the store
/// (reusing an existing document when one with identical title and text is
/// already present, since store ids must stay citation-stable).
pub fn retrieve_relevance(
    query: &str,
    corpus: &Corpus,
    k: usize,
    store: &mut DocStore,
) -> Result<RetrievalResult, EnhanceError> {
    assert!(k >= 1, "k must be at least 1");
    match corpus {
        Corpus::Store => {
            if store.is_empty() {
                return Err(EnhanceError::EmptyCorpus);
            }
            let ids = store.ids();
            let texts: Vec<String> = ids
                .iter()
                .map(|id| store.get(*id).unwrap().text.clone())
                .collect();
            let ranked = bm25_top_k(query, &texts, k);
            let docs: Vec<Document> = ranked
                .iter()
                .map(|(i, _)| store.get(ids[*i]).unwrap().clone())
                .collect();
            let scores = ranked.iter().map(|(_, s)| *s).collect();
            Ok(RetrievalResult { docs, scores })
        }
        Corpus::Pool(pool) => {
            if pool.is_empty() {
                return Err(EnhanceError::EmptyCorpus);
            }
            let texts: Vec<String> = pool.iter().map(|d| d.text.clone()).collect();
            let ranked = bm25_top_k(query, &texts, k);
            let mut docs = Vec::with_capacity(ranked.len());
            let mut scores = Vec::with_capacity(ranked.len());
            for (i, score) in ranked {
                let raw = &pool[i];
                let id = match store.find_by_content(&raw.title, &raw.text) {
                    Some(existing) => existing,
                    None => store
                        .add(raw.to_document().with_origin(DocOrigin::RetrievedRuntime))
                        .map_err(|e| EnhanceError::Internal(e.to_string()))?,
                };
                docs.push(store.get(id).unwrap().clone());
                scores.push(score);
            }
            Ok(RetrievalResult { docs, scores })
        }
    }
}

/// Fetch a stored document by index.
pub fn retrieve_index(store: &DocStore, doc_id: DocId) -> Result<&Document, EnhanceError> {
    store.get(doc_id).ok_or(EnhanceError::UnknownDocId(doc_id))
}

fn recite_prompt(query: &str, ordinal: usize, total: usize) -> String {
    format!(
        "Recite one passage from your training knowledge that helps answer the question. \
         Write only the passage text. Do not repeat a passage you already recited.\n\n\
         Question: {query}\n\nPassage {ordinal} of {total}:"
    )
}

/// Sample `n` passages from the backend's own knowledge, storing each
/// non-blank completion as a runtime document. A backend refusal surfaces
/// as [`EnhanceError::RetrievalRefused`].
pub fn retrieve_inner(
    query: &str,
    backend: &dyn LlmBackend,
    n: usize,
    store: &mut DocStore,
    params: &GenParams,
) -> Result<RetrievalResult, EnhanceError> {
    assert!(n >= 1, "n must be at least 1");
    let mut docs = Vec::new();
    let mut scores = Vec::new();
    for ordinal in 1..=n {
        let prompt = recite_prompt(query, ordinal, n);
        let completion = match generate(backend, &prompt, params) {
            Ok(c) => c,
            Err(BackendError::Refusal { message }) => {
                return Err(EnhanceError::RetrievalRefused(message))
            }
            Err(e) => return Err(EnhanceError::Backend(e)),
        };
        let text = completion.text.trim();
        if text.is_empty() {
            continue;
        }
        let doc = Document::new(format!("Recited passage {ordinal}"), text)
            .with_origin(DocOrigin::RetrievedRuntime);
        let id = store
            .add(doc)
            .map_err(|e| EnhanceError::Internal(e.to_string()))?;
        docs.push(store.get(id).unwrap().clone());
        scores.push(1.0);
    }
    Ok(RetrievalResult { docs, scores })
}

//! Loading and validation of attributed-QA datasets, and binding records
//! into per-item pipeline inputs.
//!
//! The on-disk format is a UTF-8 JSON array of records using the canonical
//! field names `question`, `answer`, `docs`, `qa_pairs`; a field map renames
//! source keys (e.g. `docs` -> `passages`) at load time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{DocStore, Document};

/// Documents bound per record when no recipe overrides the count.
pub const DEFAULT_INIT_DOCS: usize = 5;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset is not a JSON array of records: {0}")]
    NotAnArray(String),
    #[error("record {index}: missing or invalid field `{field}`")]
    MalformedRecord { index: usize, field: String },
    #[error("dataset contains no records")]
    EmptyDataset,
    #[error("record has no field `{0}`")]
    MissingField(String),
}

/// A raw document entry of a dataset record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDoc {
    pub title: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

impl RawDoc {
    pub fn to_document(&self) -> Document {
        let mut doc = Document::new(self.title.clone(), self.text.clone());
        if let Some(snippet) = &self.extraction {
            doc = doc.with_snippet(snippet.clone());
        }
        if let Some(summary) = &self.summary {
            doc = doc.with_summary(summary.clone());
        }
        doc
    }
}

/// A disambiguation sub-question with its acceptable short answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub sub_question: String,
    pub short_answers: Vec<String>,
}

/// One attributed-QA item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub question: String,
    /// Long-form reference answer; optional, records without one are
    /// excluded from reference-based metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    #[serde(default)]
    pub docs: Vec<RawDoc>,
    #[serde(default)]
    pub qa_pairs: Vec<QaPair>,
}

/// An ordered, immutable collection of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Maps canonical field names to the keys used by the source file.
/// Unmapped fields default to their canonical name.
#[derive(Debug, Clone, Default)]
pub struct FieldMap {
    entries: BTreeMap<String, String>,
}

impl FieldMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn map(mut self, canonical: &str, source: &str) -> Self {
        self.entries.insert(canonical.into(), source.into());
        self
    }

    /// Parse `k=v,k=v` CLI syntax.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let mut map = FieldMap::new();
        for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("bad field-map entry `{part}`, expected k=v"))?;
            map.entries.insert(k.trim().into(), v.trim().into());
        }
        Ok(map)
    }

    fn source_key<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.entries
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }
}

/// Load and validate a dataset file. Pure: identical bytes yield an
/// identical dataset, record order preserved.
pub fn load_dataset(path: impl AsRef<Path>, field_map: &FieldMap) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| DatasetError::FileUnreadable {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    parse_dataset(&bytes, &name, field_map)
}

pub fn parse_dataset(
    bytes: &[u8],
    name: &str,
    field_map: &FieldMap,
) -> Result<Dataset, DatasetError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| DatasetError::NotAnArray(e.to_string()))?;
    let Value::Array(items) = value else {
        return Err(DatasetError::NotAnArray("top level is not an array".into()));
    };
    if items.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let records = items
        .iter()
        .enumerate()
        .map(|(index, item)| parse_record(item, index, field_map))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        name: name.to_string(),
        records,
    })
}

fn parse_record(
    item: &Value,
    index: usize,
    field_map: &FieldMap,
) -> Result<DatasetRecord, DatasetError> {
    let malformed = |field: &str| DatasetError::MalformedRecord {
        index,
        field: field.into(),
    };
    let obj = item.as_object().ok_or_else(|| malformed("<record>"))?;

    let question = obj
        .get(field_map.source_key("question"))
        .and_then(Value::as_str)
        .filter(|q| !q.trim().is_empty())
        .ok_or_else(|| malformed("question"))?
        .to_string();

    let gold_answer = obj
        .get(field_map.source_key("answer"))
        .and_then(Value::as_str)
        .map(str::to_string);

    let docs = match obj.get(field_map.source_key("docs")) {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(entries)) => entries
            .iter()
            .map(|d| parse_doc(d, index))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(malformed("docs")),
    };

    let qa_pairs = match obj.get(field_map.source_key("qa_pairs")) {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(entries)) => entries
            .iter()
            .map(|p| parse_qa_pair(p, index))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(malformed("qa_pairs")),
    };

    Ok(DatasetRecord {
        question,
        gold_answer,
        docs,
        qa_pairs,
    })
}

fn parse_doc(value: &Value, index: usize) -> Result<RawDoc, DatasetError> {
    let malformed = |field: &str| DatasetError::MalformedRecord {
        index,
        field: format!("docs.{field}"),
    };
    let obj = value.as_object().ok_or_else(|| malformed("<entry>"))?;
    let title = obj
        .get("title")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("title"))?
        .to_string();
    let text = obj
        .get("text")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("text"))?
        .to_string();
    Ok(RawDoc {
        title,
        text,
        extraction: obj
            .get("extraction")
            .and_then(Value::as_str)
            .map(str::to_string),
        summary: obj
            .get("summary")
            .and_then(Value::as_str)
            .map(str::to_string),
    })
}

fn parse_qa_pair(value: &Value, index: usize) -> Result<QaPair, DatasetError> {
    let malformed = |field: &str| DatasetError::MalformedRecord {
        index,
        field: format!("qa_pairs.{field}"),
    };
    let obj = value.as_object().ok_or_else(|| malformed("<entry>"))?;
    let sub_question = obj
        .get("sub_question")
        .or_else(|| obj.get("question"))
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("sub_question"))?
        .to_string();
    let short_answers: Vec<String> = obj
        .get("short_answers")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("short_answers"))?
        .iter()
        .filter_map(Value::as_str)
        .map(str::to_string)
        .collect();
    if short_answers.is_empty() {
        return Err(malformed("short_answers"));
    }
    Ok(QaPair {
        sub_question,
        short_answers,
    })
}

/// Bind a record into a query plus a fresh store holding its first
/// [`DEFAULT_INIT_DOCS`] documents, ids assigned in list order from 1.
pub fn bind_record(
    record: &DatasetRecord,
    init_docs_key: &str,
) -> Result<(String, DocStore), DatasetError> {
    bind_record_top_n(record, init_docs_key, DEFAULT_INIT_DOCS)
}

/// [`bind_record`] with an explicit cap on bound documents. `top_n` of zero
/// binds none (real-time retrieval recipes feed documents at runtime).
pub fn bind_record_top_n(
    record: &DatasetRecord,
    init_docs_key: &str,
    top_n: usize,
) -> Result<(String, DocStore), DatasetError> {
    if init_docs_key != "docs" {
        return Err(DatasetError::MissingField(init_docs_key.to_string()));
    }
    let mut store = DocStore::new();
    for raw in record.docs.iter().take(top_n) {
        store
            .add(raw.to_document())
            .expect("store capacity exceeded while binding record");
    }
    Ok((record.question.clone(), store))
}

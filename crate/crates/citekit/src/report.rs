//! On-disk run artifacts: the answers file, the metrics report, and the
//! aggregate table printed after a run.
//!
//! Metric values are kept in [0,1] internally and scaled to percentages
//! only here, at serialization; length stays in raw tokens.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::RawDoc;
use crate::eval::{EvalReport, ItemEval, MetricKind};
use crate::model::DocOrigin;
use crate::pipeline::{DatasetOutcome, ItemResult};

/// One line of the answers file: everything needed to re-evaluate the item
/// without re-running generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerLine {
    pub index: usize,
    pub question: String,
    /// Final answer text; absent when the item failed.
    pub answer: Option<String>,
    /// Cited document ids per statement.
    pub citations: Vec<Vec<u32>>,
    /// Documents bound from the record at item start.
    pub init_docs: usize,
    /// Document view citations resolve against (snippet recipes refine
    /// citations onto snippet spans).
    pub doc_view: String,
    /// Runtime-retrieved documents in id order, replayed at evaluation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runtime_docs: Vec<RawDoc>,
    /// Index into the trace file, when one was written.
    pub trace_ref: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AnswerLine {
    pub fn from_item(item: &ItemResult, init_docs: usize, doc_view: &str) -> Self {
        let citations = item
            .answer_text
            .as_deref()
            .map(|text| {
                crate::model::parse_answer(text)
                    .statements
                    .iter()
                    .map(|s| s.citations.iter().map(|c| c.doc_id.0).collect())
                    .collect()
            })
            .unwrap_or_default();
        let runtime_docs = item
            .runtime_docs
            .iter()
            .filter(|d| d.origin == DocOrigin::RetrievedRuntime)
            .map(|d| RawDoc {
                title: d.title.clone(),
                text: d.text.clone(),
                extraction: d.snippet.clone(),
                summary: d.summary.clone(),
            })
            .collect();
        AnswerLine {
            index: item.index,
            question: item.question.clone(),
            answer: item.answer_text.clone(),
            citations,
            init_docs,
            doc_view: doc_view.to_string(),
            runtime_docs,
            trace_ref: item.index,
            error: item.error.clone(),
        }
    }
}

/// Serialize answer lines (one JSON object per line, dataset order).
pub fn render_answers(lines: &[AnswerLine]) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(&serde_json::to_string(line).expect("answer line serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_answers(bytes: &[u8]) -> Result<Vec<AnswerLine>, serde_json::Error> {
    bytes
        .split(|b| *b == b'\n')
        .filter(|l| !l.is_empty())
        .map(serde_json::from_slice)
        .collect()
}

/// Scale a metric value for reporting: percentage metrics x100, length and
/// custom metrics raw.
pub fn scaled_value(key: &str, value: f64) -> f64 {
    let scale = MetricKind::ALL
        .into_iter()
        .find(|m| m.key() == key)
        .map(|m| m.percent_scaled())
        .unwrap_or(false);
    if scale {
        value * 100.0
    } else {
        value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportItem {
    pub index: usize,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<String, String>,
}

/// The serialized report: per-item and aggregate sections, values scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub judge: String,
    pub items_scored: usize,
    pub items_failed: usize,
    pub per_item: Vec<ReportItem>,
    pub aggregate: BTreeMap<String, f64>,
}

impl ReportFile {
    /// Build from scored items' evaluations. `indexed` pairs dataset index
    /// with each evaluation; aggregation excludes items lacking a metric.
    pub fn build(judge: String, indexed: Vec<(usize, ItemEval)>, items_failed: usize) -> Self {
        let items_scored = indexed.len();
        let report = EvalReport::from_items(indexed.iter().map(|(_, e)| e.clone()).collect());
        let per_item = indexed
            .into_iter()
            .map(|(index, eval)| ReportItem {
                index,
                metrics: eval
                    .metrics
                    .iter()
                    .map(|(k, v)| (k.clone(), scaled_value(k, *v)))
                    .collect(),
                errors: eval.errors,
            })
            .collect();
        let aggregate = report
            .aggregate
            .iter()
            .map(|(k, v)| (k.clone(), scaled_value(k, *v)))
            .collect();
        ReportFile {
            judge,
            items_scored,
            items_failed,
            per_item,
            aggregate,
        }
    }

    pub fn from_outcome(judge: String, outcome: &DatasetOutcome) -> Self {
        let indexed: Vec<(usize, ItemEval)> = outcome
            .items
            .iter()
            .filter(|item| item.error.is_none())
            .filter_map(|item| item.eval.clone().map(|e| (item.index, e)))
            .collect();
        ReportFile::build(judge, indexed, outcome.failed())
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

const TABLE_COLUMNS: [(&str, &str); 8] = [
    ("Fluency(MAUVE)", "__mauve__"),
    ("Correct.(EM Rec.)", "str_em"),
    ("Rec.", "citation_recall"),
    ("Prec.", "citation_precision"),
    ("App.", "citation_appropriateness"),
    ("Gran.", "citation_granularity"),
    ("ROUGE-L", "rouge_l"),
    ("Length", "length"),
];

/// Render the aggregate row as an aligned table mirroring the usual ASQA
/// column order. Fluency shows n/a unless an external MAUVE plugin filled
/// a `mauve` aggregate.
pub fn render_table(label: &str, report: &ReportFile) -> String {
    let mut header = format!("{label:<26}");
    let mut row = format!("{:<26}", format!("({} items)", report.items_scored));
    for (title, key) in TABLE_COLUMNS {
        header.push_str(&format!("{title:>19}"));
        let value = if key == "__mauve__" {
            report.aggregate.get("mauve").copied()
        } else {
            report.aggregate.get(key).copied()
        };
        let cell = match value {
            Some(v) => format!("{v:.1}"),
            None => "n/a".to_string(),
        };
        row.push_str(&format!("{cell:>19}"));
    }
    format!("{header}\n{row}\n")
}

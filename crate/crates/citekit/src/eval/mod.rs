//! Metric computation, report aggregation and training-data export.
//!
//! Metric values stay in [0,1] internally (length excepted); percent scaling
//! happens only when a report is serialized or printed.

mod citation;
pub mod export;
mod judge;
mod text;

pub use citation::{
    citation_appropriateness, citation_granularity, citation_precision, citation_recall,
    expand_statement_spans, joint_premise, minimal_entailing_spans, recall_from_verdicts,
    statement_verdicts, NeedRule, StatementVerdict,
};
pub use export::{export_training_data, parse_training_data, ExportError, TrainingRecord};
pub use judge::{
    content_tokens, parse_judge_spec, tokens, Entailment, HttpNliJudge, JudgeError, LexicalJudge,
    ScriptedJudge, SubstringJudge, DEFAULT_LEXICAL_THRESHOLD, STOPLIST,
};
pub use text::{answer_length, em_normalize, lcs_len, rouge_l, rouge_l_tokens, rouge_tokens, str_em_recall};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::model::{Answer, DocStore};

/// Built-in metrics, in the column order reports use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    StrEm,
    CitationRecall,
    CitationPrecision,
    CitationAppropriateness,
    CitationGranularity,
    RougeL,
    Length,
}

impl MetricKind {
    pub const ALL: [MetricKind; 7] = [
        MetricKind::StrEm,
        MetricKind::CitationRecall,
        MetricKind::CitationPrecision,
        MetricKind::CitationAppropriateness,
        MetricKind::CitationGranularity,
        MetricKind::RougeL,
        MetricKind::Length,
    ];

    /// Canonical report key.
    pub fn key(self) -> &'static str {
        match self {
            MetricKind::StrEm => "str_em",
            MetricKind::CitationRecall => "citation_recall",
            MetricKind::CitationPrecision => "citation_precision",
            MetricKind::CitationAppropriateness => "citation_appropriateness",
            MetricKind::CitationGranularity => "citation_granularity",
            MetricKind::RougeL => "rouge_l",
            MetricKind::Length => "length",
        }
    }

    /// Short CLI name.
    pub fn short(self) -> &'static str {
        match self {
            MetricKind::StrEm => "em",
            MetricKind::CitationRecall => "rec",
            MetricKind::CitationPrecision => "prec",
            MetricKind::CitationAppropriateness => "app",
            MetricKind::CitationGranularity => "gran",
            MetricKind::RougeL => "rouge",
            MetricKind::Length => "len",
        }
    }

    pub fn from_short(name: &str) -> Option<MetricKind> {
        MetricKind::ALL.into_iter().find(|m| m.short() == name)
    }

    /// Whether the metric is reported as a percentage.
    pub fn percent_scaled(self) -> bool {
        !matches!(self, MetricKind::Length)
    }

    /// Parse a comma-separated CLI metric list.
    pub fn parse_set(spec: &str) -> Result<Vec<MetricKind>, String> {
        let mut out = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let kind =
                MetricKind::from_short(part).ok_or_else(|| format!("unknown metric `{part}`"))?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        if out.is_empty() {
            return Err("empty metric set".into());
        }
        Ok(out)
    }
}

/// A user-registered metric over the evaluated item.
#[derive(Clone)]
pub struct CustomMetric {
    pub name: String,
    pub func: Arc<dyn Fn(&Answer, &DatasetRecord, &DocStore) -> Option<f64> + Send + Sync>,
}

/// Metric selection plus the judge and need rule they share.
#[derive(Clone)]
pub struct EvalConfig {
    pub metrics: Vec<MetricKind>,
    pub judge: Arc<dyn Entailment>,
    pub need_rule: NeedRule,
    pub custom: Vec<CustomMetric>,
}

impl EvalConfig {
    pub fn new(judge: Arc<dyn Entailment>) -> Self {
        EvalConfig {
            metrics: MetricKind::ALL.to_vec(),
            judge,
            need_rule: NeedRule::Heuristic,
            custom: Vec::new(),
        }
    }

    pub fn with_metrics(mut self, metrics: Vec<MetricKind>) -> Self {
        self.metrics = metrics;
        self
    }

    pub fn with_need_rule(mut self, need_rule: NeedRule) -> Self {
        self.need_rule = need_rule;
        self
    }

    pub fn with_custom(
        mut self,
        name: impl Into<String>,
        func: impl Fn(&Answer, &DatasetRecord, &DocStore) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        self.custom.push(CustomMetric {
            name: name.into(),
            func: Arc::new(func),
        });
        self
    }
}

/// Evaluation of one item: defined metric values, per-metric errors, and
/// the per-statement verdicts behind citation recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ItemEval {
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<StatementVerdict>,
}

/// Compute the configured metrics for one answer. Metrics whose inputs are
/// missing stay absent; judge failures are recorded per metric, never fatal.
pub fn evaluate(
    answer: &Answer,
    record: &DatasetRecord,
    store: &DocStore,
    config: &EvalConfig,
) -> ItemEval {
    let mut item = ItemEval::default();
    let judge = config.judge.as_ref();
    let question = record.question.as_str();

    match statement_verdicts(answer, store, judge, &config.need_rule, question) {
        Ok(verdicts) => item.verdicts = verdicts,
        Err(e) => {
            item.errors.insert("verdicts".into(), e.to_string());
        }
    }

    for kind in &config.metrics {
        let key = kind.key();
        let value: Result<Option<f64>, JudgeError> = match kind {
            MetricKind::StrEm => Ok(str_em_recall(&answer.full_text, &record.qa_pairs)),
            MetricKind::RougeL => Ok(record
                .gold_answer
                .as_deref()
                .map(|gold| rouge_l(&answer.full_text, gold))),
            MetricKind::Length => Ok(Some(answer_length(&answer.full_text))),
            MetricKind::CitationAppropriateness => Ok(citation_appropriateness(
                answer,
                &config.need_rule,
                question,
            )),
            MetricKind::CitationRecall => {
                if item.errors.contains_key("verdicts") {
                    Ok(None)
                } else {
                    Ok(Some(recall_from_verdicts(&item.verdicts)))
                }
            }
            MetricKind::CitationPrecision => citation_precision(answer, store, judge),
            MetricKind::CitationGranularity => {
                citation_granularity(answer, store, judge, &config.need_rule, question)
            }
        };
        match value {
            Ok(Some(v)) => {
                item.metrics.insert(key.to_string(), v);
            }
            Ok(None) => {}
            Err(e) => {
                item.errors.insert(key.to_string(), e.to_string());
            }
        }
    }

    for custom in &config.custom {
        if let Some(v) = (custom.func)(answer, record, store) {
            item.metrics.insert(custom.name.clone(), v);
        }
    }

    item
}

/// Per-item values plus their aggregate means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub per_item: Vec<ItemEval>,
    /// Arithmetic mean of each metric over the items defining it.
    pub aggregate: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn from_items(per_item: Vec<ItemEval>) -> Self {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for item in &per_item {
            for (key, value) in &item.metrics {
                let entry = sums.entry(key.clone()).or_insert((0.0, 0));
                entry.0 += value;
                entry.1 += 1;
            }
        }
        let aggregate = sums
            .into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect();
        EvalReport {
            per_item,
            aggregate,
        }
    }
}

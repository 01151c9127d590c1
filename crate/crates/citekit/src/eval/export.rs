//! Training-data export: one line-delimited JSON record per evaluated item.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::StatementVerdict;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write export file {path}: {source}")]
    FileUnwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The exportable record of one item: enough to supervise or reward a
/// citation generator without re-running the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub question: String,
    /// Digest of the final prompt the answer was generated from.
    pub prompt_digest: String,
    pub answer: String,
    pub statement_verdicts: Vec<StatementVerdict>,
    pub metrics: std::collections::BTreeMap<String, f64>,
}

/// Append one JSON line per record; returns the count written. The file is
/// created (or truncated) even when `records` is empty.
pub fn export_training_data(
    records: &[TrainingRecord],
    path: impl AsRef<Path>,
) -> Result<usize, ExportError> {
    let path = path.as_ref();
    let unwritable = |source: std::io::Error| ExportError::FileUnwritable {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(unwritable)?;
    for record in records {
        let line = serde_json::to_string(record).expect("training record serializes");
        writeln!(file, "{line}").map_err(unwritable)?;
    }
    Ok(records.len())
}

/// Parse an export file back into records.
pub fn parse_training_data(bytes: &[u8]) -> Result<Vec<TrainingRecord>, serde_json::Error> {
    bytes
        .split(|b| *b == b'\n')
        .filter(|line| !line.is_empty())
        .map(serde_json::from_slice)
        .collect()
}

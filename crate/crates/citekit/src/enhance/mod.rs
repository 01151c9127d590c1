//! The four enhancer families: retriever, planner, feedbacker and editor.
//! Each is stateless given (payload, store, backend/judge) and pluggable
//! as a pipeline node.

mod edit;
mod feedback;
mod plan;
mod retrieve;

pub use edit::{edit_revise, edit_simplify, simplify_answer, Revision};
pub use feedback::{
    answer_support_score, feedback_rerank, feedback_score, feedback_verify, verify_answer,
    Feedback,
};
pub use plan::{
    parse_attribution, parse_blueprint, plan_attribute, plan_blueprint, render_cluster, Plan,
    MAX_BLUEPRINT_QUESTIONS, SPAN_MATCH_THRESHOLD,
};
pub use retrieve::{
    bm25_scores, bm25_top_k, retrieve_index, retrieve_inner, retrieve_relevance, Corpus,
    RetrievalResult, BM25_B, BM25_K1,
};

use thiserror::Error;

use crate::backend::BackendError;
use crate::eval::JudgeError;
use crate::model::DocId;

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("relevance corpus is empty")]
    EmptyCorpus,
    #[error("document {0} is not in the store")]
    UnknownDocId(DocId),
    #[error("backend refused to recite: {0}")]
    RetrievalRefused(String),
    #[error("planner produced no sub-questions")]
    EmptyPlan,
    #[error("attribution output has no cluster structure")]
    UnparseablePlan,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("{0}")]
    Internal(String),
}

impl From<crate::backend::TemplateError> for EnhanceError {
    fn from(e: crate::backend::TemplateError) -> Self {
        EnhanceError::Backend(BackendError::Template(e))
    }
}

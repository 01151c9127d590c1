//! Citekit: a modular pipeline engine and evaluation harness for LLM
//! citation generation.
//!
//! Pipelines compose generation and enhancing components into sequence,
//! loop or tree graphs, run them over attributed-QA datasets, and score the
//! answers on citation quality and answer correctness.

pub mod backend;
pub mod cli;
pub mod dataset;
pub mod enhance;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod recipe;
pub mod report;

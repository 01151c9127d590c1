//! Output editors: answer revision and citation simplification.

use super::EnhanceError;
use crate::backend::{bindings, generate, render_prompt, GenParams, LlmBackend, PromptTemplate};
use crate::eval::{joint_premise, Entailment, JudgeError};
use crate::model::{parse_answer, Answer, Citation, DocStore, Statement};

/// Outcome of a revision attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Revision {
    pub answer: Answer,
    /// False when the backend returned a blank revision and the original
    /// answer was kept.
    pub revised: bool,
}

/// Re-prompt the backend with the draft answer, the feedback and the stored
/// documents; a blank completion keeps the original answer.
pub fn edit_revise(
    answer: &Answer,
    feedback: &str,
    backend: &dyn LlmBackend,
    store: &DocStore,
    question: &str,
    template: &PromptTemplate,
    params: &GenParams,
) -> Result<Revision, EnhanceError> {
    let prompt = render_prompt(
        template,
        &bindings([
            ("question", question),
            ("prefix", &answer.full_text),
            ("feedback", feedback),
        ]),
        store,
        &store.ids(),
    )?;
    let completion = generate(backend, &prompt.text, params)?;
    if completion.text.trim().is_empty() {
        return Ok(Revision {
            answer: answer.clone(),
            revised: false,
        });
    }
    Ok(Revision {
        answer: parse_answer(&completion.text),
        revised: true,
    })
}

fn entails_citations(
    citations: &[Citation],
    statement: &Statement,
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<bool, JudgeError> {
    if citations.is_empty() {
        return Ok(false);
    }
    judge.entails(&joint_premise(citations, store), &statement.text)
}

/// Reduce a statement's citations to a minimal entailing subset: walk the
/// citations in descending doc id, dropping each whose removal leaves the
/// remainder still jointly entailing. When the full set never entailed, the
/// statement is returned unchanged.
pub fn edit_simplify(
    statement: &Statement,
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<Statement, JudgeError> {
    if statement.citations.is_empty()
        || !entails_citations(&statement.citations, statement, store, judge)?
    {
        return Ok(statement.clone());
    }
    let mut working = statement.citations.clone();
    let mut drop_order = working.clone();
    drop_order.sort_by(|a, b| b.doc_id.cmp(&a.doc_id));
    for candidate in drop_order {
        let remaining: Vec<Citation> = working
            .iter()
            .filter(|c| **c != candidate)
            .cloned()
            .collect();
        if remaining.len() == working.len() || remaining.is_empty() {
            continue;
        }
        if entails_citations(&remaining, statement, store, judge)? {
            working = remaining;
        }
    }
    Ok(Statement {
        text: statement.text.clone(),
        raw: statement.raw.clone(),
        citations: working,
    })
}

/// Apply [`edit_simplify`] to every statement of an answer.
pub fn simplify_answer(
    answer: &Answer,
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<Answer, JudgeError> {
    let statements: Vec<Statement> = answer
        .statements
        .iter()
        .map(|st| edit_simplify(st, store, judge))
        .collect::<Result<_, _>>()?;
    let simplified = Answer {
        statements,
        full_text: String::new(),
    };
    let full_text = simplified.render_text();
    Ok(Answer {
        full_text,
        ..simplified
    })
}

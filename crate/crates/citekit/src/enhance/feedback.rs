//! Quality feedbackers: scorer, reranker, verifier.

use serde::{Deserialize, Serialize};

use crate::eval::{joint_premise, Entailment, JudgeError};
use crate::model::{parse_answer, Answer, DocStore, Statement};

/// Output of a feedbacker, always carrying the evaluated payload through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feedback {
    Score { score: f64, passthrough: String },
    RerankChoice { choice_idx: usize, passthrough: String },
    Verdict { verdict: bool, passthrough: String },
}

impl Feedback {
    pub fn passthrough(&self) -> &str {
        match self {
            Feedback::Score { passthrough, .. }
            | Feedback::RerankChoice { passthrough, .. }
            | Feedback::Verdict { passthrough, .. } => passthrough,
        }
    }
}

fn statement_entailed(
    statement: &Statement,
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<bool, JudgeError> {
    if statement.citations.is_empty() {
        return Ok(false);
    }
    judge.entails(&joint_premise(&statement.citations, store), &statement.text)
}

/// Fraction of statements whose cited documents jointly entail them; 0 for
/// an answer without statements.
pub fn answer_support_score(
    answer: &Answer,
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<f64, JudgeError> {
    if answer.statements.is_empty() {
        return Ok(0.0);
    }
    let mut supported = 0usize;
    for statement in &answer.statements {
        if statement_entailed(statement, store, judge)? {
            supported += 1;
        }
    }
    Ok(supported as f64 / answer.statements.len() as f64)
}

/// Score an answer by its entailed-statement fraction.
pub fn feedback_score(
    answer: &Answer,
    judge: &dyn Entailment,
    store: &DocStore,
) -> Result<Feedback, JudgeError> {
    Ok(Feedback::Score {
        score: answer_support_score(answer, store, judge)?,
        passthrough: answer.full_text.clone(),
    })
}

/// Score each candidate like [`feedback_score`] and pick the maximum,
/// ties to the lowest index.
pub fn feedback_rerank(
    candidates: &[String],
    judge: &dyn Entailment,
    store: &DocStore,
) -> Result<Feedback, JudgeError> {
    assert!(!candidates.is_empty(), "rerank needs at least one candidate");
    let mut best_idx = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (idx, candidate) in candidates.iter().enumerate() {
        let score = answer_support_score(&parse_answer(candidate), store, judge)?;
        if score > best_score {
            best_score = score;
            best_idx = idx;
        }
    }
    Ok(Feedback::RerankChoice {
        choice_idx: best_idx,
        passthrough: candidates[best_idx].clone(),
    })
}

/// True verdict iff a statement's cited documents jointly entail it; a
/// statement without citations fails.
pub fn feedback_verify(
    statement: &Statement,
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<Feedback, JudgeError> {
    Ok(Feedback::Verdict {
        verdict: statement_entailed(statement, store, judge)?,
        passthrough: statement.raw.clone(),
    })
}

/// Answer-level verification: every statement must pass [`feedback_verify`].
/// Returns the verdict and the first failing statement, if any.
pub fn verify_answer(
    answer: &Answer,
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<(bool, Option<Statement>), JudgeError> {
    for statement in &answer.statements {
        if !statement_entailed(statement, store, judge)? {
            return Ok((false, Some(statement.clone())));
        }
    }
    Ok((!answer.statements.is_empty(), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::SubstringJudge;
    use crate::model::Document;

    fn store_of(texts: &[&str]) -> DocStore {
        let mut store = DocStore::new();
        for (i, t) in texts.iter().enumerate() {
            store.add(Document::new(format!("d{}", i + 1), *t)).unwrap();
        }
        store
    }

    #[test]
    fn score_all_supported() {
        let store = store_of(&["alpha holds.", "beta holds."]);
        let answer = parse_answer("Alpha holds [1]. Beta holds [2].");
        let fb = feedback_score(&answer, &SubstringJudge, &store).unwrap();
        assert_eq!(
            fb,
            Feedback::Score {
                score: 1.0,
                passthrough: answer.full_text.clone()
            }
        );
    }

    #[test]
    fn score_half_supported() {
        let store = store_of(&["alpha holds.", "unrelated."]);
        let answer = parse_answer("Alpha holds [1]. Beta holds [2].");
        let Feedback::Score { score, .. } = feedback_score(&answer, &SubstringJudge, &store).unwrap()
        else {
            panic!("expected score");
        };
        assert_eq!(score, 0.5);
    }

    #[test]
    fn rerank_breaks_ties_low() {
        let store = store_of(&["winner text.", "winner text."]);
        let candidates = vec![
            "Loser claim [1].".to_string(),
            "Winner text [1].".to_string(),
            "Winner text [2].".to_string(),
        ];
        let fb = feedback_rerank(&candidates, &SubstringJudge, &store).unwrap();
        assert_eq!(
            fb,
            Feedback::RerankChoice {
                choice_idx: 1,
                passthrough: candidates[1].clone()
            }
        );
    }

    #[test]
    fn rerank_single_candidate() {
        let store = store_of(&["x."]);
        let fb = feedback_rerank(&["Only one.".to_string()], &SubstringJudge, &store).unwrap();
        assert!(matches!(fb, Feedback::RerankChoice { choice_idx: 0, .. }));
    }

    #[test]
    fn rerank_choice_scores_at_least_every_candidate() {
        let store = store_of(&["alpha fact.", "beta fact."]);
        let candidates = vec![
            "Alpha fact [1]. Unsupported [2].".to_string(),
            "Beta fact [2].".to_string(),
        ];
        let Feedback::RerankChoice { choice_idx, .. } =
            feedback_rerank(&candidates, &SubstringJudge, &store).unwrap()
        else {
            panic!();
        };
        let chosen = answer_support_score(&parse_answer(&candidates[choice_idx]), &store, &SubstringJudge)
            .unwrap();
        for c in &candidates {
            let s = answer_support_score(&parse_answer(c), &store, &SubstringJudge).unwrap();
            assert!(chosen >= s);
        }
    }

    #[test]
    fn verify_no_citation_is_false() {
        let store = store_of(&["anything."]);
        let answer = parse_answer("Claim without citation.");
        let fb = feedback_verify(&answer.statements[0], &store, &SubstringJudge).unwrap();
        assert!(matches!(fb, Feedback::Verdict { verdict: false, .. }));
    }

    #[test]
    fn verify_entailing_citation_is_true() {
        let store = store_of(&["the claim is here."]);
        let answer = parse_answer("The claim is here [1].");
        let fb = feedback_verify(&answer.statements[0], &store, &SubstringJudge).unwrap();
        assert!(matches!(fb, Feedback::Verdict { verdict: true, .. }));
    }

    #[test]
    fn verify_answer_reports_first_failure() {
        let store = store_of(&["alpha holds.", "unrelated."]);
        let answer = parse_answer("Alpha holds [1]. Beta fails [2]. Gamma fails [2].");
        let (verdict, failing) = verify_answer(&answer, &store, &SubstringJudge).unwrap();
        assert!(!verdict);
        assert!(failing.unwrap().text.starts_with("Beta"));
        let ok = parse_answer("Alpha holds [1].");
        assert_eq!(verify_answer(&ok, &store, &SubstringJudge).unwrap(), (true, None));
    }
}

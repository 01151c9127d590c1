//! Shared fixtures for integration tests: a toy attributed-QA dataset and
//! scripted backends tailored to each registry recipe.

#![allow(dead_code)]

use std::sync::Arc;

use citekit::backend::{LlmBackend, ScriptedBackend};
use citekit::dataset::Dataset;
use citekit::eval::{Entailment, SubstringJudge};

/// Three records sharing one six-document corpus; five documents bind by
/// default, the sixth stays retrievable from the pool.
pub fn toy_dataset_json() -> String {
    let docs = r#"[
        {"title": "Alpha", "text": "Alpha fact one. Alpha detail extra.",
         "extraction": "Alpha fact one.", "summary": "The alpha fact in short."},
        {"title": "Beta", "text": "The second fact happened at the site. More beta context.",
         "extraction": "The second fact happened at the site.", "summary": "The beta fact in short."},
        {"title": "Gamma", "text": "Gamma fact three. Gamma extra tail."},
        {"title": "Delta", "text": "Delta fact four."},
        {"title": "Epsilon", "text": "Epsilon fact five."},
        {"title": "Zeta", "text": "Zeta supplementary fact six."}
    ]"#;
    let record = |q: &str| {
        format!(
            r#"{{
                "question": "{q}",
                "answer": "Alpha fact one.",
                "docs": {docs},
                "qa_pairs": [
                    {{"sub_question": "which fact?", "short_answers": ["alpha fact one"]}},
                    {{"sub_question": "missing?", "short_answers": ["never-present-answer"]}}
                ]
            }}"#
        )
    };
    format!(
        "[{},{},{}]",
        record("What was recorded at site one?"),
        record("What was recorded at site two?"),
        record("What was recorded at site three?")
    )
}

pub fn toy_dataset() -> Dataset {
    citekit::cli::parse_dataset_bytes(toy_dataset_json().as_bytes(), "toy").unwrap()
}

pub fn substring_judge() -> Arc<dyn Entailment> {
    Arc::new(SubstringJudge)
}

/// A scripted backend whose queues let `recipe` run the toy dataset to
/// completion. Sessions are cloned per item, so one script serves all
/// records identically.
pub fn scripted_for(recipe: &str) -> ScriptedBackend {
    match recipe {
        "alce_vanilla" | "alce_summ" | "alce_snippet" => {
            ScriptedBackend::new(["Alpha fact one [1]. The second fact happened at the site [2]."])
        }
        "alce_rerank" => ScriptedBackend::new([
            "Unsupported ramble [3].",
            "Alpha fact one [1].",
            "Alpha fact one [1]. The second fact happened at the site [2].",
            "Another unsupported take [4].",
        ]),
        "alce_interact" => ScriptedBackend::new(
            ["check(2)", "The second fact happened at the site [2]."],
        ),
        "attribute_then_generate" => ScriptedBackend::new([
            "Alpha fact one [1].",
            "The second fact happened at the site [2].",
        ])
        .with_trigger(
            "Clusters:",
            ["1.\nDocument [1]: Alpha fact one.\n2.\nDocument [2]: The second fact happened at the site."],
        ),
        "blueprint" => ScriptedBackend::new(
            ["Alpha fact one [1]. The second fact happened at the site [2]."],
        )
        .with_trigger("Sub-questions: ", ["Which fact was first? Where did the second fact happen?"]),
        "aar" => ScriptedBackend::new(["Alpha fact one [1]. Unsupported claim [3]."])
            .with_trigger("Revised answer:", ["Alpha fact one [1]."]),
        "citation_enhanced" => {
            ScriptedBackend::new(["Alpha fact one. The second fact happened at the site."])
        }
        "vtg" => ScriptedBackend::new([
            // The draft mentions the sixth document's content, so when the
            // verifier rejects it the retriever pulls that document in.
            "Zeta supplementary fact six [1].",
            "Alpha fact one [1]. The second fact happened at the site [1][2].",
        ]),
        "recitation" => ScriptedBackend::new([
            "Alpha fact one [1]. Recited beta fact [2].",
        ])
        .with_trigger(
            "Recite one passage",
            [
                "Alpha fact one recited from memory.",
                "Recited beta fact. Extra recited words.",
                "Recited gamma fact.",
                "Recited delta fact.",
                "Recited epsilon fact.",
            ],
        ),
        "self_rag" | "self_rag_snippet" => ScriptedBackend::new(Vec::<String>::new())
            .with_trigger(
                "Please generate one query",
                ["alpha fact", "second fact site", "unrelated query"],
            )
            .with_trigger(
                "Answer: ",
                [
                    "Alpha fact one [1].",
                    "Alpha fact one [1].",
                    "Alpha fact one [1].",
                    "The second fact happened at the site [2].",
                    "The second fact happened at the site [2].",
                    "The second fact happened at the site [2].",
                    "",
                    "",
                    "",
                ],
            ),
        other => panic!("no script for recipe {other}"),
    }
}

pub fn scripted_arc(recipe: &str) -> Arc<dyn LlmBackend> {
    Arc::new(scripted_for(recipe))
}

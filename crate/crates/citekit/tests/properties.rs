//! Property tests for the parsing, segmentation, truncation and
//! simplification invariants.

use proptest::prelude::*;

use citekit::backend::{generate, GenParams, ScriptedBackend};
use citekit::enhance::edit_simplify;
use citekit::eval::{rouge_l, SubstringJudge};
use citekit::model::{
    normalize_ws, parse_answer, segment_spans, strip_citations, Citation, DocId, DocStore,
    Document,
};

/// Sentence-ish fragments mixing words, markers, and stray brackets.
fn answer_text() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        "[a-z]{1,8}",
        Just("[1]".to_string()),
        Just("[2][3]".to_string()),
        Just("[12]".to_string()),
        Just("[1,2]".to_string()),
        Just("3.5".to_string()),
    ];
    let sentence = (proptest::collection::vec(word, 1..6), "[.!?]").prop_map(|(words, term)| {
        let mut s = words.join(" ");
        s.push_str(&term);
        s
    });
    proptest::collection::vec(sentence, 0..5).prop_map(|sentences| sentences.join(" "))
}

proptest! {
    #[test]
    fn strip_composes_over_statement_raws(text in answer_text()) {
        let answer = parse_answer(&text);
        let joined = answer
            .statements
            .iter()
            .map(|s| s.raw.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        prop_assert_eq!(strip_citations(&joined), strip_citations(&text));
    }

    #[test]
    fn statement_texts_carry_no_markers(text in answer_text()) {
        let answer = parse_answer(&text);
        for statement in &answer.statements {
            for (i, _) in statement.text.match_indices('[') {
                let rest = &statement.text[i + 1..];
                let digits: String =
                    rest.chars().take_while(|c| c.is_ascii_digit()).collect();
                let closes = rest[digits.len()..].starts_with(']');
                prop_assert!(
                    digits.is_empty() || !closes,
                    "marker survived in {:?}",
                    statement.text
                );
            }
        }
    }

    #[test]
    fn joined_raws_equal_full_text_modulo_whitespace(text in answer_text()) {
        let answer = parse_answer(&text);
        let joined = answer
            .statements
            .iter()
            .map(|s| s.raw.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        prop_assert_eq!(normalize_ws(&joined), normalize_ws(&text));
    }

    #[test]
    fn spans_round_trip_document_text(text in "[a-zA-Z0-9 .!?]{0,120}") {
        let doc = Document::new("t", text.clone());
        let spans = segment_spans(&doc);
        let joined = spans
            .iter()
            .map(|s| s.text(&doc))
            .collect::<Vec<_>>()
            .join(" ");
        prop_assert_eq!(normalize_ws(&joined), normalize_ws(&text));
        for pair in spans.windows(2) {
            prop_assert!(pair[0].end <= pair[1].start);
            prop_assert!(doc.text[pair[0].end..pair[1].start].trim().is_empty());
        }
    }

    #[test]
    fn stop_strings_never_survive_truncation(
        text in "[a-z \n|]{0,60}",
        stops in proptest::collection::vec(prop_oneof![Just("\n".to_string()), Just("|".to_string())], 1..3),
    ) {
        let backend = ScriptedBackend::new([text]);
        let params = GenParams { stop: stops.clone(), ..GenParams::default() };
        let completion = generate(&backend, "p", &params).unwrap();
        for stop in &stops {
            prop_assert!(!completion.text.contains(stop.as_str()));
        }
    }

    #[test]
    fn store_ids_stay_unique(count in 1usize..40) {
        let mut store = DocStore::new();
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..count {
            let id = store.add(Document::new("t", format!("text {i}."))).unwrap();
            prop_assert!(seen.insert(id));
        }
    }

    #[test]
    fn rouge_f_symmetric_and_reflexive(
        a in proptest::collection::vec("[a-e]{1,3}", 1..10),
        b in proptest::collection::vec("[a-e]{1,3}", 1..10),
    ) {
        let (a, b) = (a.join(" "), b.join(" "));
        prop_assert!((rouge_l(&a, &b) - rouge_l(&b, &a)).abs() < 1e-12);
        prop_assert!((rouge_l(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplify_returns_entailing_subset(cited in proptest::collection::vec(1u32..5, 1..5)) {
        // Docs 1..4: doc k contains the statement text iff k is even.
        let mut store = DocStore::new();
        for k in 1..5u32 {
            let text = if k % 2 == 0 {
                format!("filler {k}. the claim stands here.")
            } else {
                format!("filler only {k}.")
            };
            store.add(Document::new(format!("d{k}"), text)).unwrap();
        }
        let mut answer = parse_answer("The claim stands here [9].");
        let mut unique: Vec<u32> = Vec::new();
        for c in cited {
            if !unique.contains(&c) {
                unique.push(c);
            }
        }
        answer.statements[0].citations =
            unique.iter().map(|k| Citation::document(DocId(*k))).collect();
        let statement = &answer.statements[0];
        let simplified = edit_simplify(statement, &store, &SubstringJudge).unwrap();
        // Output citations are a subset of the input.
        for c in &simplified.citations {
            prop_assert!(statement.citations.contains(c));
        }
        // If the input jointly entailed, the output still does.
        let entails = |cits: &[Citation]| -> bool {
            if cits.is_empty() {
                return false;
            }
            let premise = citekit::eval::joint_premise(cits, &store);
            citekit::eval::Entailment::entails(&SubstringJudge, &premise, &statement.text).unwrap()
        };
        if entails(&statement.citations) {
            prop_assert!(entails(&simplified.citations));
            prop_assert!(simplified.citations.len() <= statement.citations.len());
        } else {
            prop_assert_eq!(&simplified.citations, &statement.citations);
        }
    }
}

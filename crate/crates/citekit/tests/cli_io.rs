//! CLI-level tests: file artifacts, determinism, eval idempotence, exit
//! codes, and the HTTP backend/judge against a local stub server.

mod common;

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::Path;

use citekit::backend::{generate, GenParams};
use citekit::cli::{parse_backend_spec, run_with_args};
use citekit::eval::{parse_judge_spec, parse_training_data, recall_from_verdicts};
use citekit::report::{parse_answers, ReportFile};

use common::toy_dataset_json;

fn write_fixtures(dir: &Path) -> (String, String) {
    let dataset_path = dir.join("toy.json");
    std::fs::write(&dataset_path, toy_dataset_json()).unwrap();
    let script = serde_json::json!({
        "responses": [
            "Zeta supplementary fact six [1].",
            "Alpha fact one [1]. The second fact happened at the site [1][2]."
        ]
    });
    let script_path = dir.join("script.json");
    std::fs::write(&script_path, serde_json::to_string(&script).unwrap()).unwrap();
    (
        dataset_path.to_string_lossy().into_owned(),
        script_path.to_string_lossy().into_owned(),
    )
}

fn run_vtg(dir: &Path, out: &str, workers: usize, dataset: &str, script: &str) -> i32 {
    run_with_args([
        "citekit",
        "run",
        "--recipe",
        "vtg",
        "--dataset",
        dataset,
        "--backend",
        &format!("scripted:{script}"),
        "--judge",
        "substring",
        "--out",
        &dir.join(out).to_string_lossy().into_owned(),
        "--workers",
        &workers.to_string(),
        "--trace-out",
        &dir.join(out).join("trace.jsonl").to_string_lossy().into_owned(),
        "--export",
        &dir.join(out).join("train.jsonl").to_string_lossy().into_owned(),
    ])
}

#[test]
fn run_writes_all_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixtures(dir.path());
    let code = run_vtg(dir.path(), "out", 1, &dataset, &script);
    assert_eq!(code, 0);

    let answers = std::fs::read(dir.path().join("out/answers.jsonl")).unwrap();
    let lines = parse_answers(&answers).unwrap();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.error.is_none()));
    assert_eq!(lines[0].citations, vec![vec![1], vec![2]]);
    assert_eq!(lines[0].runtime_docs.len(), 1);

    let report: ReportFile =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert_eq!(report.items_scored, 3);
    assert_eq!(report.items_failed, 0);
    // All seven metric keys defined for these items.
    assert_eq!(report.aggregate.len(), 7);
    assert_eq!(report.aggregate["citation_recall"], 100.0);

    let trace = std::fs::read_to_string(dir.path().join("out/trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 3);

    let train = std::fs::read(dir.path().join("out/train.jsonl")).unwrap();
    assert_eq!(parse_training_data(&train).unwrap().len(), 3);
}

#[test]
fn consecutive_runs_are_byte_identical_at_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixtures(dir.path());
    for (out, workers) in [("a", 1), ("b", 1), ("c", 2), ("d", 3)] {
        assert_eq!(run_vtg(dir.path(), out, workers, &dataset, &script), 0);
    }
    for file in ["answers.jsonl", "report.json", "trace.jsonl", "train.jsonl"] {
        let reference = std::fs::read(dir.path().join("a").join(file)).unwrap();
        for out in ["b", "c", "d"] {
            let other = std::fs::read(dir.path().join(out).join(file)).unwrap();
            assert_eq!(reference, other, "{file} differs in {out}");
        }
    }
}

#[test]
fn eval_reproduces_the_run_report_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixtures(dir.path());
    assert_eq!(run_vtg(dir.path(), "out", 1, &dataset, &script), 0);
    let code = run_with_args([
        "citekit",
        "eval",
        "--answers",
        &dir.path().join("out/answers.jsonl").to_string_lossy().into_owned(),
        "--dataset",
        &dataset,
        "--judge",
        "substring",
        "--out",
        &dir.path().join("eval").to_string_lossy().into_owned(),
    ]);
    assert_eq!(code, 0);
    let run_report = std::fs::read(dir.path().join("out/report.json")).unwrap();
    let eval_report = std::fs::read(dir.path().join("eval/report.json")).unwrap();
    assert_eq!(run_report, eval_report);
}

#[test]
fn truncated_answers_file_is_an_alignment_error() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixtures(dir.path());
    assert_eq!(run_vtg(dir.path(), "out", 1, &dataset, &script), 0);
    let answers_path = dir.path().join("out/answers.jsonl");
    let text = std::fs::read_to_string(&answers_path).unwrap();
    let truncated: Vec<&str> = text.lines().take(2).collect();
    std::fs::write(&answers_path, truncated.join("\n")).unwrap();
    let code = run_with_args([
        "citekit",
        "eval",
        "--answers",
        &answers_path.to_string_lossy().into_owned(),
        "--dataset",
        &dataset,
    ]);
    assert_eq!(code, 2);
}

#[test]
fn metric_subset_flag_restricts_report() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixtures(dir.path());
    assert_eq!(run_vtg(dir.path(), "out", 1, &dataset, &script), 0);
    let code = run_with_args([
        "citekit",
        "eval",
        "--answers",
        &dir.path().join("out/answers.jsonl").to_string_lossy().into_owned(),
        "--dataset",
        &dataset,
        "--judge",
        "substring",
        "--metrics",
        "rouge,len",
        "--out",
        &dir.path().join("subset").to_string_lossy().into_owned(),
    ]);
    assert_eq!(code, 0);
    let report: ReportFile =
        serde_json::from_slice(&std::fs::read(dir.path().join("subset/report.json")).unwrap())
            .unwrap();
    let keys: Vec<&str> = report.aggregate.keys().map(String::as_str).collect();
    assert_eq!(keys, ["length", "rouge_l"]);
}

#[test]
fn bad_recipe_name_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixtures(dir.path());
    let code = run_with_args([
        "citekit",
        "run",
        "--recipe",
        "nope",
        "--dataset",
        &dataset,
        "--backend",
        &format!("scripted:{script}"),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn unreadable_dataset_exits_two() {
    let code = run_with_args([
        "citekit",
        "run",
        "--recipe",
        "alce_vanilla",
        "--dataset",
        "/nonexistent/data.json",
        "--backend",
        "scripted:/nonexistent/script.json",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn export_verdicts_recompute_reported_recall() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixtures(dir.path());
    assert_eq!(run_vtg(dir.path(), "out", 1, &dataset, &script), 0);
    let train = std::fs::read(dir.path().join("out/train.jsonl")).unwrap();
    let records = parse_training_data(&train).unwrap();
    assert_eq!(records.len(), 3);
    for record in &records {
        let recomputed = recall_from_verdicts(&record.statement_verdicts);
        assert_eq!(Some(&recomputed), record.metrics.get("citation_recall"));
    }
}

/// Minimal one-request-per-connection HTTP stub.
fn spawn_stub(responses: Vec<String>) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for response in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = vec![0u8; 65536];
            let mut read = 0usize;
            let body_start;
            loop {
                let n = stream.read(&mut buf[read..]).unwrap();
                read += n;
                if let Some(pos) = find_header_end(&buf[..read]) {
                    body_start = pos;
                    break;
                }
            }
            let headers = String::from_utf8_lossy(&buf[..body_start]).to_string();
            let content_length: usize = headers
                .lines()
                .find_map(|l| {
                    l.to_ascii_lowercase()
                        .strip_prefix("content-length:")
                        .map(|v| v.trim().parse().unwrap())
                })
                .unwrap_or(0);
            while read < body_start + content_length {
                let n = stream.read(&mut buf[read..]).unwrap();
                read += n;
            }
            bodies.push(String::from_utf8_lossy(&buf[body_start..read]).to_string());
            let reply = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                response.len(),
                response
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
        bodies
    });
    (format!("http://{addr}"), handle)
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n").map(|p| p + 4)
}

#[test]
fn http_backend_round_trips_through_stub_server() {
    let chat = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": "Stub payload [1]."}}],
        "usage": {"prompt_tokens": 12, "completion_tokens": 5}
    });
    let (base, handle) = spawn_stub(vec![chat.to_string()]);
    let backend = parse_backend_spec(&format!("{base},stub-model")).unwrap();
    let completion = generate(
        backend.as_ref(),
        "echo prompt",
        &GenParams::default().without_stop(),
    )
    .unwrap();
    assert_eq!(completion.text, "Stub payload [1].");
    assert_eq!(completion.backend_id, "stub-model");
    let bodies = handle.join().unwrap();
    let body: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["messages"][0]["content"], "echo prompt");
    assert_eq!(body["max_tokens"], 500);
}

#[test]
fn http_judge_round_trips_through_stub_server() {
    let (base, handle) = spawn_stub(vec![
        serde_json::json!({"entailed": true}).to_string(),
        serde_json::json!({"entailed": false}).to_string(),
    ]);
    let judge = parse_judge_spec(&format!("{base}/nli")).unwrap();
    assert!(judge.entails("premise text", "hypothesis text").unwrap());
    assert!(!judge.entails("p2", "h2").unwrap());
    let bodies = handle.join().unwrap();
    let body: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(body["premise"], "premise text");
    assert_eq!(body["hypothesis"], "hypothesis text");
}

#[test]
fn http_backend_reports_unavailable_on_refused_connection() {
    // Bind then drop a listener to get a (very likely) unused port.
    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let backend =
        parse_backend_spec(&format!("http://127.0.0.1:{port},m")).unwrap();
    let err = generate(backend.as_ref(), "p", &GenParams::default()).unwrap_err();
    assert!(matches!(
        err,
        citekit::backend::BackendError::Unavailable { retryable: true, .. }
    ));
}

#[test]
fn list_prints_thirteen_recipes_matching_registry() {
    // `run_with_args` prints to stdout; here we check the registry itself
    // and the exit code (stdout capture is covered by the names check).
    assert_eq!(run_with_args(["citekit", "list"]), 0);
    assert_eq!(run_with_args(["citekit", "list", "--verbose"]), 0);
    assert_eq!(citekit::recipe::RECIPE_NAMES.len(), 13);
    for name in citekit::recipe::RECIPE_NAMES {
        assert!(citekit::recipe::spec_for(name).is_some());
    }
}

#[test]
fn total_failure_exits_three() {
    // Records without documents make the citation assigner's retrieval
    // corpus empty, failing every item.
    let dir = tempfile::tempdir().unwrap();
    let dataset = r#"[
        {"question": "q1?", "docs": []},
        {"question": "q2?", "docs": []}
    ]"#;
    let dataset_path = dir.path().join("empty.json");
    std::fs::write(&dataset_path, dataset).unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        serde_json::json!({"responses": ["Claim one.", "Claim two."]}).to_string(),
    )
    .unwrap();
    let code = run_with_args([
        "citekit",
        "run",
        "--recipe",
        "citation_enhanced",
        "--dataset",
        &dataset_path.to_string_lossy().into_owned(),
        "--backend",
        &format!("scripted:{}", script.to_string_lossy()),
        "--out",
        &dir.path().join("out").to_string_lossy().into_owned(),
    ]);
    assert_eq!(code, 3);
}

#[test]
fn external_corpus_feeds_relevance_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, _) = write_fixtures(dir.path());
    // The corpus file provides the only retrievable document.
    let corpus = serde_json::json!([
        {"title": "External", "text": "The external corpus fact appears here."}
    ]);
    let corpus_path = dir.path().join("corpus.json");
    std::fs::write(&corpus_path, corpus.to_string()).unwrap();
    let script = dir.path().join("ce_script.json");
    std::fs::write(
        &script,
        serde_json::json!({"responses": ["The external corpus fact appears here."]}).to_string(),
    )
    .unwrap();
    let code = run_with_args([
        "citekit",
        "run",
        "--recipe",
        "citation_enhanced",
        "--dataset",
        &dataset,
        "--backend",
        &format!("scripted:{}", script.to_string_lossy()),
        "--judge",
        "substring",
        "--corpus",
        &corpus_path.to_string_lossy().into_owned(),
        "--out",
        &dir.path().join("out").to_string_lossy().into_owned(),
    ]);
    assert_eq!(code, 0);
    let answers = std::fs::read(dir.path().join("out/answers.jsonl")).unwrap();
    let lines = parse_answers(&answers).unwrap();
    assert_eq!(lines[0].runtime_docs.len(), 1);
    assert_eq!(lines[0].runtime_docs[0].title, "External");
    assert_eq!(lines[0].citations, vec![vec![1]]);
}

#[test]
fn shipped_recipe_files_load_and_build() {
    let recipes_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes");
    let mut seen = 0;
    for entry in std::fs::read_dir(&recipes_dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        seen += 1;
        let spec = citekit::recipe::load_recipe_file(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let backend: std::sync::Arc<dyn citekit::backend::LlmBackend> =
            std::sync::Arc::new(citekit::backend::ScriptedBackend::new(Vec::<String>::new()));
        citekit::recipe::build_from_spec(
            &spec,
            &citekit::recipe::RecipeOverrides::default(),
            backend,
            common::substring_judge(),
        )
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
    assert!(seen >= 2, "expected shipped recipe files under recipes/");
}

#[test]
fn binary_list_prints_thirteen_recipe_lines() {
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_citekit"))
        .arg("list")
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 13);
    for name in citekit::recipe::RECIPE_NAMES {
        assert!(
            lines.iter().any(|l| l.starts_with(name)),
            "missing {name} in list output"
        );
    }

    let verbose = std::process::Command::new(env!("CARGO_BIN_EXE_citekit"))
        .args(["list", "--verbose"])
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8(verbose.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 13);
    assert!(stdout.contains("doc_view=summary"));
    assert!(stdout.contains("doc_count=10"));
}

#[test]
fn field_map_renames_flow_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let renamed = toy_dataset_json()
        .replace("\"question\"", "\"query\"")
        .replace("\"docs\"", "\"passages\"");
    let dataset_path = dir.path().join("renamed.json");
    std::fs::write(&dataset_path, renamed).unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        serde_json::json!({"responses": ["Alpha fact one [1]."]}).to_string(),
    )
    .unwrap();
    let code = run_with_args([
        "citekit",
        "run",
        "--recipe",
        "alce_vanilla",
        "--dataset",
        &dataset_path.to_string_lossy().into_owned(),
        "--backend",
        &format!("scripted:{}", script.to_string_lossy()),
        "--judge",
        "substring",
        "--field-map",
        "question=query,docs=passages",
        "--out",
        &dir.path().join("out").to_string_lossy().into_owned(),
    ]);
    assert_eq!(code, 0);
    let answers = std::fs::read(dir.path().join("out/answers.jsonl")).unwrap();
    assert_eq!(parse_answers(&answers).unwrap().len(), 3);
}

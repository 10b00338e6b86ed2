use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use harnessjudge::{Corpus, JudgeRecord, ResponseKind, Role, TestResponse};
use harnessjudge_gateway::{render_prompt, PromptKind, TranscriptEntry};
use serde_json::Value;
use tempfile::TempDir;

fn core_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn hj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harnessjudge"))
        .args(args)
        .env("HJ_PROGRAM_CMD", "python3 -S {file}")
        .env(
            "HJ_SHIM_CMD",
            format!("python3 -S {}", core_fixture("runner_stub.py").display()),
        )
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn harnessjudge")
}

fn ok(args: &[&str]) -> Output {
    let out = hj(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn judge_fixture(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("records.jsonl");
    let corpus = core_fixture("corpus.jsonl");
    let responses = core_fixture("responses.jsonl");
    let mut args = vec![
        "judge",
        "--corpus",
        s(&corpus),
        "--responses",
        s(&responses),
        "--out",
        s(&out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn judge_matches_expected_and_writes_manifest() {
    let dir = TempDir::new().unwrap();
    let out = judge_fixture(dir.path(), &["--parallelism", "2"]);
    let records: Vec<JudgeRecord> = jsonl(&out);
    let expected: HashMap<String, Value> =
        serde_json::from_str(&fs::read_to_string(core_fixture("expected.json")).unwrap()).unwrap();
    assert_eq!(records.len(), expected.len());
    for r in &records {
        let e = &expected[&r.response_id];
        assert_eq!(r.reward, e["reward"].as_f64().unwrap(), "{}", r.response_id);
    }

    let manifest: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("records.jsonl.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "judge");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["config"]["parallelism"], 2);
    assert!(!dir.path().join("records.jsonl.errors.jsonl").exists());
}

#[test]
fn first_k_and_config_file_precedence() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("hj.toml");
    fs::write(&config, "first_k = 1\n").unwrap();

    let out = judge_fixture(dir.path(), &["--config", s(&config)]);
    let records: Vec<JudgeRecord> = jsonl(&out);
    assert!(records.iter().all(|r| r.num_inputs <= 1));

    let out = judge_fixture(dir.path(), &["--config", s(&config), "--first-k", "2"]);
    let records: Vec<JudgeRecord> = jsonl(&out);
    assert!(records.iter().all(|r| r.num_inputs <= 2));
    assert!(records.iter().any(|r| r.num_inputs == 2));
}

#[test]
fn invalid_configuration_exits_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "frist_k = 1\n").unwrap();
    let corpus = core_fixture("corpus.jsonl");
    let responses = core_fixture("responses.jsonl");
    let base = [
        "judge",
        "--corpus",
        s(&corpus),
        "--responses",
        s(&responses),
    ];

    let mut args = base.to_vec();
    args.extend(["--config", s(&config)]);
    assert_eq!(hj(&args).status.code(), Some(2));

    let mut args = base.to_vec();
    args.extend(["--first-k", "0"]);
    assert_eq!(hj(&args).status.code(), Some(2));

    assert_eq!(
        hj(&[
            "judge",
            "--corpus",
            "/nonexistent",
            "--responses",
            s(&responses)
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn unknown_targets_are_reported_per_response() {
    let dir = TempDir::new().unwrap();
    let responses = dir.path().join("responses.jsonl");
    let mut text = fs::read_to_string(core_fixture("responses.jsonl")).unwrap();
    text.push_str(
        r#"{"response_id": "stray", "problem_id": "missing", "target_program_id": "x", "kind": "io_pairs", "io_pairs": [{"input_str": "1\n", "expected_output": "1\n"}]}"#,
    );
    text.push('\n');
    fs::write(&responses, text).unwrap();
    let out = dir.path().join("records.jsonl");
    let corpus = core_fixture("corpus.jsonl");
    let res = hj(&[
        "judge",
        "--corpus",
        s(&corpus),
        "--responses",
        s(&responses),
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(jsonl::<JudgeRecord>(&out).len(), 23);
    let errors: Vec<Value> = jsonl(&dir.path().join("records.jsonl.errors.jsonl"));
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0]["response_id"], "stray");
}

#[test]
fn eval_tables() {
    let dir = TempDir::new().unwrap();
    let records = judge_fixture(dir.path(), &[]);
    let corpus = core_fixture("corpus.jsonl");

    let out = ok(&["eval", "--records", s(&records)]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("group"));
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().starts_with("all"));

    assert_eq!(
        hj(&["eval", "--records", s(&records), "--by-difficulty"])
            .status
            .code(),
        Some(2)
    );

    let reports_path = dir.path().join("reports.jsonl");
    ok(&[
        "eval",
        "--records",
        s(&records),
        "--by-difficulty",
        "--corpus",
        s(&corpus),
        "--out",
        s(&reports_path),
    ]);
    let reports: Vec<Value> = jsonl(&reports_path);
    let groups: Vec<&str> = reports
        .iter()
        .map(|r| r["group_key"].as_str().unwrap())
        .collect();
    assert_eq!(groups, ["easy", "hard", "medium"]);
    let total: u64 = reports
        .iter()
        .map(|r| r["n_responses"].as_u64().unwrap())
        .sum();
    assert_eq!(total, 23);

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert_eq!(hj(&["eval", "--records", s(&empty)]).status.code(), Some(2));
}

const SORT_OK: &str =
    "xs = list(map(int, input().split()))\nprint(' '.join(map(str, sorted(xs))))\n";
const SORT_REV: &str =
    "xs = list(map(int, input().split()))\nprint(' '.join(map(str, sorted(xs, reverse=True))))\n";
const ECHO: &str = "print(input())\n";

fn sort_corpus(dir: &Path) -> PathBuf {
    let programs: Vec<Value> = [("c-rev", SORT_REV), ("c-ok", SORT_OK), ("c-echo", ECHO)]
        .iter()
        .map(|(id, code)| serde_json::json!({"program_id": id, "role": "candidate", "code": code}))
        .chain([serde_json::json!({"program_id": "g", "role": "ground_truth", "code": SORT_OK})])
        .collect();
    let entry = serde_json::json!({
        "id": "sort",
        "description": "Sort integers ascending.",
        "io_mode": "stdin",
        "demo_tests": [{"input_str": "1 2\n", "expected_output": "1 2\n"}],
        "official_tests": [{"input_str": "3 1 2\n", "expected_output": "1 2 3\n"}, {"input_str": "4\n", "expected_output": "4\n"}],
        "programs": programs,
    });
    let path = dir.join("sort.jsonl");
    fs::write(&path, format!("{entry}\n")).unwrap();
    path
}

#[test]
fn select_prefers_the_candidate_passing_most_tests() {
    let dir = TempDir::new().unwrap();
    let corpus = sort_corpus(dir.path());
    let responses = dir.path().join("responses.jsonl");
    let pairs = r#"[{"input_str": "2 1\n", "expected_output": "1 2\n"}, {"input_str": "5\n", "expected_output": "5\n"}, {"input_str": "3 2 9\n", "expected_output": "2 3 9\n"}]"#;
    let lines: Vec<String> = (0..2)
        .map(|i| format!(r#"{{"response_id": "s{i}", "problem_id": "sort", "target_program_id": "c-rev", "kind": "io_pairs", "io_pairs": {pairs}}}"#))
        .collect();
    fs::write(&responses, lines.join("\n")).unwrap();
    let out = dir.path().join("selection.jsonl");
    ok(&[
        "select",
        "--corpus",
        s(&corpus),
        "--responses",
        s(&responses),
        "--out",
        s(&out),
    ]);
    let rows: Vec<Value> = jsonl(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["selected_program_id"], "c-ok");
    assert_eq!(rows[0]["pass_counts"], serde_json::json!([2, 6, 2]));
    assert_eq!(rows[0]["total_tests"], 6);

    let plain = core_fixture("corpus.jsonl");
    assert_eq!(
        hj(&[
            "select",
            "--corpus",
            s(&plain),
            "--responses",
            s(&responses)
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn corpus_steps() {
    let dir = TempDir::new().unwrap();
    let corpus = sort_corpus(dir.path());

    let picked = dir.path().join("picked.jsonl");
    ok(&[
        "corpus",
        "pick-buggy",
        "--corpus",
        s(&corpus),
        "--out",
        s(&picked),
    ]);
    let entries = Corpus::read(fs::read_to_string(&picked).unwrap().as_bytes()).unwrap();
    let roles: Vec<(String, Role)> = entries.entries()[0]
        .programs
        .iter()
        .map(|p| (p.program_id.clone(), p.role))
        .collect();
    assert!(roles.contains(&("g".into(), Role::GroundTruth)));
    assert!(roles.iter().all(|(_, r)| *r != Role::Candidate));
    let buggy: Vec<&str> = roles
        .iter()
        .filter(|(_, r)| *r == Role::Buggy)
        .map(|(id, _)| id.as_str())
        .collect();
    assert_eq!(buggy, ["c-rev", "c-echo"]);

    ok(&[
        "corpus",
        "pick-buggy",
        "--corpus",
        s(&corpus),
        "--keep-top",
        "1",
        "--out",
        s(&picked),
    ]);
    let entries = Corpus::read(fs::read_to_string(&picked).unwrap().as_bytes()).unwrap();
    let buggy: Vec<&str> = entries.entries()[0]
        .with_role(Role::Buggy)
        .map(|p| p.program_id.as_str())
        .collect();
    assert_eq!(buggy, ["c-rev"]);

    let filtered = dir.path().join("filtered.jsonl");
    let fixture = core_fixture("corpus.jsonl");
    ok(&[
        "corpus",
        "filter-gt",
        "--corpus",
        s(&fixture),
        "--out",
        s(&filtered),
    ]);
    assert_eq!(
        Corpus::read(fs::read_to_string(&filtered).unwrap().as_bytes())
            .unwrap()
            .entries()
            .len(),
        11
    );

    let variants = dir.path().join("variants.jsonl");
    ok(&[
        "corpus",
        "variants",
        "--corpus",
        s(&fixture),
        "--out",
        s(&variants),
    ]);
    let v = Corpus::read(fs::read_to_string(&variants).unwrap().as_bytes()).unwrap();
    assert_eq!(v.entries().len(), 12);
    assert!(v.get("sort-list-fn-no-examples").is_some());

    let clean = dir.path().join("clean.jsonl");
    ok(&[
        "corpus",
        "decontaminate",
        "--corpus",
        s(&fixture),
        "--eval",
        s(&fixture),
        "--out",
        s(&clean),
    ]);
    assert_eq!(fs::read_to_string(&clean).unwrap().trim(), "");
    ok(&[
        "corpus",
        "decontaminate",
        "--corpus",
        s(&fixture),
        "--eval",
        s(&corpus),
        "--out",
        s(&clean),
    ]);
    assert_eq!(
        Corpus::read(fs::read_to_string(&clean).unwrap().as_bytes())
            .unwrap()
            .entries()
            .len(),
        11
    );
}

#[test]
fn sft_filter_keeps_full_reward_responses() {
    let dir = TempDir::new().unwrap();
    let records = judge_fixture(dir.path(), &[]);
    let out = dir.path().join("sft.jsonl");
    let responses = core_fixture("responses.jsonl");
    ok(&[
        "corpus",
        "sft-filter",
        "--records",
        s(&records),
        "--responses",
        s(&responses),
        "--out",
        s(&out),
    ]);
    let recs: Vec<JudgeRecord> = jsonl(&records);
    let mut want: Vec<String> = recs
        .iter()
        .filter(|r| r.reward == 1.0)
        .map(|r| r.response_id.clone())
        .collect();
    let mut got: Vec<String> = jsonl::<TestResponse>(&out)
        .into_iter()
        .map(|r| r.response_id)
        .collect();
    want.sort();
    got.sort();
    assert!(!want.is_empty());
    assert_eq!(got, want);
}

#[test]
fn diversity_and_sweep_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let responses = core_fixture("responses.jsonl");
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&[
        "diversity",
        "--responses",
        s(&responses),
        "--compare",
        s(&responses),
        "--parallelism",
        "1",
        "--out",
        s(&a),
    ]);
    ok(&[
        "diversity",
        "--responses",
        s(&responses),
        "--compare",
        s(&responses),
        "--parallelism",
        "3",
        "--out",
        s(&b),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let rows: Vec<Value> = jsonl(&a);
    assert_eq!(rows.last().unwrap()["problem_id"], "average");
    assert_eq!(rows.last().unwrap()["a"], rows.last().unwrap()["b"]);

    let corpus = core_fixture("corpus.jsonl");
    let sweep = dir.path().join("sweep.jsonl");
    let out = ok(&[
        "sweep",
        "--corpus",
        s(&corpus),
        "--responses",
        s(&responses),
        "--mode",
        "first-k",
        "--values",
        "1,3",
        "--out",
        s(&sweep),
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    let rows: Vec<Value> = jsonl(&sweep);
    assert_eq!(rows.len(), 2);
    assert!(
        rows[0]["report"]["mean_num_tests"].as_f64()
            <= rows[1]["report"]["mean_num_tests"].as_f64()
    );
}

#[test]
fn gen_replays_a_transcript() {
    let dir = TempDir::new().unwrap();
    let fixture = core_fixture("corpus.jsonl");
    let corpus = Corpus::read(fs::read_to_string(&fixture).unwrap().as_bytes()).unwrap();
    let good =
        "Here you go.\n```json\n[{\"input_str\": \"1\\n\", \"expected_output\": \"1\\n\"}]\n```\n";
    let mut lines = Vec::new();
    for entry in corpus.entries() {
        for f in entry.with_role(Role::Buggy) {
            let prompt = render_prompt(PromptKind::IoPairs, &entry.problem, Some(f)).unwrap();
            let entry = TranscriptEntry {
                model: "fixture-model".into(),
                prompt,
                responses: vec![good.into(), "no code here".into()],
            };
            lines.push(serde_json::to_string(&entry).unwrap());
        }
    }
    let transcript = dir.path().join("transcript.jsonl");
    fs::write(&transcript, lines.join("\n")).unwrap();

    let run = |out: &Path, par: &str| {
        ok(&[
            "gen",
            "--corpus",
            s(&fixture),
            "--kind",
            "io-pairs",
            "--model",
            "fixture-model",
            "--n-samples",
            "2",
            "--replay-transcript",
            s(&transcript),
            "--parallelism",
            par,
            "--out",
            s(out),
        ]);
    };
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    run(&a, "1");
    run(&b, "4");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let responses: Vec<TestResponse> = jsonl(&a);
    assert_eq!(responses.len(), 22);
    assert!(responses.iter().all(|r| r.kind == ResponseKind::IoPairs));
    assert_eq!(
        responses.iter().filter(|r| r.parse_error.is_some()).count(),
        11
    );
    assert_eq!(responses[0].response_id, "sort-asc:sort-asc-f:0");
    assert_eq!(responses[0].io_pairs.as_ref().map(Vec::len), Some(1));

    let res = hj(&[
        "gen",
        "--corpus",
        s(&fixture),
        "--kind",
        "harness",
        "--model",
        "fixture-model",
        "--replay-transcript",
        s(&transcript),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(
        hj(&["gen", "--corpus", s(&fixture), "--kind", "harness"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn classify_replays_a_transcript() {
    let transcript = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../gateway/tests/fixtures/classify_transcript.jsonl");
    let harnesses: HashMap<String, String> = serde_json::from_str(
        &fs::read_to_string(
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../gateway/tests/fixtures/classify_harnesses.json"),
        )
        .unwrap(),
    )
    .unwrap();
    let dir = TempDir::new().unwrap();
    let responses = dir.path().join("responses.jsonl");
    let mut names: Vec<&String> = harnesses.keys().collect();
    names.sort();
    let lines: Vec<String> = names
        .iter()
        .map(|name| {
            let r = TestResponse::harness(name.as_str(), "p", "f", harnesses[*name].clone());
            serde_json::to_string(&r).unwrap()
        })
        .collect();
    fs::write(&responses, lines.join("\n")).unwrap();
    let out = dir.path().join("labels.jsonl");
    ok(&[
        "classify",
        "--responses",
        s(&responses),
        "--model",
        "classifier",
        "--replay-transcript",
        s(&transcript),
        "--out",
        s(&out),
    ]);
    let rows: Vec<Value> = jsonl(&out);
    assert_eq!(rows.len(), names.len());
    assert!(rows
        .iter()
        .all(|r| r.get("error").is_none() && r["input_labels"].is_array()));
}

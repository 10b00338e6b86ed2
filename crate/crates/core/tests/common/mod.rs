#![allow(dead_code)]

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use harnessjudge::exec::FILE_PLACEHOLDER;
use harnessjudge::{Corpus, Judge, JudgeJob, RuntimeConfig, TestResponse};
use serde::Deserialize;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn runtime() -> RuntimeConfig {
    RuntimeConfig {
        program_command: vec!["python3".into(), "-S".into(), FILE_PLACEHOLDER.into()],
        source_file: "main.py".into(),
        shim_command: vec![
            "python3".into(),
            "-S".into(),
            fixture("runner_stub.py").to_string_lossy().into_owned(),
        ],
        scratch_root: None,
    }
}

pub fn judge() -> Judge {
    harnessjudge::shim_judge(runtime())
}

pub fn corpus() -> Corpus {
    Corpus::read(BufReader::new(File::open(fixture("corpus.jsonl")).unwrap())).unwrap()
}

pub fn responses() -> Vec<TestResponse> {
    harnessjudge::read_responses(BufReader::new(
        File::open(fixture("responses.jsonl")).unwrap(),
    ))
    .unwrap()
}

#[derive(Debug, Clone, Deserialize)]
pub struct Expected {
    pub reward: f64,
    pub inputs_valid: bool,
    pub g_passes: bool,
    pub f_fails: bool,
    pub has_divergent_input: bool,
    pub num_inputs: usize,
    pub cls: String,
}

pub fn expected() -> HashMap<String, Expected> {
    serde_json::from_reader(File::open(fixture("expected.json")).unwrap()).unwrap()
}

/// Pairs every response with its problem, target and ground truth.
pub fn jobs<'a>(corpus: &'a Corpus, responses: &'a [TestResponse]) -> Vec<JudgeJob<'a>> {
    responses
        .iter()
        .map(|r| {
            let entry = corpus.get(&r.problem_id).expect("problem");
            JudgeJob {
                response: r,
                problem: &entry.problem,
                f: entry.program(&r.target_program_id).expect("target"),
                g: entry.ground_truth().expect("ground truth"),
            }
        })
        .collect()
}

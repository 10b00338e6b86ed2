use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use harnessjudge::TestResponse;
use harnessjudge_gateway::{
    classify_strategies, GatewayError, InputStrategy, OutputStrategy, RecordingSampler,
    ReplaySampler, Sampler, SamplingConfig,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn harnesses() -> HashMap<String, String> {
    serde_json::from_str(&std::fs::read_to_string(fixture("classify_harnesses.json")).unwrap())
        .unwrap()
}

fn classifier_cfg() -> SamplingConfig {
    SamplingConfig {
        model_name: "classifier".into(),
        ..SamplingConfig::default()
    }
}

#[test]
fn random_list_generator_is_dynamic() {
    let sampler = ReplaySampler::load(&fixture("classify_transcript.jsonl")).unwrap();
    let harness = TestResponse::harness("r", "sort", "f", harnesses()["random_list"].clone());
    let labels = classify_strategies(&harness, &sampler, &classifier_cfg()).unwrap();
    assert_eq!(labels.input_labels, [InputStrategy::Dynamic]);
    assert_eq!(
        labels.output_labels,
        BTreeSet::from([OutputStrategy::InvariantChecking])
    );
}

#[test]
fn brute_force_checker_is_reference_implementation() {
    let sampler = ReplaySampler::load(&fixture("classify_transcript.jsonl")).unwrap();
    let harness = TestResponse::harness("r", "sum", "f", harnesses()["brute_force"].clone());
    let labels = classify_strategies(&harness, &sampler, &classifier_cfg()).unwrap();
    assert_eq!(
        labels.input_labels,
        [InputStrategy::Hardcoded, InputStrategy::Dynamic]
    );
    assert!(labels
        .output_labels
        .contains(&OutputStrategy::ReferenceImplementation));
}

#[test]
fn unknown_prompt_misses() {
    let sampler = ReplaySampler::load(&fixture("classify_transcript.jsonl")).unwrap();
    let harness =
        TestResponse::harness("r", "p", "f", "def generate_input_1():\n    return ['x']\n");
    let err = classify_strategies(&harness, &sampler, &classifier_cfg()).unwrap_err();
    assert!(matches!(err, GatewayError::ReplayMiss { .. }));
    let io = TestResponse::io_pairs("r", "p", "f", vec![]);
    assert!(matches!(
        classify_strategies(&io, &sampler, &classifier_cfg()),
        Err(GatewayError::Classification(_))
    ));
}

struct Counter(AtomicUsize);

impl Sampler for Counter {
    fn sample(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<String>, GatewayError> {
        let call = self.0.fetch_add(1, Ordering::SeqCst);
        Ok((0..cfg.n_samples)
            .map(|i| format!("{prompt}#{call}.{i}"))
            .collect())
    }
}

#[test]
fn recorded_traffic_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let cfg = SamplingConfig {
        model_name: "m".into(),
        n_samples: 3,
        ..SamplingConfig::default()
    };
    let live = RecordingSampler::new(Counter(AtomicUsize::new(0)), &path).unwrap();
    let first = live.sample("a", &cfg).unwrap();
    let second = live.sample("a", &cfg).unwrap();
    let other = live.sample("b", &cfg).unwrap();
    drop(live);

    let replay = ReplaySampler::load(&path).unwrap();
    assert_eq!(replay.sample("a", &cfg).unwrap(), first);
    assert_eq!(replay.sample("a", &cfg).unwrap(), second);
    assert_eq!(replay.sample("a", &cfg).unwrap(), second);
    assert_eq!(replay.sample("b", &cfg).unwrap(), other);
    let other_model = SamplingConfig {
        model_name: "n".into(),
        ..cfg
    };
    assert!(matches!(
        replay.sample("a", &other_model),
        Err(GatewayError::ReplayMiss { .. })
    ));
}

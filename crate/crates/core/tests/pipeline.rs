mod common;

use harnessjudge::corpus::{self, BuggyMode, BuggySelectionPolicy};
use harnessjudge::selection::{self, select_best_of_n};
use harnessjudge::{
    ExecLimits, IoMode, IoPair, JudgeConfig, PipelineError, Problem, ProgramSource, Role,
    TestResponse,
};

const SORT_OK: &str =
    "xs = list(map(int, input().split()))\nprint(' '.join(map(str, sorted(xs))))\n";
const SORT_REV: &str =
    "xs = list(map(int, input().split()))\nprint(' '.join(map(str, sorted(xs, reverse=True))))\n";
const CRASH: &str = "raise SystemExit(3)\n";

fn sort_problem() -> Problem {
    Problem {
        id: "sort".into(),
        description: "sort".into(),
        io_mode: IoMode::Stdin,
        function_name: None,
        demo_tests: vec![IoPair::new("2 1\n", "1 2\n")],
        official_tests: vec![IoPair::new("3 1 2\n", "1 2 3\n"), IoPair::new("1\n", "1\n")],
        difficulty: None,
        metadata: Default::default(),
    }
}

fn cand(id: &str, code: &str) -> ProgramSource {
    ProgramSource::new(id, "sort", Role::Candidate, code)
}

fn io_response(id: &str) -> TestResponse {
    TestResponse::io_pairs(
        id,
        "sort",
        "x",
        vec![
            IoPair::new("2 1\n", "1 2\n"),
            IoPair::new("5\n", "5\n"),
            IoPair::new("1 2\n", "1 2\n"),
        ],
    )
}

#[test]
fn io_pool_counts_and_crash_is_fail() {
    let judge = common::judge();
    let candidates = [
        cand("rev", SORT_REV),
        cand("crash", CRASH),
        cand("ok", SORT_OK),
    ];
    let res = select_best_of_n(
        &judge,
        &sort_problem(),
        &candidates,
        &[io_response("a")],
        &JudgeConfig::default(),
        2,
    )
    .unwrap();
    assert_eq!(res.pass_counts, [1, 0, 3]);
    assert_eq!(res.selected_index, 2);
    assert_eq!(res.total_tests, 3);
}

#[test]
fn duplicate_candidates_score_identically() {
    let judge = common::judge();
    let candidates = [
        cand("ok", SORT_OK),
        cand("rev", SORT_REV),
        cand("ok2", SORT_OK),
        cand("rev2", SORT_REV),
    ];
    let responses = [io_response("a"), io_response("b")];
    let res = select_best_of_n(
        &judge,
        &sort_problem(),
        &candidates,
        &responses,
        &JudgeConfig::default(),
        4,
    )
    .unwrap();
    assert_eq!(res.total_tests, 6, "duplicate tests stay in the pool");
    assert_eq!(res.pass_counts[0], res.pass_counts[2]);
    assert_eq!(res.pass_counts[1], res.pass_counts[3]);
    assert_eq!(res.selected_index, 0);
}

#[test]
fn empty_pool_selects_first_and_no_candidates_is_error() {
    let judge = common::judge();
    let empty = TestResponse::harness("h", "sort", "x", "def check_output(i, o):\n    pass\n");
    let candidates = [cand("rev", SORT_REV), cand("ok", SORT_OK)];
    let res = select_best_of_n(
        &judge,
        &sort_problem(),
        &candidates,
        &[empty],
        &JudgeConfig::default(),
        1,
    )
    .unwrap();
    assert_eq!(res.total_tests, 0);
    assert_eq!(res.selected_index, 0);
    let err = select_best_of_n(
        &judge,
        &sort_problem(),
        &[],
        &[],
        &JudgeConfig::default(),
        1,
    )
    .unwrap_err();
    assert!(matches!(err, PipelineError::Precondition { .. }));
}

#[test]
fn fixture_ground_truths_pass_official_tests() {
    let judge = common::judge();
    let corpus = common::corpus();
    for entry in corpus.entries() {
        let g = entry.ground_truth().unwrap();
        assert!(
            corpus::filter_ground_truth(&judge, &entry.problem, g, &ExecLimits::default(), 4)
                .unwrap(),
            "{}",
            entry.problem.id
        );
    }
}

#[test]
fn ground_truth_filter_rejects_wrong_and_requires_tests() {
    let judge = common::judge();
    let problem = sort_problem();
    assert!(!corpus::filter_ground_truth(
        &judge,
        &problem,
        &cand("rev", SORT_REV),
        &ExecLimits::default(),
        1
    )
    .unwrap());
    let mut bare = problem.clone();
    bare.official_tests.clear();
    assert!(corpus::filter_ground_truth(
        &judge,
        &bare,
        &cand("ok", SORT_OK),
        &ExecLimits::default(),
        1
    )
    .is_err());
}

#[test]
fn buggy_modes_differ_on_demo_tests() {
    let judge = common::judge();
    let problem = sort_problem();
    // passes the demo and one official test
    let half = "xs = list(map(int, input().split()))\nprint(' '.join(map(str, sorted(xs))) if len(xs) < 3 else '0')\n";
    let candidates = [
        cand("ok", SORT_OK),
        cand("half", half),
        cand("rev", SORT_REV),
    ];
    let scores = corpus::score_candidates(&judge, &problem, &candidates, &ExecLimits::default(), 2);
    assert_eq!(scores[1].official.passed, 1);
    assert_eq!(scores[1].demo.passed, 1);
    let picked = |mode| {
        let policy = BuggySelectionPolicy { mode, keep_top: 2 };
        corpus::select_buggy(
            &judge,
            &problem,
            &candidates,
            &policy,
            &ExecLimits::default(),
            2,
        )
        .unwrap()
        .into_iter()
        .map(|p| p.program_id)
        .collect::<Vec<_>>()
    };
    let partial = picked(BuggyMode::PartialOfficial);
    let demo = picked(BuggyMode::DemoPassing);
    assert!(partial.contains(&"half".to_string()));
    assert!(!partial.contains(&"ok".to_string()));
    assert!(!demo.contains(&"ok".to_string()));
    assert_ne!(partial, demo);
}

#[test]
fn functional_variants_of_fixture() {
    let corpus = common::corpus();
    let problem = &corpus.get("sort-list-fn").unwrap().problem;
    let variants = corpus::make_functional_variants(problem).unwrap();
    assert_eq!(variants[0], *problem);
    if let Some(stripped) = variants.get(1) {
        assert_eq!(stripped.id, "sort-list-fn-no-examples");
        assert!(stripped.demo_tests.is_empty());
        assert_eq!(stripped.official_tests, problem.official_tests);
    }
    let stdin = &corpus.get("sort-asc").unwrap().problem;
    assert!(corpus::make_functional_variants(stdin).is_err());
}

#[test]
fn diversity_of_fixture_pools() {
    let judge = common::judge();
    let responses = common::responses();
    let pool: Vec<String> = selection::build_pool(&judge, &responses[..6], &JudgeConfig::default())
        .into_iter()
        .map(|t| t.input)
        .collect();
    assert!(!pool.is_empty());
    let report = selection::diversity_report(&pool).unwrap();
    assert_eq!(report.n_inputs, pool.len());
    assert!(report.unique_ratio > 0.0 && report.unique_ratio <= 1.0);
}

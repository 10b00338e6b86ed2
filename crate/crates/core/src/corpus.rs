//! Corpus construction: ground-truth validation, buggy-program selection,
//! decontamination against evaluation problems, rejection filtering of
//! judged responses, and example-free variants of functional problems.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{check_expected, Judge};
use crate::error::{ConfigError, PipelineError};
use crate::exec::ExecLimits;
use crate::model::{ExecStatus, IoMode, IoPair, JudgeRecord, Problem, ProgramSource, TestResponse};
use crate::par;

pub const DEFAULT_DECONTAMINATION_THRESHOLD: f64 = 0.6;
pub const DECONTAMINATION_NGRAM: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuggyMode {
    /// Passes at least one official test but not all of them.
    #[default]
    PartialOfficial,
    /// Passes every demo test and fails at least one official test.
    DemoPassing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuggySelectionPolicy {
    pub mode: BuggyMode,
    pub keep_top: usize,
}

impl Default for BuggySelectionPolicy {
    fn default() -> Self {
        Self {
            mode: BuggyMode::PartialOfficial,
            keep_top: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TestScore {
    pub passed: usize,
    pub total: usize,
}

impl TestScore {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CandidateScore {
    pub official: TestScore,
    pub demo: TestScore,
}

impl BuggySelectionPolicy {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.keep_top == 0 {
            return Err(ConfigError::Invalid("keep_top must be >= 1".into()));
        }
        Ok(())
    }

    pub fn admits(&self, score: &CandidateScore) -> bool {
        match self.mode {
            BuggyMode::PartialOfficial => {
                score.official.passed >= 1 && !score.official.all_passed()
            }
            BuggyMode::DemoPassing => score.demo.all_passed() && !score.official.all_passed(),
        }
    }
}

/// Indices of admitted candidates, most official passes first, ties by position.
pub fn rank_buggy(scores: &[CandidateScore], policy: &BuggySelectionPolicy) -> Vec<usize> {
    let mut admitted: Vec<usize> = (0..scores.len())
        .filter(|&i| policy.admits(&scores[i]))
        .collect();
    // stable sort keeps earlier candidates first among equals
    admitted.sort_by(|&a, &b| scores[b].official.passed.cmp(&scores[a].official.passed));
    admitted.truncate(policy.keep_top);
    admitted
}

/// Per-test pass flags for each program, running the whole grid in parallel.
fn pass_grid(
    judge: &Judge,
    problem: &Problem,
    programs: &[&ProgramSource],
    tests: &[IoPair],
    limits: &ExecLimits,
    parallelism: usize,
) -> Vec<Vec<bool>> {
    let cells: Vec<(usize, usize)> = (0..programs.len())
        .flat_map(|p| (0..tests.len()).map(move |t| (p, t)))
        .collect();
    let results = par::map(&cells, parallelism, |&(p, t)| {
        let outcome = judge.run_target(problem, programs[p], &tests[t].input_str, limits);
        if outcome.status == ExecStatus::SetupError {
            tracing::warn!(program = %programs[p].program_id, "setup error: {}", outcome.stderr.trim());
        }
        outcome.is_success() && check_expected(&outcome.stdout, &tests[t].expected_output).passed()
    });
    let mut grid = vec![Vec::with_capacity(tests.len()); programs.len()];
    for (&(p, _), ok) in cells.iter().zip(results) {
        grid[p].push(ok);
    }
    grid
}

fn require_official(problem: &Problem) -> Result<(), PipelineError> {
    if problem.official_tests.is_empty() {
        return Err(PipelineError::Precondition {
            problem: problem.id.clone(),
            reason: "no official tests".into(),
        });
    }
    Ok(())
}

/// True iff `candidate` passes every official test.
pub fn filter_ground_truth(
    judge: &Judge,
    problem: &Problem,
    candidate: &ProgramSource,
    limits: &ExecLimits,
    parallelism: usize,
) -> Result<bool, PipelineError> {
    require_official(problem)?;
    let grid = pass_grid(
        judge,
        problem,
        &[candidate],
        &problem.official_tests,
        limits,
        parallelism,
    );
    Ok(grid[0].iter().all(|&ok| ok))
}

/// Official and demo scores for each candidate.
pub fn score_candidates(
    judge: &Judge,
    problem: &Problem,
    candidates: &[ProgramSource],
    limits: &ExecLimits,
    parallelism: usize,
) -> Vec<CandidateScore> {
    let refs: Vec<&ProgramSource> = candidates.iter().collect();
    let tests: Vec<IoPair> = problem
        .official_tests
        .iter()
        .chain(&problem.demo_tests)
        .cloned()
        .collect();
    let n_official = problem.official_tests.len();
    pass_grid(judge, problem, &refs, &tests, limits, parallelism)
        .into_iter()
        .map(|row| CandidateScore {
            official: TestScore {
                passed: row[..n_official].iter().filter(|&&ok| ok).count(),
                total: n_official,
            },
            demo: TestScore {
                passed: row[n_official..].iter().filter(|&&ok| ok).count(),
                total: row.len() - n_official,
            },
        })
        .collect()
}

/// Partially correct candidates per `policy`, best `keep_top` first.
pub fn select_buggy(
    judge: &Judge,
    problem: &Problem,
    candidates: &[ProgramSource],
    policy: &BuggySelectionPolicy,
    limits: &ExecLimits,
    parallelism: usize,
) -> Result<Vec<ProgramSource>, PipelineError> {
    require_official(problem)?;
    policy.validate().map_err(|e| PipelineError::Precondition {
        problem: problem.id.clone(),
        reason: e.to_string(),
    })?;
    let scores = score_candidates(judge, problem, candidates, limits, parallelism);
    Ok(rank_buggy(&scores, policy)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect())
}

/// Lowercased with whitespace runs collapsed to single spaces.
pub fn normalize_description(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Word `n`-grams of a normalized description. Texts shorter than `n` words
/// yield a single gram made of all their words.
pub fn word_ngrams(normalized: &str, n: usize) -> HashSet<String> {
    let words: Vec<&str> = normalized.split(' ').filter(|w| !w.is_empty()).collect();
    if words.is_empty() {
        return HashSet::new();
    }
    if words.len() < n {
        return HashSet::from([words.join(" ")]);
    }
    words.windows(n).map(|w| w.join(" ")).collect()
}

pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Training problems that overlap no evaluation problem.
///
/// A training problem is dropped when its normalized description equals an
/// evaluation description, or when the Jaccard similarity of their word
/// 13-gram sets reaches `threshold`.
pub fn decontaminate(
    train: &[Problem],
    eval: &[Problem],
    threshold: f64,
) -> Result<Vec<Problem>, ConfigError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(ConfigError::Invalid(format!(
            "threshold {threshold} outside (0, 1]"
        )));
    }
    let eval_norm: Vec<String> = eval
        .iter()
        .map(|p| normalize_description(&p.description))
        .collect();
    let exact: HashSet<&str> = eval_norm.iter().map(String::as_str).collect();
    let eval_grams: Vec<HashSet<String>> = eval_norm
        .iter()
        .map(|d| word_ngrams(d, DECONTAMINATION_NGRAM))
        .collect();
    Ok(train
        .iter()
        .filter(|p| {
            let norm = normalize_description(&p.description);
            if exact.contains(norm.as_str()) {
                return false;
            }
            let grams = word_ngrams(&norm, DECONTAMINATION_NGRAM);
            !eval_grams.iter().any(|e| jaccard(&grams, e) >= threshold)
        })
        .cloned()
        .collect())
}

/// Responses whose record shows the ground truth passing and the buggy
/// program failing.
pub fn sft_filter(records: &[JudgeRecord], responses: &[TestResponse]) -> Vec<TestResponse> {
    let keep: HashMap<&str, bool> = records
        .iter()
        .map(|r| (r.response_id.as_str(), r.g_passes && r.f_fails))
        .collect();
    responses
        .iter()
        .filter(|r| keep.get(r.response_id.as_str()).copied().unwrap_or(false))
        .cloned()
        .collect()
}

fn example_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(?:#+\s*|\*\*)?(?:examples?\b|sample\s+(?:input|output|test)s?\b|for\s+example\b)")
            .unwrap()
    })
}

fn section_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(?:#+\s*|\*\*)?(?:constraints?|notes?|follow[- ]?up|hints?)\b")
            .unwrap()
    })
}

/// Removes example blocks from a description. `None` when nothing was found.
///
/// A block starts at a line like `Example 1:`, `Examples`, `Sample Input` or
/// `For example` and runs until a `Constraints` / `Note` / `Follow-up`
/// heading or the end of the text. Stray doctest (`>>>`) and `assert` lines
/// are removed as well.
pub fn strip_examples(description: &str) -> Option<String> {
    let mut kept = Vec::new();
    let mut in_block = false;
    let mut removed = false;
    for line in description.lines() {
        if example_header().is_match(line) {
            in_block = true;
            removed = true;
            continue;
        }
        if in_block && section_header().is_match(line) {
            in_block = false;
        }
        let trimmed = line.trim_start();
        if !in_block && (trimmed.starts_with(">>>") || trimmed.starts_with("assert ")) {
            removed = true;
            continue;
        }
        if !in_block {
            kept.push(line);
        }
    }
    if !removed {
        return None;
    }
    let mut text = kept.join("\n");
    while text.contains("\n\n\n") {
        text = text.replace("\n\n\n", "\n\n");
    }
    Some(text.trim_end().to_string())
}

/// The original functional problem plus a copy without its examples.
pub fn make_functional_variants(problem: &Problem) -> Result<Vec<Problem>, PipelineError> {
    if problem.io_mode != IoMode::Functional {
        return Err(PipelineError::Precondition {
            problem: problem.id.clone(),
            reason: "variants are only built for functional problems".into(),
        });
    }
    let Some(description) = strip_examples(&problem.description) else {
        tracing::warn!(problem = %problem.id, "no example block found; keeping only the original");
        return Ok(vec![problem.clone()]);
    };
    let mut stripped = problem.clone();
    stripped.id = format!("{}-no-examples", problem.id);
    stripped.description = description;
    stripped.demo_tests.clear();
    stripped
        .metadata
        .insert("variant_of".into(), Value::from(problem.id.clone()));
    Ok(vec![problem.clone(), stripped])
}

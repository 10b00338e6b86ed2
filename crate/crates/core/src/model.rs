//! Domain types shared by the whole engine.
//!
//! Everything here is plain data: problems and their programs as read from a
//! corpus JSONL file, parsed model responses, and the per-input / per-response
//! records produced by judging. No type in this module executes anything.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ModelError;

/// Maximum number of input-output pairs a single response may carry.
pub const MAX_IO_PAIRS: usize = 20;

/// Extra JSON fields carried through untouched.
pub type Metadata = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoMode {
    Stdin,
    Functional,
}

/// Opaque difficulty tag: a numeric rating or a dataset-native label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Difficulty {
    Rating(i64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoPair {
    pub input_str: String,
    pub expected_output: String,
}

impl IoPair {
    pub fn new(input_str: impl Into<String>, expected_output: impl Into<String>) -> Self {
        Self {
            input_str: input_str.into(),
            expected_output: expected_output.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub description: String,
    pub io_mode: IoMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function_name: Option<String>,
    #[serde(default)]
    pub demo_tests: Vec<IoPair>,
    #[serde(default)]
    pub official_tests: Vec<IoPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    /// Fields present in the source record that this crate does not interpret.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: Metadata,
}

impl Problem {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.id.trim().is_empty() {
            return Err(("id", "must be non-empty".into()));
        }
        if self.io_mode == IoMode::Functional
            && self
                .function_name
                .as_deref()
                .is_none_or(|n| n.trim().is_empty())
        {
            return Err((
                "function_name",
                "required when io_mode is functional".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    GroundTruth,
    Buggy,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramSource {
    pub program_id: String,
    pub problem_id: String,
    pub code: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: Metadata,
}

impl ProgramSource {
    pub fn new(
        program_id: impl Into<String>,
        problem_id: impl Into<String>,
        role: Role,
        code: impl Into<String>,
    ) -> Self {
        Self {
            program_id: program_id.into(),
            problem_id: problem_id.into(),
            code: code.into(),
            role,
            provenance: None,
            metadata: Metadata::new(),
        }
    }
}

// Wire shapes of the corpus JSONL schema. Programs are nested under their
// problem and carry no problem_id of their own.

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProgramRecord {
    program_id: String,
    role: Role,
    code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
    #[serde(flatten)]
    extra: Metadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    description: String,
    io_mode: IoMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    function_name: Option<String>,
    #[serde(default)]
    demo_tests: Vec<IoPair>,
    #[serde(default)]
    official_tests: Vec<IoPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    difficulty: Option<Difficulty>,
    #[serde(default)]
    programs: Vec<ProgramRecord>,
    #[serde(flatten)]
    extra: Metadata,
}

/// Parses one line of the corpus JSONL schema into validated domain types.
///
/// `line_no` is 1-based and only used for error reporting. Empty
/// `official_tests` is accepted here; operations that need tests reject it.
pub fn parse_corpus_record(
    line: &str,
    line_no: usize,
) -> Result<(Problem, Vec<ProgramSource>), ModelError> {
    let record: CorpusRecord = serde_json::from_str(line).map_err(|source| ModelError::Parse {
        line: line_no,
        source,
    })?;
    let invalid = |field: &str, reason: String| ModelError::Validation {
        line: line_no,
        field: field.to_string(),
        reason,
    };

    let problem = Problem {
        id: record.id,
        description: record.description,
        io_mode: record.io_mode,
        function_name: record.function_name,
        demo_tests: record.demo_tests,
        official_tests: record.official_tests,
        difficulty: record.difficulty,
        metadata: record.extra,
    };
    problem.validate().map_err(|(f, r)| invalid(f, r))?;

    let mut seen = HashMap::new();
    let mut ground_truths = 0;
    let mut programs = Vec::with_capacity(record.programs.len());
    for (i, p) in record.programs.into_iter().enumerate() {
        if p.program_id.trim().is_empty() {
            return Err(invalid(
                &format!("programs[{i}].program_id"),
                "must be non-empty".into(),
            ));
        }
        if p.code.trim().is_empty() {
            return Err(invalid(
                &format!("programs[{i}].code"),
                "must be non-empty".into(),
            ));
        }
        if let Some(prev) = seen.insert(p.program_id.clone(), i) {
            return Err(invalid(
                &format!("programs[{i}].program_id"),
                format!("duplicate of programs[{prev}]"),
            ));
        }
        if p.role == Role::GroundTruth {
            ground_truths += 1;
            if ground_truths > 1 {
                return Err(invalid(
                    &format!("programs[{i}].role"),
                    "more than one ground_truth program".into(),
                ));
            }
        }
        programs.push(ProgramSource {
            program_id: p.program_id,
            problem_id: problem.id.clone(),
            code: p.code,
            role: p.role,
            provenance: p.provenance,
            metadata: p.extra,
        });
    }
    Ok((problem, programs))
}

/// Inverse of [`parse_corpus_record`].
pub fn corpus_record_to_json(problem: &Problem, programs: &[ProgramSource]) -> Value {
    let record = CorpusRecord {
        id: problem.id.clone(),
        description: problem.description.clone(),
        io_mode: problem.io_mode,
        function_name: problem.function_name.clone(),
        demo_tests: problem.demo_tests.clone(),
        official_tests: problem.official_tests.clone(),
        difficulty: problem.difficulty.clone(),
        programs: programs
            .iter()
            .map(|p| ProgramRecord {
                program_id: p.program_id.clone(),
                role: p.role,
                code: p.code.clone(),
                provenance: p.provenance.clone(),
                extra: p.metadata.clone(),
            })
            .collect(),
        extra: problem.metadata.clone(),
    };
    serde_json::to_value(record).expect("corpus record serializes")
}

/// A problem together with all of its programs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub problem: Problem,
    pub programs: Vec<ProgramSource>,
}

impl CorpusEntry {
    pub fn ground_truth(&self) -> Option<&ProgramSource> {
        self.programs.iter().find(|p| p.role == Role::GroundTruth)
    }

    pub fn program(&self, program_id: &str) -> Option<&ProgramSource> {
        self.programs.iter().find(|p| p.program_id == program_id)
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ProgramSource> {
        self.programs.iter().filter(move |p| p.role == role)
    }

    pub fn to_json_line(&self) -> String {
        corpus_record_to_json(&self.problem, &self.programs).to_string()
    }
}

/// An in-memory corpus, ordered as read.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_entries(entries: Vec<CorpusEntry>) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.problem.id.clone(), i).is_some() {
                return Err(ModelError::Validation {
                    line: i + 1,
                    field: "id".into(),
                    reason: format!("duplicate problem id {:?}", e.problem.id),
                });
            }
        }
        Ok(Self { entries, index })
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, ModelError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (problem, programs) = parse_corpus_record(&line, i + 1)?;
            entries.push(CorpusEntry { problem, programs });
        }
        Self::from_entries(entries)
    }

    pub fn get(&self, problem_id: &str) -> Option<&CorpusEntry> {
        self.index.get(problem_id).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<CorpusEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Harness,
    IoPairs,
}

/// A parsed model response: harness code or a list of input-output pairs.
///
/// Responses that could not be parsed are kept (with `parse_error` set and no
/// payload) so they can still be judged, as zero-input responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResponse {
    pub response_id: String,
    pub problem_id: String,
    pub target_program_id: String,
    pub kind: ResponseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harness_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub io_pairs: Option<Vec<IoPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_model_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

impl TestResponse {
    pub fn harness(
        response_id: impl Into<String>,
        problem_id: impl Into<String>,
        target_program_id: impl Into<String>,
        code: impl Into<String>,
    ) -> Self {
        Self {
            response_id: response_id.into(),
            problem_id: problem_id.into(),
            target_program_id: target_program_id.into(),
            kind: ResponseKind::Harness,
            harness_code: Some(code.into()),
            io_pairs: None,
            raw_model_output: None,
            parse_error: None,
        }
    }

    pub fn io_pairs(
        response_id: impl Into<String>,
        problem_id: impl Into<String>,
        target_program_id: impl Into<String>,
        pairs: Vec<IoPair>,
    ) -> Self {
        Self {
            response_id: response_id.into(),
            problem_id: problem_id.into(),
            target_program_id: target_program_id.into(),
            kind: ResponseKind::IoPairs,
            harness_code: None,
            io_pairs: Some(pairs),
            raw_model_output: None,
            parse_error: None,
        }
    }

    /// Exactly one payload, matching `kind`, unless the response is a recorded parse failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.response_id.is_empty() {
            return Err(("response_id", "must be non-empty".into()));
        }
        if self.parse_error.is_some() {
            if self.harness_code.is_some() || self.io_pairs.is_some() {
                return Err((
                    "parse_error",
                    "unparsed response must not carry a payload".into(),
                ));
            }
            return Ok(());
        }
        match (self.kind, &self.harness_code, &self.io_pairs) {
            (ResponseKind::Harness, Some(_), None) => Ok(()),
            (ResponseKind::IoPairs, None, Some(pairs)) => {
                if pairs.is_empty() || pairs.len() > MAX_IO_PAIRS {
                    Err((
                        "io_pairs",
                        format!("expected 1..={MAX_IO_PAIRS} pairs, got {}", pairs.len()),
                    ))
                } else {
                    Ok(())
                }
            }
            (ResponseKind::Harness, _, _) => Err((
                "harness_code",
                "harness responses carry exactly harness_code".into(),
            )),
            (ResponseKind::IoPairs, _, _) => Err((
                "io_pairs",
                "io_pairs responses carry exactly io_pairs".into(),
            )),
        }
    }
}

pub fn parse_response_line(line: &str, line_no: usize) -> Result<TestResponse, ModelError> {
    let response: TestResponse =
        serde_json::from_str(line).map_err(|source| ModelError::Parse {
            line: line_no,
            source,
        })?;
    response
        .validate()
        .map_err(|(field, reason)| ModelError::Validation {
            line: line_no,
            field: field.into(),
            reason,
        })?;
    Ok(response)
}

pub fn read_responses<R: BufRead>(reader: R) -> Result<Vec<TestResponse>, ModelError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_response_line(&line, i + 1)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Success,
    RuntimeError,
    Timeout,
    SetupError,
}

/// What happened when one program ran on one input.
///
/// `wall_time` is kept in memory only; serialized records stay byte-stable
/// across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    pub stdout: String,
    pub stderr: String,
    pub exit_code: Option<i32>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ExecutionOutcome {
    pub fn setup_error(message: impl Into<String>) -> Self {
        Self {
            status: ExecStatus::SetupError,
            stdout: String::new(),
            stderr: message.into(),
            exit_code: None,
            wall_time: Duration::ZERO,
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == ExecStatus::Success
    }

    /// Crash or timeout, i.e. the program itself misbehaved.
    pub fn is_failure(&self) -> bool {
        matches!(self.status, ExecStatus::RuntimeError | ExecStatus::Timeout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    AssertionFail,
    CheckerError,
    CheckTimeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub status: CheckStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl CheckVerdict {
    pub fn pass() -> Self {
        Self {
            status: CheckStatus::Pass,
            message: None,
        }
    }

    /// A non-passing verdict. Non-pass verdicts always carry a message.
    pub fn failed(status: CheckStatus, message: impl Into<String>) -> Self {
        debug_assert_ne!(status, CheckStatus::Pass);
        let mut message = message.into();
        if message.is_empty() {
            message = format!("{status:?}");
        }
        Self {
            status,
            message: Some(message),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Where a judged input came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputSource {
    Generator { index: u32, seed: u64 },
    HardcodedPair { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEvaluation {
    pub input_str: String,
    pub source: InputSource,
    pub outcome_f: ExecutionOutcome,
    pub outcome_g: ExecutionOutcome,
    pub divergent: bool,
    pub check_on_f: CheckVerdict,
    pub check_on_g: CheckVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRecord {
    pub response_id: String,
    pub problem_id: String,
    pub target_program_id: String,
    pub kind: ResponseKind,
    pub inputs: Vec<InputEvaluation>,
    pub inputs_valid: bool,
    pub g_passes: bool,
    pub f_fails: bool,
    pub has_divergent_input: bool,
    pub reward: f64,
    pub num_inputs: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generator_errors: Vec<String>,
}

impl JudgeRecord {
    /// Derives the verdict flags from per-input evaluations. Reward is left at
    /// zero for the caller to fill in.
    pub fn from_evaluations(
        response: &TestResponse,
        inputs: Vec<InputEvaluation>,
        generator_errors: Vec<String>,
    ) -> Self {
        let any = !inputs.is_empty();
        let inputs_valid = any && inputs.iter().all(|e| e.outcome_g.is_success());
        let g_passes = inputs_valid && inputs.iter().all(|e| e.check_on_g.passed());
        let f_fails = inputs
            .iter()
            .any(|e| e.outcome_f.is_failure() || !e.check_on_f.passed());
        let has_divergent_input = inputs.iter().any(|e| e.divergent);
        Self {
            response_id: response.response_id.clone(),
            problem_id: response.problem_id.clone(),
            target_program_id: response.target_program_id.clone(),
            kind: response.kind,
            num_inputs: inputs.len(),
            inputs,
            inputs_valid,
            g_passes,
            f_fails,
            has_divergent_input,
            reward: 0.0,
            generator_errors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub group_key: String,
    pub n_responses: usize,
    pub gi: f64,
    pub itr: f64,
    pub tbr: f64,
    pub mean_num_tests: f64,
}

//! Turning raw model output into `TestResponse`s.
//!
//! Both parsers take the last fenced block, since reasoning models often emit
//! scratch blocks before the final answer. Neither panics on any input.

use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use harnessjudge::engine::generator_indices;
use harnessjudge::model::MAX_IO_PAIRS;
use harnessjudge::{IoPair, ResponseKind, TestResponse};

use crate::error::ParseError;

/// Identifiers attached to a parsed response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseIds {
    pub response_id: String,
    pub problem_id: String,
    pub target_program_id: String,
}

/// A fenced block: its info string (language tag) and body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock<'a> {
    pub info: &'a str,
    pub body: String,
}

/// All closed ``` blocks in order. An unterminated trailing block is ignored.
pub fn fenced_blocks(raw: &str) -> Vec<FencedBlock<'_>> {
    let mut blocks = Vec::new();
    let mut open: Option<(&str, Vec<&str>)> = None;
    for line in raw.lines() {
        let trimmed = line.trim();
        match &mut open {
            None => {
                if let Some(info) = trimmed.strip_prefix("```") {
                    open = Some((info.trim(), Vec::new()));
                }
            }
            Some((info, body)) => {
                if trimmed == "```" {
                    blocks.push(FencedBlock {
                        info,
                        body: body.join("\n"),
                    });
                    open = None;
                } else {
                    body.push(line);
                }
            }
        }
    }
    blocks
}

fn check_output_def() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*def\s+check_output\s*\(").expect("valid regex"))
}

fn new_response(ids: &ResponseIds, kind: ResponseKind, raw: &str) -> TestResponse {
    TestResponse {
        response_id: ids.response_id.clone(),
        problem_id: ids.problem_id.clone(),
        target_program_id: ids.target_program_id.clone(),
        kind,
        harness_code: None,
        io_pairs: None,
        raw_model_output: Some(raw.to_string()),
        parse_error: None,
    }
}

pub fn parse_harness_response(raw: &str, ids: &ResponseIds) -> Result<TestResponse, ParseError> {
    let block = fenced_blocks(raw).pop().ok_or(ParseError::NoCodeBlock)?;
    let code = block.body;
    if generator_indices(&code).is_empty() {
        return Err(ParseError::Contract(
            "no generate_input_<n> function defined".into(),
        ));
    }
    if !check_output_def().is_match(&code) {
        return Err(ParseError::Contract(
            "no check_output function defined".into(),
        ));
    }
    let mut response = new_response(ids, ResponseKind::Harness, raw);
    response.harness_code = Some(code);
    Ok(response)
}

fn last_json_block(raw: &str) -> Result<String, ParseError> {
    fenced_blocks(raw)
        .into_iter()
        .rev()
        .find(|b| b.info.eq_ignore_ascii_case("json") || b.body.trim_start().starts_with('['))
        .map(|b| b.body)
        .ok_or(ParseError::NoCodeBlock)
}

fn io_pair(index: usize, item: &Value) -> Result<IoPair, ParseError> {
    let obj = item
        .as_object()
        .ok_or_else(|| ParseError::Contract(format!("test case {index} is not an object")))?;
    if let Some(extra) = obj
        .keys()
        .find(|k| *k != "input_str" && *k != "expected_output")
    {
        return Err(ParseError::Contract(format!(
            "test case {index} has extra field {extra:?}"
        )));
    }
    let field = |name: &str| {
        obj.get(name)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ParseError::Contract(format!("test case {index} needs a string {name}")))
    };
    Ok(IoPair {
        input_str: field("input_str")?,
        expected_output: field("expected_output")?,
    })
}

/// Lists longer than the pair cap are truncated, keeping the first pairs.
pub fn parse_io_response(raw: &str, ids: &ResponseIds) -> Result<TestResponse, ParseError> {
    let body = last_json_block(raw)?;
    let value: Value =
        serde_json::from_str(&body).map_err(|e| ParseError::Malformed(e.to_string()))?;
    let items = value
        .as_array()
        .ok_or_else(|| ParseError::Contract("expected a JSON array of test cases".into()))?;
    if items.is_empty() {
        return Err(ParseError::Contract("no test cases".into()));
    }
    let mut pairs = items
        .iter()
        .enumerate()
        .map(|(i, item)| io_pair(i, item))
        .collect::<Result<Vec<_>, _>>()?;
    if pairs.len() > MAX_IO_PAIRS {
        tracing::warn!(
            response = %ids.response_id,
            got = pairs.len(),
            "truncating test cases to {MAX_IO_PAIRS}"
        );
        pairs.truncate(MAX_IO_PAIRS);
    }
    let mut response = new_response(ids, ResponseKind::IoPairs, raw);
    response.io_pairs = Some(pairs);
    Ok(response)
}

pub fn parse_response(
    kind: ResponseKind,
    raw: &str,
    ids: &ResponseIds,
) -> Result<TestResponse, ParseError> {
    match kind {
        ResponseKind::Harness => parse_harness_response(raw, ids),
        ResponseKind::IoPairs => parse_io_response(raw, ids),
    }
}

/// Parses, or records the failure as a payload-free response that judges as
/// zero-input.
pub fn parse_or_unparsed(kind: ResponseKind, raw: &str, ids: &ResponseIds) -> TestResponse {
    parse_response(kind, raw, ids).unwrap_or_else(|e| {
        let mut response = new_response(ids, kind, raw);
        response.parse_error = Some(e.to_string());
        response
    })
}

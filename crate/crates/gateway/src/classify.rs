//! Strategy labels for harness input generators and output checkers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use harnessjudge::engine::generator_indices;
use harnessjudge::{ResponseKind, TestResponse};

use crate::error::{GatewayError, ParseError};
use crate::parse::fenced_blocks;
use crate::prompt::{render_template, PromptKind, PromptValues};
use crate::sampling::{Sampler, SamplingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputStrategy {
    Hardcoded,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputStrategy {
    ReferenceImplementation,
    InvariantChecking,
    Hardcoded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyLabels {
    /// One label per `generate_input_<n>`, in ascending `n`.
    pub input_labels: Vec<InputStrategy>,
    pub output_labels: BTreeSet<OutputStrategy>,
}

fn canonical(label: &str) -> String {
    label.trim().to_ascii_lowercase().replace(['_', '-'], " ")
}

fn input_label(label: &str) -> Option<InputStrategy> {
    match canonical(label).as_str() {
        "hardcoded" => Some(InputStrategy::Hardcoded),
        "dynamic" => Some(InputStrategy::Dynamic),
        _ => None,
    }
}

fn output_label(label: &str) -> Option<OutputStrategy> {
    match canonical(label).as_str() {
        "reference implementation" => Some(OutputStrategy::ReferenceImplementation),
        "invariant checking" => Some(OutputStrategy::InvariantChecking),
        "hardcoded" => Some(OutputStrategy::Hardcoded),
        _ => None,
    }
}

/// The last fenced block (or, failing that, the whole text) as a list of strings.
fn label_list(raw: &str) -> Result<Vec<String>, GatewayError> {
    let text = fenced_blocks(raw)
        .pop()
        .map(|b| b.body)
        .unwrap_or_else(|| raw.trim().to_string());
    let value: Value =
        serde_json::from_str(text.trim()).map_err(|e| ParseError::Malformed(e.to_string()))?;
    let items = value
        .as_array()
        .ok_or_else(|| ParseError::Contract("expected a JSON list of labels".into()))?;
    items
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| ParseError::Contract(format!("label {v} is not a string")).into())
        })
        .collect()
}

pub fn parse_input_labels(
    raw: &str,
    generators: usize,
) -> Result<Vec<InputStrategy>, GatewayError> {
    let labels = label_list(raw)?
        .iter()
        .map(|l| {
            input_label(l)
                .ok_or_else(|| GatewayError::Classification(format!("unknown input label {l:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if labels.len() != generators {
        return Err(GatewayError::Classification(format!(
            "{} labels for {generators} generate_input functions",
            labels.len()
        )));
    }
    Ok(labels)
}

pub fn parse_output_labels(raw: &str) -> Result<BTreeSet<OutputStrategy>, GatewayError> {
    label_list(raw)?
        .iter()
        .map(|l| {
            output_label(l)
                .ok_or_else(|| GatewayError::Classification(format!("unknown output label {l:?}")))
        })
        .collect()
}

/// Asks the model once per prompt for the input and output strategies of a harness.
pub fn classify_strategies(
    harness: &TestResponse,
    sampler: &dyn Sampler,
    cfg: &SamplingConfig,
) -> Result<StrategyLabels, GatewayError> {
    let code = match (harness.kind, &harness.harness_code) {
        (ResponseKind::Harness, Some(code)) => code,
        _ => {
            return Err(GatewayError::Classification(format!(
                "response {} is not a harness",
                harness.response_id
            )))
        }
    };
    let once = SamplingConfig {
        n_samples: 1,
        ..cfg.clone()
    };
    let values = PromptValues {
        code: Some(code),
        ..Default::default()
    };
    let ask = |kind| -> Result<String, GatewayError> {
        let prompt = render_template(kind, &values)?;
        Ok(sampler
            .sample(&prompt, &once)?
            .into_iter()
            .next()
            .unwrap_or_default())
    };
    let input_labels = parse_input_labels(
        &ask(PromptKind::InputStrategy)?,
        generator_indices(code).len(),
    )?;
    let output_labels = parse_output_labels(&ask(PromptKind::OutputStrategy)?)?;
    Ok(StrategyLabels {
        input_labels,
        output_labels,
    })
}

//! Prompt templates shipped as data files and single-pass placeholder
//! substitution.
//!
//! Substitution scans the template once, so placeholder-like text inside a
//! substituted value (a description mentioning `{code}`, say) is left alone.

use serde::{Deserialize, Serialize};

use harnessjudge::{Problem, ProgramSource};

use crate::error::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    IoPairs,
    Harness,
    InputSpec,
    FixCode,
    InputStrategy,
    OutputStrategy,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        PromptKind::IoPairs,
        PromptKind::Harness,
        PromptKind::InputSpec,
        PromptKind::FixCode,
        PromptKind::InputStrategy,
        PromptKind::OutputStrategy,
    ];

    pub fn template(self) -> &'static str {
        match self {
            PromptKind::IoPairs => include_str!("../templates/io_pairs.txt"),
            PromptKind::Harness => include_str!("../templates/harness.txt"),
            PromptKind::InputSpec => include_str!("../templates/input_spec.txt"),
            PromptKind::FixCode => include_str!("../templates/fix_code.txt"),
            PromptKind::InputStrategy => include_str!("../templates/input_strategy.txt"),
            PromptKind::OutputStrategy => include_str!("../templates/output_strategy.txt"),
        }
    }

    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            PromptKind::IoPairs | PromptKind::Harness => &["description", "target_code"],
            PromptKind::InputSpec | PromptKind::FixCode => &["problem", "code"],
            PromptKind::InputStrategy | PromptKind::OutputStrategy => &["code"],
        }
    }
}

/// Values available for substitution; unset fields fail only if the kind needs them.
#[derive(Debug, Clone, Default)]
pub struct PromptValues<'a> {
    pub description: Option<&'a str>,
    pub target_code: Option<&'a str>,
    pub problem: Option<&'a str>,
    pub code: Option<&'a str>,
}

impl<'a> PromptValues<'a> {
    fn get(&self, name: &str) -> Option<&'a str> {
        match name {
            "description" => self.description,
            "target_code" => self.target_code,
            "problem" => self.problem,
            "code" => self.code,
            _ => None,
        }
    }
}

pub fn render_template(
    kind: PromptKind,
    values: &PromptValues<'_>,
) -> Result<String, GatewayError> {
    let names = kind.placeholders();
    for &name in names {
        if values.get(name).is_none() {
            return Err(GatewayError::MissingPlaceholder {
                kind,
                placeholder: name,
            });
        }
    }
    let template = kind.template();
    let mut out = String::with_capacity(template.len() + 1024);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = names
            .iter()
            .find(|name| after.starts_with(**name) && after[name.len()..].starts_with('}'));
        match hit {
            Some(name) => {
                out.push_str(values.get(name).unwrap_or_default());
                rest = &after[name.len() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders `kind` from a problem and an optional program.
///
/// The problem description fills `{description}` and `{problem}`; the
/// program's code fills `{target_code}` and `{code}`. For the strategy kinds
/// the program is the harness to classify.
pub fn render_prompt(
    kind: PromptKind,
    problem: &Problem,
    target: Option<&ProgramSource>,
) -> Result<String, GatewayError> {
    let code = target.map(|p| p.code.as_str());
    let values = PromptValues {
        description: Some(&problem.description),
        target_code: code,
        problem: Some(&problem.description),
        code,
    };
    render_template(kind, &values)
}

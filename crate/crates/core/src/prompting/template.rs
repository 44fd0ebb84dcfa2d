//! Prompt construction.
//!
//! Layout (one line each, joined with `\n`):
//!
//! ```text
//! Please check if the message or signal from the stakeholder requirement is correctly covered by the system requirement.
//! Please focus only on verifying the message or signal mentioned, without considering other parts of the requirement.
//! Example: <example>
//! ...examples...
//! </example>
//! Now evaluate the following step by step and only respond with either "Yes" or "No":
//! Stakeholder Requirement: <stakeholder> {stakeholder} </stakeholder>
//! System requirement: <system> {system}</system>
//! Response:
//! ```

use serde::{Deserialize, Serialize};

use super::{PromptError, StrategyConfig};
use crate::model::{Label, LabeledExample, StakeholderRequirement, StrategyKind, SystemRequirement};

pub const INSTRUCTION_COVERED: &str =
    "Please check if the message or signal from the stakeholder requirement is correctly covered by the system requirement.";
pub const INSTRUCTION_FOCUS: &str =
    "Please focus only on verifying the message or signal mentioned, without considering other parts of the requirement.";
pub const EVALUATE_YES_NO: &str = "Now evaluate the following step by step and only respond with either \"Yes\" or \"No\":";
/// The evaluation line with the Yes/No-only clause removed.
pub const EVALUATE_EXPLAIN: &str = "Now evaluate the following step by step:";
pub const YES_NO_ONLY_CLAUSE: &str = "only respond with either \"Yes\" or \"No\"";
pub const COT_INSTRUCTION: &str =
    "Let's verify step by step whether the message or signal is covered, then answer Yes or No.";
pub const RESPONSE_CUE: &str = "Response:";
pub const CLARIFICATION: &str = "Please answer with only \"Yes\" or \"No\".";

/// A prompt plus the strategy and example ids it was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub text: String,
    pub strategy: StrategyConfig,
    pub included_example_ids: Vec<String>,
}

/// Stakeholder block body.
pub fn render_stakeholder(s: &StakeholderRequirement) -> String {
    s.text.clone()
}

/// System block body: both condition sides, labeled.
pub fn render_system(sys: &SystemRequirement) -> String {
    format!("Mature: {} Demature: {}", sys.mature_text, sys.demature_text)
}

/// Splits a rendered system block back into (mature, demature).
pub fn split_system_block(block: &str) -> Option<(&str, &str)> {
    let rest = block.trim().strip_prefix("Mature:")?;
    let (mature, demature) = rest.split_once(" Demature:")?;
    Some((mature.trim(), demature.trim()))
}

fn pair_lines(stakeholder: &str, system: &str) -> String {
    format!("Stakeholder Requirement: <stakeholder> {stakeholder} </stakeholder>\nSystem requirement: <system> {system}</system>")
}

fn label_line(label: Label) -> &'static str {
    match label {
        Label::Valid => "Response: Yes",
        Label::Invalid => "Response: No",
    }
}

fn render_example(e: &LabeledExample) -> String {
    format!(
        "{}\n{}",
        pair_lines(&render_stakeholder(&e.stakeholder), &render_system(&e.system)),
        label_line(e.label)
    )
}

/// Builds the prompt for one pair. `examples` must be given (in rendering
/// order) for Few-Shot-16 and RAG and must be absent otherwise.
pub fn build_prompt(
    strategy: &StrategyConfig,
    stakeholder: &StakeholderRequirement,
    system: &SystemRequirement,
    examples: Option<&[LabeledExample]>,
) -> Result<PromptEnvelope, PromptError> {
    strategy.validate()?;
    let kind = strategy.kind;
    let examples = match (kind, examples) {
        (StrategyKind::FewShot16 | StrategyKind::Rag, None) => return Err(PromptError::MissingExamples(kind)),
        (StrategyKind::FewShot16 | StrategyKind::Rag, Some([])) => return Err(PromptError::MissingExamples(kind)),
        (StrategyKind::FewShot16, Some(ex)) if ex.len() != 16 => {
            return Err(PromptError::FewShotCount(ex.len()))
        }
        (StrategyKind::Rag, Some(ex)) if ex.len() > 2 * strategy.k => {
            return Err(PromptError::TooManyExamples { got: ex.len(), max: 2 * strategy.k })
        }
        (StrategyKind::FewShot16 | StrategyKind::Rag, Some(ex)) => ex,
        (_, Some(_)) => return Err(PromptError::UnexpectedExamples(kind)),
        (_, None) => &[][..],
    };

    let mut lines = vec![INSTRUCTION_COVERED.to_string(), INSTRUCTION_FOCUS.to_string()];
    if !examples.is_empty() {
        let body: Vec<String> = examples.iter().map(render_example).collect();
        lines.push(format!("Example: <example>\n{}\n</example>", body.join("\n\n")));
    }
    let evaluate = match kind {
        StrategyKind::CoT | StrategyKind::SelfConsistency => COT_INSTRUCTION,
        _ if strategy.explanation_mode => EVALUATE_EXPLAIN,
        _ => EVALUATE_YES_NO,
    };
    lines.push(evaluate.to_string());
    lines.push(pair_lines(&render_stakeholder(stakeholder), &render_system(system)));
    lines.push(RESPONSE_CUE.to_string());

    Ok(PromptEnvelope {
        text: lines.join("\n"),
        strategy: strategy.clone(),
        included_example_ids: examples.iter().map(|e| e.example_id.clone()).collect(),
    })
}

/// Prompt re-sent after an ambiguous answer.
pub fn with_clarification(prompt: &str) -> String {
    format!("{prompt}\n{CLARIFICATION}")
}

/// The query pair of a prompt: the last stakeholder and system blocks.
pub fn query_blocks(prompt: &str) -> Option<(&str, &str)> {
    fn last_block<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
        let start = text.rfind(open)? + open.len();
        let end = start + text[start..].find(close)?;
        Some(text[start..end].trim())
    }
    Some((
        last_block(prompt, "<stakeholder>", "</stakeholder>")?,
        last_block(prompt, "<system>", "</system>")?,
    ))
}

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::model::{Decision, VoteTally};

/// Outcome of parsing one model response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParsedVerdict {
    Yes,
    No,
    Ambiguous,
}

impl ParsedVerdict {
    pub fn decision(self) -> Option<Decision> {
        match self {
            ParsedVerdict::Yes => Some(Decision::Yes),
            ParsedVerdict::No => Some(Decision::No),
            ParsedVerdict::Ambiguous => None,
        }
    }
}

static TERMINAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)\bthe\s+response\s+is\s*:?\s*[*"'`]*\s*(yes|no)\b"#).unwrap());
static STANDALONE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap());

fn word(s: &str) -> ParsedVerdict {
    if s.eq_ignore_ascii_case("yes") {
        ParsedVerdict::Yes
    } else {
        ParsedVerdict::No
    }
}

/// Reads a Yes/No decision out of a model response.
///
/// A `The response is: Yes|No` anchor wins (the last one, if several);
/// otherwise the response must contain standalone `yes` or `no` tokens of
/// exactly one kind.
pub fn parse_verdict(raw: &str) -> ParsedVerdict {
    if let Some(c) = TERMINAL.captures_iter(raw).last() {
        return word(&c[1]);
    }
    let mut yes = false;
    let mut no = false;
    for m in STANDALONE.find_iter(raw) {
        match word(m.as_str()) {
            ParsedVerdict::Yes => yes = true,
            _ => no = true,
        }
    }
    match (yes, no) {
        (true, false) => ParsedVerdict::Yes,
        (false, true) => ParsedVerdict::No,
        _ => ParsedVerdict::Ambiguous,
    }
}

/// Majority over the non-ambiguous votes. An exact tie resolves to `No`.
pub fn majority_vote(votes: &[ParsedVerdict]) -> Result<(Decision, VoteTally), PromptError> {
    let mut tally = VoteTally { yes: 0, no: 0, ambiguous: 0 };
    for v in votes {
        match v {
            ParsedVerdict::Yes => tally.yes += 1,
            ParsedVerdict::No => tally.no += 1,
            ParsedVerdict::Ambiguous => tally.ambiguous += 1,
        }
    }
    if tally.yes + tally.no == 0 {
        return Err(PromptError::NoVotes);
    }
    let decision = if tally.yes > tally.no { Decision::Yes } else { Decision::No };
    Ok((decision, tally))
}

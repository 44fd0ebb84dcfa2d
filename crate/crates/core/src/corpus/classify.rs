//! Keyword-anchored template classification.
//!
//! Matching is case-insensitive on the template keywords and ignores the
//! placeholder values (message names, module names, flag names).

use std::sync::LazyLock;

use regex::Regex;

use crate::model::{ConditionKind, DtcType, Variation};

macro_rules! re {
    ($name:ident, $pat:expr) => {
        static $name: LazyLock<Regex> = LazyLock::new(|| Regex::new($pat).unwrap());
    };
}

re!(TRIGGER, r#"(?i)\bif\s+[A-Za-z0-9_]+\s*=\s*"#);
re!(TRIGGER_PREFIX, r#"(?i)^\s*if\s+[A-Za-z0-9_]+\s*=\s*["“”'`]*[^"“”'`,]*["“”'`]*\s*,?\s*"#);
re!(V1_CLAUSE, r"(?i)\bdoes\s+not\s+receive\s+the\s+message\b");
re!(V2_CLAUSE, r"(?i)\binternal\s+signal\s+\S+\s*!=");
re!(V3_CLAUSE, r"(?i)\bplausibility\s+fault\b");
re!(V4_CLAUSE, r"(?i)\bdetermines\s+there\s+is\s+a\s+failure\b");
re!(V4_FLAG_ACTION, r"(?i)\bset\s+the\s+[A-Za-z0-9_]+\s*=");
re!(ACTION_NOT_PRESENT, r#"(?i)\bdtc\s+to\s+["“”'`]*\s*not\s+present"#);
re!(ACTION_PRESENT, r#"(?i)\bdtc\s+to\s+["“”'`]*\s*present"#);
re!(SYS_LOST_COMM, r"(?i)lost\s*_?\s*comm|missing_msg");
re!(SYS_IMPLAUSIBLE, r"(?i)implausib|plausibility");

/// Classifies a stakeholder requirement into one of the four templates.
pub fn classify_variation(text: &str) -> Variation {
    let has_trigger = TRIGGER.is_match(text);
    if has_trigger && V1_CLAUSE.is_match(text) {
        Variation::V1
    } else if has_trigger && V2_CLAUSE.is_match(text) {
        Variation::V2
    } else if has_trigger && V3_CLAUSE.is_match(text) {
        Variation::V3
    } else if has_trigger && V4_CLAUSE.is_match(text) && V4_FLAG_ACTION.is_match(text) {
        Variation::V4
    } else {
        Variation::Unknown
    }
}

/// Condition kind implied by the variation. `_text` is accepted so callers
/// keep a single classification entry point if text cues are ever needed.
pub fn infer_condition_kind(variation: Variation, _text: &str) -> ConditionKind {
    variation.condition_kind()
}

/// DTC state named by the action line: `"Present"` → Mature, `"Not Present"` → Demature.
pub fn classify_action_slot(text: &str) -> ConditionKind {
    if ACTION_NOT_PRESENT.is_match(text) {
        ConditionKind::Demature
    } else if ACTION_PRESENT.is_match(text) {
        ConditionKind::Mature
    } else {
        ConditionKind::Unknown
    }
}

/// DTC type of a system requirement, decided by its name first and then by
/// its condition text.
pub fn classify_system_dtc(name: &str, condition_text: &str) -> DtcType {
    let decide = |s: &str| match (SYS_LOST_COMM.is_match(s), SYS_IMPLAUSIBLE.is_match(s)) {
        (true, false) => Some(DtcType::LostCommunication),
        (false, true) => Some(DtcType::ImplausibleData),
        _ => None,
    };
    decide(name).or_else(|| decide(condition_text)).unwrap_or(DtcType::Unknown)
}

/// Number of `If <trigger> = ...` clauses; more than one marks a compound requirement.
pub fn trigger_clause_count(text: &str) -> usize {
    TRIGGER.find_iter(text).count()
}

/// Strips a leading `If <trigger> = "<value>",` clause.
pub fn mask_trigger_clause(text: &str) -> &str {
    match TRIGGER_PREFIX.find(text) {
        Some(m) => &text[m.end()..],
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::templates::*;

    #[test]
    fn figure_variations() {
        assert_eq!(classify_variation(FIG1_V1), Variation::V1);
        assert_eq!(classify_variation(FIG1_V2), Variation::V2);
        assert_eq!(classify_variation(FIG1_V3), Variation::V3);
        assert_eq!(classify_variation(FIG1_V4), Variation::V4);
    }

    #[test]
    fn unmatched_is_unknown() {
        assert_eq!(classify_variation("The system shall be fast."), Variation::Unknown);
        // the receive clause alone without a trigger
        assert_eq!(
            classify_variation("the module does not receive the message MESSAGE_9"),
            Variation::Unknown
        );
    }

    #[test]
    fn case_and_placeholder_tolerant() {
        let t = "if IGN_STATE = \"ON\", and the module ECU_7 DOES NOT RECEIVE THE MESSAGE BRAKE_STATUS_2 \
                 for 10 cycles, then set the DTC to \"Present\".";
        assert_eq!(classify_variation(t), Variation::V1);
    }

    #[test]
    fn condition_kinds() {
        assert_eq!(infer_condition_kind(Variation::V2, ""), ConditionKind::Mature);
        assert_eq!(infer_condition_kind(Variation::V4, ""), ConditionKind::Demature);
        assert_eq!(infer_condition_kind(Variation::Unknown, ""), ConditionKind::Unknown);
    }

    #[test]
    fn action_slots() {
        assert_eq!(classify_action_slot(FIG1_V1), ConditionKind::Demature);
        assert_eq!(classify_action_slot(FIG1_V4), ConditionKind::Mature);
        assert_eq!(classify_action_slot("no action"), ConditionKind::Unknown);
    }

    #[test]
    fn system_types() {
        assert_eq!(classify_system_dtc("X", FIG2_MATURE), DtcType::LostCommunication);
        assert_eq!(
            classify_system_dtc("Implausible_Module_3", FIG2_MATURE),
            DtcType::ImplausibleData
        );
        assert_eq!(classify_system_dtc("X", "if ( A_1 ) { B_2 = TRUE; }"), DtcType::Unknown);
    }

    #[test]
    fn trigger_mask() {
        let rest = mask_trigger_clause(FIG1_V1);
        assert!(rest.starts_with("and the module M does NOT receive"));
        assert_eq!(mask_trigger_clause(FIG2_MATURE), FIG2_MATURE);
        assert_eq!(trigger_clause_count(FIG1_V1), 1);
        assert_eq!(trigger_clause_count(&format!("{FIG1_V1} {FIG1_V3}")), 2);
    }
}

//! Requirement text templates: the reference shapes of the four stakeholder
//! variations and the system condition block, plus the renderers used by
//! the synthetic generator.

use crate::model::{ConditionKind, DtcType, Variation};

pub const FIG1_V1: &str = "If Trigger_Condition = \"RUN\", and the module M does NOT receive the message MESSAGE_1 for a certain number of message cycles, then the module M shall: Set the DTC to \"Not Present\" according to rules contained in the \"Reference_Document\".";
pub const FIG1_V2: &str = "If Trigger_Condition = \"RUN\", the internal signal MODULE_MODE != \"SIGNAL_1_Fail\", then the module M must: Set the DTC to \"Not Present\" according to the appropriate validation rules contained in the \"Reference_Document\".";
pub const FIG1_V3: &str = "If Trigger_Condition = \"RUN\", and the module M does not detect a Plausibility Fault on a signal within the message \"MESSAGE_2\", then the module M must: Set the DTC to \"Not Present\" according to rules contained in the \"Reference_Document\".";
pub const FIG1_V4: &str = "If Trigger_Condition = \"RUN\", the module M determines there is a failure in SIGNAL_2, then the module M shall: Set the INTERNAL_FLAG = \"Faulted\". Set the DTC to \"Present\" according to rules contained in the \"Reference_Document\".";
pub const FIG2_MATURE: &str = "if ( ENABLE_COMPONENT is enabled ){ if ( Missing_Msg_MESSAGE_1 || Missing_Msg_MESSAGE_2 || ... ){ LostComm_Module_M = TRUE; }}";

fn action(slot: ConditionKind) -> &'static str {
    match slot {
        ConditionKind::Demature => "Not Present",
        _ => "Present",
    }
}

/// Stakeholder text for a variation, keyed by `key` (a message name for
/// V1/V3, a signal name for V2/V4).
pub fn stakeholder_text(variation: Variation, key: &str, slot: ConditionKind) -> String {
    let act = action(slot);
    match variation {
        Variation::V1 => format!(
            "If Trigger_Condition = \"RUN\", and the module M does NOT receive the message {key} for a certain number of message cycles, then the module M shall: Set the DTC to \"{act}\" according to rules contained in the \"Reference_Document\"."
        ),
        Variation::V2 => format!(
            "If Trigger_Condition = \"RUN\", the internal signal MODULE_MODE != \"{key}_Fail\", then the module M must: Set the DTC to \"{act}\" according to the appropriate validation rules contained in the \"Reference_Document\"."
        ),
        Variation::V3 => format!(
            "If Trigger_Condition = \"RUN\", and the module M does not detect a Plausibility Fault on a signal within the message \"{key}\", then the module M must: Set the DTC to \"{act}\" according to rules contained in the \"Reference_Document\"."
        ),
        Variation::V4 | Variation::Unknown => format!(
            "If Trigger_Condition = \"RUN\", the module M determines there is a failure in {key}, then the module M shall: Set the INTERNAL_FLAG = \"Faulted\". Set the DTC to \"{act}\" according to rules contained in the \"Reference_Document\"."
        ),
    }
}

/// Mature-side condition clause covering a stakeholder of the given variation.
pub fn mature_clause(variation: Variation, key: &str) -> String {
    match variation {
        Variation::V1 => format!("Missing_Msg_{key}"),
        Variation::V2 => format!("MODULE_MODE != {key}_Fail"),
        _ => format!("Plausibility_Fault_{key}"),
    }
}

/// Negation of [`mature_clause`] as it appears on the demature side.
pub fn negated_mature_clause(variation: Variation, key: &str) -> String {
    match variation {
        Variation::V1 => format!("!Missing_Msg_{key}"),
        Variation::V2 => format!("MODULE_MODE == {key}_Fail"),
        _ => format!("!Plausibility_Fault_{key}"),
    }
}

/// Demature-side clause covering a V4 stakeholder.
pub fn demature_clause(key: &str) -> String {
    format!("!Signal_Failure_{key}")
}

/// Renders one condition block in the sanitized system requirement shape.
pub fn condition_block(dtc: DtcType, kind: ConditionKind, clauses: &[String]) -> String {
    let (joiner, value) = match kind {
        ConditionKind::Demature => (" && ", "FALSE"),
        _ => (" || ", "TRUE"),
    };
    let flag = match dtc {
        DtcType::LostCommunication => "LostComm_Module_M",
        _ => "Implausible_Module_M",
    };
    let extra = match (dtc, kind) {
        (DtcType::ImplausibleData, ConditionKind::Demature) => " INTERNAL_FLAG = Cleared;",
        _ => "",
    };
    format!(
        "if ( ENABLE_COMPONENT is enabled ){{ if ( {} ){{ {flag} = {value};{extra} }}}}",
        clauses.join(joiner)
    )
}

use std::collections::HashSet;

use super::provider::{CompletionProvider, ProviderError, ProviderRequest};
use crate::corpus::{classify_stakeholder, classify_system_dtc, MessageExtractor};
use crate::model::{DtcType, SystemRequirement, StakeholderRequirement, Variation};
use crate::prompting::{query_blocks, render_stakeholder, render_system, split_system_block, YES_NO_ONLY_CLAUSE};
use crate::retrieval::content_hash;

/// Mock provider that answers by message coverage: Yes iff the query
/// stakeholder's DTC type matches the system's and its messages are a
/// non-empty subset of the messages on the bound condition side.
///
/// Pairs in the flip set get the opposite answer. Prompts that allow free
/// text get a four-step explanation ending in `The response is: X.`
pub struct MessageCoverageOracle {
    extractor: MessageExtractor,
    flips: HashSet<String>,
}

impl Default for MessageCoverageOracle {
    fn default() -> Self {
        Self::new(MessageExtractor::default())
    }
}

impl MessageCoverageOracle {
    pub fn new(extractor: MessageExtractor) -> Self {
        Self { extractor, flips: HashSet::new() }
    }

    pub fn with_flips(mut self, flips: impl IntoIterator<Item = String>) -> Self {
        self.flips.extend(flips);
        self
    }

    /// Flip-set key of a pair, computed from its rendered prompt blocks.
    pub fn fingerprint(stakeholder: &StakeholderRequirement, system: &SystemRequirement) -> String {
        Self::block_fingerprint(&render_stakeholder(stakeholder), &render_system(system))
    }

    fn block_fingerprint(stakeholder_block: &str, system_block: &str) -> String {
        content_hash(&format!("{}\u{0}{}", stakeholder_block.trim(), system_block.trim()))
    }

    /// The unflipped coverage decision plus the stakeholder messages.
    pub fn covers(&self, stakeholder_block: &str, system_block: &str) -> (bool, Vec<String>) {
        let s = classify_stakeholder("query", stakeholder_block, None, &self.extractor);
        let msgs: Vec<String> = s.messages.iter().cloned().collect();
        let Some((mature, demature)) = split_system_block(system_block) else {
            return (false, msgs);
        };
        if s.variation == Variation::Unknown || s.messages.is_empty() {
            return (false, msgs);
        }
        let sys_dtc = classify_system_dtc("", &format!("{mature} {demature}"));
        if sys_dtc != DtcType::Unknown && sys_dtc != s.dtc_type {
            return (false, msgs);
        }
        let side = match s.condition_kind {
            crate::model::ConditionKind::Mature => mature,
            crate::model::ConditionKind::Demature => demature,
            crate::model::ConditionKind::Unknown => return (false, msgs),
        };
        (s.messages.is_subset(&self.extractor.extract(side)), msgs)
    }

    pub fn answer(&self, prompt: &str) -> String {
        let Some((stk, sys)) = query_blocks(prompt) else {
            return "I cannot find a requirement pair.".into();
        };
        let (covered, msgs) = self.covers(stk, sys);
        let yes = covered != self.flips.contains(&Self::block_fingerprint(stk, sys));
        let word = if yes { "Yes" } else { "No" };
        if prompt.contains(YES_NO_ONLY_CLAUSE) {
            return word.into();
        }
        let key = if msgs.is_empty() { "none".to_string() } else { msgs.join(", ") };
        format!(
            "Step 1: Identify the key message/signal in the stakeholder requirement. The key message is {key}.\n\
             Step 2: Search for this message in the system requirement.\n\
             Step 3: Determine if the message is covered. {}\n\
             Step 4: Conclusion. The response is: {word}.",
            if covered { "It appears in the bound condition." } else { "It does not appear in the bound condition." }
        )
    }
}

impl CompletionProvider for MessageCoverageOracle {
    fn id(&self) -> &str {
        "coverage-oracle"
    }

    fn complete(&self, request: &ProviderRequest<'_>) -> Result<String, ProviderError> {
        Ok(self.answer(request.prompt))
    }
}

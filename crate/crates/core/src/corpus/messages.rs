//! Message / signal token extraction.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use super::classify::mask_trigger_clause;
use crate::model::MessageSet;

/// Domain stopwords stripped before message extraction.
pub const DOMAIN_STOPWORDS: &[&str] = &[
    "DTC",
    "RUN",
    "TRUE",
    "FALSE",
    "Present",
    "module",
    "signal",
    "message",
    "rules",
    "Reference_Document",
];

/// Common English function words. Most cannot pass the identifier grammar
/// anyway; the list matters for the tf-idf baseline which shares it.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either",
    "else", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
    "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "may", "me", "more", "most", "must", "my", "no", "nor", "not", "now", "of", "off", "on",
    "once", "only", "or", "other", "our", "ours", "out", "over", "own", "same", "shall", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "then",
    "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why",
    "will", "with", "would", "you", "your",
];

/// Wrappers that embed a message name inside a condition identifier,
/// e.g. `Missing_Msg_MESSAGE_1`.
pub const DECORATION_PREFIXES: &[&str] = &["Missing_Msg_", "Plausibility_Fault_", "Signal_Failure_"];

static IDENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9_]+").unwrap());

/// Tokenizer plus stopword and identifier-grammar filter.
#[derive(Debug, Clone)]
pub struct MessageExtractor {
    stopwords: HashSet<String>,
    prefixes: Vec<String>,
    mask_trigger: bool,
}

impl Default for MessageExtractor {
    fn default() -> Self {
        Self::with_domain_stopwords(DOMAIN_STOPWORDS.iter().copied())
    }
}

impl MessageExtractor {
    /// English stopwords plus the given domain list.
    pub fn with_domain_stopwords<'a>(domain: impl IntoIterator<Item = &'a str>) -> Self {
        let stopwords = ENGLISH_STOPWORDS
            .iter()
            .copied()
            .chain(domain)
            .map(str::to_lowercase)
            .collect();
        Self {
            stopwords,
            prefixes: DECORATION_PREFIXES.iter().map(|p| p.to_lowercase()).collect(),
            mask_trigger: true,
        }
    }

    /// Reads a domain stopword file (one word per line, `#` comments) that
    /// replaces the built-in domain list.
    pub fn from_stopword_file(path: &Path) -> std::io::Result<Self> {
        let body = fs::read_to_string(path)?;
        let words: Vec<&str> = body
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .collect();
        Ok(Self::with_domain_stopwords(words))
    }

    /// Whether a leading `If <trigger> = <value>,` clause is skipped.
    pub fn mask_trigger(mut self, on: bool) -> Self {
        self.mask_trigger = on;
        self
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(&token.to_lowercase())
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn extract(&self, text: &str) -> MessageSet {
        let text = if self.mask_trigger { mask_trigger_clause(text) } else { text };
        IDENT
            .find_iter(text)
            .filter_map(|m| self.normalize_token(m.as_str()))
            .collect()
    }

    fn normalize_token(&self, raw: &str) -> Option<String> {
        let lower = raw.to_lowercase();
        let token = self
            .prefixes
            .iter()
            .find(|p| lower.starts_with(p.as_str()) && raw.len() > p.len())
            .map_or(raw, |p| &raw[p.len()..]);
        (is_message_identifier(token) && !self.is_stopword(token)).then(|| token.to_string())
    }
}

/// Identifier grammar for a message token: letters, digits and underscores,
/// at least one underscore or digit, length >= 4.
pub fn is_message_identifier(token: &str) -> bool {
    token.chars().count() >= 4
        && token.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && token.chars().any(|c| c == '_' || c.is_ascii_digit())
}

/// Extraction with the default stopword list and trigger masking.
pub fn extract_messages(text: &str) -> MessageSet {
    static DEFAULT: LazyLock<MessageExtractor> = LazyLock::new(MessageExtractor::default);
    DEFAULT.extract(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::templates;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> MessageSet {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn variation_one_yields_its_message() {
        assert_eq!(extract_messages(templates::FIG1_V1), set(&["MESSAGE_1"]));
    }

    #[test]
    fn system_mature_golden() {
        assert_eq!(
            extract_messages(templates::FIG2_MATURE),
            set(&["ENABLE_COMPONENT", "LostComm_Module_M", "MESSAGE_1", "MESSAGE_2"])
        );
    }

    #[test]
    fn other_variations_golden() {
        assert_eq!(extract_messages(templates::FIG1_V2), set(&["MODULE_MODE", "SIGNAL_1_Fail"]));
        assert_eq!(extract_messages(templates::FIG1_V3), set(&["MESSAGE_2"]));
        assert_eq!(extract_messages(templates::FIG1_V4), set(&["INTERNAL_FLAG", "SIGNAL_2"]));
    }

    #[test]
    fn empty_text() {
        assert!(extract_messages("").is_empty());
    }

    #[test]
    fn trigger_survives_when_unmasked() {
        let ex = MessageExtractor::default().mask_trigger(false);
        assert_eq!(ex.extract(templates::FIG1_V1), set(&["MESSAGE_1", "Trigger_Condition"]));
    }

    #[test]
    fn custom_stopword_file_replaces_domain_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stop.txt");
        std::fs::write(&path, "# domain words\nMESSAGE_1\n\n").unwrap();
        let ex = MessageExtractor::from_stopword_file(&path).unwrap();
        // MESSAGE_1 is now a stopword, Reference_Document no longer is
        assert_eq!(ex.extract(templates::FIG1_V1), set(&["Reference_Document"]));
    }

    #[test]
    fn case_sensitive_tokens_are_kept_distinct() {
        assert_eq!(extract_messages("MESSAGE_1 message_1"), set(&["MESSAGE_1", "message_1"]));
    }

    proptest! {
        #[test]
        fn output_respects_grammar_and_stopwords(text in "[A-Za-z0-9_ =!\"(){}|,.]{0,80}") {
            let ex = MessageExtractor::default();
            for tok in ex.extract(&text) {
                prop_assert!(tok.len() >= 4);
                prop_assert!(!ex.is_stopword(&tok));
                prop_assert!(is_message_identifier(&tok));
            }
        }
    }
}

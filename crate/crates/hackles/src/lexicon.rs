//! Dictionary-lookup anger detection over recognized speech.
//!
//! A lexicon is a flat set of anger-associated tokens. Each uttered word is
//! looked up after case-folding; a match whose recognizer confidence is
//! strictly above the gate (default 0.3) yields an Anger outcome carrying
//! that confidence. Speech never votes for any other class.
//!
//! Two file formats are accepted: an XML word list
//! (`<lexicon><word>…</word>…</lexicon>`) and plain text with one token per
//! line. Multi-word tokens such as "Ticked off" are stored and matched with
//! inner whitespace collapsed, so "ticked  off" still hits.

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use crate::fusion::{ModalityOutcome, OutcomeSource};
use crate::session::{EmotionClass, Modality, SpeechEvent};

/// Confidence must be strictly greater than this for a match to count.
pub const DEFAULT_CONFIDENCE_GATE: f64 = 0.3;

pub const STOCK_LEXICON_XML: &str = include_str!("../assets/lexicon.xml");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon has no words")]
    Empty,
    #[error("malformed lexicon: {0}")]
    Malformed(String),
    #[error("confidence gate {0} outside [0, 1]")]
    BadGate(f64),
}

/// Trim, lowercase, and collapse inner whitespace runs to single spaces.
fn normalize(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    words: BTreeSet<String>,
    gate: f64,
}

impl Lexicon {
    /// Build from raw tokens: case-folds, trims, deduplicates. Tokens that
    /// are pure whitespace are dropped; an empty result is an error.
    pub fn from_words<I, S>(raw: I) -> Result<Lexicon, LexiconError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = raw
            .into_iter()
            .map(|w| normalize(w.as_ref()))
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(LexiconError::Empty);
        }
        Ok(Lexicon {
            words,
            gate: DEFAULT_CONFIDENCE_GATE,
        })
    }

    /// The anger word list shipped with the crate.
    pub fn stock() -> Lexicon {
        Lexicon::parse(STOCK_LEXICON_XML).expect("stock lexicon is valid")
    }

    /// Parse either accepted format, chosen by sniffing for an XML tag.
    pub fn parse(text: &str) -> Result<Lexicon, LexiconError> {
        if text.trim_start().starts_with('<') {
            Lexicon::from_words(parse_xml_words(text)?)
        } else {
            Lexicon::from_words(text.lines().map(str::trim).filter(|l| !l.is_empty()))
        }
    }

    pub fn load(path: &Path) -> Result<Lexicon, LexiconError> {
        Lexicon::parse(&std::fs::read_to_string(path)?)
    }

    pub fn with_gate(mut self, gate: f64) -> Result<Lexicon, LexiconError> {
        if !(0.0..=1.0).contains(&gate) || !gate.is_finite() {
            return Err(LexiconError::BadGate(gate));
        }
        self.gate = gate;
        Ok(self)
    }

    pub fn gate(&self) -> f64 {
        self.gate
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Normalized lookup.
    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&normalize(word))
    }

    /// Tokens in sorted order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Anger outcome iff the word is in the lexicon and the recognizer
    /// confidence is strictly above the gate.
    pub fn classify_utterance(&self, event: &SpeechEvent) -> Option<ModalityOutcome> {
        if !self.contains(&event.word) || event.asr_confidence <= self.gate {
            return None;
        }
        Some(ModalityOutcome {
            t_ms: event.t_ms,
            modality: Modality::Speech,
            source: OutcomeSource::Lexicon,
            emotion: EmotionClass::Anger,
            confidence: event.asr_confidence,
        })
    }

    /// Canonical XML rendering (sorted tokens, original casing lost).
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<lexicon emotion=\"anger\">\n");
        for word in &self.words {
            out.push_str("  <word>");
            out.push_str(&escape_xml(word));
            out.push_str("</word>\n");
        }
        out.push_str("</lexicon>\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), LexiconError> {
        Ok(std::fs::write(path, self.to_xml())?)
    }
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn unescape_xml(text: &str) -> String {
    text.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

/// Extract the text of every `<word>` element. Tolerates any wrapper
/// element, prolog, and comments; rejects an unterminated word element.
fn parse_xml_words(text: &str) -> Result<Vec<String>, LexiconError> {
    let mut words = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("<word>") {
        let body_start = open + "<word>".len();
        let Some(close) = rest[body_start..].find("</word>") else {
            return Err(LexiconError::Malformed(
                "unterminated <word> element".into(),
            ));
        };
        let body = &rest[body_start..body_start + close];
        if body.contains('<') {
            return Err(LexiconError::Malformed(
                "markup inside <word> element".into(),
            ));
        }
        words.push(unescape_xml(body));
        rest = &rest[body_start + close + "</word>".len()..];
    }
    if words.is_empty() {
        return Err(LexiconError::Malformed("no <word> elements".into()));
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(word: &str, conf: f64) -> SpeechEvent {
        SpeechEvent::new(1_000, word, conf).unwrap()
    }

    #[test]
    fn stock_list_loads_deduplicated() {
        let lex = Lexicon::stock();
        assert_eq!(lex.len(), 80);
        assert!(lex.contains("beat"));
        assert!(lex.contains("Damn"));
        assert!(lex.contains("ticked off"));
        assert!(!lex.contains("hello"));
        assert_eq!(lex.gate(), 0.3);
    }

    #[test]
    fn match_above_gate_votes_anger() {
        let lex = Lexicon::stock();
        let out = lex.classify_utterance(&event("punch", 0.8)).unwrap();
        assert_eq!(out.emotion, EmotionClass::Anger);
        assert_eq!(out.confidence, 0.8);
        assert_eq!(out.modality, Modality::Speech);
        assert_eq!(out.source, OutcomeSource::Lexicon);
        assert_eq!(out.t_ms, 1_000);
    }

    #[test]
    fn gate_is_strict() {
        let lex = Lexicon::stock();
        assert!(lex.classify_utterance(&event("kill", 0.3)).is_none());
        assert!(lex.classify_utterance(&event("kill", 0.300001)).is_some());
    }

    #[test]
    fn non_lexicon_words_never_vote() {
        let lex = Lexicon::stock();
        assert!(lex.classify_utterance(&event("hello", 0.99)).is_none());
    }

    #[test]
    fn lookup_is_case_insensitive() {
        let lex = Lexicon::stock();
        let upper = lex.classify_utterance(&event("KILL", 0.7));
        let lower = lex.classify_utterance(&event("kill", 0.7));
        assert_eq!(upper, lower);
        assert!(upper.is_some());
    }

    #[test]
    fn confidence_is_monotone() {
        let lex = Lexicon::stock();
        let mut fired = false;
        for step in 0..=10 {
            let c = f64::from(step) / 10.0;
            let hit = lex.classify_utterance(&event("mad", c)).is_some();
            assert!(!fired || hit, "fired at lower confidence but not at {c}");
            fired |= hit;
        }
        assert!(fired);
    }

    #[test]
    fn bigram_matches_with_collapsed_whitespace() {
        let lex = Lexicon::stock();
        assert!(lex.classify_utterance(&event("Ticked   off", 0.6)).is_some());
        assert!(lex.classify_utterance(&event("ticked", 0.6)).is_none());
    }

    #[test]
    fn case_fold_dedup() {
        let lex = Lexicon::from_words(["Mad", "mad", "MAD"]).unwrap();
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn plain_text_format() {
        let lex = Lexicon::parse("Beat\nHate\n\n  Kill  \n").unwrap();
        assert_eq!(lex.len(), 3);
        assert!(lex.contains("kill"));
    }

    #[test]
    fn empty_inputs_error() {
        assert!(matches!(Lexicon::parse(""), Err(LexiconError::Empty)));
        assert!(matches!(
            Lexicon::parse("\n  \n"),
            Err(LexiconError::Empty)
        ));
        assert!(matches!(
            Lexicon::parse("<lexicon></lexicon>"),
            Err(LexiconError::Malformed(_))
        ));
    }

    #[test]
    fn malformed_xml_errors() {
        assert!(matches!(
            Lexicon::parse("<lexicon><word>Beat</lexicon>"),
            Err(LexiconError::Malformed(_))
        ));
    }

    #[test]
    fn xml_entities_decode() {
        let lex = Lexicon::parse("<lexicon><word>rock &amp; roll</word></lexicon>").unwrap();
        assert!(lex.contains("rock & roll"));
    }

    #[test]
    fn xml_round_trip() {
        let lex = Lexicon::stock();
        let back = Lexicon::parse(&lex.to_xml()).unwrap();
        assert_eq!(back, lex);
    }

    #[test]
    fn gate_bounds_validated() {
        assert!(Lexicon::stock().with_gate(0.5).is_ok());
        assert!(matches!(
            Lexicon::stock().with_gate(1.5),
            Err(LexiconError::BadGate(_))
        ));
        assert!(matches!(
            Lexicon::stock().with_gate(-0.1),
            Err(LexiconError::BadGate(_))
        ));
    }
}

//! Decision-level fusion of per-modality outcomes.
//!
//! Each upstream producer (a per-modality classifier, the behavioral rule
//! engine, the speech lexicon) emits timestamped [`ModalityOutcome`]s. A
//! fusion run takes the latest outcome per voter slot, drops stale and
//! low-confidence ones, and decides "anger now?" by majority vote: anger
//! wins only with a strict plurality, so ties mean no detection.
//!
//! A voter slot is (modality, source) by default, so the hand classifier
//! and the hand rule evaluator vote independently; `collapse_sources`
//! merges them into one slot per modality (latest outcome wins).
//!
//! Session-level aggregation is the fraction of runs that detected anger:
//! 37 detections over 50 runs gives confidence 0.74, flagged as an anger
//! session at the default 0.5 threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{EmotionClass, Modality, CLASS_COUNT};

/// Which stage produced an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeSource {
    Classifier = 0,
    Rules = 1,
    Lexicon = 2,
}

/// One per-modality verdict: an emotion with a confidence in [0, 1] at a
/// point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityOutcome {
    pub t_ms: u64,
    pub modality: Modality,
    pub source: OutcomeSource,
    pub emotion: EmotionClass,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Minimum confidence for an outcome to vote (inclusive).
    pub confidence_threshold: f64,
    /// Maximum age in ms for an outcome to vote (inclusive).
    pub staleness_ms: u64,
    /// Session anger flag threshold on the detection ratio (inclusive).
    pub session_threshold: f64,
    /// Merge Classifier/Rules/Lexicon into one voter slot per modality.
    pub collapse_sources: bool,
}

impl Default for FusionConfig {
    fn default() -> FusionConfig {
        FusionConfig {
            confidence_threshold: 0.218,
            staleness_ms: 500,
            session_threshold: 0.5,
            collapse_sources: false,
        }
    }
}

/// Outcome of one fusion run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDecision {
    pub t_ms: u64,
    pub anger: bool,
    /// Vote count per emotion code.
    pub votes: [u32; CLASS_COUNT],
    /// Surviving outcomes, ordered by (modality, source).
    pub participants: Vec<ModalityOutcome>,
}

impl FrameDecision {
    /// Emotion with the most votes; ties broken by summed participant
    /// confidence, then lower class code. None when nobody voted.
    pub fn winner(&self) -> Option<EmotionClass> {
        if self.participants.is_empty() {
            return None;
        }
        let mut conf = [0.0f64; CLASS_COUNT];
        for p in &self.participants {
            conf[p.emotion.code()] += p.confidence;
        }
        let mut best = 0usize;
        for c in 1..CLASS_COUNT {
            let better = self.votes[c] > self.votes[best]
                || (self.votes[c] == self.votes[best] && conf[c] > conf[best]);
            if better {
                best = c;
            }
        }
        EmotionClass::from_code(best)
    }
}

/// True iff `outcome` may vote at time `now_ms` under `config`.
fn eligible(config: &FusionConfig, now_ms: u64, outcome: &ModalityOutcome) -> bool {
    outcome.confidence.is_finite()
        && outcome.confidence >= config.confidence_threshold
        && outcome.t_ms <= now_ms
        && now_ms - outcome.t_ms <= config.staleness_ms
}

fn slot_key(config: &FusionConfig, outcome: &ModalityOutcome) -> (u8, u8) {
    let source = if config.collapse_sources {
        0
    } else {
        outcome.source as u8
    };
    (outcome.modality as u8, source)
}

/// One fusion run over a set of candidate outcomes. Pure: the decision for
/// a given (config, now, outcomes) is always the same.
pub fn fuse_instant(
    config: &FusionConfig,
    now_ms: u64,
    outcomes: &[ModalityOutcome],
) -> FrameDecision {
    let mut slots: std::collections::BTreeMap<(u8, u8), &ModalityOutcome> =
        std::collections::BTreeMap::new();
    for outcome in outcomes {
        if !eligible(config, now_ms, outcome) {
            continue;
        }
        let key = slot_key(config, outcome);
        let replace = match slots.get(&key) {
            None => true,
            // latest wins; at equal times the more confident, then the
            // later-stage source, so the result is order-independent
            Some(held) => {
                (outcome.t_ms, outcome.confidence, outcome.source as u8)
                    > (held.t_ms, held.confidence, held.source as u8)
            }
        };
        if replace {
            slots.insert(key, outcome);
        }
    }
    let participants: Vec<ModalityOutcome> = slots.values().map(|o| (*o).clone()).collect();
    let mut votes = [0u32; CLASS_COUNT];
    for p in &participants {
        votes[p.emotion.code()] += 1;
    }
    let anger_votes = votes[EmotionClass::Anger.code()];
    let anger = anger_votes > 0
        && votes
            .iter()
            .enumerate()
            .all(|(c, v)| c == EmotionClass::Anger.code() || anger_votes > *v);
    FrameDecision {
        t_ms: now_ms,
        anger,
        votes,
        participants,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("no fusion runs to aggregate")]
    NoRuns,
}

/// Detection ratio over a whole session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub runs: u64,
    pub detections: u64,
    /// detections / runs
    pub confidence: f64,
    /// confidence >= session threshold
    pub anger: bool,
}

/// Aggregate per-run decisions into the session verdict.
pub fn session_aggregate(
    config: &FusionConfig,
    decisions: &[FrameDecision],
) -> Result<SessionSummary, FusionError> {
    if decisions.is_empty() {
        return Err(FusionError::NoRuns);
    }
    let runs = decisions.len() as u64;
    let detections = decisions.iter().filter(|d| d.anger).count() as u64;
    let confidence = detections as f64 / runs as f64;
    Ok(SessionSummary {
        runs,
        detections,
        confidence,
        anger: confidence >= config.session_threshold,
    })
}

/// Streaming fusion: absorb outcomes as they arrive, decide on demand, and
/// keep the running session tally.
#[derive(Debug, Clone)]
pub struct FusionState {
    config: FusionConfig,
    latest: std::collections::BTreeMap<(u8, u8), ModalityOutcome>,
    runs: u64,
    detections: u64,
}

impl FusionState {
    pub fn new(config: FusionConfig) -> FusionState {
        FusionState {
            config,
            latest: std::collections::BTreeMap::new(),
            runs: 0,
            detections: 0,
        }
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    /// Absorb an outcome (no decision). Later submissions for the same slot
    /// replace earlier ones.
    pub fn push(&mut self, outcome: ModalityOutcome) {
        let key = slot_key(&self.config, &outcome);
        self.latest.insert(key, outcome);
    }

    /// Event-driven entry point: store the outcome and immediately run
    /// fusion at its timestamp.
    pub fn submit(&mut self, outcome: ModalityOutcome) -> FrameDecision {
        let now_ms = outcome.t_ms;
        self.push(outcome);
        self.decide(now_ms)
    }

    /// Run fusion at `now_ms` over the currently held outcomes and count
    /// the run in the session tally.
    pub fn decide(&mut self, now_ms: u64) -> FrameDecision {
        let held: Vec<ModalityOutcome> = self.latest.values().cloned().collect();
        let decision = fuse_instant(&self.config, now_ms, &held);
        self.runs += 1;
        if decision.anger {
            self.detections += 1;
        }
        decision
    }

    pub fn runs(&self) -> u64 {
        self.runs
    }

    pub fn detections(&self) -> u64 {
        self.detections
    }

    /// Session verdict so far; error before the first run.
    pub fn summary(&self) -> Result<SessionSummary, FusionError> {
        if self.runs == 0 {
            return Err(FusionError::NoRuns);
        }
        let confidence = self.detections as f64 / self.runs as f64;
        Ok(SessionSummary {
            runs: self.runs,
            detections: self.detections,
            confidence,
            anger: confidence >= self.config.session_threshold,
        })
    }
}

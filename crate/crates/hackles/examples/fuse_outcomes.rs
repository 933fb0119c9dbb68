//! Decision-level fusion by hand: outcome eligibility, per-slot
//! latest-wins, strict plurality, and the session detection ratio.
//!
//!     cargo run --example fuse_outcomes

use hackles::fusion::{
    fuse_instant, FusionConfig, FusionState, ModalityOutcome, OutcomeSource,
};
use hackles::session::{EmotionClass, Modality};

fn outcome(
    t_ms: u64,
    modality: Modality,
    source: OutcomeSource,
    emotion: EmotionClass,
    confidence: f64,
) -> ModalityOutcome {
    ModalityOutcome {
        t_ms,
        modality,
        source,
        emotion,
        confidence,
    }
}

fn main() {
    let config = FusionConfig::default();
    println!(
        "defaults: vote threshold {}, staleness {} ms, session threshold {}",
        config.confidence_threshold, config.staleness_ms, config.session_threshold
    );

    // three voters inside the window; one stale vote is ignored
    let candidates = vec![
        outcome(900, Modality::Hand, OutcomeSource::Classifier, EmotionClass::Anger, 0.8),
        outcome(950, Modality::Hand, OutcomeSource::Rules, EmotionClass::Anger, 0.4),
        outcome(980, Modality::Face, OutcomeSource::Classifier, EmotionClass::Happy, 0.9),
        outcome(300, Modality::Body, OutcomeSource::Classifier, EmotionClass::Happy, 1.0), // stale
        outcome(990, Modality::Head, OutcomeSource::Classifier, EmotionClass::Anger, 0.217), // under T
    ];
    let decision = fuse_instant(&config, 1000, &candidates);
    println!(
        "at t=1000: votes {:?}, anger {}, winner {:?}",
        decision.votes,
        decision.anger,
        decision.winner().map(|c| c.name())
    );

    // the same slot keeps only its latest outcome
    let revised = vec![
        outcome(900, Modality::Hand, OutcomeSource::Classifier, EmotionClass::Anger, 0.9),
        outcome(960, Modality::Hand, OutcomeSource::Classifier, EmotionClass::Neutral, 0.6),
    ];
    let decision = fuse_instant(&config, 1000, &revised);
    println!(
        "slot revision: {} participant(s), winner {:?}",
        decision.participants.len(),
        decision.winner().map(|c| c.name())
    );

    // streaming: 50 runs, anger detected in 37 of them
    let mut state = FusionState::new(config);
    for run in 0..50u64 {
        let t_ms = run * 100;
        let emotion = if run < 37 { EmotionClass::Anger } else { EmotionClass::Neutral };
        state.submit(outcome(t_ms, Modality::Hand, OutcomeSource::Classifier, emotion, 0.9));
    }
    let summary = state.summary().expect("ran 50 times");
    println!(
        "session: {}/{} detections -> confidence {} -> anger {}",
        summary.detections, summary.runs, summary.confidence, summary.anger
    );
}

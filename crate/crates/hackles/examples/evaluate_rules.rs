//! The stock anger rules over a scripted hands-on-hips act: per-rule
//! outcomes on a window, then the streaming engine's smoothed confidence
//! and its vote.
//!
//!     cargo run --example evaluate_rules

use hackles::rules::{
    evaluate_rule, rule_confidence, RuleEngine, RuleSet, RuleWindow, DEFAULT_VOTE_THRESHOLD,
};
use hackles::session::Modality;
use hackles::synth::{gen_session, stock_scripts};

fn main() {
    let ruleset = RuleSet::stock();
    println!("stock ruleset: {} rules", ruleset.rules.len());
    for rule in &ruleset.rules {
        println!(
            "  rule {:>2} [{}] {:?}: {}",
            rule.rule_id,
            rule.modality.name(),
            rule.kind,
            rule.description
        );
    }
    println!();

    let script = stock_scripts()
        .into_iter()
        .find(|s| s.name == "anger-hands-on-hips")
        .expect("stock script");
    let (session, _) = gen_session(&script, 42, 5.0).expect("valid script");

    // a full 10-frame window of the hand stream
    let hand = ruleset.scaled(session.frame_width).for_modality(Modality::Hand);
    let window = RuleWindow::from_frames(10, session.stream(Modality::Hand).iter().take(10));
    for rule in &hand.rules {
        println!(
            "rule {:>2} over the window: {:?}",
            rule.rule_id,
            evaluate_rule(rule, &window)
        );
    }
    let outcome = rule_confidence(&hand, &window);
    println!(
        "window confidence {:.3} ({}/{} evaluations fired)\n",
        outcome.confidence, outcome.fired, outcome.evaluated
    );

    // streaming: one engine per modality, smoothed over trailing windows
    for modality in [Modality::Hand, Modality::Face, Modality::Head] {
        let mut engine = RuleEngine::new(&ruleset, modality, session.frame_width);
        for frame in session.stream(modality) {
            engine.push_frame(frame);
        }
        let vote = engine.vote(DEFAULT_VOTE_THRESHOLD);
        println!(
            "{:<5} smoothed confidence {:.3}  vote: {}",
            modality.name(),
            engine.smoothed(),
            match vote {
                Some(v) => format!("{} at {:.3}", v.emotion.name(), v.confidence),
                None => "none".to_string(),
            }
        );
    }
}

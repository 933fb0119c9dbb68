//! The anger lexicon: membership, the recognizer-confidence gate, and the
//! XML storage format.
//!
//!     cargo run --example speech_lookup

use hackles::lexicon::{Lexicon, DEFAULT_CONFIDENCE_GATE};
use hackles::session::SpeechEvent;

fn main() {
    let lexicon = Lexicon::stock();
    println!(
        "stock lexicon: {} words, confidence gate {}",
        lexicon.words().count(),
        DEFAULT_CONFIDENCE_GATE
    );

    for (word, conf) in [
        ("punch", 0.8),   // in the lexicon, confident enough
        ("kill", 0.30),   // gate is strict: 0.30 does not pass
        ("kill", 0.31),
        ("PuNcH", 0.9),   // matching is case-insensitive
        ("stapler", 0.99),
        ("ticked off", 0.7), // multi-word entries normalize whitespace
    ] {
        let event = SpeechEvent::new(100, word, conf).expect("valid event");
        match lexicon.classify_utterance(&event) {
            Some(outcome) => println!(
                "{word:>12} @ {conf:.2} -> {} vote, confidence {:.2}",
                outcome.emotion.name(),
                outcome.confidence
            ),
            None => println!("{word:>12} @ {conf:.2} -> no vote"),
        }
    }
    println!();

    // a custom lexicon parses from XML or plain word-per-line text
    let custom = Lexicon::parse("<lexicon><word>grr</word><word>argh</word></lexicon>")
        .expect("well-formed");
    let words: Vec<&str> = custom.words().collect();
    println!("custom lexicon holds {words:?}");
    let xml = custom.to_xml();
    print!("canonical form:\n{xml}");
    let reparsed: Vec<String> = Lexicon::parse(&xml)
        .expect("round-trips")
        .words()
        .map(str::to_string)
        .collect();
    assert_eq!(reparsed, words);
}

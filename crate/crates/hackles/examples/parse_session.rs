//! Build a session in code, round-trip it through the text format, and
//! run the structural validator.
//!
//!     cargo run --example parse_session

use hackles::session::{
    parse_session, serialize_session, validate_session, EmotionClass, Modality, Point2, Session,
    SpeechEvent, TrackedFrame,
};

fn main() {
    let mut session = Session::new("demo-001", "actor-0", EmotionClass::Anger, 2000, 640, 480);

    // two hand frames: wrists outside and above the elbows
    let poses = [
        (0, 215.0, 300.0),
        (333, 214.0, 299.0),
    ];
    for (t_ms, lx, ly) in poses {
        let frame = TrackedFrame::new(
            t_ms,
            Modality::Hand,
            &[
                ("left_shoulder", Point2::new(250.0, 180.0)),
                ("left_elbow", Point2::new(230.0, 250.0)),
                ("left_wrist", Point2::new(lx, ly)),
                ("right_shoulder", Point2::new(390.0, 180.0)),
                ("right_elbow", Point2::new(410.0, 250.0)),
                ("right_wrist", Point2::new(640.0 - lx, ly)),
            ],
        )
        .expect("full hand frame");
        session.push_frame(frame).expect("increasing timestamps");
    }
    session.push_speech(SpeechEvent::new(450, "punch", 0.82).expect("valid event"));

    let text = serialize_session(&session);
    println!("serialized form:\n{text}");

    let parsed = parse_session(&text).expect("round-trips");
    assert_eq!(parsed.session, session);
    println!("parsed back: {} warnings", parsed.warnings.len());

    for v in validate_session(&parsed.session) {
        println!("validator: {v}");
    }

    // unknown fields warn instead of failing
    let extended = text.replace(
        r#""word":"punch""#,
        r#""word":"punch","speaker":"north""#,
    );
    let parsed = parse_session(&extended).expect("unknown fields are tolerated");
    for w in &parsed.warnings {
        println!("tolerated: {w}");
    }

    // structural damage fails with a line number
    let broken = text.replace(r#""modality":"hand""#, r#""modality":"tentacle""#);
    match parse_session(&broken) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("unknown modality must not parse"),
    }
}

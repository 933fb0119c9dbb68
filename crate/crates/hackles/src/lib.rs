//! Aggression and anger detection over tracked body, head, face and speech
//! streams.
//!
//! The crate is sensor-agnostic: any tracker that produces the named 2D
//! points in [`session::registry`] can feed it. Recorded acts are
//! [`session::Session`]s; from those the pipeline derives geometric feature
//! vectors ([`features`]), behavioral rule outcomes ([`rules`]), lexical
//! anger cues ([`lexicon`]), per-modality classifier votes ([`svm`]), and a
//! fused per-instant anger decision ([`fusion`]). [`synth`]
//! generates labeled sessions from gesture scripts, [`eval`] scores
//! predictions, and [`pipeline`] wires the stages into the gen / train /
//! run / eval / report commands exposed by the `hackles` binary and the
//! `examples/` directory.
//!
//! Everything downstream of a seed is deterministic: generation, training,
//! evaluation and reports are byte-identical across runs on the same input.

pub mod eval;
pub mod features;
pub mod fusion;
pub mod lexicon;
pub mod pipeline;
pub mod rules;
pub mod session;
pub mod svm;
pub mod synth;

pub use session::{EmotionClass, Modality, Point2, Session, SpeechEvent, TrackedFrame};

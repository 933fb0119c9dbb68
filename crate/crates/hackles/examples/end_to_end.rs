//! The whole pipeline as library calls: generate a small dataset, train
//! both feature pathways, score the held-out sessions, and replay one
//! session through the live detector stack.
//!
//!     cargo run --example end_to_end

use hackles::lexicon::Lexicon;
use hackles::pipeline::{
    cmd_eval, cmd_gen, cmd_train, replay_session, ModelSet, Pathway, RunConfig,
};
use hackles::rules::RuleSet;
use hackles::session::parse_session_file;

fn main() {
    let dir = tempfile::tempdir().expect("scratch space");
    let out = dir.path().join("run");

    // small enough to finish in seconds: 3 actors x 7 classes x 1 act
    let cfg = RunConfig {
        actors: 3,
        acts_per_class: 1,
        frame_rate: 5.0,
        rows_per_session: 8,
        folds: 2,
        train_fraction: 0.7,
        seed: 21,
        ..RunConfig::default()
    };

    let summary = cmd_gen(&cfg, None, &out).expect("generation");
    println!("generated {} sessions under {}", summary.sessions, out.display());

    let trained = cmd_train(&cfg, &out.join("sessions"), &Pathway::ALL, &out).expect("training");
    println!(
        "split {} train / {} test; trained {} pathways",
        trained.split.train.len(),
        trained.split.test.len(),
        trained.pathways.len()
    );
    for report in &trained.pathways {
        for m in &report.modalities {
            println!(
                "  {} {:<5} dim {:>3} cv accuracy {:.3}",
                report.pathway,
                m.modality.name(),
                m.dim,
                m.mean_accuracy
            );
        }
    }

    let eval = cmd_eval(&cfg, &out.join("sessions"), &out).expect("evaluation");
    for pe in &eval.pathways {
        let anger = &pe.report.per_class[0];
        println!(
            "pathway {:<15} accuracy {:.3}  anger P/R/F {:.2}/{:.2}/{:.2}",
            pe.pathway.to_string(),
            pe.report.accuracy,
            anger.precision,
            anger.recall,
            anger.f_measure
        );
    }

    // replay one held-out session through the full stack
    let id = &trained.split.test[0];
    let parsed = parse_session_file(&out.join("sessions").join(format!("{id}.jsonl")))
        .expect("generated file parses");
    let models = ModelSet::load(&out.join("models").join("rule-augmented")).expect("trained");
    let (decisions, verdict) = replay_session(
        &cfg,
        &models,
        &RuleSet::stock(),
        &Lexicon::stock(),
        &parsed.session,
    )
    .expect("replay");
    println!(
        "replayed {}: {} fusion runs, predicted {} (label {}), anger {} at confidence {:.3}",
        verdict.session_id,
        decisions.len(),
        verdict.predicted.name(),
        verdict.label.name(),
        verdict.anger,
        verdict.confidence
    );
}

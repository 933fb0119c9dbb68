//! Train the one-vs-one RBF ensemble on a small synthetic problem, read
//! its diagnostics, cross-validate, and round-trip the model file.
//!
//!     cargo run --example train_svm

use hackles::session::EmotionClass;
use hackles::svm::{kfold_cv, train_multiclass, MulticlassModel, TrainConfig};

/// Four well-separated clusters in the plane, twelve points each.
fn clusters() -> (Vec<Vec<f64>>, Vec<EmotionClass>) {
    let centers = [
        (EmotionClass::Anger, 0.0, 0.0),
        (EmotionClass::Happy, 4.0, 0.0),
        (EmotionClass::Sad, 0.0, 4.0),
        (EmotionClass::Neutral, 4.0, 4.0),
    ];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (class, cx, cy) in centers {
        for i in 0..12 {
            // deterministic lattice jitter keeps the example dependency-free
            let dx = (i % 4) as f64 * 0.2 - 0.3;
            let dy = (i / 4) as f64 * 0.2 - 0.2;
            rows.push(vec![cx + dx, cy + dy]);
            labels.push(class);
        }
    }
    (rows, labels)
}

fn main() {
    let (rows, labels) = clusters();
    let cfg = TrainConfig {
        gamma: 0.5,
        k: 4,
        seed: 9,
        ..TrainConfig::default()
    };

    let (model, diagnostics) = train_multiclass(&rows, &labels, &cfg).expect("separable set");
    println!(
        "trained {} pairwise duels over {} classes, input dim {}",
        model.pairs.len(),
        model.class_count(),
        model.dim
    );
    for (pair, diag) in model.pairs.iter().zip(&diagnostics) {
        println!(
            "  {:>7} vs {:<7} converged {} in {:>2} sweeps, {} SVs, worst KKT {:.2e}",
            pair.class_a.name(),
            pair.class_b.name(),
            diag.converged,
            diag.sweeps,
            diag.support_vectors,
            diag.max_kkt_violation
        );
    }

    for (x, want) in [
        (vec![0.1, -0.2], EmotionClass::Anger),
        (vec![3.9, 0.3], EmotionClass::Happy),
    ] {
        let (got, confidence) = model.predict(&x).expect("dim matches");
        println!("predict {x:?} -> {} (confidence {confidence:.2}, wanted {})", got.name(), want.name());
        assert_eq!(got, want);
    }
    // equidistant from all four clusters: the duel wins split and the
    // summed signed margins break the near-tie
    let (got, confidence) = model.predict(&[2.0, 2.0]).expect("dim matches");
    println!("predict [2.0, 2.0] -> {} (confidence {confidence:.2}, contested)", got.name());

    let cv = kfold_cv(&rows, &labels, &cfg).expect("feasible folds");
    println!("{}-fold cv mean accuracy {:.3}", cfg.k, cv.mean_accuracy);

    let json = model.to_json();
    let back = MulticlassModel::from_json(&json).expect("version 1");
    assert_eq!(back, model);
    println!("model json round-trips at {} bytes", json.len());
}

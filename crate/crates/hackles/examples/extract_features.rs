//! Location, temporal and combined feature vectors for every visual
//! modality, and the angle convention they rest on.
//!
//!     cargo run --example extract_features

use hackles::features::{
    combined_features, location_features, pair_angle, temporal_features, FeatureKind,
    ModalityConfig,
};
use hackles::session::{Modality, Point2};
use hackles::synth::base_pose;
use hackles::TrackedFrame;

fn main() {
    // image space is y-down, so "above on screen" means smaller y;
    // pair_angle reports conventional math angles regardless
    let a = Point2::new(100.0, 100.0);
    println!("angle to the point directly above: {:+.3} rad", pair_angle(a, Point2::new(100.0, 60.0)));
    println!("angle to the point directly below: {:+.3} rad", pair_angle(a, Point2::new(100.0, 140.0)));
    println!("angle to the point to the right:   {:+.3} rad", pair_angle(a, Point2::new(160.0, 100.0)));
    println!();

    println!(
        "{:<6} {:>6} {:>6} {:>9} {:>9} {:>9}",
        "stream", "points", "pairs", "location", "temporal", "combined"
    );
    for modality in Modality::VISUAL {
        let config = ModalityConfig::standard(modality);
        println!(
            "{:<6} {:>6} {:>6} {:>9} {:>9} {:>9}",
            modality.name(),
            config.point_count(),
            config.pairs.len(),
            config.dim(FeatureKind::Location),
            config.dim(FeatureKind::Temporal),
            config.dim(FeatureKind::Combined),
        );
    }
    println!();

    // two hand frames a third of a second apart: left wrist rises 30 px
    let config = ModalityConfig::standard(Modality::Hand);
    let first = base_pose(Modality::Hand);
    let mut second = first.clone();
    second[2].y -= 30.0;
    let prev = frame(0, Modality::Hand, first);
    let curr = frame(333, Modality::Hand, second);

    let loc = location_features(&config, &curr).expect("matching frame");
    println!("location row starts  {:?}", &loc[..6]);
    println!("location row angles  {:?}", &loc[12..]);

    // temporal rows are [speeds.., directions..]; left_wrist holds slot 2
    let tmp = temporal_features(&config, &prev, &curr).expect("increasing time");
    let speeds = &tmp[..config.point_count()];
    println!("per-point speeds     {speeds:.1?} px/s");
    println!("left wrist speed     {:.1} px/s", speeds[2]);

    let combined = combined_features(&config, &prev, &curr).expect("same frames");
    assert_eq!(combined.len(), loc.len() + tmp.len());
    println!("combined width       {}", combined.len());
}

fn frame(t_ms: u64, modality: Modality, points: Vec<Point2>) -> TrackedFrame {
    TrackedFrame::from_ordered(t_ms, modality, points).expect("full frame")
}

//! Geometric feature vectors over tracked frames.
//!
//! Two vector kinds per modality:
//!
//! * location: `[x1, y1, .., xn, yn, th1, .., thm]` — raw coordinates of the
//!   n registry points followed by the inter-point angle of each of the m
//!   configured point pairs (dimension `2n + m`);
//! * temporal: `[|v1|, .., |vn|, th1, .., thn]` — per-point speed between two
//!   consecutive frames (px/sec) followed by each point's motion direction
//!   (dimension `2n`).
//!
//! Classifiers consume the two concatenated (`Combined`, one row per
//! consecutive frame pair); the CSV export also carries the kinds
//! separately.
//!
//! Angles are measured in conventional orientation (counter-clockwise from
//! the +x axis) even though coordinates are image-space y-down, so the
//! vertical component is negated before `atan2`. Range is `(-pi, pi]`;
//! degenerate vectors (coincident points, zero motion) report angle 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::registry::{adjacent_pairs, point_count, point_names};
use crate::session::{EmotionClass, Modality, Point2, Session, TrackedFrame};

/// Angle of the vector from `a` to `b`, y-down input, conventional
/// orientation out. `(0, 10) -> (0, 0)` (b directly above a on screen)
/// gives `+pi/2`. Coincident points give 0.
pub fn pair_angle(a: Point2, b: Point2) -> f64 {
    let dx = b.x - a.x;
    let dy = a.y - b.y; // y grows downward on screen; flip to point "up"
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    let theta = dy.atan2(dx);
    // atan2 yields [-pi, pi]; fold the closed lower end onto +pi
    if theta == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        theta
    }
}

/// Per-point displacement rate between two frames: (speed px/sec,
/// direction). Zero displacement gives (0, 0).
pub fn point_velocity(prev: Point2, curr: Point2, dt_secs: f64) -> (f64, f64) {
    let speed = (curr.x - prev.x).hypot(curr.y - prev.y) / dt_secs;
    (speed, pair_angle(prev, curr))
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("frame is {got}, feature config expects {expected}")]
    ModalityMismatch { expected: Modality, got: Modality },
    #[error("temporal features need strictly increasing timestamps ({prev_ms}ms then {curr_ms}ms)")]
    NonIncreasingTime { prev_ms: u64, curr_ms: u64 },
    #[error("feature row has {got} values, expected {expected}")]
    WrongRowWidth { expected: usize, got: usize },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("bad label code {0}")]
    BadLabel(u64),
}

/// Which points, point pairs and kernel width a modality's features use.
/// [`ModalityConfig::standard`] derives the pairs from the registry groups
/// and assigns the stock per-modality gamma; a custom pair list supports
/// sensors that track a subset reliably.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityConfig {
    pub modality: Modality,
    /// Registry index pairs whose angles enter the location vector.
    pub pairs: Vec<(usize, usize)>,
    /// RBF kernel width used by this modality's classifier.
    pub gamma: f64,
}

/// Stock RBF kernel width for a modality's classifier.
pub fn standard_gamma(modality: Modality) -> f64 {
    match modality {
        Modality::Hand => 1.0 / 16.0,
        Modality::Head => 1.0 / 12.0,
        Modality::Face => 1.0 / 60.0,
        Modality::Body => 1.0 / 8.0,
        Modality::Speech => 1.0,
    }
}

impl ModalityConfig {
    pub fn standard(modality: Modality) -> ModalityConfig {
        ModalityConfig {
            modality,
            pairs: adjacent_pairs(modality),
            gamma: standard_gamma(modality),
        }
    }

    pub fn point_count(&self) -> usize {
        point_count(self.modality)
    }

    /// `2n + m`
    pub fn location_dim(&self) -> usize {
        2 * self.point_count() + self.pairs.len()
    }

    /// `2n`
    pub fn temporal_dim(&self) -> usize {
        2 * self.point_count()
    }

    /// Width of a combined (location ++ temporal) row.
    pub fn combined_dim(&self) -> usize {
        self.location_dim() + self.temporal_dim()
    }

    pub fn dim(&self, kind: FeatureKind) -> usize {
        match kind {
            FeatureKind::Location => self.location_dim(),
            FeatureKind::Temporal => self.temporal_dim(),
            FeatureKind::Combined => self.combined_dim(),
        }
    }

    fn check_frame(&self, frame: &TrackedFrame) -> Result<(), FeatureError> {
        if frame.modality != self.modality {
            return Err(FeatureError::ModalityMismatch {
                expected: self.modality,
                got: frame.modality,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Location,
    Temporal,
    Combined,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Location => "location",
            FeatureKind::Temporal => "temporal",
            FeatureKind::Combined => "combined",
        }
    }

    pub fn from_name(name: &str) -> Option<FeatureKind> {
        match name {
            "location" => Some(FeatureKind::Location),
            "temporal" => Some(FeatureKind::Temporal),
            "combined" => Some(FeatureKind::Combined),
            _ => None,
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Location vector of one frame: coordinates then pair angles.
pub fn location_features(
    config: &ModalityConfig,
    frame: &TrackedFrame,
) -> Result<Vec<f64>, FeatureError> {
    config.check_frame(frame)?;
    let mut out = Vec::with_capacity(config.location_dim());
    for p in frame.points() {
        out.push(p.x);
        out.push(p.y);
    }
    for &(a, b) in &config.pairs {
        out.push(pair_angle(frame.point_at(a), frame.point_at(b)));
    }
    debug_assert_eq!(out.len(), config.location_dim());
    Ok(out)
}

/// Temporal vector across two consecutive frames: speeds then directions.
pub fn temporal_features(
    config: &ModalityConfig,
    prev: &TrackedFrame,
    curr: &TrackedFrame,
) -> Result<Vec<f64>, FeatureError> {
    config.check_frame(prev)?;
    config.check_frame(curr)?;
    if curr.t_ms <= prev.t_ms {
        return Err(FeatureError::NonIncreasingTime {
            prev_ms: prev.t_ms,
            curr_ms: curr.t_ms,
        });
    }
    let dt_secs = (curr.t_ms - prev.t_ms) as f64 / 1000.0;
    let n = config.point_count();
    let mut speeds = Vec::with_capacity(2 * n);
    let mut directions = Vec::with_capacity(n);
    for i in 0..n {
        let (speed, dir) = point_velocity(prev.point_at(i), curr.point_at(i), dt_secs);
        speeds.push(speed);
        directions.push(dir);
    }
    speeds.extend(directions);
    debug_assert_eq!(speeds.len(), config.temporal_dim());
    Ok(speeds)
}

/// Classifier row for the frame pair (prev, curr): location of `curr`
/// followed by temporal motion from `prev` to `curr`.
pub fn combined_features(
    config: &ModalityConfig,
    prev: &TrackedFrame,
    curr: &TrackedFrame,
) -> Result<Vec<f64>, FeatureError> {
    let mut row = location_features(config, curr)?;
    row.extend(temporal_features(config, prev, curr)?);
    Ok(row)
}

/// One extracted feature row, labeled with its session's ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub t_ms: u64,
    pub label: EmotionClass,
    pub modality: Modality,
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

/// Per-kind rows for one modality stream: one location row per frame plus
/// one temporal row per consecutive frame pair, in time order (location
/// before temporal at equal timestamps).
pub fn session_feature_rows(
    config: &ModalityConfig,
    session: &Session,
) -> Result<Vec<FeatureRow>, FeatureError> {
    let stream = session.stream(config.modality);
    let mut rows = Vec::with_capacity(stream.len().saturating_mul(2));
    for (i, frame) in stream.iter().enumerate() {
        rows.push(FeatureRow {
            t_ms: frame.t_ms,
            label: session.label,
            modality: config.modality,
            kind: FeatureKind::Location,
            values: location_features(config, frame)?,
        });
        if i > 0 {
            rows.push(FeatureRow {
                t_ms: frame.t_ms,
                label: session.label,
                modality: config.modality,
                kind: FeatureKind::Temporal,
                values: temporal_features(config, &stream[i - 1], frame)?,
            });
        }
    }
    rows.sort_by_key(|r| (r.t_ms, r.kind));
    Ok(rows)
}

/// Combined rows for one modality stream, one per consecutive frame pair
/// (the first frame only seeds motion). This is the classifier's input.
pub fn session_combined_rows(
    config: &ModalityConfig,
    session: &Session,
) -> Result<Vec<FeatureRow>, FeatureError> {
    let stream = session.stream(config.modality);
    let mut rows = Vec::new();
    for pair in stream.windows(2) {
        rows.push(FeatureRow {
            t_ms: pair[1].t_ms,
            label: session.label,
            modality: config.modality,
            kind: FeatureKind::Combined,
            values: combined_features(config, &pair[0], &pair[1])?,
        });
    }
    Ok(rows)
}

/// Generated column names for one kind, stable across runs.
pub fn feature_headers(config: &ModalityConfig, kind: FeatureKind) -> Vec<String> {
    let names = point_names(config.modality);
    let mut cols = Vec::with_capacity(config.dim(kind));
    if kind != FeatureKind::Temporal {
        for n in names {
            cols.push(format!("{n}_x"));
            cols.push(format!("{n}_y"));
        }
        for &(a, b) in &config.pairs {
            cols.push(format!("angle_{}_{}", names[a], names[b]));
        }
    }
    if kind != FeatureKind::Location {
        for n in names {
            cols.push(format!("speed_{n}"));
        }
        for n in names {
            cols.push(format!("dir_{n}"));
        }
    }
    cols
}

/// Write rows of one (modality, kind) as CSV:
/// `t_ms,label,modality,kind,<generated column names>`.
pub fn write_feature_csv<W: std::io::Write>(
    writer: W,
    config: &ModalityConfig,
    kind: FeatureKind,
    rows: &[FeatureRow],
) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "t_ms".to_string(),
        "label".to_string(),
        "modality".to_string(),
        "kind".to_string(),
    ];
    header.extend(feature_headers(config, kind));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        if row.kind != kind || row.modality != config.modality {
            return Err(FeatureError::Csv(format!(
                "row is {}/{}, file is {}/{}",
                row.modality, row.kind, config.modality, kind
            )));
        }
        if row.values.len() != config.dim(kind) {
            return Err(FeatureError::WrongRowWidth {
                expected: config.dim(kind),
                got: row.values.len(),
            });
        }
        let mut record = vec![
            row.t_ms.to_string(),
            row.label.code().to_string(),
            row.modality.name().to_string(),
            row.kind.name().to_string(),
        ];
        record.extend(row.values.iter().map(|v| format_float(*v)));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| FeatureError::Csv(e.to_string()))
}

/// Read rows written by [`write_feature_csv`]. Width is validated against
/// the header.
pub fn read_feature_csv<R: std::io::Read>(reader: R) -> Result<Vec<FeatureRow>, FeatureError> {
    let mut r = csv::Reader::from_reader(reader);
    let width = r.headers().map_err(csv_err)?.len();
    if width < 4 {
        return Err(FeatureError::Csv(
            "header needs t_ms,label,modality,kind".into(),
        ));
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        if record.len() != width {
            return Err(FeatureError::WrongRowWidth {
                expected: width,
                got: record.len(),
            });
        }
        let t_ms: u64 = record[0]
            .parse()
            .map_err(|e| FeatureError::Csv(format!("bad t_ms: {e}")))?;
        let code: u64 = record[1]
            .parse()
            .map_err(|e| FeatureError::Csv(format!("bad label: {e}")))?;
        let label = EmotionClass::from_code(code as usize).ok_or(FeatureError::BadLabel(code))?;
        let modality = Modality::from_name(&record[2])
            .ok_or_else(|| FeatureError::Csv(format!("bad modality `{}`", &record[2])))?;
        let kind = FeatureKind::from_name(&record[3])
            .ok_or_else(|| FeatureError::Csv(format!("bad kind `{}`", &record[3])))?;
        let values = record
            .iter()
            .skip(4)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| FeatureError::Csv(format!("bad value: {e}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(FeatureRow {
            t_ms,
            label,
            modality,
            kind,
            values,
        });
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> FeatureError {
    FeatureError::Csv(e.to_string())
}

/// Shortest decimal that round-trips, so CSV output is byte-stable.
fn format_float(v: f64) -> String {
    let mut buf = serde_json::to_string(&v).expect("finite float serializes");
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn frame_at(modality: Modality, f: impl Fn(usize) -> Point2) -> TrackedFrame {
        let points = (0..point_count(modality)).map(f).collect();
        TrackedFrame::from_ordered(0, modality, points).unwrap()
    }

    #[test]
    fn angle_cardinal_directions() {
        let origin = Point2::new(5.0, 5.0);
        // screen-up means smaller y
        assert_eq!(pair_angle(origin, Point2::new(5.0, 0.0)), FRAC_PI_2);
        assert_eq!(pair_angle(origin, Point2::new(5.0, 10.0)), -FRAC_PI_2);
        assert_eq!(pair_angle(origin, Point2::new(10.0, 5.0)), 0.0);
        assert_eq!(pair_angle(origin, Point2::new(0.0, 5.0)), PI);
    }

    #[test]
    fn angle_matches_3_4_5_triangle() {
        // horizontal leg 3, vertical leg 4 (upward on screen): sin=0.8, cos=0.6
        let theta = pair_angle(Point2::new(0.0, 4.0), Point2::new(3.0, 0.0));
        assert!((theta.sin() - 0.8).abs() < 1e-12);
        assert!((theta.cos() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn angle_reverses_under_swap() {
        let a = Point2::new(2.0, 7.0);
        let b = Point2::new(9.0, 3.0);
        let ab = pair_angle(a, b);
        let ba = pair_angle(b, a);
        assert!((ab.sin() + ba.sin()).abs() < 1e-12);
        assert!((ab.cos() + ba.cos()).abs() < 1e-12);
    }

    #[test]
    fn angle_degenerate_is_zero() {
        let p = Point2::new(3.0, 4.0);
        assert_eq!(pair_angle(p, p), 0.0);
    }

    #[test]
    fn angle_never_returns_negative_pi() {
        // a vector pointing in -x with y = -0.0 would naively give -pi
        let theta = pair_angle(Point2::new(10.0, -0.0), Point2::new(0.0, 0.0));
        assert_eq!(theta, PI);
    }

    #[test]
    fn feature_dims_per_modality() {
        for (m, loc, tmp) in [
            (Modality::Hand, 16, 12),
            (Modality::Head, 33, 24),
            (Modality::Face, 158, 120),
            (Modality::Body, 33, 24),
        ] {
            let cfg = ModalityConfig::standard(m);
            assert_eq!(cfg.location_dim(), loc, "{m} location");
            assert_eq!(cfg.temporal_dim(), tmp, "{m} temporal");
            assert_eq!(cfg.combined_dim(), loc + tmp, "{m} combined");
            assert_eq!(feature_headers(&cfg, FeatureKind::Combined).len(), loc + tmp);
        }
    }

    #[test]
    fn standard_gammas() {
        assert_eq!(ModalityConfig::standard(Modality::Hand).gamma, 1.0 / 16.0);
        assert_eq!(ModalityConfig::standard(Modality::Head).gamma, 1.0 / 12.0);
        assert_eq!(ModalityConfig::standard(Modality::Face).gamma, 1.0 / 60.0);
        assert_eq!(ModalityConfig::standard(Modality::Body).gamma, 1.0 / 8.0);
    }

    #[test]
    fn location_layout_is_coords_then_angles() {
        let cfg = ModalityConfig::standard(Modality::Hand);
        let frame = frame_at(Modality::Hand, |i| Point2::new(i as f64, 2.0 * i as f64));
        let fv = location_features(&cfg, &frame).unwrap();
        assert_eq!(fv.len(), 16);
        assert_eq!(&fv[..4], &[0.0, 0.0, 1.0, 2.0]);
        // first pair is (left_shoulder, left_elbow): dx=1, dy_up=-2
        assert!((fv[12] - (-2.0f64).atan2(1.0)).abs() < 1e-15);
    }

    #[test]
    fn temporal_matches_hand_computed_velocity() {
        let cfg = ModalityConfig::standard(Modality::Hand);
        let a = frame_at(Modality::Hand, |i| Point2::new(10.0 * i as f64, 50.0));
        let mut b = frame_at(Modality::Hand, |i| Point2::new(10.0 * i as f64 + 6.0, 42.0));
        b.t_ms = 500;
        let fv = temporal_features(&cfg, &a, &b).unwrap();
        // displacement (6, -8) over 0.5s: speed 20 px/s, direction atan2(8, 6)
        for i in 0..6 {
            assert!((fv[i] - 20.0).abs() < 1e-12, "speed of point {i}");
            assert!((fv[6 + i] - (8.0f64).atan2(6.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_frames_at_later_time_give_zero_magnitudes() {
        let cfg = ModalityConfig::standard(Modality::Body);
        let a = frame_at(Modality::Body, |i| Point2::new(i as f64 * 3.0, 100.0));
        let mut b = a.clone();
        b.t_ms = 40;
        let fv = temporal_features(&cfg, &a, &b).unwrap();
        assert!(fv.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn temporal_rejects_equal_timestamps() {
        let cfg = ModalityConfig::standard(Modality::Hand);
        let a = frame_at(Modality::Hand, |i| Point2::new(i as f64, 0.0));
        let b = a.clone();
        assert_eq!(
            temporal_features(&cfg, &a, &b).unwrap_err(),
            FeatureError::NonIncreasingTime {
                prev_ms: 0,
                curr_ms: 0
            }
        );
    }

    #[test]
    fn angles_are_translation_invariant() {
        let cfg = ModalityConfig::standard(Modality::Head);
        let base = frame_at(Modality::Head, |i| {
            Point2::new(100.0 + 7.0 * i as f64, 200.0 - 3.0 * i as f64)
        });
        let shifted = frame_at(Modality::Head, |i| {
            Point2::new(137.0 + 7.0 * i as f64, 189.0 - 3.0 * i as f64)
        });
        let a = location_features(&cfg, &base).unwrap();
        let b = location_features(&cfg, &shifted).unwrap();
        for i in 24..33 {
            assert_eq!(a[i], b[i], "angle component {i} changed under translation");
        }
        assert_ne!(&a[..24], &b[..24]);
    }

    #[test]
    fn doubled_dt_halves_speed() {
        let cfg = ModalityConfig::standard(Modality::Hand);
        let a = frame_at(Modality::Hand, |i| Point2::new(i as f64, 9.0));
        let mut b = frame_at(Modality::Hand, |i| Point2::new(i as f64 + 3.0, 5.0));
        b.t_ms = 100;
        let mut c = b.clone();
        c.t_ms = 200;
        let fast = temporal_features(&cfg, &a, &b).unwrap();
        let slow = temporal_features(&cfg, &a, &c).unwrap();
        for i in 0..6 {
            assert!((fast[i] - 2.0 * slow[i]).abs() < 1e-12);
            assert_eq!(fast[6 + i], slow[6 + i], "direction must not depend on dt");
        }
    }

    #[test]
    fn session_rows_count_location_and_temporal() {
        let mut s = Session::new("s", "a", EmotionClass::Happy, 15_000, 640, 480);
        for t in [0u64, 200, 400] {
            let mut f = frame_at(Modality::Hand, |i| Point2::new(i as f64 + t as f64, 50.0));
            f.t_ms = t;
            s.push_frame(f).unwrap();
        }
        let cfg = ModalityConfig::standard(Modality::Hand);
        let rows = session_feature_rows(&cfg, &s).unwrap();
        let loc = rows.iter().filter(|r| r.kind == FeatureKind::Location).count();
        let tmp = rows.iter().filter(|r| r.kind == FeatureKind::Temporal).count();
        assert_eq!((loc, tmp), (3, 2));
        // time-ordered, location before temporal at the same timestamp
        assert_eq!(rows[0].kind, FeatureKind::Location);
        assert_eq!(rows[1].kind, FeatureKind::Location);
        assert_eq!(rows[1].t_ms, 200);
        assert_eq!(rows[2].kind, FeatureKind::Temporal);
        assert_eq!(rows[2].t_ms, 200);

        let combined = session_combined_rows(&cfg, &s).unwrap();
        assert_eq!(combined.len(), 2);
        assert_eq!(combined[0].t_ms, 200);
        assert_eq!(combined[0].values.len(), cfg.combined_dim());
        assert_eq!(combined[0].label, EmotionClass::Happy);
    }

    #[test]
    fn empty_stream_yields_no_rows() {
        let s = Session::new("s", "a", EmotionClass::Happy, 15_000, 640, 480);
        let cfg = ModalityConfig::standard(Modality::Face);
        assert!(session_feature_rows(&cfg, &s).unwrap().is_empty());
        assert!(session_combined_rows(&cfg, &s).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let cfg = ModalityConfig::standard(Modality::Hand);
        let frame_a = frame_at(Modality::Hand, |i| Point2::new(1.5 * i as f64, 33.25));
        let mut frame_b = frame_at(Modality::Hand, |i| Point2::new(1.5 * i as f64 + 0.1, 30.0));
        frame_b.t_ms = 333;
        let rows = vec![FeatureRow {
            t_ms: 333,
            label: EmotionClass::Disgust,
            modality: Modality::Hand,
            kind: FeatureKind::Combined,
            values: combined_features(&cfg, &frame_a, &frame_b).unwrap(),
        }];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &cfg, FeatureKind::Combined, &rows).unwrap();
        let back = read_feature_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn csv_rejects_kind_mismatch() {
        let cfg = ModalityConfig::standard(Modality::Hand);
        let rows = vec![FeatureRow {
            t_ms: 0,
            label: EmotionClass::Anger,
            modality: Modality::Hand,
            kind: FeatureKind::Location,
            values: vec![0.0; cfg.location_dim()],
        }];
        let mut buf = Vec::new();
        let err = write_feature_csv(&mut buf, &cfg, FeatureKind::Temporal, &rows).unwrap_err();
        assert!(matches!(err, FeatureError::Csv(_)));
    }
}

//! Seeded synthetic session generation from gesture scripts.
//!
//! A script describes one enactment as sparse keyframes of pixel offsets
//! against a built-in neutral standing pose, plus optional scripted speech.
//! Generation interpolates offsets piecewise-linearly over the session,
//! adds seeded uniform jitter per point per frame, and clamps anything that
//! leaves the frame (reported as warnings). Same (script, seed, fps) in,
//! byte-identical session out.
//!
//! Offset keys address a single named point ("left_wrist"), every point of
//! one modality ("hand/*"), or every tracked point ("*"); overlapping keys
//! add up. Coordinates are image-space: y grows downward, so an offset of
//! [0, -20] moves a point up.
//!
//! The stock library ships three script variants per emotion class; the
//! default dataset layout is 5 actors × 7 classes × 3 acts = 105 sessions,
//! with per-actor placement offsets standing in for body variation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::registry::{point_index, point_names};
use crate::session::{
    EmotionClass, Modality, Point2, Session, SpeechEvent, TrackedFrame, DEFAULT_FRAME_HEIGHT,
    DEFAULT_FRAME_WIDTH,
};

pub const DEFAULT_ACTORS: usize = 5;
pub const DEFAULT_ACTS_PER_CLASS: usize = 3;
pub const DEFAULT_FRAME_RATE: f64 = 30.0;
pub const DEFAULT_NOISE_PX: f64 = 2.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad script json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("script `{script}`: {message}")]
    Invalid { script: String, message: String },
    #[error("no script for class {0}")]
    MissingClass(EmotionClass),
}

fn invalid(script: &str, message: impl Into<String>) -> SynthError {
    SynthError::Invalid {
        script: script.to_string(),
        message: message.into(),
    }
}

/// Neutral standing pose, 640×480 image space, subject centered.
/// Positions are chosen so that no stock rule fires on the undisturbed
/// pose even under jitter: wrists hang inside the elbows, brow span well
/// over lip span, brow-to-lid gap under lid-to-corner gap.
pub fn base_pose(modality: Modality) -> Vec<Point2> {
    let pts: &[(f64, f64)] = match modality {
        Modality::Hand => &[
            (250.0, 180.0), // left_shoulder
            (240.0, 250.0), // left_elbow
            (246.0, 320.0), // left_wrist
            (390.0, 180.0), // right_shoulder
            (400.0, 250.0), // right_elbow
            (394.0, 320.0), // right_wrist
        ],
        Modality::Head => &[
            (320.0, 60.0),  // head_top_center
            (320.0, 80.0),  // forehead_center
            (320.0, 98.0),  // nose_bridge
            (320.0, 105.0), // head_center
            (320.0, 148.0), // chin_bottom
            (320.0, 165.0), // neck_base
            (296.0, 88.0),  // left_temple
            (292.0, 105.0), // left_ear
            (300.0, 135.0), // left_jaw
            (344.0, 88.0),  // right_temple
            (348.0, 105.0), // right_ear
            (340.0, 135.0), // right_jaw
        ],
        Modality::Face => &[
            (310.0, 92.0),  // left_eyebrow_inner
            (295.0, 90.0),  // left_eyebrow_top
            (285.0, 94.0),  // left_eyebrow_outer
            (330.0, 92.0),  // right_eyebrow_inner
            (345.0, 90.0),  // right_eyebrow_top
            (355.0, 94.0),  // right_eyebrow_outer
            (313.0, 104.0), // left_eye_inner_corner
            (305.0, 96.0),  // left_upper_eyelid
            (295.0, 112.0), // left_eye_outer_corner
            (305.0, 108.0), // left_lower_eyelid
            (327.0, 104.0), // right_eye_inner_corner
            (335.0, 96.0),  // right_upper_eyelid
            (345.0, 112.0), // right_eye_outer_corner
            (335.0, 108.0), // right_lower_eyelid
            (320.0, 96.0),  // nose_root
            (320.0, 104.0), // nose_ridge_upper
            (320.0, 112.0), // nose_ridge_lower
            (320.0, 118.0), // nose_tip
            (320.0, 122.0), // nose_base
            (308.0, 132.0), // upper_lip_left
            (320.0, 130.0), // upper_lip_center
            (332.0, 132.0), // upper_lip_right
            (300.0, 138.0), // lower_lip_left
            (320.0, 140.0), // lower_lip_center
            (340.0, 138.0), // lower_lip_right
            (298.0, 135.0), // mouth_corner_left
            (342.0, 135.0), // mouth_corner_right
            (297.0, 112.0), // left_cheek_upper
            (295.0, 120.0), // left_cheek_center
            (297.0, 128.0), // left_cheek_lower
            (343.0, 112.0), // right_cheek_upper
            (345.0, 120.0), // right_cheek_center
            (343.0, 128.0), // right_cheek_lower
            (310.0, 146.0), // chin_left
            (320.0, 148.0), // chin_center
            (330.0, 146.0), // chin_right
            (292.0, 118.0), // jaw_left_upper
            (294.0, 130.0), // jaw_left_center
            (300.0, 140.0), // jaw_left_lower
            (348.0, 118.0), // jaw_right_upper
            (346.0, 130.0), // jaw_right_center
            (340.0, 140.0), // jaw_right_lower
            (302.0, 80.0),  // forehead_left
            (320.0, 78.0),  // forehead_mid
            (338.0, 80.0),  // forehead_right
            (305.0, 116.0), // under_eye_left
            (335.0, 116.0), // under_eye_right
            (306.0, 128.0), // upper_lip_outer_left
            (334.0, 128.0), // upper_lip_outer_right
            (302.0, 143.0), // lower_lip_outer_left
            (338.0, 143.0), // lower_lip_outer_right
            (290.0, 95.0),  // temple_left
            (350.0, 95.0),  // temple_right
            (312.0, 118.0), // nose_wing_left
            (328.0, 118.0), // nose_wing_right
            (320.0, 126.0), // philtrum
            (305.0, 93.0),  // brow_ridge_left
            (335.0, 93.0),  // brow_ridge_right
            (305.0, 103.0), // eye_center_left
            (335.0, 103.0), // eye_center_right
        ],
        Modality::Body => &[
            (320.0, 100.0), // head
            (320.0, 180.0), // shoulder_center
            (320.0, 240.0), // spine
            (320.0, 300.0), // hip_center
            (300.0, 300.0), // hip_left
            (298.0, 370.0), // knee_left
            (296.0, 435.0), // ankle_left
            (300.0, 455.0), // foot_left
            (340.0, 300.0), // hip_right
            (342.0, 370.0), // knee_right
            (344.0, 435.0), // ankle_right
            (340.0, 455.0), // foot_right
        ],
        Modality::Speech => &[],
    };
    debug_assert_eq!(pts.len(), point_names(modality).len());
    pts.iter().map(|(x, y)| Point2::new(*x, *y)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptKeyframe {
    /// Time fraction of the session in [0, 1].
    pub at: f64,
    /// Pixel offsets by point name, "modality/*", or "*"; additive.
    #[serde(default)]
    pub offsets: BTreeMap<String, (f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptWord {
    pub at: f64,
    pub word: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureScript {
    pub name: String,
    pub label: EmotionClass,
    pub duration_ms: u64,
    #[serde(default = "default_noise")]
    pub noise_px: f64,
    pub keyframes: Vec<ScriptKeyframe>,
    #[serde(default)]
    pub words: Vec<ScriptWord>,
}

fn default_noise() -> f64 {
    DEFAULT_NOISE_PX
}

/// True when the key addresses at least one real point.
fn valid_offset_key(key: &str) -> bool {
    if key == "*" {
        return true;
    }
    if let Some(m) = key.strip_suffix("/*") {
        return Modality::VISUAL.iter().any(|v| v.to_string() == m);
    }
    Modality::VISUAL
        .iter()
        .any(|m| point_index(*m, key).is_some())
}

impl GestureScript {
    pub fn from_json(text: &str) -> Result<GestureScript, SynthError> {
        let script: GestureScript = serde_json::from_str(text)?;
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<GestureScript, SynthError> {
        GestureScript::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("script serializes");
        text.push('\n');
        text
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.name.trim().is_empty() {
            return Err(invalid("?", "empty name"));
        }
        let fail = |m: String| Err(invalid(&self.name, m));
        if self.duration_ms == 0 {
            return fail("zero duration".into());
        }
        if !self.noise_px.is_finite() || self.noise_px < 0.0 {
            return fail(format!("bad noise_px {}", self.noise_px));
        }
        if self.keyframes.is_empty() {
            return fail("no keyframes".into());
        }
        let mut prev = -1.0;
        for kf in &self.keyframes {
            if !kf.at.is_finite() || !(0.0..=1.0).contains(&kf.at) {
                return fail(format!("keyframe time {} outside [0,1]", kf.at));
            }
            if kf.at <= prev {
                return fail(format!(
                    "keyframe times must strictly increase ({prev} then {})",
                    kf.at
                ));
            }
            prev = kf.at;
            for (key, (dx, dy)) in &kf.offsets {
                if !valid_offset_key(key) {
                    return fail(format!("unknown offset target `{key}`"));
                }
                if !dx.is_finite() || !dy.is_finite() {
                    return fail(format!("non-finite offset for `{key}`"));
                }
            }
        }
        for w in &self.words {
            if !(0.0..=1.0).contains(&w.at) {
                return fail(format!("word time {} outside [0,1]", w.at));
            }
            if w.word.trim().is_empty() {
                return fail("empty scripted word".into());
            }
            if !(0.0..=1.0).contains(&w.confidence) {
                return fail(format!("word confidence {} outside [0,1]", w.confidence));
            }
        }
        Ok(())
    }

    /// Total offset a keyframe applies to one point: global wildcard +
    /// modality wildcard + the point's own entry.
    fn keyframe_offset(kf: &ScriptKeyframe, modality: Modality, name: &str) -> (f64, f64) {
        let mut dx = 0.0;
        let mut dy = 0.0;
        for key in ["*".to_string(), format!("{modality}/*"), name.to_string()] {
            if let Some((ox, oy)) = kf.offsets.get(&key) {
                dx += ox;
                dy += oy;
            }
        }
        (dx, dy)
    }

    /// Piecewise-linear offset of a point at time fraction `t`, clamped to
    /// the first/last keyframe outside their span.
    pub fn offset_at(&self, modality: Modality, name: &str, t: f64) -> (f64, f64) {
        let kfs = &self.keyframes;
        if t <= kfs[0].at {
            return Self::keyframe_offset(&kfs[0], modality, name);
        }
        let last = kfs.last().unwrap();
        if t >= last.at {
            return Self::keyframe_offset(last, modality, name);
        }
        let hi = kfs.partition_point(|kf| kf.at <= t);
        let (a, b) = (&kfs[hi - 1], &kfs[hi]);
        let u = (t - a.at) / (b.at - a.at);
        let (ax, ay) = Self::keyframe_offset(a, modality, name);
        let (bx, by) = Self::keyframe_offset(b, modality, name);
        (ax + (bx - ax) * u, ay + (by - ay) * u)
    }
}

/// Embedded stock script sources.
const STOCK_SCRIPT_SOURCES: &[&str] = &[
    include_str!("../assets/scripts/anger-hands-on-hips.json"),
    include_str!("../assets/scripts/anger-fist-stance.json"),
    include_str!("../assets/scripts/anger-raised-arms-rage.json"),
    include_str!("../assets/scripts/happy-jump-joy.json"),
    include_str!("../assets/scripts/happy-raise-arms-joy.json"),
    include_str!("../assets/scripts/happy-fist-pump.json"),
    include_str!("../assets/scripts/surprise-arms-chest.json"),
    include_str!("../assets/scripts/surprise-one-arm-chest.json"),
    include_str!("../assets/scripts/surprise-step-back.json"),
    include_str!("../assets/scripts/disgust-fold-shrug.json"),
    include_str!("../assets/scripts/disgust-hold-nose.json"),
    include_str!("../assets/scripts/disgust-move-away.json"),
    include_str!("../assets/scripts/fear-shield.json"),
    include_str!("../assets/scripts/fear-duck.json"),
    include_str!("../assets/scripts/fear-evade-side.json"),
    include_str!("../assets/scripts/sad-hold-head.json"),
    include_str!("../assets/scripts/sad-slouch-walk.json"),
    include_str!("../assets/scripts/sad-face-in-hands.json"),
    include_str!("../assets/scripts/neutral-stand.json"),
    include_str!("../assets/scripts/neutral-weight-shift.json"),
    include_str!("../assets/scripts/neutral-look-around.json"),
];

/// The shipped gesture library: three enactment variants per class.
pub fn stock_scripts() -> Vec<GestureScript> {
    STOCK_SCRIPT_SOURCES
        .iter()
        .map(|s| GestureScript::from_json(s).expect("stock script is valid"))
        .collect()
}

/// splitmix64-style scramble of the dataset seed with the session's
/// (actor, class, act) coordinates.
fn mix_seed(seed: u64, actor: u64, class: u64, act: u64) -> u64 {
    let mut x = seed ^ (actor << 40) ^ (class << 20) ^ act;
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn gen_session_inner(
    script: &GestureScript,
    seed: u64,
    frame_rate: f64,
    session_id: &str,
    actor_id: &str,
    actor_offset: (f64, f64),
) -> Result<(Session, Vec<String>), SynthError> {
    script.validate()?;
    if !(frame_rate > 0.0) || !frame_rate.is_finite() {
        return Err(invalid(&script.name, format!("bad frame rate {frame_rate}")));
    }
    let frames = (script.duration_ms as f64 / 1000.0 * frame_rate).floor() as usize;
    if frames < 2 {
        return Err(invalid(
            &script.name,
            format!("{frame_rate} fps over {} ms yields under two frames", script.duration_ms),
        ));
    }
    let (w, h) = (
        f64::from(DEFAULT_FRAME_WIDTH),
        f64::from(DEFAULT_FRAME_HEIGHT),
    );
    let mut session = Session::new(
        session_id,
        actor_id,
        script.label,
        script.duration_ms,
        DEFAULT_FRAME_WIDTH,
        DEFAULT_FRAME_HEIGHT,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clamped = [0usize; 4];
    // fixed draw order — frame-major, then modality, then point — keeps
    // output stable for a given seed
    for i in 0..frames {
        let t_ms = ((i as f64) * 1000.0 / frame_rate).round() as u64;
        let t = i as f64 / (frames - 1).max(1) as f64;
        for modality in Modality::VISUAL {
            let base = base_pose(modality);
            let names = point_names(modality);
            let mut points = Vec::with_capacity(base.len());
            for (p, name) in base.iter().zip(names) {
                let (dx, dy) = script.offset_at(modality, name, t);
                let (jx, jy) = if script.noise_px > 0.0 {
                    (
                        rng.random_range(-script.noise_px..=script.noise_px),
                        rng.random_range(-script.noise_px..=script.noise_px),
                    )
                } else {
                    (0.0, 0.0)
                };
                let x = p.x + actor_offset.0 + dx + jx;
                let y = p.y + actor_offset.1 + dy + jy;
                if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
                    clamped[modality as usize] += 1;
                }
                points.push(Point2::new(x.clamp(0.0, w), y.clamp(0.0, h)));
            }
            let frame = TrackedFrame::from_ordered(t_ms, modality, points)
                .map_err(|e| invalid(&script.name, e.to_string()))?;
            session
                .push_frame(frame)
                .map_err(|e| invalid(&script.name, e.to_string()))?;
        }
    }
    for word in &script.words {
        let t_ms = (word.at * script.duration_ms as f64).round() as u64;
        let event = SpeechEvent::new(t_ms, &word.word, word.confidence)
            .map_err(|e| invalid(&script.name, e.to_string()))?;
        session.push_speech(event);
    }
    let warnings = Modality::VISUAL
        .iter()
        .filter(|m| clamped[**m as usize] > 0)
        .map(|m| {
            format!(
                "{}: clamped {} out-of-frame coordinates in {m} stream",
                session_id, clamped[*m as usize]
            )
        })
        .collect();
    Ok((session, warnings))
}

/// Generate one session from a script. Deterministic in (script, seed,
/// frame_rate); out-of-frame coordinates are clamped and reported.
pub fn gen_session(
    script: &GestureScript,
    seed: u64,
    frame_rate: f64,
) -> Result<(Session, Vec<String>), SynthError> {
    let id = format!("{}-{seed:08x}", script.name);
    gen_session_inner(script, seed, frame_rate, &id, "solo", (0.0, 0.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub actors: usize,
    pub acts_per_class: usize,
    pub seed: u64,
    pub frame_rate: f64,
}

impl Default for DatasetConfig {
    fn default() -> DatasetConfig {
        DatasetConfig {
            actors: DEFAULT_ACTORS,
            acts_per_class: DEFAULT_ACTS_PER_CLASS,
            seed: 0,
            frame_rate: DEFAULT_FRAME_RATE,
        }
    }
}

/// Generate actors × 7 × acts labeled sessions. Each act cycles through
/// the class's script variants; actors get systematic placement offsets.
/// Defaults (5 actors, 3 acts) reproduce the 105-session layout.
pub fn gen_dataset(
    scripts: &[GestureScript],
    cfg: &DatasetConfig,
) -> Result<(Vec<Session>, Vec<String>), SynthError> {
    if cfg.actors == 0 || cfg.acts_per_class == 0 {
        return Err(invalid("dataset", "actors and acts must be at least 1"));
    }
    let mut by_class: BTreeMap<EmotionClass, Vec<&GestureScript>> = BTreeMap::new();
    for s in scripts {
        s.validate()?;
        by_class.entry(s.label).or_default().push(s);
    }
    for class in EmotionClass::ALL {
        if !by_class.contains_key(&class) {
            return Err(SynthError::MissingClass(class));
        }
    }
    let mut sessions = Vec::with_capacity(cfg.actors * 7 * cfg.acts_per_class);
    let mut warnings = Vec::new();
    for actor in 0..cfg.actors {
        let centered = actor as f64 - (cfg.actors - 1) as f64 / 2.0;
        let offset = (14.0 * centered, 6.0 * centered);
        let actor_id = format!("actor-{actor}");
        for class in EmotionClass::ALL {
            let variants = &by_class[&class];
            for act in 0..cfg.acts_per_class {
                let script = variants[act % variants.len()];
                let seed = mix_seed(cfg.seed, actor as u64, class.code() as u64, act as u64);
                let id = format!("{}-a{actor}-t{act}", script.name);
                let (session, mut warn) =
                    gen_session_inner(script, seed, cfg.frame_rate, &id, &actor_id, offset)?;
                sessions.push(session);
                warnings.append(&mut warn);
            }
        }
    }
    Ok((sessions, warnings))
}

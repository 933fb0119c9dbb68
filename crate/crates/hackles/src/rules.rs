//! Behavioral anger/aggression rules over sliding frame windows.
//!
//! A rule is a conjunction of clauses over one modality's tracked points.
//! Three rule kinds differ in what a single evaluation looks at:
//!
//! * instantaneous — clauses hold on one frame (checked per frame);
//! * displacement — earliest vs. latest frame in the window;
//! * oscillation — direction reversals of one coordinate across the window.
//!
//! Confidence over a window is `R/N`: `R` rule evaluations fired out of `N`
//! attempted, where an instantaneous rule contributes one evaluation per
//! frame of its modality in the window and a displacement/oscillation rule
//! contributes one per window. 5 fired of 15 evaluated gives 0.333. A
//! trailing mean over the last 10 per-frame confidences smooths the signal;
//! the smoothed value ≥ the vote threshold (default 0.218, inclusive) emits
//! an anger vote for fusion.
//!
//! Pixel thresholds are calibrated at 640px frame width and scale linearly
//! with `frame_width / 640`.
//!
//! The stock ruleset (ten anger rules over hand, head and face) ships as
//! `assets/ruleset.json`; rulesets are plain data and other emotions' rules
//! can be configured the same way.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{ModalityOutcome, OutcomeSource};
use crate::session::registry::point_index;
use crate::session::{
    EmotionClass, Modality, Point2, Session, TrackedFrame, CLASS_COUNT, DEFAULT_FRAME_WIDTH,
};

/// Frames per evaluation window.
pub const DEFAULT_WINDOW_FRAMES: usize = 10;
/// Per-frame confidences averaged into the smoothed signal.
pub const DEFAULT_SMOOTHING_FRAMES: usize = 10;
/// Smoothed-confidence threshold for emitting an anger vote (inclusive).
pub const DEFAULT_VOTE_THRESHOLD: f64 = 0.218;

pub const STOCK_RULESET_JSON: &str = include_str!("../assets/ruleset.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn of(self, p: Point2) -> f64 {
        match self {
            Axis::X => p.x,
            Axis::Y => p.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Lt,
    Gt,
    Ne,
    /// |lhs - rhs| ≤ tolerance (pixels; scaled with frame width).
    Within(f64),
}

impl Comparator {
    fn check(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ne => lhs != rhs,
            Comparator::Within(tol) => (lhs - rhs).abs() <= tol,
        }
    }

    fn scaled(self, factor: f64) -> Comparator {
        match self {
            Comparator::Within(tol) => Comparator::Within(tol * factor),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftDirection {
    /// Coordinate grew (x: rightward, y: downward on screen).
    Increase,
    /// Coordinate shrank (y decrease = upward on screen).
    Decrease,
    Either,
}

/// One testable condition. A rule fires when all its clauses hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Clause {
    /// Compare one coordinate of two points on the same frame.
    AxisCompare {
        a: String,
        b: String,
        axis: Axis,
        cmp: Comparator,
    },
    /// Compare the absolute coordinate spans of two point pairs on the
    /// same frame.
    SpanCompare {
        a: (String, String),
        b: (String, String),
        axis: Axis,
        cmp: Comparator,
    },
    /// Net movement of one coordinate from the earliest to the latest
    /// frame of the window, at least `min_px`.
    Shift {
        point: String,
        axis: Axis,
        direction: ShiftDirection,
        min_px: f64,
    },
    /// The coordinate moved back and forth: at least `repeat` alternating
    /// legs, each covering at least `min_px`, within the window.
    Swing {
        point: String,
        axis: Axis,
        min_px: f64,
        repeat: u32,
    },
}

impl Clause {
    pub fn is_instant(&self) -> bool {
        matches!(self, Clause::AxisCompare { .. } | Clause::SpanCompare { .. })
    }

    fn point_names(&self) -> Vec<&str> {
        match self {
            Clause::AxisCompare { a, b, .. } => vec![a, b],
            Clause::SpanCompare { a, b, .. } => vec![&a.0, &a.1, &b.0, &b.1],
            Clause::Shift { point, .. } | Clause::Swing { point, .. } => vec![point],
        }
    }

    fn scaled(&self, factor: f64) -> Clause {
        match self {
            Clause::AxisCompare { a, b, axis, cmp } => Clause::AxisCompare {
                a: a.clone(),
                b: b.clone(),
                axis: *axis,
                cmp: cmp.scaled(factor),
            },
            Clause::SpanCompare { a, b, axis, cmp } => Clause::SpanCompare {
                a: a.clone(),
                b: b.clone(),
                axis: *axis,
                cmp: cmp.scaled(factor),
            },
            Clause::Shift {
                point,
                axis,
                direction,
                min_px,
            } => Clause::Shift {
                point: point.clone(),
                axis: *axis,
                direction: *direction,
                min_px: min_px * factor,
            },
            Clause::Swing {
                point,
                axis,
                min_px,
                repeat,
            } => Clause::Swing {
                point: point.clone(),
                axis: *axis,
                min_px: min_px * factor,
                repeat: *repeat,
            },
        }
    }

    /// Evaluate on a single frame; None for clauses that need motion or
    /// unknown points.
    fn eval_frame(&self, frame: &TrackedFrame) -> Option<bool> {
        match self {
            Clause::AxisCompare { a, b, axis, cmp } => {
                Some(cmp.check(axis.of(frame.point(a)?), axis.of(frame.point(b)?)))
            }
            Clause::SpanCompare { a, b, axis, cmp } => {
                let span = |pair: &(String, String)| -> Option<f64> {
                    Some((axis.of(frame.point(&pair.0)?) - axis.of(frame.point(&pair.1)?)).abs())
                };
                Some(cmp.check(span(a)?, span(b)?))
            }
            Clause::Shift { .. } | Clause::Swing { .. } => None,
        }
    }

    /// Evaluate over the window's frames of the rule's modality, oldest
    /// first. Instant clauses check the latest frame; motion clauses need
    /// at least two frames. None when the clause cannot be evaluated.
    fn eval_stream(&self, frames: &[TrackedFrame]) -> Option<bool> {
        match self {
            Clause::AxisCompare { .. } | Clause::SpanCompare { .. } => {
                self.eval_frame(frames.last()?)
            }
            Clause::Shift {
                point,
                axis,
                direction,
                min_px,
            } => {
                if frames.len() < 2 {
                    return None;
                }
                let first = axis.of(frames.first()?.point(point)?);
                let last = axis.of(frames.last()?.point(point)?);
                let delta = last - first;
                Some(match direction {
                    ShiftDirection::Increase => delta >= *min_px,
                    ShiftDirection::Decrease => -delta >= *min_px,
                    ShiftDirection::Either => delta.abs() >= *min_px,
                })
            }
            Clause::Swing {
                point,
                axis,
                min_px,
                repeat,
            } => {
                if frames.len() < 2 {
                    return None;
                }
                let series: Option<Vec<f64>> = frames
                    .iter()
                    .map(|f| f.point(point).map(|p| axis.of(p)))
                    .collect();
                Some(count_swing_legs(&series?, *min_px) >= *repeat)
            }
        }
    }
}

/// Alternating-leg count of a coordinate trace: a leg is a maximal
/// monotone run covering at least `min_px`; sub-threshold counter-moves
/// are jitter and neither end a leg nor start one (hysteresis equal to the
/// threshold). The first leg is measured from the trace's first sample.
fn count_swing_legs(series: &[f64], min_px: f64) -> u32 {
    let mut legs = 0u32;
    let mut dir = 0.0f64;
    let mut extreme = series[0];
    for &c in &series[1..] {
        if dir == 0.0 {
            if (c - extreme).abs() >= min_px {
                dir = (c - extreme).signum();
                legs = 1;
                extreme = c;
            }
        } else if (c - extreme) * dir >= 0.0 {
            extreme = c;
        } else if (extreme - c) * dir >= min_px {
            dir = -dir;
            legs += 1;
            extreme = c;
        }
    }
    legs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Instantaneous,
    Displacement,
    Oscillation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDef {
    pub rule_id: u32,
    pub emotion: EmotionClass,
    pub modality: Modality,
    pub kind: RuleKind,
    pub description: String,
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad ruleset json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("ruleset has no rules")]
    Empty,
    #[error("duplicate rule id {0}")]
    DuplicateId(u32),
    #[error("rule {rule_id}: {message}")]
    Invalid { rule_id: u32, message: String },
}

fn invalid(rule_id: u32, message: impl Into<String>) -> RuleError {
    RuleError::Invalid {
        rule_id,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<RuleDef>,
}

impl RuleSet {
    /// The ten stock anger rules.
    pub fn stock() -> RuleSet {
        RuleSet::from_json(STOCK_RULESET_JSON).expect("stock ruleset is valid")
    }

    pub fn from_json(text: &str) -> Result<RuleSet, RuleError> {
        let set: RuleSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<RuleSet, RuleError> {
        RuleSet::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("ruleset serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: &Path) -> Result<(), RuleError> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        if self.rules.is_empty() {
            return Err(RuleError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for rule in &self.rules {
            if !seen.insert(rule.rule_id) {
                return Err(RuleError::DuplicateId(rule.rule_id));
            }
            if rule.clauses.is_empty() {
                return Err(invalid(rule.rule_id, "no clauses"));
            }
            if !rule.modality.is_visual() {
                return Err(invalid(rule.rule_id, "rules need a point-tracking modality"));
            }
            for clause in &rule.clauses {
                for name in clause.point_names() {
                    if point_index(rule.modality, name).is_none() {
                        return Err(invalid(
                            rule.rule_id,
                            format!("point `{name}` not in {} registry", rule.modality),
                        ));
                    }
                }
                match clause {
                    Clause::Shift { min_px, .. } if *min_px <= 0.0 => {
                        return Err(invalid(rule.rule_id, "shift distance must be positive"));
                    }
                    Clause::Swing { min_px, repeat, .. } => {
                        if *min_px <= 0.0 {
                            return Err(invalid(rule.rule_id, "swing distance must be positive"));
                        }
                        if *repeat < 1 {
                            return Err(invalid(rule.rule_id, "swing repeat must be at least 1"));
                        }
                    }
                    Clause::AxisCompare {
                        cmp: Comparator::Within(tol),
                        ..
                    }
                    | Clause::SpanCompare {
                        cmp: Comparator::Within(tol),
                        ..
                    } if *tol < 0.0 => {
                        return Err(invalid(rule.rule_id, "tolerance must be non-negative"));
                    }
                    _ => {}
                }
            }
            let instant_only = rule.clauses.iter().all(Clause::is_instant);
            match rule.kind {
                RuleKind::Instantaneous if !instant_only => {
                    return Err(invalid(
                        rule.rule_id,
                        "instantaneous rules cannot contain motion clauses",
                    ));
                }
                RuleKind::Displacement | RuleKind::Oscillation if instant_only => {
                    return Err(invalid(
                        rule.rule_id,
                        "displacement/oscillation rules need a motion clause",
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Thresholds scaled for a frame width other than the 640px the stock
    /// distances are calibrated at.
    pub fn scaled(&self, frame_width: u32) -> RuleSet {
        let factor = f64::from(frame_width) / f64::from(DEFAULT_FRAME_WIDTH);
        RuleSet {
            rules: self
                .rules
                .iter()
                .map(|r| RuleDef {
                    clauses: r.clauses.iter().map(|c| c.scaled(factor)).collect(),
                    description: r.description.clone(),
                    ..*r
                })
                .collect(),
        }
    }

    pub fn for_modality(&self, modality: Modality) -> RuleSet {
        RuleSet {
            rules: self
                .rules
                .iter()
                .filter(|r| r.modality == modality)
                .cloned()
                .collect(),
        }
    }

    pub fn for_emotion(&self, emotion: EmotionClass) -> RuleSet {
        RuleSet {
            rules: self
                .rules
                .iter()
                .filter(|r| r.emotion == emotion)
                .cloned()
                .collect(),
        }
    }

    /// Rules grouped by the emotion they indicate, preserving order.
    pub fn by_emotion(&self) -> BTreeMap<EmotionClass, RuleSet> {
        let mut map: BTreeMap<EmotionClass, RuleSet> = BTreeMap::new();
        for rule in &self.rules {
            map.entry(rule.emotion)
                .or_insert_with(|| RuleSet { rules: Vec::new() })
                .rules
                .push(rule.clone());
        }
        map
    }

    pub fn modalities(&self) -> Vec<Modality> {
        let mut seen = Vec::new();
        for m in Modality::VISUAL {
            if self.rules.iter().any(|r| r.modality == m) {
                seen.push(m);
            }
        }
        seen
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Per-modality slices of the trailing frames a rule evaluation sees.
#[derive(Debug, Clone)]
pub struct RuleWindow {
    cap: usize,
    streams: [Vec<TrackedFrame>; 4],
}

impl RuleWindow {
    /// `cap` is the per-modality frame budget (W).
    pub fn new(cap: usize) -> RuleWindow {
        assert!(cap >= 2, "motion rules need at least two frames");
        RuleWindow {
            cap,
            streams: [Vec::new(), Vec::new(), Vec::new(), Vec::new()],
        }
    }

    pub fn from_frames<'a, I>(cap: usize, frames: I) -> RuleWindow
    where
        I: IntoIterator<Item = &'a TrackedFrame>,
    {
        let mut w = RuleWindow::new(cap);
        for f in frames {
            w.push(f);
        }
        w
    }

    /// Append a frame (assumed time-ordered within its modality), evicting
    /// the oldest beyond the window budget. Speech is ignored.
    pub fn push(&mut self, frame: &TrackedFrame) {
        if !frame.modality.is_visual() {
            return;
        }
        let stream = &mut self.streams[frame.modality as usize];
        stream.push(frame.clone());
        if stream.len() > self.cap {
            stream.remove(0);
        }
    }

    pub fn stream(&self, modality: Modality) -> &[TrackedFrame] {
        match modality {
            Modality::Speech => &[],
            m => &self.streams[m as usize],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.streams.iter().all(Vec::is_empty)
    }

    /// Timestamp of the newest frame across modalities.
    pub fn end_t_ms(&self) -> Option<u64> {
        self.streams
            .iter()
            .filter_map(|s| s.last().map(|f| f.t_ms))
            .max()
    }
}

/// One rule over one window. None when the window lacks the frames or
/// points the rule needs (the rule is skipped, not counted).
pub fn evaluate_rule(rule: &RuleDef, window: &RuleWindow) -> Option<bool> {
    let frames = window.stream(rule.modality);
    if frames.is_empty() {
        return None;
    }
    let mut fired = true;
    for clause in &rule.clauses {
        fired &= clause.eval_stream(frames)?;
    }
    Some(fired)
}

/// One rule against a single frame; only meaningful for instantaneous
/// rules (motion rules return None).
pub fn evaluate_rule_at(rule: &RuleDef, frame: &TrackedFrame) -> Option<bool> {
    if frame.modality != rule.modality {
        return None;
    }
    let mut fired = true;
    for clause in &rule.clauses {
        fired &= clause.eval_frame(frame)?;
    }
    Some(fired)
}

/// R/N confidence of a ruleset over one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub window_end_t_ms: Option<u64>,
    /// R: evaluations that fired.
    pub fired: u32,
    /// N: evaluations attempted.
    pub evaluated: u32,
    /// R/N, or 0 when nothing was evaluable.
    pub confidence: f64,
    pub no_data: bool,
}

/// Evaluate every rule of `ruleset` over `window`: instantaneous rules
/// once per frame of their modality, motion rules once per window.
pub fn rule_confidence(ruleset: &RuleSet, window: &RuleWindow) -> RuleOutcome {
    let mut fired = 0u32;
    let mut evaluated = 0u32;
    for rule in &ruleset.rules {
        match rule.kind {
            RuleKind::Instantaneous => {
                for frame in window.stream(rule.modality) {
                    if let Some(hit) = evaluate_rule_at(rule, frame) {
                        evaluated += 1;
                        fired += u32::from(hit);
                    }
                }
            }
            RuleKind::Displacement | RuleKind::Oscillation => {
                if let Some(hit) = evaluate_rule(rule, window) {
                    evaluated += 1;
                    fired += u32::from(hit);
                }
            }
        }
    }
    RuleOutcome {
        window_end_t_ms: window.end_t_ms(),
        fired,
        evaluated,
        confidence: if evaluated == 0 {
            0.0
        } else {
            f64::from(fired) / f64::from(evaluated)
        },
        no_data: evaluated == 0,
    }
}

/// One confidence slot per emotion, in class-code order: each configured
/// emotion's ruleset confidence over the window, 0 for emotions with no
/// rules. Appended to geometric rows by the rule-augmented classifier.
pub fn rule_feature_vector(
    rulesets_by_emotion: &BTreeMap<EmotionClass, RuleSet>,
    window: &RuleWindow,
) -> [f64; CLASS_COUNT] {
    let mut out = [0.0; CLASS_COUNT];
    for (emotion, ruleset) in rulesets_by_emotion {
        if !ruleset.is_empty() {
            out[emotion.code()] = rule_confidence(ruleset, window).confidence;
        }
    }
    out
}

/// Streaming evaluator for one modality's rules: maintains the trailing
/// window, the per-push confidence trace, and its smoothed mean.
#[derive(Debug, Clone)]
pub struct RuleEngine {
    rules: RuleSet,
    modality: Modality,
    window: RuleWindow,
    recent: VecDeque<f64>,
    smoothing: usize,
    last_t_ms: Option<u64>,
}

impl RuleEngine {
    /// Hosts `ruleset`'s rules for `modality`, thresholds scaled to
    /// `frame_width`, with the default window and smoothing spans.
    pub fn new(ruleset: &RuleSet, modality: Modality, frame_width: u32) -> RuleEngine {
        RuleEngine::with_windows(
            ruleset,
            modality,
            frame_width,
            DEFAULT_WINDOW_FRAMES,
            DEFAULT_SMOOTHING_FRAMES,
        )
    }

    pub fn with_windows(
        ruleset: &RuleSet,
        modality: Modality,
        frame_width: u32,
        window_frames: usize,
        smoothing_frames: usize,
    ) -> RuleEngine {
        assert!(smoothing_frames >= 1);
        RuleEngine {
            rules: ruleset.scaled(frame_width).for_modality(modality),
            modality,
            window: RuleWindow::new(window_frames.max(2)),
            recent: VecDeque::new(),
            smoothing: smoothing_frames,
            last_t_ms: None,
        }
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn rule_count(&self) -> usize {
        self.rules.rules.len()
    }

    /// Feed one frame. Frames of other modalities are ignored (None).
    /// Windows with nothing evaluable don't enter the smoothing trace.
    pub fn push_frame(&mut self, frame: &TrackedFrame) -> Option<RuleOutcome> {
        if frame.modality != self.modality {
            return None;
        }
        self.window.push(frame);
        self.last_t_ms = Some(frame.t_ms);
        let outcome = rule_confidence(&self.rules, &self.window);
        if !outcome.no_data {
            self.recent.push_back(outcome.confidence);
            if self.recent.len() > self.smoothing {
                self.recent.pop_front();
            }
        }
        Some(outcome)
    }

    /// Trailing mean of per-push confidences; 0 before any evaluation.
    pub fn smoothed(&self) -> f64 {
        if self.recent.is_empty() {
            return 0.0;
        }
        self.recent.iter().sum::<f64>() / self.recent.len() as f64
    }

    /// Anger vote when the smoothed confidence reaches `threshold`
    /// (inclusive).
    pub fn vote(&self, threshold: f64) -> Option<ModalityOutcome> {
        let t_ms = self.last_t_ms?;
        if self.recent.is_empty() {
            return None;
        }
        let confidence = self.smoothed();
        if confidence < threshold {
            return None;
        }
        Some(ModalityOutcome {
            t_ms,
            modality: self.modality,
            source: OutcomeSource::Rules,
            emotion: EmotionClass::Anger,
            confidence,
        })
    }
}

/// Smoothed ruleset confidence at time `t_ms` of a session: per-frame
/// window confidences over the session's merged visual frames up to and
/// including `t_ms`, averaged over the trailing 10 (fewer at the start).
pub fn smoothed_confidence(ruleset: &RuleSet, session: &Session, t_ms: u64) -> f64 {
    let scaled = ruleset.scaled(session.frame_width);
    let mut window = RuleWindow::new(DEFAULT_WINDOW_FRAMES);
    let mut recent: VecDeque<f64> = VecDeque::new();
    for frame in session.visual_frames() {
        if frame.t_ms > t_ms {
            break;
        }
        window.push(frame);
        let outcome = rule_confidence(&scaled, &window);
        if !outcome.no_data {
            recent.push_back(outcome.confidence);
            if recent.len() > DEFAULT_SMOOTHING_FRAMES {
                recent.pop_front();
            }
        }
    }
    if recent.is_empty() {
        0.0
    } else {
        recent.iter().sum::<f64>() / recent.len() as f64
    }
}

/// Window-local anger vote: smooths per-frame confidences over the
/// window's own frames (oldest first) and emits an Anger outcome when the
/// smoothed value reaches `threshold` (inclusive). The ruleset must name
/// exactly one modality; thresholds are assumed pre-scaled.
pub fn anger_vote(
    ruleset: &RuleSet,
    window: &RuleWindow,
    threshold: f64,
) -> Option<ModalityOutcome> {
    let modalities = ruleset.modalities();
    let [modality] = modalities[..] else {
        debug_assert!(false, "anger_vote needs a single-modality ruleset");
        return None;
    };
    let mut engine = RuleEngine::with_windows(
        ruleset,
        modality,
        DEFAULT_FRAME_WIDTH,
        window.cap,
        DEFAULT_SMOOTHING_FRAMES,
    );
    for frame in window.stream(modality) {
        engine.push_frame(frame);
    }
    engine.vote(threshold)
}

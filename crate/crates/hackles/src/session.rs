//! Session data model and the on-disk session format.
//!
//! A session is one recorded act: per-modality streams of tracked 2D points
//! plus recognized speech events, tagged with a ground-truth emotion label.
//!
//! Coordinates are image-space pixels: origin top-left, y grows downward.
//! "A below B" therefore means `A.y > B.y`, and "moved up by d" means y
//! decreased by d. Depth (`z`) is accepted in input files and dropped; all
//! computations use x and y only.
//!
//! The file format is UTF-8 line-delimited JSON. Line 1 is a header object:
//!
//! ```text
//! {"session_id":"s1","actor_id":"a1","label":"anger","frame_width":640,"frame_height":480,"duration_ms":15000}
//! ```
//!
//! Every following line is either a frame record or a speech record:
//!
//! ```text
//! {"t_ms":0,"modality":"head","points":[{"name":"head_top_center","x":320.0,"y":80.0}, ...]}
//! {"t_ms":1500,"word":"kill","conf":0.9}
//! ```
//!
//! [`serialize_session`] emits the canonical form: compact JSON, fields in
//! the order shown above, points in registry order, events sorted by
//! timestamp (frames before speech at equal times, modalities in declaration
//! order). Parsing the canonical form and re-serializing is byte-identical.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod registry;

use registry::{point_count, point_index, point_names};

/// The seven emotion classes. Integer codes are stable and index metric
/// tables and vote arrays throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionClass {
    Anger = 0,
    Happy = 1,
    Surprise = 2,
    Disgust = 3,
    Fear = 4,
    Sad = 5,
    Neutral = 6,
}

/// Number of emotion classes.
pub const CLASS_COUNT: usize = 7;

impl EmotionClass {
    pub const ALL: [EmotionClass; CLASS_COUNT] = [
        EmotionClass::Anger,
        EmotionClass::Happy,
        EmotionClass::Surprise,
        EmotionClass::Disgust,
        EmotionClass::Fear,
        EmotionClass::Sad,
        EmotionClass::Neutral,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<EmotionClass> {
        EmotionClass::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionClass::Anger => "anger",
            EmotionClass::Happy => "happy",
            EmotionClass::Surprise => "surprise",
            EmotionClass::Disgust => "disgust",
            EmotionClass::Fear => "fear",
            EmotionClass::Sad => "sad",
            EmotionClass::Neutral => "neutral",
        }
    }

    pub fn from_name(name: &str) -> Option<EmotionClass> {
        EmotionClass::ALL.iter().copied().find(|c| c.name() == name)
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One input channel. The four visual modalities carry tracked points;
/// speech carries word events only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Hand = 0,
    Head = 1,
    Face = 2,
    Body = 3,
    Speech = 4,
}

impl Modality {
    /// The four point-tracking modalities, in canonical order.
    pub const VISUAL: [Modality; 4] = [
        Modality::Hand,
        Modality::Head,
        Modality::Face,
        Modality::Body,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Hand => "hand",
            Modality::Head => "head",
            Modality::Face => "face",
            Modality::Body => "body",
            Modality::Speech => "speech",
        }
    }

    pub fn from_name(name: &str) -> Option<Modality> {
        match name {
            "hand" => Some(Modality::Hand),
            "head" => Some(Modality::Head),
            "face" => Some(Modality::Face),
            "body" => Some(Modality::Body),
            "speech" => Some(Modality::Speech),
            _ => None,
        }
    }

    pub fn is_visual(self) -> bool {
        self != Modality::Speech
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A 2D tracked point in image space (pixels, y-down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Point2 {
        Point2 { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// One timestamped snapshot of a visual modality's tracked points.
///
/// Points are stored in registry order regardless of input order, so
/// `point_at(i)` matches `registry::point_names(modality)[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedFrame {
    pub t_ms: u64,
    pub modality: Modality,
    points: Vec<Point2>,
}

impl TrackedFrame {
    /// Build a frame from named points, validating against the modality's
    /// registry and normalizing to registry order.
    pub fn new(
        t_ms: u64,
        modality: Modality,
        named: &[(&str, Point2)],
    ) -> Result<TrackedFrame, SessionError> {
        if !modality.is_visual() {
            return Err(SessionError::NotVisual);
        }
        let n = point_count(modality);
        if named.len() != n {
            return Err(SessionError::WrongPointCount {
                modality,
                expected: n,
                got: named.len(),
            });
        }
        let mut points = vec![None; n];
        for (name, p) in named {
            let idx = point_index(modality, name).ok_or_else(|| SessionError::UnknownPoint {
                modality,
                name: name.to_string(),
            })?;
            if points[idx].is_some() {
                return Err(SessionError::DuplicatePoint {
                    modality,
                    name: name.to_string(),
                });
            }
            if !p.is_finite() {
                return Err(SessionError::NonFinitePoint {
                    modality,
                    name: name.to_string(),
                });
            }
            points[idx] = Some(*p);
        }
        // length matched and no duplicates, so every slot is filled
        let points = points.into_iter().map(|p| p.unwrap()).collect();
        Ok(TrackedFrame {
            t_ms,
            modality,
            points,
        })
    }

    /// Build a frame from positions already in registry order.
    pub fn from_ordered(
        t_ms: u64,
        modality: Modality,
        points: Vec<Point2>,
    ) -> Result<TrackedFrame, SessionError> {
        if !modality.is_visual() {
            return Err(SessionError::NotVisual);
        }
        let n = point_count(modality);
        if points.len() != n {
            return Err(SessionError::WrongPointCount {
                modality,
                expected: n,
                got: points.len(),
            });
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(SessionError::NonFinitePoint {
                modality,
                name: point_names(modality)[i].to_string(),
            });
        }
        Ok(TrackedFrame {
            t_ms,
            modality,
            points,
        })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn point_at(&self, idx: usize) -> Point2 {
        self.points[idx]
    }

    pub fn point(&self, name: &str) -> Option<Point2> {
        point_index(self.modality, name).map(|i| self.points[i])
    }

    /// Points paired with their registry names, in registry order.
    pub fn named_points(&self) -> impl Iterator<Item = (&'static str, Point2)> + '_ {
        point_names(self.modality)
            .iter()
            .zip(self.points.iter())
            .map(|(n, p)| (*n, *p))
    }
}

/// One recognized word with the recognizer's confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechEvent {
    pub t_ms: u64,
    pub word: String,
    pub asr_confidence: f64,
}

impl SpeechEvent {
    pub fn new(t_ms: u64, word: &str, asr_confidence: f64) -> Result<SpeechEvent, SessionError> {
        if word.trim().is_empty() {
            return Err(SessionError::EmptyWord);
        }
        if !(0.0..=1.0).contains(&asr_confidence) {
            return Err(SessionError::ConfidenceOutOfRange {
                value: asr_confidence,
            });
        }
        Ok(SpeechEvent {
            t_ms,
            word: word.to_string(),
            asr_confidence,
        })
    }
}

/// Generated sessions must stay within this duration window (milliseconds).
/// For ingested data the window is advisory and produces a validation
/// warning only.
pub const DURATION_RANGE_MS: (u64, u64) = (15_000, 60_000);

/// Default frame dimensions. Rule pixel thresholds are defined at this
/// width and scaled linearly for other widths.
pub const DEFAULT_FRAME_WIDTH: u32 = 640;
pub const DEFAULT_FRAME_HEIGHT: u32 = 480;

/// One recorded act: labeled per-modality frame streams plus speech events.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub actor_id: String,
    pub label: EmotionClass,
    pub duration_ms: u64,
    pub frame_width: u32,
    pub frame_height: u32,
    streams: [Vec<TrackedFrame>; 4],
    speech: Vec<SpeechEvent>,
}

impl Session {
    pub fn new(
        session_id: &str,
        actor_id: &str,
        label: EmotionClass,
        duration_ms: u64,
        frame_width: u32,
        frame_height: u32,
    ) -> Session {
        Session {
            session_id: session_id.to_string(),
            actor_id: actor_id.to_string(),
            label,
            duration_ms,
            frame_width,
            frame_height,
            streams: [Vec::new(), Vec::new(), Vec::new(), Vec::new()],
            speech: Vec::new(),
        }
    }

    pub fn stream(&self, modality: Modality) -> &[TrackedFrame] {
        match modality {
            Modality::Speech => &[],
            m => &self.streams[m as usize],
        }
    }

    pub fn speech(&self) -> &[SpeechEvent] {
        &self.speech
    }

    /// Append a frame; timestamps must strictly increase within the stream.
    pub fn push_frame(&mut self, frame: TrackedFrame) -> Result<(), SessionError> {
        let stream = &mut self.streams[frame.modality as usize];
        if let Some(last) = stream.last() {
            if frame.t_ms <= last.t_ms {
                return Err(SessionError::NonMonotonicTimestamp {
                    modality: frame.modality,
                    t_ms: frame.t_ms,
                    prev_ms: last.t_ms,
                });
            }
        }
        stream.push(frame);
        Ok(())
    }

    /// Append a speech event. Events are kept sorted by timestamp (stable).
    pub fn push_speech(&mut self, event: SpeechEvent) {
        let pos = self.speech.partition_point(|e| e.t_ms <= event.t_ms);
        self.speech.insert(pos, event);
    }

    /// All visual frames merged across modalities, ordered by timestamp and
    /// modality. This is the replay order used by the pipeline.
    pub fn visual_frames(&self) -> Vec<&TrackedFrame> {
        let mut frames: Vec<&TrackedFrame> = self.streams.iter().flatten().collect();
        frames.sort_by_key(|f| (f.t_ms, f.modality as usize));
        frames
    }

    pub fn total_frame_count(&self) -> usize {
        self.streams.iter().map(|s| s.len()).sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("speech frames carry no tracked points")]
    NotVisual,
    #[error("wrong point count: {modality} expects {expected}, got {got}")]
    WrongPointCount {
        modality: Modality,
        expected: usize,
        got: usize,
    },
    #[error("unknown point name `{name}` for {modality}")]
    UnknownPoint { modality: Modality, name: String },
    #[error("duplicate point `{name}` in {modality} frame")]
    DuplicatePoint { modality: Modality, name: String },
    #[error("non-finite coordinates for `{name}` in {modality} frame")]
    NonFinitePoint { modality: Modality, name: String },
    #[error("non-monotonic timestamp {t_ms}ms after {prev_ms}ms in {modality} stream")]
    NonMonotonicTimestamp {
        modality: Modality,
        t_ms: u64,
        prev_ms: u64,
    },
    #[error("speech word must be non-empty")]
    EmptyWord,
    #[error("confidence {value} outside [0, 1]")]
    ConfidenceOutOfRange { value: f64 },
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

/// One invariant violation found by [`validate_session`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub severity: Severity,
    /// What was violated, e.g. `head[3].left_ear` or `duration`.
    pub target: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}: {}", self.target, self.message)
    }
}

fn violation(severity: Severity, target: String, message: String) -> Violation {
    Violation {
        severity,
        target,
        message,
    }
}

/// Check every session invariant. Total: never panics, returns an empty
/// list iff the session is fully well-formed. Duration outside the
/// generated-data window is a warning; everything else is an error.
pub fn validate_session(session: &Session) -> Vec<Violation> {
    let mut out = Vec::new();
    let (lo, hi) = DURATION_RANGE_MS;
    if session.duration_ms < lo || session.duration_ms > hi {
        out.push(violation(
            Severity::Warning,
            "duration".into(),
            format!(
                "duration {}ms outside {}-{}ms",
                session.duration_ms,
                lo,
                hi
            ),
        ));
    }
    if session.frame_width == 0 || session.frame_height == 0 {
        out.push(violation(
            Severity::Error,
            "frame_size".into(),
            format!(
                "frame size {}x{} must be positive",
                session.frame_width, session.frame_height
            ),
        ));
    }
    let w = f64::from(session.frame_width);
    let h = f64::from(session.frame_height);
    for modality in Modality::VISUAL {
        let mut prev_t: Option<u64> = None;
        for (i, frame) in session.stream(modality).iter().enumerate() {
            if frame.modality != modality {
                out.push(violation(
                    Severity::Error,
                    format!("{modality}[{i}]"),
                    format!("frame tagged {} in {} stream", frame.modality, modality),
                ));
            }
            if let Some(p) = prev_t {
                if frame.t_ms <= p {
                    out.push(violation(
                        Severity::Error,
                        format!("{modality}[{i}]"),
                        format!("timestamp {}ms not after {}ms", frame.t_ms, p),
                    ));
                }
            }
            prev_t = Some(frame.t_ms);
            for (name, p) in frame.named_points() {
                if !p.is_finite() {
                    out.push(violation(
                        Severity::Error,
                        format!("{modality}[{i}].{name}"),
                        "non-finite coordinates".into(),
                    ));
                } else if p.x < 0.0 || p.x > w || p.y < 0.0 || p.y > h {
                    out.push(violation(
                        Severity::Error,
                        format!("{modality}[{i}].{name}"),
                        format!("({}, {}) outside frame {}x{}", p.x, p.y, w, h),
                    ));
                }
            }
        }
    }
    let mut prev_t: Option<u64> = None;
    for (i, e) in session.speech.iter().enumerate() {
        if e.word.trim().is_empty() {
            out.push(violation(
                Severity::Error,
                format!("speech[{i}]"),
                "empty word".into(),
            ));
        }
        if !(0.0..=1.0).contains(&e.asr_confidence) || e.asr_confidence.is_nan() {
            out.push(violation(
                Severity::Error,
                format!("speech[{i}]"),
                format!("confidence {} outside [0, 1]", e.asr_confidence),
            ));
        }
        if let Some(p) = prev_t {
            if e.t_ms < p {
                out.push(violation(
                    Severity::Warning,
                    format!("speech[{i}]"),
                    format!("timestamp {}ms before {}ms", e.t_ms, p),
                ));
            }
        }
        prev_t = Some(e.t_ms);
    }
    out
}

/// True iff validation found no error-severity violations.
pub fn is_acceptable(session: &Session) -> bool {
    validate_session(session)
        .iter()
        .all(|v| v.severity != Severity::Error)
}

// ---------------------------------------------------------------------------
// Parsing and serialization
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty input: missing header line")]
    MissingHeader,
    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: {source}")]
    BadRecord {
        line: usize,
        #[source]
        source: SessionError,
    },
}

impl ParseError {
    fn malformed(line: usize, message: impl Into<String>) -> ParseError {
        ParseError::MalformedLine {
            line,
            message: message.into(),
        }
    }
}

/// A parsed session plus non-fatal warnings (unknown fields and the like).
#[derive(Debug)]
pub struct ParsedSession {
    pub session: Session,
    pub warnings: Vec<String>,
}

// Wire records: field order here defines the canonical byte layout.
#[derive(Serialize)]
struct HeaderRecord<'a> {
    session_id: &'a str,
    actor_id: &'a str,
    label: &'a str,
    frame_width: u32,
    frame_height: u32,
    duration_ms: u64,
}

#[derive(Serialize)]
struct PointRecord<'a> {
    name: &'a str,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct FrameRecord<'a> {
    t_ms: u64,
    modality: &'a str,
    points: Vec<PointRecord<'a>>,
}

#[derive(Serialize)]
struct SpeechRecord<'a> {
    t_ms: u64,
    word: &'a str,
    conf: f64,
}

type JsonMap = serde_json::Map<String, serde_json::Value>;

fn take_object(line: usize, text: &str) -> Result<JsonMap, ParseError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| ParseError::malformed(line, format!("invalid JSON: {e}")))?;
    match value {
        serde_json::Value::Object(map) => Ok(map),
        _ => Err(ParseError::malformed(line, "expected a JSON object")),
    }
}

fn warn_unknown(map: &JsonMap, known: &[&str], line: usize, warnings: &mut Vec<String>) {
    for key in map.keys() {
        if !known.contains(&key.as_str()) {
            warnings.push(format!("line {line}: ignoring unknown field `{key}`"));
        }
    }
}

fn get_str<'a>(map: &'a JsonMap, key: &str, line: usize) -> Result<&'a str, ParseError> {
    map.get(key)
        .and_then(|v| v.as_str())
        .ok_or_else(|| ParseError::malformed(line, format!("missing or non-string `{key}`")))
}

fn get_u64(map: &JsonMap, key: &str, line: usize) -> Result<u64, ParseError> {
    map.get(key)
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ParseError::malformed(line, format!("missing or invalid `{key}`")))
}

fn get_f64(map: &JsonMap, key: &str, line: usize) -> Result<f64, ParseError> {
    let v = map
        .get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| ParseError::malformed(line, format!("missing or non-numeric `{key}`")))?;
    if !v.is_finite() {
        return Err(ParseError::malformed(line, format!("non-finite `{key}`")));
    }
    Ok(v)
}

/// Parse a session from its line-delimited text form.
///
/// Structural problems (bad JSON, missing fields, unknown points, wrong
/// point counts, non-monotonic timestamps) are errors with line numbers;
/// unknown fields are ignored with a warning.
pub fn parse_session(input: &str) -> Result<ParsedSession, ParseError> {
    let mut warnings = Vec::new();
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (header_line, header_text) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or(ParseError::MissingHeader)?;
    let header = take_object(header_line, header_text)?;
    warn_unknown(
        &header,
        &[
            "session_id",
            "actor_id",
            "label",
            "frame_width",
            "frame_height",
            "duration_ms",
        ],
        header_line,
        &mut warnings,
    );
    let label_value = header
        .get("label")
        .ok_or_else(|| ParseError::malformed(header_line, "missing `label`"))?;
    let label = match label_value {
        serde_json::Value::String(s) => EmotionClass::from_name(s),
        serde_json::Value::Number(n) => n
            .as_u64()
            .and_then(|c| usize::try_from(c).ok())
            .and_then(EmotionClass::from_code),
        _ => None,
    }
    .ok_or_else(|| {
        ParseError::malformed(header_line, format!("unknown label {label_value}"))
    })?;
    let frame_width = get_u64(&header, "frame_width", header_line)? as u32;
    let frame_height = get_u64(&header, "frame_height", header_line)? as u32;
    if frame_width == 0 || frame_height == 0 {
        return Err(ParseError::malformed(header_line, "frame size must be positive"));
    }
    let mut session = Session::new(
        get_str(&header, "session_id", header_line)?,
        get_str(&header, "actor_id", header_line)?,
        label,
        get_u64(&header, "duration_ms", header_line)?,
        frame_width,
        frame_height,
    );

    for (line, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        let map = take_object(line, text)?;
        if map.contains_key("modality") {
            warn_unknown(&map, &["t_ms", "modality", "points"], line, &mut warnings);
            let t_ms = get_u64(&map, "t_ms", line)?;
            let modality_name = get_str(&map, "modality", line)?;
            let modality = Modality::from_name(modality_name).ok_or_else(|| {
                ParseError::malformed(line, format!("unknown modality `{modality_name}`"))
            })?;
            let points = map
                .get("points")
                .and_then(|v| v.as_array())
                .ok_or_else(|| ParseError::malformed(line, "missing `points` array"))?;
            let mut named: Vec<(String, Point2)> = Vec::with_capacity(points.len());
            for p in points {
                let obj = p
                    .as_object()
                    .ok_or_else(|| ParseError::malformed(line, "point must be an object"))?;
                warn_unknown(obj, &["name", "x", "y", "z"], line, &mut warnings);
                let name = get_str(obj, "name", line)?.to_string();
                let x = get_f64(obj, "x", line)?;
                let y = get_f64(obj, "y", line)?;
                named.push((name, Point2::new(x, y)));
            }
            let borrowed: Vec<(&str, Point2)> =
                named.iter().map(|(n, p)| (n.as_str(), *p)).collect();
            let frame = TrackedFrame::new(t_ms, modality, &borrowed)
                .map_err(|source| ParseError::BadRecord { line, source })?;
            session
                .push_frame(frame)
                .map_err(|source| ParseError::BadRecord { line, source })?;
        } else if map.contains_key("word") {
            warn_unknown(&map, &["t_ms", "word", "conf"], line, &mut warnings);
            let event = SpeechEvent::new(
                get_u64(&map, "t_ms", line)?,
                get_str(&map, "word", line)?,
                get_f64(&map, "conf", line)?,
            )
            .map_err(|source| ParseError::BadRecord { line, source })?;
            session.push_speech(event);
        } else {
            return Err(ParseError::malformed(
                line,
                "record is neither a frame (`modality`) nor a speech event (`word`)",
            ));
        }
    }
    Ok(ParsedSession { session, warnings })
}

pub fn parse_session_reader<R: Read>(mut reader: R) -> Result<ParsedSession, ParseError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_session(&text)
}

pub fn parse_session_file(path: &Path) -> Result<ParsedSession, ParseError> {
    parse_session_reader(std::fs::File::open(path)?)
}

/// Serialize a session to its canonical text form.
pub fn serialize_session(session: &Session) -> String {
    let mut out = String::new();
    let header = HeaderRecord {
        session_id: &session.session_id,
        actor_id: &session.actor_id,
        label: session.label.name(),
        frame_width: session.frame_width,
        frame_height: session.frame_height,
        duration_ms: session.duration_ms,
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');

    // (timestamp, frames-before-speech, modality rank, arrival index)
    let mut events: Vec<((u64, u8, u8, usize), String)> = Vec::new();
    for modality in Modality::VISUAL {
        for frame in session.stream(modality) {
            let record = FrameRecord {
                t_ms: frame.t_ms,
                modality: modality.name(),
                points: frame
                    .named_points()
                    .map(|(name, p)| PointRecord {
                        name,
                        x: p.x,
                        y: p.y,
                    })
                    .collect(),
            };
            events.push((
                (frame.t_ms, 0, modality as u8, 0),
                serde_json::to_string(&record).expect("frame serializes"),
            ));
        }
    }
    for (i, e) in session.speech.iter().enumerate() {
        let record = SpeechRecord {
            t_ms: e.t_ms,
            word: &e.word,
            conf: e.asr_confidence,
        };
        events.push((
            (e.t_ms, 1, 0, i),
            serde_json::to_string(&record).expect("speech serializes"),
        ));
    }
    events.sort_by(|a, b| a.0.cmp(&b.0));
    for (_, line) in events {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Group sessions by label, preserving order. Shared by the split and
/// cross-validation helpers.
pub fn by_label<'a, I>(sessions: I) -> BTreeMap<EmotionClass, Vec<usize>>
where
    I: IntoIterator<Item = &'a EmotionClass>,
{
    let mut map: BTreeMap<EmotionClass, Vec<usize>> = BTreeMap::new();
    for (i, label) in sessions.into_iter().enumerate() {
        map.entry(*label).or_default().push(i);
    }
    map
}

//! File-based pipeline behind the command-line interface.
//!
//! Five operations over a run directory: `gen` writes a synthetic labeled
//! dataset, `train` fits per-modality classifiers on a stratified split,
//! `run` replays one session through the full detector stack, `eval`
//! scores held-out sessions for every trained pathway, and `report`
//! re-renders the stored artifacts. Every operation is deterministic given
//! (config, seed, input files) and every output directory carries a
//! manifest of content hashes, so re-runs are byte-comparable.
//!
//! Two training pathways coexist: `geometric` rows are the combined
//! location++temporal vectors; `rule-augmented` rows append the per-class
//! rule confidences as seven extra columns. Rows are min-max scaled by
//! default so pixel coordinates, angles, speeds and rule confidences share
//! one numeric range under the stock kernel widths.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{metrics, render_text, MetricsReport};
use crate::features::{combined_features, ModalityConfig};
use crate::fusion::{
    FrameDecision, FusionConfig, FusionState, ModalityOutcome, OutcomeSource,
};
use crate::lexicon::Lexicon;
use crate::rules::{
    rule_feature_vector, RuleEngine, RuleSet, RuleWindow, DEFAULT_SMOOTHING_FRAMES,
    DEFAULT_VOTE_THRESHOLD, DEFAULT_WINDOW_FRAMES,
};
use crate::session::{
    parse_session_file, serialize_session, EmotionClass, Modality, Session, CLASS_COUNT,
};
use crate::svm::{kfold_cv, train_multiclass, MulticlassModel, TrainConfig};
use crate::synth::{
    gen_dataset, stock_scripts, DatasetConfig, GestureScript, DEFAULT_ACTORS,
    DEFAULT_ACTS_PER_CLASS, DEFAULT_FRAME_RATE,
};

/// Operation failure, bucketed for stable exit codes: usage 1, data 2,
/// runtime 3.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("runtime: {0}")]
    Runtime(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Data(_) => 2,
            PipelineError::Runtime(_) => 3,
        }
    }
}

fn usage(m: impl fmt::Display) -> PipelineError {
    PipelineError::Usage(m.to_string())
}

fn data(m: impl fmt::Display) -> PipelineError {
    PipelineError::Data(m.to_string())
}

fn runtime(m: impl fmt::Display) -> PipelineError {
    PipelineError::Runtime(m.to_string())
}

/// Classifier input layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pathway {
    /// Combined location++temporal features only.
    Geometric,
    /// Geometric plus the seven per-class rule confidences.
    RuleAugmented,
}

impl Pathway {
    pub const ALL: [Pathway; 2] = [Pathway::Geometric, Pathway::RuleAugmented];

    pub fn dir_name(self) -> &'static str {
        match self {
            Pathway::Geometric => "geometric",
            Pathway::RuleAugmented => "rule-augmented",
        }
    }

    pub fn from_name(name: &str) -> Option<Pathway> {
        match name {
            "geometric" => Some(Pathway::Geometric),
            "rule-augmented" => Some(Pathway::RuleAugmented),
            _ => None,
        }
    }

    fn uses_rule_features(self) -> bool {
        self == Pathway::RuleAugmented
    }
}

impl fmt::Display for Pathway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

/// Everything the pipeline can be told, with the stock constants as
/// defaults. A config file carries the same fields as JSON; command-line
/// flags override field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    // generation
    pub actors: usize,
    pub acts_per_class: usize,
    pub frame_rate: f64,
    // training
    pub rows_per_session: usize,
    pub c: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub folds: usize,
    pub train_fraction: f64,
    /// Min-max scale rows before training. On by default: raw pixel
    /// coordinates sit far outside the regime the stock kernel widths
    /// were picked for.
    pub scale: bool,
    pub use_rules_as_features: bool,
    /// Kernel width overrides by modality name; unset modalities use the
    /// stock per-modality widths.
    pub gammas: BTreeMap<String, f64>,
    // detection
    pub vote_threshold: f64,
    pub staleness_ms: u64,
    pub session_threshold: f64,
    pub rule_vote_enabled: bool,
    pub collapse_rule_and_svm_votes: bool,
    pub window_frames: usize,
    pub smoothing_frames: usize,
    // optional asset overrides; the built-in ruleset/lexicon otherwise
    pub ruleset: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            seed: 0,
            actors: DEFAULT_ACTORS,
            acts_per_class: DEFAULT_ACTS_PER_CLASS,
            frame_rate: DEFAULT_FRAME_RATE,
            rows_per_session: 12,
            c: crate::svm::DEFAULT_C,
            tolerance: crate::svm::DEFAULT_TOLERANCE,
            max_sweeps: crate::svm::DEFAULT_MAX_SWEEPS,
            folds: crate::svm::DEFAULT_FOLDS,
            train_fraction: crate::svm::DEFAULT_TRAIN_FRACTION,
            scale: true,
            use_rules_as_features: false,
            gammas: BTreeMap::new(),
            vote_threshold: DEFAULT_VOTE_THRESHOLD,
            staleness_ms: 500,
            session_threshold: 0.5,
            rule_vote_enabled: true,
            collapse_rule_and_svm_votes: false,
            window_frames: DEFAULT_WINDOW_FRAMES,
            smoothing_frames: DEFAULT_SMOOTHING_FRAMES,
            ruleset: None,
            lexicon: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(usage(m.to_string()));
        if self.actors == 0 || self.acts_per_class == 0 {
            return bad("actors and acts must be at least 1");
        }
        if !(self.frame_rate > 0.0) || !self.frame_rate.is_finite() {
            return bad("frame rate must be positive");
        }
        if self.rows_per_session == 0 {
            return bad("rows per session must be at least 1");
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return bad("C must be positive");
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return bad("tolerance must be positive");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must be in (0, 1)");
        }
        for (name, gamma) in &self.gammas {
            if Modality::from_name(name).is_none() {
                return Err(usage(format!("unknown modality `{name}` in gammas")));
            }
            if !(*gamma > 0.0) || !gamma.is_finite() {
                return Err(usage(format!("gamma for `{name}` must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.vote_threshold) {
            return bad("vote threshold must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.session_threshold) {
            return bad("session threshold must be in [0, 1]");
        }
        if self.window_frames < 2 {
            return bad("window must span at least 2 frames");
        }
        if self.smoothing_frames == 0 {
            return bad("smoothing must span at least 1 frame");
        }
        Ok(())
    }

    fn fusion_config(&self) -> FusionConfig {
        FusionConfig {
            confidence_threshold: self.vote_threshold,
            staleness_ms: self.staleness_ms,
            session_threshold: self.session_threshold,
            collapse_sources: self.collapse_rule_and_svm_votes,
        }
    }

    fn train_config(&self, modality: Modality) -> TrainConfig {
        let gamma = self
            .gammas
            .get(modality.name())
            .copied()
            .unwrap_or_else(|| crate::features::standard_gamma(modality));
        TrainConfig {
            c: self.c,
            gamma,
            tolerance: self.tolerance,
            max_sweeps: self.max_sweeps,
            k: self.folds,
            train_fraction: self.train_fraction,
            seed: self.seed,
            scale: self.scale,
        }
    }

    fn load_ruleset(&self) -> Result<RuleSet, PipelineError> {
        match &self.ruleset {
            None => Ok(RuleSet::stock()),
            Some(path) => RuleSet::load(path)
                .map_err(|e| data(format!("ruleset {}: {e}", path.display()))),
        }
    }

    fn load_lexicon(&self) -> Result<Lexicon, PipelineError> {
        match &self.lexicon {
            None => Ok(Lexicon::stock()),
            Some(path) => Lexicon::load(path)
                .map_err(|e| data(format!("lexicon {}: {e}", path.display()))),
        }
    }

    /// Flat key→value view, echoed into manifests and report headers.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let v = serde_json::to_value(self).expect("config serializes");
        let mut out = BTreeMap::new();
        if let serde_json::Value::Object(map) = v {
            for (k, val) in map {
                let rendered = match val {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Null => "default".to_string(),
                    other => other.to_string(),
                };
                out.insert(k, rendered);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// artifact plumbing

/// Write via a sibling temp file and rename, so readers never observe a
/// partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let err = |e: std::io::Error| runtime(format!("write {}: {e}", path.display()));
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(err)?;
    }
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = std::fs::File::create(&tmp).map_err(err)?;
        f.write_all(contents.as_bytes()).map_err(err)?;
        f.sync_all().map_err(err)?;
    }
    std::fs::rename(&tmp, path).map_err(err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Content inventory of one command's output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub files: Vec<ManifestEntry>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| data(format!("manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| data(format!("manifest {}: {e}", path.display())))
    }
}

fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes =
        std::fs::read(path).map_err(|e| runtime(format!("hash {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Hash `files` (relative to `dir`) and write `dir/manifest.json`.
fn write_manifest(
    dir: &Path,
    command: &str,
    config: BTreeMap<String, String>,
    files: &[String],
    warnings: Vec<String>,
) -> Result<Manifest, PipelineError> {
    let mut entries = Vec::with_capacity(files.len());
    for rel in files {
        let full = dir.join(rel);
        let meta = std::fs::metadata(&full)
            .map_err(|e| runtime(format!("stat {}: {e}", full.display())))?;
        entries.push(ManifestEntry {
            path: rel.clone(),
            bytes: meta.len(),
            sha256: sha256_file(&full)?,
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        command: command.to_string(),
        config,
        files: entries,
        warnings,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&dir.join("manifest.json"), &text)?;
    Ok(manifest)
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// gen

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSummary {
    pub sessions: usize,
    pub session_dir: PathBuf,
    pub warnings: Vec<String>,
}

fn load_script_dir(dir: &Path) -> Result<Vec<GestureScript>, PipelineError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| data(format!("scripts {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(data(format!("no .json scripts in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| GestureScript::load(p).map_err(|e| data(format!("{}: {e}", p.display()))))
        .collect()
}

/// Generate the dataset into `out/sessions/` and write `out/manifest.json`.
pub fn cmd_gen(
    cfg: &RunConfig,
    scripts_dir: Option<&Path>,
    out: &Path,
) -> Result<GenSummary, PipelineError> {
    cfg.validate()?;
    let scripts = match scripts_dir {
        Some(dir) => load_script_dir(dir)?,
        None => stock_scripts(),
    };
    let dataset_cfg = DatasetConfig {
        actors: cfg.actors,
        acts_per_class: cfg.acts_per_class,
        seed: cfg.seed,
        frame_rate: cfg.frame_rate,
    };
    let (sessions, warnings) =
        gen_dataset(&scripts, &dataset_cfg).map_err(|e| data(e.to_string()))?;
    let session_dir = out.join("sessions");
    let mut files = Vec::with_capacity(sessions.len());
    for session in &sessions {
        let rel = format!("sessions/{}.jsonl", session.session_id);
        write_atomic(&out.join(&rel), &serialize_session(session))?;
        files.push(rel);
    }
    write_manifest(out, "gen", cfg.echo(), &files, warnings.clone())?;
    Ok(GenSummary {
        sessions: sessions.len(),
        session_dir,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// shared loading and feature assembly

/// All sessions of a directory in filename order.
pub fn load_sessions(dir: &Path) -> Result<Vec<Session>, PipelineError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| data(format!("data {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(data(format!("no .jsonl sessions in {}", dir.display())));
    }
    let mut sessions = Vec::with_capacity(paths.len());
    for path in paths {
        let parsed =
            parse_session_file(&path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        for w in parsed.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        sessions.push(parsed.session);
    }
    Ok(sessions)
}

/// Per-class rule sets of one modality, thresholds scaled, keyed for the
/// rule-feature vector.
fn rule_features_for(
    ruleset: &RuleSet,
    modality: Modality,
    frame_width: u32,
) -> BTreeMap<EmotionClass, RuleSet> {
    ruleset.scaled(frame_width).for_modality(modality).by_emotion()
}

/// Classifier rows of one session stream: one per consecutive frame pair,
/// rule confidences appended when `pathway` calls for them.
fn session_rows(
    cfg: &RunConfig,
    ruleset: &RuleSet,
    session: &Session,
    modality: Modality,
    pathway: Pathway,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    let mconfig = ModalityConfig::standard(modality);
    let stream = session.stream(modality);
    let by_emotion = pathway
        .uses_rule_features()
        .then(|| rule_features_for(ruleset, modality, session.frame_width));
    let mut window = RuleWindow::new(cfg.window_frames.max(2));
    let mut rows = Vec::new();
    for (i, frame) in stream.iter().enumerate() {
        window.push(frame);
        if i == 0 {
            continue;
        }
        let mut row = combined_features(&mconfig, &stream[i - 1], frame)
            .map_err(|e| data(format!("{}: {e}", session.session_id)))?;
        if let Some(by_emotion) = &by_emotion {
            row.extend(rule_feature_vector(by_emotion, &window));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// At most `take` evenly spaced elements.
fn subsample<T>(items: Vec<T>, take: usize) -> Vec<T> {
    let n = items.len();
    if n <= take {
        return items;
    }
    let keep: Vec<usize> = (0..take).map(|j| j * n / take).collect();
    items
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.binary_search(i).is_ok())
        .map(|(_, item)| item)
        .collect()
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityCv {
    pub modality: Modality,
    pub rows: usize,
    pub dim: usize,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayReport {
    pub pathway: Pathway,
    pub train_sessions: usize,
    pub modalities: Vec<ModalityCv>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub split: SplitManifest,
    pub pathways: Vec<PathwayReport>,
}

/// Train one pathway's four models on `train_sessions`, cross-validate,
/// and write everything under `dir`.
fn train_pathway(
    cfg: &RunConfig,
    ruleset: &RuleSet,
    train_sessions: &[&Session],
    pathway: Pathway,
    dir: &Path,
) -> Result<PathwayReport, PipelineError> {
    let mut files = Vec::new();
    let mut modalities = Vec::new();
    for modality in Modality::VISUAL {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<EmotionClass> = Vec::new();
        for session in train_sessions {
            let session_rows = session_rows(cfg, ruleset, session, modality, pathway)?;
            let take = subsample(session_rows, cfg.rows_per_session);
            labels.extend(std::iter::repeat(session.label).take(take.len()));
            rows.extend(take);
        }
        if rows.is_empty() {
            return Err(data(format!("no {modality} rows in the training split")));
        }
        let train_cfg = cfg.train_config(modality);
        let cv = kfold_cv(&rows, &labels, &train_cfg)
            .map_err(|e| data(format!("{modality} cross-validation: {e}")))?;
        let (model, _) = train_multiclass(&rows, &labels, &train_cfg)
            .map_err(|e| runtime(format!("{modality} training: {e}")))?;
        let rel = format!("{}.model.json", modality);
        write_atomic(&dir.join(&rel), &model.to_json())?;
        files.push(rel);
        modalities.push(ModalityCv {
            modality,
            rows: rows.len(),
            dim: model.dim,
            mean_accuracy: cv.mean_accuracy,
            fold_accuracies: cv.folds.iter().map(|f| f.accuracy).collect(),
            warnings: cv.warnings,
        });
    }
    let report = PathwayReport {
        pathway,
        train_sessions: train_sessions.len(),
        modalities,
    };
    write_atomic(&dir.join("cv_report.json"), &pretty_json(&report))?;
    files.push("cv_report.json".to_string());
    write_manifest(dir, "train", cfg.echo(), &files, Vec::new())?;
    Ok(report)
}

/// Split the dataset, train the requested pathways, and write models, CV
/// reports and the split manifest under `out/models/`.
pub fn cmd_train(
    cfg: &RunConfig,
    data_dir: &Path,
    pathways: &[Pathway],
    out: &Path,
) -> Result<TrainSummary, PipelineError> {
    cfg.validate()?;
    if pathways.is_empty() {
        return Err(usage("no pathway selected".to_string()));
    }
    let sessions = load_sessions(data_dir)?;
    let ruleset = cfg.load_ruleset()?;
    let (train_idx, test_idx) =
        crate::eval::split_sessions(&sessions, cfg.train_fraction, cfg.seed)
            .map_err(|e| data(format!("split: {e}")))?;
    let split = SplitManifest {
        seed: cfg.seed,
        train_fraction: cfg.train_fraction,
        train: train_idx
            .iter()
            .map(|i| sessions[*i].session_id.clone())
            .collect(),
        test: test_idx
            .iter()
            .map(|i| sessions[*i].session_id.clone())
            .collect(),
    };
    let models_dir = out.join("models");
    write_atomic(&models_dir.join("split.json"), &pretty_json(&split))?;
    let train_sessions: Vec<&Session> = train_idx.iter().map(|i| &sessions[*i]).collect();
    let mut reports = Vec::new();
    for pathway in pathways {
        let dir = models_dir.join(pathway.dir_name());
        reports.push(train_pathway(cfg, &ruleset, &train_sessions, *pathway, &dir)?);
    }
    Ok(TrainSummary {
        split,
        pathways: reports,
    })
}

/// One line per modality, stable formatting.
pub fn render_cv_text(report: &PathwayReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "pathway {} ({} training sessions)\n",
        report.pathway, report.train_sessions
    ));
    for m in &report.modalities {
        out.push_str(&format!(
            "  {:<6} rows {:>5}  dim {:>4}  cv mean accuracy {:.3} over {} folds\n",
            m.modality.name(),
            m.rows,
            m.dim,
            m.mean_accuracy,
            m.fold_accuracies.len()
        ));
        for w in &m.warnings {
            out.push_str(&format!("  {:<6} warning: {w}\n", ""));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// run (replay one session through the detector stack)

/// Loaded per-modality classifiers of one pathway.
pub struct ModelSet {
    pub pathway: Pathway,
    pub models: [MulticlassModel; 4],
}

impl ModelSet {
    /// Load `{modality}.model.json` for all four modalities and infer the
    /// pathway from the stored dimensions.
    pub fn load(dir: &Path) -> Result<ModelSet, PipelineError> {
        let mut models = Vec::with_capacity(4);
        let mut pathway: Option<Pathway> = None;
        for modality in Modality::VISUAL {
            let path = dir.join(format!("{modality}.model.json"));
            let model = MulticlassModel::load(&path)
                .map_err(|e| data(format!("model {}: {e}", path.display())))?;
            let base = ModalityConfig::standard(modality).combined_dim();
            let this = if model.dim == base {
                Pathway::Geometric
            } else if model.dim == base + CLASS_COUNT {
                Pathway::RuleAugmented
            } else {
                return Err(data(format!(
                    "model {}: dimension {} fits neither pathway (expected {} or {})",
                    path.display(),
                    model.dim,
                    base,
                    base + CLASS_COUNT
                )));
            };
            match pathway {
                None => pathway = Some(this),
                Some(p) if p != this => {
                    return Err(data(format!(
                        "model set {} mixes pathways ({} is {this}, earlier models are {p})",
                        dir.display(),
                        modality
                    )));
                }
                Some(_) => {}
            }
            models.push(model);
        }
        Ok(ModelSet {
            pathway: pathway.expect("four models inspected"),
            models: models.try_into().map_err(|_| runtime("model array"))?,
        })
    }

    fn model(&self, modality: Modality) -> &MulticlassModel {
        &self.models[modality as usize]
    }
}

/// Session-level verdict of one replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDecision {
    pub session_id: String,
    pub actor_id: String,
    pub label: EmotionClass,
    /// Plurality vote over the per-run winners.
    pub predicted: EmotionClass,
    /// Anger detection ratio over all fusion runs.
    pub confidence: f64,
    pub anger: bool,
    pub runs: u64,
    pub detections: u64,
}

/// Replay one session in timestamp order through features→classifier,
/// rules→vote and lexicon→vote into decision-level fusion.
pub fn replay_session(
    cfg: &RunConfig,
    models: &ModelSet,
    ruleset: &RuleSet,
    lexicon: &Lexicon,
    session: &Session,
) -> Result<(Vec<FrameDecision>, SessionDecision), PipelineError> {
    let mut engines: Vec<RuleEngine> = Modality::VISUAL
        .iter()
        .map(|m| {
            RuleEngine::with_windows(
                ruleset,
                *m,
                session.frame_width,
                cfg.window_frames,
                cfg.smoothing_frames,
            )
        })
        .collect();
    let rule_features: Vec<Option<BTreeMap<EmotionClass, RuleSet>>> = Modality::VISUAL
        .iter()
        .map(|m| {
            models
                .pathway
                .uses_rule_features()
                .then(|| rule_features_for(ruleset, *m, session.frame_width))
        })
        .collect();
    let mconfigs: Vec<ModalityConfig> = Modality::VISUAL
        .iter()
        .map(|m| ModalityConfig::standard(*m))
        .collect();
    let mut windows: Vec<RuleWindow> = Modality::VISUAL
        .iter()
        .map(|_| RuleWindow::new(cfg.window_frames.max(2)))
        .collect();
    // index of the next frame within each modality stream; events visit
    // every stream in order, so this doubles as the current frame's index
    let mut next_idx = [0usize; 4];

    // one timestamp-ordered event stream; frames precede speech at a tie
    enum Event<'a> {
        Frame(&'a crate::session::TrackedFrame),
        Speech(&'a crate::session::SpeechEvent),
    }
    let mut events: Vec<(u64, u8, u8, Event)> = Vec::new();
    for modality in Modality::VISUAL {
        for frame in session.stream(modality) {
            events.push((frame.t_ms, 0, modality as u8, Event::Frame(frame)));
        }
    }
    for speech in session.speech() {
        events.push((speech.t_ms, 1, 0, Event::Speech(speech)));
    }
    events.sort_by_key(|(t, kind, rank, _)| (*t, *kind, *rank));

    let mut fusion = FusionState::new(cfg.fusion_config());
    let mut decisions: Vec<FrameDecision> = Vec::new();
    let mut winner_votes = [0u64; CLASS_COUNT];
    let submit = |fusion: &mut FusionState,
                      decisions: &mut Vec<FrameDecision>,
                      winner_votes: &mut [u64; CLASS_COUNT],
                      outcome: ModalityOutcome| {
        let decision = fusion.submit(outcome);
        if let Some(winner) = decision.winner() {
            winner_votes[winner.code()] += 1;
        }
        decisions.push(decision);
    };

    for (_, _, _, event) in &events {
        match event {
            Event::Frame(frame) => {
                let mi = frame.modality as usize;
                engines[mi].push_frame(frame);
                windows[mi].push(frame);
                if cfg.rule_vote_enabled {
                    if let Some(outcome) = engines[mi].vote(cfg.vote_threshold) {
                        submit(&mut fusion, &mut decisions, &mut winner_votes, outcome);
                    }
                }
                let stream = session.stream(frame.modality);
                let idx = next_idx[mi];
                next_idx[mi] += 1;
                if idx > 0 {
                    let mut row = combined_features(&mconfigs[mi], &stream[idx - 1], frame)
                        .map_err(|e| data(format!("{}: {e}", session.session_id)))?;
                    if let Some(by_emotion) = &rule_features[mi] {
                        row.extend(rule_feature_vector(by_emotion, &windows[mi]));
                    }
                    let (emotion, confidence) = models
                        .model(frame.modality)
                        .predict(&row)
                        .map_err(|e| data(format!("{}: {modality} classifier: {e}",
                            session.session_id, modality = frame.modality)))?;
                    submit(
                        &mut fusion,
                        &mut decisions,
                        &mut winner_votes,
                        ModalityOutcome {
                            t_ms: frame.t_ms,
                            modality: frame.modality,
                            source: OutcomeSource::Classifier,
                            emotion,
                            confidence,
                        },
                    );
                }
            }
            Event::Speech(speech) => {
                if let Some(outcome) = lexicon.classify_utterance(speech) {
                    submit(&mut fusion, &mut decisions, &mut winner_votes, outcome);
                }
            }
        }
    }

    let summary = fusion
        .summary()
        .map_err(|_| data(format!("{}: no fusion activity", session.session_id)))?;
    let predicted = EmotionClass::ALL
        .into_iter()
        .max_by_key(|c| (winner_votes[c.code()], std::cmp::Reverse(c.code())))
        .expect("seven classes");
    Ok((
        decisions,
        SessionDecision {
            session_id: session.session_id.clone(),
            actor_id: session.actor_id.clone(),
            label: session.label,
            predicted,
            confidence: summary.confidence,
            anger: summary.anger,
            runs: summary.runs,
            detections: summary.detections,
        },
    ))
}

/// Replay one session file and write the decision log and summary under
/// `out/run/<session_id>/`.
pub fn cmd_run(
    cfg: &RunConfig,
    session_path: &Path,
    models_dir: &Path,
    out: &Path,
) -> Result<SessionDecision, PipelineError> {
    cfg.validate()?;
    let parsed = parse_session_file(session_path)
        .map_err(|e| data(format!("{}: {e}", session_path.display())))?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", session_path.display());
    }
    let models = ModelSet::load(models_dir)?;
    let ruleset = cfg.load_ruleset()?;
    let lexicon = cfg.load_lexicon()?;
    let (decisions, decision) =
        replay_session(cfg, &models, &ruleset, &lexicon, &parsed.session)?;
    let dir = out.join("run").join(&decision.session_id);
    let mut log = String::new();
    for d in &decisions {
        log.push_str(&serde_json::to_string(d).expect("decision serializes"));
        log.push('\n');
    }
    write_atomic(&dir.join("decisions.jsonl"), &log)?;
    write_atomic(&dir.join("summary.json"), &pretty_json(&decision))?;
    write_manifest(
        &dir,
        "run",
        cfg.echo(),
        &["decisions.jsonl".to_string(), "summary.json".to_string()],
        Vec::new(),
    )?;
    Ok(decision)
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayEval {
    pub pathway: Pathway,
    pub sessions: Vec<SessionDecision>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub pathways: Vec<PathwayEval>,
}

fn eval_header(cfg: &RunConfig, pathway: Pathway, tested: usize) -> BTreeMap<String, String> {
    let mut header = cfg.echo();
    header.insert("pathway".to_string(), pathway.to_string());
    header.insert("test_sessions".to_string(), tested.to_string());
    header
}

fn per_session_csv(sessions: &[SessionDecision]) -> String {
    let mut out = String::from(
        "session_id,actor_id,label,predicted,confidence,anger,runs,detections\n",
    );
    for s in sessions {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.session_id,
            s.actor_id,
            s.label.name(),
            s.predicted.name(),
            s.confidence,
            s.anger,
            s.runs,
            s.detections
        ));
    }
    out
}

/// Score the held-out split for every pathway trained under
/// `out/models/`, writing reports under `out/eval/<pathway>/`.
pub fn cmd_eval(cfg: &RunConfig, data_dir: &Path, out: &Path) -> Result<EvalSummary, PipelineError> {
    cfg.validate()?;
    let models_root = out.join("models");
    let split = load_split(&models_root.join("split.json"))?;
    if split.test.is_empty() {
        return Err(data("split manifest lists no test sessions".to_string()));
    }
    let sessions = load_sessions(data_dir)?;
    let by_id: BTreeMap<&str, &Session> = sessions
        .iter()
        .map(|s| (s.session_id.as_str(), s))
        .collect();
    let mut test_sessions = Vec::with_capacity(split.test.len());
    for id in &split.test {
        let session = by_id.get(id.as_str()).ok_or_else(|| {
            data(format!("test session `{id}` missing from {}", data_dir.display()))
        })?;
        test_sessions.push(*session);
    }
    let ruleset = cfg.load_ruleset()?;
    let lexicon = cfg.load_lexicon()?;

    let mut pathways = Vec::new();
    for pathway in Pathway::ALL {
        let dir = models_root.join(pathway.dir_name());
        if !dir.join("manifest.json").exists() {
            continue;
        }
        let models = ModelSet::load(&dir)?;
        let mut session_decisions = Vec::with_capacity(test_sessions.len());
        let mut pairs = Vec::with_capacity(test_sessions.len());
        for session in &test_sessions {
            let (_, decision) = replay_session(cfg, &models, &ruleset, &lexicon, session)?;
            pairs.push((session.label, decision.predicted));
            session_decisions.push(decision);
        }
        let report = metrics(&pairs).map_err(|e| data(format!("metrics: {e}")))?;
        let eval_dir = out.join("eval").join(pathway.dir_name());
        let rendered = render_text(
            &format!("held-out evaluation, {pathway} pathway"),
            &eval_header(cfg, pathway, test_sessions.len()),
            &report,
        );
        let eval_payload = PathwayEval {
            pathway,
            sessions: session_decisions,
            report,
        };
        write_atomic(&eval_dir.join("report.json"), &pretty_json(&eval_payload))?;
        write_atomic(&eval_dir.join("report.txt"), &rendered)?;
        write_atomic(
            &eval_dir.join("confusion.csv"),
            &eval_payload.report.confusion.to_csv(),
        )?;
        write_atomic(
            &eval_dir.join("metrics.csv"),
            &crate::eval::metrics_csv(&eval_payload.report),
        )?;
        write_atomic(
            &eval_dir.join("sessions.csv"),
            &per_session_csv(&eval_payload.sessions),
        )?;
        write_manifest(
            &eval_dir,
            "eval",
            eval_header(cfg, pathway, test_sessions.len()),
            &[
                "report.json".to_string(),
                "report.txt".to_string(),
                "confusion.csv".to_string(),
                "metrics.csv".to_string(),
                "sessions.csv".to_string(),
            ],
            Vec::new(),
        )?;
        pathways.push(eval_payload);
    }
    if pathways.is_empty() {
        return Err(data(format!(
            "no trained pathway under {}",
            models_root.display()
        )));
    }
    Ok(EvalSummary { pathways })
}

pub fn load_split(path: &Path) -> Result<SplitManifest, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        data(format!(
            "split manifest {}: {e} (run train first)",
            path.display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| data(format!("split manifest {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// report (re-render stored artifacts)

/// Re-render every stored report under `out` into one text document, from
/// the JSON artifacts rather than the stored text.
pub fn cmd_report(out: &Path) -> Result<String, PipelineError> {
    let mut sections: Vec<String> = Vec::new();

    let models_root = out.join("models");
    if let Ok(split) = load_split(&models_root.join("split.json")) {
        sections.push(format!(
            "split: {} train / {} test sessions (seed {}, fraction {})\n",
            split.train.len(),
            split.test.len(),
            split.seed,
            split.train_fraction
        ));
    }
    for pathway in Pathway::ALL {
        let path = models_root.join(pathway.dir_name()).join("cv_report.json");
        if let Ok(text) = std::fs::read_to_string(&path) {
            let report: PathwayReport = serde_json::from_str(&text)
                .map_err(|e| data(format!("{}: {e}", path.display())))?;
            sections.push(render_cv_text(&report));
        }
    }
    for pathway in Pathway::ALL {
        let dir = out.join("eval").join(pathway.dir_name());
        let path = dir.join("report.json");
        if let Ok(text) = std::fs::read_to_string(&path) {
            let eval: PathwayEval = serde_json::from_str(&text)
                .map_err(|e| data(format!("{}: {e}", path.display())))?;
            let manifest = Manifest::load(&dir.join("manifest.json"))?;
            sections.push(render_text(
                &format!("held-out evaluation, {} pathway", eval.pathway),
                &manifest.config,
                &eval.report,
            ));
        }
    }
    for session_dir in run_dirs(&out.join("run"))? {
        let path = session_dir.join("summary.json");
        if let Ok(text) = std::fs::read_to_string(&path) {
            let d: SessionDecision = serde_json::from_str(&text)
                .map_err(|e| data(format!("{}: {e}", path.display())))?;
            sections.push(format!(
                "session {}: label {} predicted {} anger {} ({}/{} runs, confidence {:.3})\n",
                d.session_id, d.label, d.predicted, d.anger, d.detections, d.runs, d.confidence
            ));
        }
    }

    if sections.is_empty() {
        return Err(data(format!(
            "nothing to report under {} (run gen/train/eval first)",
            out.display()
        )));
    }
    Ok(sections.join("\n"))
}

fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Ok(Vec::new());
    };
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

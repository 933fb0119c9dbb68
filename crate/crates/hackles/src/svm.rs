//! Soft-margin SVM with an RBF kernel, trained by sequential minimal
//! optimization, plus one-vs-one multiclass voting and stratified k-fold
//! cross-validation.
//!
//! The trainer solves the standard dual: maximize
//! `Σαᵢ − ½ ΣΣ αᵢαⱼyᵢyⱼK(xᵢ,xⱼ)` subject to `0 ≤ αᵢ ≤ C` and `Σαᵢyᵢ = 0`.
//! The equality constraint is preserved exactly by construction (each step
//! moves a pair of multipliers along it), so `Σαᵢyᵢ` stays within 1e-9 of
//! zero; KKT conditions hold within the configured tolerance on exit.
//!
//! Multiclass is one-vs-one: one binary model per unordered class pair
//! (21 for the full 7 emotions), majority vote, confidence = wins/(k−1),
//! ties broken by summed decision margins then lower class code.
//!
//! Determinism: given the same rows and seed, training, prediction and
//! fold assignment are bit-identical.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{EmotionClass, CLASS_COUNT};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
/// Outer SMO sweeps before giving up (convergence is typically tens).
pub const DEFAULT_MAX_SWEEPS: usize = 1_000;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("feature dim mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("training data holds a single class")]
    SingleClass,
    #[error("empty dataset")]
    Empty,
    #[error("rows and labels disagree: {rows} rows, {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("non-finite feature value at row {0}")]
    NonFinite(usize),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format version {0} (this build reads {MODEL_FORMAT_VERSION})")]
    FormatVersion(u32),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Slack penalty.
    pub c: f64,
    /// RBF width; per-modality values come from the feature config.
    pub gamma: f64,
    /// KKT tolerance.
    pub tolerance: f64,
    /// Outer-sweep cap; hitting it returns the model with `converged: false`.
    pub max_sweeps: usize,
    /// Cross-validation folds.
    pub k: usize,
    /// Train fraction for holdout splits.
    pub train_fraction: f64,
    pub seed: u64,
    /// Min-max scale features to [0,1] before training (off by default).
    pub scale: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            c: DEFAULT_C,
            gamma: 1.0,
            tolerance: DEFAULT_TOLERANCE,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            k: DEFAULT_FOLDS,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            seed: 0,
            scale: false,
        }
    }
}

impl TrainConfig {
    pub fn with_gamma(gamma: f64) -> TrainConfig {
        TrainConfig {
            gamma,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        let bad = |m: &str| Err(SvmError::BadConfig(m.into()));
        if !(self.c > 0.0) || !self.c.is_finite() {
            return bad("C must be positive");
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad("gamma must be positive");
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return bad("tolerance must be positive");
        }
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must be in (0, 1)");
        }
        Ok(())
    }
}

/// exp(−gamma·‖x−y‖²), in (0, 1] for finite inputs.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let mut dist2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        dist2 += d * d;
    }
    Ok((-gamma * dist2).exp())
}

/// One trained pairwise decision function: f(x) = Σ cᵢ·K(svᵢ, x) + b where
/// cᵢ = αᵢyᵢ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub gamma: f64,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// αᵢ·yᵢ per support vector.
    pub coefficients: Vec<f64>,
}

impl BinaryModel {
    pub fn decision(&self, x: &[f64]) -> Result<f64, SvmError> {
        let mut f = self.bias;
        for (sv, c) in self.support_vectors.iter().zip(&self.coefficients) {
            f += c * rbf_kernel(sv, x, self.gamma)?;
        }
        Ok(f)
    }

    pub fn support_vector_count(&self) -> usize {
        self.support_vectors.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub converged: bool,
    /// Outer sweeps consumed.
    pub sweeps: usize,
    pub support_vectors: usize,
    /// Dual objective at exit.
    pub objective: f64,
    /// Worst KKT violation at exit (≤ tolerance when converged).
    pub max_kkt_violation: f64,
    /// |Σαᵢyᵢ| at exit; zero up to float error by construction.
    pub constraint_residual: f64,
}

struct Smo<'a> {
    labels: &'a [f64],
    kernel: Vec<f64>,
    n: usize,
    c: f64,
    tol: f64,
    alphas: Vec<f64>,
    errors: Vec<f64>,
    bias: f64,
    rng: ChaCha8Rng,
}

impl<'a> Smo<'a> {
    fn new(rows: &[Vec<f64>], labels: &'a [f64], cfg: &TrainConfig) -> Smo<'a> {
        let n = rows.len();
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            kernel[i * n + i] = 1.0;
            for j in 0..i {
                let k = rbf_kernel(&rows[i], &rows[j], cfg.gamma).expect("equal dims");
                kernel[i * n + j] = k;
                kernel[j * n + i] = k;
            }
        }
        Smo {
            labels,
            kernel,
            n,
            c: cfg.c,
            tol: cfg.tolerance,
            alphas: vec![0.0; n],
            // f(x) = 0 initially, so E_i = −y_i
            errors: labels.iter().map(|y| -y).collect(),
            bias: 0.0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.n + j]
    }

    fn is_bound(&self, i: usize) -> bool {
        self.alphas[i] <= 0.0 || self.alphas[i] >= self.c
    }

    /// Jointly optimize the pair (i1, i2); true when a real step was taken.
    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.labels[i1], self.labels[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;

        let (lo, hi) = if s < 0.0 {
            let d = a2_old - a1_old;
            (d.max(0.0), (self.c + d).min(self.c))
        } else {
            let sum = a1_old + a2_old;
            ((sum - self.c).max(0.0), sum.min(self.c))
        };
        if lo >= hi {
            return false;
        }

        let (k11, k12, k22) = (self.k(i1, i1), self.k(i1, i2), self.k(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2 = if eta > 0.0 {
            (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // flat direction (duplicate rows): compare the dual objective at
            // both ends of the feasible segment
            let gamma_sum = a1_old + s * a2_old;
            let v1 = e1 + y1 - self.bias - a1_old * y1 * k11 - a2_old * y2 * k12;
            let v2 = e2 + y2 - self.bias - a1_old * y1 * k12 - a2_old * y2 * k22;
            let obj = |a2c: f64| {
                let a1c = gamma_sum - s * a2c;
                a1c + a2c
                    - 0.5 * k11 * a1c * a1c
                    - 0.5 * k22 * a2c * a2c
                    - s * k12 * a1c * a2c
                    - y1 * a1c * v1
                    - y2 * a2c * v2
            };
            let (lo_obj, hi_obj) = (obj(lo), obj(hi));
            if lo_obj > hi_obj + 1e-12 {
                lo
            } else if hi_obj > lo_obj + 1e-12 {
                hi
            } else {
                return false;
            }
        };
        // snap to the box so bound states are exact; a1 then comes from the
        // equality constraint, keeping Σαy unchanged to the last bit
        if a2 < 1e-10 {
            a2 = 0.0;
        } else if a2 > self.c - 1e-10 {
            a2 = self.c;
        }
        if (a2 - a2_old).abs() < 1e-12 * (a2 + a2_old + 1e-12) {
            return false;
        }
        let a1 = a1_old + s * (a2_old - a2);

        let d1 = y1 * (a1 - a1_old);
        let d2 = y2 * (a2 - a2_old);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_bias = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = new_bias - self.bias;

        self.alphas[i1] = a1;
        self.alphas[i2] = a2;
        self.bias = new_bias;
        for i in 0..self.n {
            self.errors[i] += d1 * self.k(i1, i) + d2 * self.k(i2, i) + db;
        }
        true
    }

    /// Platt's second-choice heuristic: the cached-error extreme, then the
    /// non-bound set, then everything, the scans starting at random offsets.
    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.labels[i2];
        let a2 = self.alphas[i2];
        let r2 = self.errors[i2] * y2;
        let violates = (r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0);
        if !violates {
            return false;
        }

        let non_bound: Vec<usize> = (0..self.n).filter(|&i| !self.is_bound(i)).collect();
        if non_bound.len() > 1 {
            let e2 = self.errors[i2];
            let i1 = non_bound
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    let da = (self.errors[a] - e2).abs();
                    let db = (self.errors[b] - e2).abs();
                    da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                })
                .unwrap();
            if self.take_step(i1, i2) {
                return true;
            }
        }
        if !non_bound.is_empty() {
            let start = self.rng.random_range(0..non_bound.len());
            for off in 0..non_bound.len() {
                if self.take_step(non_bound[(start + off) % non_bound.len()], i2) {
                    return true;
                }
            }
        }
        let start = self.rng.random_range(0..self.n);
        for off in 0..self.n {
            if self.take_step((start + off) % self.n, i2) {
                return true;
            }
        }
        false
    }

    fn decision(&self, i: usize) -> f64 {
        self.errors[i] + self.labels[i]
    }

    fn max_kkt_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let margin = self.labels[i] * self.decision(i);
            let v = if self.alphas[i] <= 0.0 {
                1.0 - margin
            } else if self.alphas[i] >= self.c {
                margin - 1.0
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(v);
        }
        worst.max(0.0)
    }

    fn objective(&self) -> f64 {
        let mut obj: f64 = self.alphas.iter().sum();
        for i in 0..self.n {
            if self.alphas[i] == 0.0 {
                continue;
            }
            for j in 0..self.n {
                if self.alphas[j] == 0.0 {
                    continue;
                }
                obj -= 0.5
                    * self.alphas[i]
                    * self.alphas[j]
                    * self.labels[i]
                    * self.labels[j]
                    * self.k(i, j);
            }
        }
        obj
    }
}

/// Train one ±1 classifier. Labels must be exactly +1.0 or −1.0 with both
/// present. Even when the sweep cap is hit the model is returned, with
/// `converged: false` in the diagnostics.
pub fn train_binary(
    rows: &[Vec<f64>],
    labels: &[f64],
    cfg: &TrainConfig,
) -> Result<(BinaryModel, TrainDiagnostics), SvmError> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(SvmError::Empty);
    }
    if rows.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let dim = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(SvmError::DimMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite(i));
        }
    }
    for (i, y) in labels.iter().enumerate() {
        if *y != 1.0 && *y != -1.0 {
            return Err(SvmError::BadConfig(format!("label at row {i} is not ±1")));
        }
    }
    if labels.iter().all(|y| *y == 1.0) || labels.iter().all(|y| *y == -1.0) {
        return Err(SvmError::SingleClass);
    }

    let mut smo = Smo::new(rows, labels, cfg);
    let mut sweeps = 0;
    let mut examine_all = true;
    loop {
        let mut changed = 0usize;
        if examine_all {
            for i in 0..smo.n {
                changed += usize::from(smo.examine(i));
            }
        } else {
            for i in 0..smo.n {
                if !smo.is_bound(i) {
                    changed += usize::from(smo.examine(i));
                }
            }
        }
        sweeps += 1;
        if examine_all {
            if changed == 0 {
                break; // full pass clean: KKT holds everywhere
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
        if sweeps >= cfg.max_sweeps {
            break;
        }
    }

    let max_kkt_violation = smo.max_kkt_violation();
    let objective = smo.objective();
    let constraint_residual = smo
        .alphas
        .iter()
        .zip(labels)
        .map(|(a, y)| a * y)
        .sum::<f64>()
        .abs();

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..smo.n {
        if smo.alphas[i] > 0.0 {
            support_vectors.push(rows[i].clone());
            coefficients.push(smo.alphas[i] * labels[i]);
        }
    }
    let diagnostics = TrainDiagnostics {
        converged: max_kkt_violation <= cfg.tolerance,
        sweeps,
        support_vectors: support_vectors.len(),
        objective,
        max_kkt_violation,
        constraint_residual,
    };
    Ok((
        BinaryModel {
            gamma: cfg.gamma,
            bias: smo.bias,
            support_vectors,
            coefficients,
        },
        diagnostics,
    ))
}

/// Min-max scaler fitted on training rows; constant columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<MinMaxScaler, SvmError> {
        let Some(first) = rows.first() else {
            return Err(SvmError::Empty);
        };
        let mut mins = first.clone();
        let mut maxs = first.clone();
        for row in rows {
            if row.len() != mins.len() {
                return Err(SvmError::DimMismatch {
                    expected: mins.len(),
                    got: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                mins[j] = mins[j].min(*v);
                maxs[j] = maxs[j].max(*v);
            }
        }
        Ok(MinMaxScaler { mins, maxs })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                let span = self.maxs[j] - self.mins[j];
                if span > 0.0 {
                    (v - self.mins[j]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub class_a: EmotionClass,
    pub class_b: EmotionClass,
    pub model: BinaryModel,
}

/// One-vs-one ensemble over the classes present in training: exactly
/// k(k−1)/2 pairwise models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub format_version: u32,
    pub classes: Vec<EmotionClass>,
    pub dim: usize,
    pub scaler: Option<MinMaxScaler>,
    pub pairs: Vec<PairModel>,
}

impl MulticlassModel {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Majority vote over pairwise duels. Confidence is the winner's vote
    /// share, wins/(k−1). Ties fall to the greater summed signed margin,
    /// then the lower class code.
    pub fn predict(&self, x: &[f64]) -> Result<(EmotionClass, f64), SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::DimMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                scaled = s.transform(x);
                &scaled[..]
            }
            None => x,
        };
        let mut wins: BTreeMap<EmotionClass, u32> = BTreeMap::new();
        let mut margins: BTreeMap<EmotionClass, f64> = BTreeMap::new();
        for c in &self.classes {
            wins.insert(*c, 0);
            margins.insert(*c, 0.0);
        }
        for pair in &self.pairs {
            let f = pair.model.decision(x)?;
            let winner = if f > 0.0 { pair.class_a } else { pair.class_b };
            *wins.get_mut(&winner).unwrap() += 1;
            *margins.get_mut(&pair.class_a).unwrap() += f;
            *margins.get_mut(&pair.class_b).unwrap() -= f;
        }
        let best = self
            .classes
            .iter()
            .copied()
            .max_by(|a, b| {
                wins[a]
                    .cmp(&wins[b])
                    .then(margins[a].partial_cmp(&margins[b]).unwrap())
                    .then(b.code().cmp(&a.code()))
            })
            .expect("non-empty class list");
        let denom = (self.classes.len() - 1).max(1) as f64;
        Ok((best, f64::from(wins[&best]) / denom))
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: &Path) -> Result<(), SvmError> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn from_json(text: &str) -> Result<MulticlassModel, SvmError> {
        // read the version before committing to the full layout
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(SvmError::FormatVersion(probe.format_version));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<MulticlassModel, SvmError> {
        MulticlassModel::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Train the one-vs-one ensemble. Returns per-pair diagnostics alongside
/// the model; pair training order (and the report) is sorted by class code.
pub fn train_multiclass(
    rows: &[Vec<f64>],
    labels: &[EmotionClass],
    cfg: &TrainConfig,
) -> Result<(MulticlassModel, Vec<TrainDiagnostics>), SvmError> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(SvmError::Empty);
    }
    if rows.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let dim = rows[0].len();
    let scaler = if cfg.scale {
        Some(MinMaxScaler::fit(rows)?)
    } else {
        None
    };
    let prepared: Vec<Vec<f64>> = match &scaler {
        Some(s) => rows.iter().map(|r| s.transform(r)).collect(),
        None => rows.to_vec(),
    };

    let mut classes: Vec<EmotionClass> = Vec::new();
    for label in labels {
        if !classes.contains(label) {
            classes.push(*label);
        }
    }
    classes.sort_by_key(|c| c.code());
    if classes.len() < 2 {
        return Err(SvmError::SingleClass);
    }

    let mut pairs = Vec::new();
    let mut diagnostics = Vec::new();
    for (ai, &a) in classes.iter().enumerate() {
        for &b in &classes[ai + 1..] {
            let mut pair_rows = Vec::new();
            let mut pair_labels = Vec::new();
            for (row, label) in prepared.iter().zip(labels) {
                if *label == a {
                    pair_rows.push(row.clone());
                    pair_labels.push(1.0);
                } else if *label == b {
                    pair_rows.push(row.clone());
                    pair_labels.push(-1.0);
                }
            }
            // distinct stream per pair so duels don't share RNG state
            let pair_cfg = TrainConfig {
                seed: cfg
                    .seed
                    .wrapping_add((a.code() as u64 * 16 + b.code() as u64) << 8),
                ..cfg.clone()
            };
            let (model, diag) = train_binary(&pair_rows, &pair_labels, &pair_cfg)?;
            pairs.push(PairModel {
                class_a: a,
                class_b: b,
                model,
            });
            diagnostics.push(diag);
        }
    }
    Ok((
        MulticlassModel {
            format_version: MODEL_FORMAT_VERSION,
            classes,
            dim,
            scaler,
            pairs,
        },
        diagnostics,
    ))
}

/// One cross-validation fold's held-out outcomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    /// (actual, predicted) per held-out row.
    pub pairs: Vec<(EmotionClass, EmotionClass)>,
    pub accuracy: f64,
}

impl FoldResult {
    /// Raw count grid indexed [actual][predicted].
    pub fn confusion_counts(&self) -> [[u32; CLASS_COUNT]; CLASS_COUNT] {
        let mut grid = [[0u32; CLASS_COUNT]; CLASS_COUNT];
        for (actual, predicted) in &self.pairs {
            grid[actual.code()][predicted.code()] += 1;
        }
        grid
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub warnings: Vec<String>,
}

/// Stratified fold assignment: per class, shuffle seeded and deal
/// round-robin. A class with fewer examples than folds degrades to
/// leave-one-out for that class (each example lands in its own fold) with
/// a warning.
pub fn assign_folds(
    labels: &[EmotionClass],
    k: usize,
    seed: u64,
) -> (Vec<usize>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<EmotionClass, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        by_class.entry(*label).or_default().push(i);
    }
    let mut fold_of = vec![0usize; labels.len()];
    let mut warnings = Vec::new();
    for (class, mut indices) in by_class {
        if indices.len() < k {
            warnings.push(format!(
                "class {} has {} examples for {} folds; degraded to leave-one-out",
                class,
                indices.len(),
                k
            ));
        }
        indices.shuffle(&mut rng);
        for (pos, idx) in indices.into_iter().enumerate() {
            fold_of[idx] = pos % k;
        }
    }
    (fold_of, warnings)
}

/// Stratified k-fold cross-validation of the one-vs-one ensemble.
pub fn kfold_cv(
    rows: &[Vec<f64>],
    labels: &[EmotionClass],
    cfg: &TrainConfig,
) -> Result<CvReport, SvmError> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(SvmError::Empty);
    }
    if rows.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    if cfg.k > rows.len() {
        return Err(SvmError::BadConfig(format!(
            "{} folds over {} rows",
            cfg.k,
            rows.len()
        )));
    }
    let (fold_of, warnings) = assign_folds(labels, cfg.k, cfg.seed);
    let mut folds = Vec::with_capacity(cfg.k);
    for fold in 0..cfg.k {
        let mut train_rows = Vec::new();
        let mut train_labels = Vec::new();
        let mut test_idx = Vec::new();
        for i in 0..rows.len() {
            if fold_of[i] == fold {
                test_idx.push(i);
            } else {
                train_rows.push(rows[i].clone());
                train_labels.push(labels[i]);
            }
        }
        if test_idx.is_empty() {
            folds.push(FoldResult {
                pairs: Vec::new(),
                accuracy: 0.0,
            });
            continue;
        }
        let fold_cfg = TrainConfig {
            seed: cfg.seed.wrapping_add(fold as u64 + 1),
            ..cfg.clone()
        };
        let (model, _) = train_multiclass(&train_rows, &train_labels, &fold_cfg)?;
        let mut pairs = Vec::with_capacity(test_idx.len());
        let mut correct = 0usize;
        for i in test_idx {
            let (predicted, _) = model.predict(&rows[i])?;
            correct += usize::from(predicted == labels[i]);
            pairs.push((labels[i], predicted));
        }
        let accuracy = correct as f64 / pairs.len() as f64;
        folds.push(FoldResult { pairs, accuracy });
    }
    let scored: Vec<&FoldResult> = folds.iter().filter(|f| !f.pairs.is_empty()).collect();
    let mean_accuracy = scored.iter().map(|f| f.accuracy).sum::<f64>() / scored.len() as f64;
    Ok(CvReport {
        folds,
        mean_accuracy,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(gamma: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            gamma,
            seed,
            ..TrainConfig::default()
        }
    }

    /// Four well-separated clusters in 2D, `per` points each, classes 0..4.
    fn clustered(per: usize, jitter: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<EmotionClass>) {
        let centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)];
        let classes = [
            EmotionClass::Anger,
            EmotionClass::Happy,
            EmotionClass::Surprise,
            EmotionClass::Disgust,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (center, class) in centers.iter().zip(classes) {
            for _ in 0..per {
                rows.push(vec![
                    center.0 + rng.random_range(-jitter..=jitter),
                    center.1 + rng.random_range(-jitter..=jitter),
                ]);
                labels.push(class);
            }
        }
        (rows, labels)
    }

    #[test]
    fn kernel_basics() {
        let x = vec![1.0, 2.0, 3.0];
        assert_eq!(rbf_kernel(&x, &x, 0.5).unwrap(), 1.0);
        let y = vec![1.0, 2.0, 4.0];
        let k = rbf_kernel(&x, &y, 1.0).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        // symmetric
        assert_eq!(k, rbf_kernel(&y, &x, 1.0).unwrap());
        // face-scale width: squared distance 60 at gamma 1/60 is also e⁻¹
        let a = vec![0.0; 60];
        let b = vec![1.0; 60];
        let k60 = rbf_kernel(&a, &b, 1.0 / 60.0).unwrap();
        assert!((k60 - (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(
            rbf_kernel(&x, &[1.0], 1.0),
            Err(SvmError::DimMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn two_point_problem_puts_boundary_at_midpoint() {
        let rows = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        let labels = vec![1.0, -1.0];
        let (model, diag) = train_binary(&rows, &labels, &cfg(0.5, 7)).unwrap();
        assert!(diag.converged);
        assert_eq!(model.support_vector_count(), 2, "both points support");
        assert!(model.decision(&[0.0, 0.0]).unwrap() > 0.0);
        assert!(model.decision(&[2.0, 0.0]).unwrap() < 0.0);
        // midpoint is equidistant, so the decision cancels to the bias,
        // which is zero by symmetry
        assert!(model.decision(&[1.0, 0.0]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn separable_set_trains_to_full_accuracy() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            rows.push(vec![f64::from(i) * 0.3, 0.0]);
            labels.push(1.0);
            rows.push(vec![f64::from(i) * 0.3, 5.0]);
            labels.push(-1.0);
        }
        let (model, diag) = train_binary(&rows, &labels, &cfg(0.5, 3)).unwrap();
        assert!(diag.converged, "kkt violation {}", diag.max_kkt_violation);
        for (row, y) in rows.iter().zip(&labels) {
            assert_eq!(model.decision(row).unwrap().signum(), *y);
        }
    }

    #[test]
    fn training_satisfies_kkt_and_constraint() {
        let (rows, class_labels) = clustered(8, 2.5, 11);
        // collapse to binary: anger vs the rest of the first two clusters
        let rows: Vec<Vec<f64>> = rows[..16].to_vec();
        let labels: Vec<f64> = class_labels[..16]
            .iter()
            .map(|c| if *c == EmotionClass::Anger { 1.0 } else { -1.0 })
            .collect();
        let (_, diag) = train_binary(&rows, &labels, &cfg(0.3, 5)).unwrap();
        assert!(diag.converged);
        assert!(diag.max_kkt_violation <= DEFAULT_TOLERANCE);
        assert!(diag.constraint_residual < 1e-9);
        assert!(diag.support_vectors >= 2);
    }

    #[test]
    fn duplicate_rows_with_opposite_labels_still_terminate() {
        // eta = 0 path: identical points cannot be separated
        let rows = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![3.0, 3.0]];
        let labels = vec![1.0, -1.0, 1.0];
        let (model, diag) = train_binary(&rows, &labels, &cfg(1.0, 2)).unwrap();
        assert!(diag.sweeps < DEFAULT_MAX_SWEEPS);
        assert!(model.decision(&[3.0, 3.0]).unwrap().is_finite());
        assert!(diag.constraint_residual < 1e-9);
    }

    #[test]
    fn single_class_input_is_rejected() {
        let rows = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            train_binary(&rows, &[1.0, 1.0], &cfg(1.0, 0)),
            Err(SvmError::SingleClass)
        ));
        let labels = vec![EmotionClass::Sad, EmotionClass::Sad];
        assert!(matches!(
            train_multiclass(&rows, &labels, &cfg(1.0, 0)),
            Err(SvmError::SingleClass)
        ));
    }

    #[test]
    fn multiclass_has_one_model_per_pair() {
        let (rows, labels) = clustered(6, 1.0, 19);
        let (model, diags) = train_multiclass(&rows, &labels, &cfg(0.5, 19)).unwrap();
        assert_eq!(model.classes.len(), 4);
        assert_eq!(model.pairs.len(), 6); // 4·3/2
        assert_eq!(diags.len(), 6);
        assert!(diags.iter().all(|d| d.converged));
        // training exemplars classify to their own cluster
        for (row, label) in rows.iter().zip(&labels) {
            let (predicted, conf) = model.predict(row).unwrap();
            assert_eq!(predicted, *label);
            assert!(conf >= 2.0 / 3.0);
        }
    }

    #[test]
    fn unanimous_winner_has_full_confidence() {
        let (rows, labels) = clustered(6, 1.0, 23);
        let (model, _) = train_multiclass(&rows, &labels, &cfg(0.5, 23)).unwrap();
        let (predicted, conf) = model.predict(&[0.0, 0.0]).unwrap();
        assert_eq!(predicted, EmotionClass::Anger);
        assert_eq!(conf, 1.0, "wins all 3 duels");
        // vote share is always a multiple of 1/(k−1)
        let scaled = conf * 3.0;
        assert_eq!(scaled, scaled.round());
    }

    #[test]
    fn prediction_is_deterministic_across_retrains() {
        let (rows, labels) = clustered(5, 2.0, 31);
        let (m1, _) = train_multiclass(&rows, &labels, &cfg(0.5, 31)).unwrap();
        let (m2, _) = train_multiclass(&rows, &labels, &cfg(0.5, 31)).unwrap();
        assert_eq!(m1, m2, "same seed, same model");
        let probe = vec![5.0, 5.0]; // equidistant from all clusters
        assert_eq!(m1.predict(&probe).unwrap(), m2.predict(&probe).unwrap());
    }

    #[test]
    fn duplicated_training_row_does_not_flip_predictions() {
        let (mut rows, mut labels) = clustered(5, 1.0, 37);
        let (before, _) = train_multiclass(&rows, &labels, &cfg(0.5, 37)).unwrap();
        rows.push(rows[0].clone());
        labels.push(labels[0]);
        let (after, _) = train_multiclass(&rows, &labels, &cfg(0.5, 37)).unwrap();
        for row in &rows {
            assert_eq!(
                before.predict(row).unwrap().0,
                after.predict(row).unwrap().0
            );
        }
    }

    #[test]
    fn model_json_round_trips_with_version_gate() {
        let (rows, labels) = clustered(4, 1.0, 41);
        let (model, _) = train_multiclass(&rows, &labels, &cfg(0.5, 41)).unwrap();
        let text = model.to_json();
        let back = MulticlassModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        let future = text.replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(
            MulticlassModel::from_json(&future),
            Err(SvmError::FormatVersion(9))
        ));
    }

    #[test]
    fn scaler_maps_training_range_to_unit_box() {
        let rows = vec![vec![0.0, 100.0], vec![10.0, 100.0], vec![5.0, 100.0]];
        let scaler = MinMaxScaler::fit(&rows).unwrap();
        assert_eq!(scaler.transform(&[0.0, 100.0]), vec![0.0, 0.0]);
        assert_eq!(scaler.transform(&[10.0, 100.0]), vec![1.0, 0.0]);
        assert_eq!(scaler.transform(&[5.0, 100.0]), vec![0.5, 0.0]);
    }

    #[test]
    fn scaled_training_still_separates() {
        let (rows, labels) = clustered(5, 1.0, 43);
        // skew one axis so scaling matters
        let rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r[0] * 1000.0, r[1]])
            .collect();
        let mut c = cfg(0.5, 43);
        c.scale = true;
        let (model, _) = train_multiclass(&rows, &labels, &c).unwrap();
        assert!(model.scaler.is_some());
        for (row, label) in rows.iter().zip(&labels) {
            assert_eq!(model.predict(row).unwrap().0, *label);
        }
    }

    #[test]
    fn two_fold_split_of_four_rows_is_two_and_two() {
        let labels = vec![
            EmotionClass::Anger,
            EmotionClass::Anger,
            EmotionClass::Happy,
            EmotionClass::Happy,
        ];
        let (fold_of, warnings) = assign_folds(&labels, 2, 9);
        assert!(warnings.is_empty());
        assert_eq!(fold_of.iter().filter(|f| **f == 0).count(), 2);
        assert_eq!(fold_of.iter().filter(|f| **f == 1).count(), 2);
        // each fold holds one of each class
        assert_ne!(fold_of[0], fold_of[1]);
        assert_ne!(fold_of[2], fold_of[3]);
    }

    #[test]
    fn tiny_class_degrades_to_leave_one_out_with_warning() {
        let mut labels = vec![EmotionClass::Anger; 12];
        labels.extend([EmotionClass::Happy; 12]);
        labels.extend([EmotionClass::Sad; 3]); // fewer than k
        let (fold_of, warnings) = assign_folds(&labels, 10, 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("sad"));
        // the three sad rows land in three distinct folds
        let sad_folds: Vec<usize> = fold_of[24..].to_vec();
        assert_eq!(sad_folds.len(), 3);
        let mut unique = sad_folds.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), 3);
    }

    #[test]
    fn cross_validation_nails_separable_clusters() {
        let (rows, labels) = clustered(10, 1.5, 47);
        let mut c = cfg(0.5, 47);
        c.k = 5;
        let report = kfold_cv(&rows, &labels, &c).unwrap();
        assert_eq!(report.folds.len(), 5);
        assert!(report.warnings.is_empty());
        assert!(
            report.mean_accuracy >= 0.95,
            "mean accuracy {}",
            report.mean_accuracy
        );
        let held_out: usize = report.folds.iter().map(|f| f.pairs.len()).sum();
        assert_eq!(held_out, rows.len(), "every row held out exactly once");
        // confusion counts concentrate on the diagonal
        let grid = report.folds[0].confusion_counts();
        let diag: u32 = (0..CLASS_COUNT).map(|i| grid[i][i]).sum();
        let total: u32 = grid.iter().flatten().sum();
        assert_eq!(diag, total);
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut c = TrainConfig::default();
        c.c = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.gamma = -1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.k = 1;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.train_fraction = 1.0;
        assert!(c.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn dimension_mismatch_is_reported_everywhere() {
        let (rows, labels) = clustered(4, 1.0, 53);
        let (model, _) = train_multiclass(&rows, &labels, &cfg(0.5, 53)).unwrap();
        assert!(matches!(
            model.predict(&[1.0, 2.0, 3.0]),
            Err(SvmError::DimMismatch { expected: 2, got: 3 })
        ));
        let ragged = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            train_binary(&ragged, &[1.0, -1.0], &cfg(1.0, 0)),
            Err(SvmError::DimMismatch { .. })
        ));
    }
}

//! Dataset splitting, classification metrics, and report rendering.
//!
//! The confusion matrix is 7×7, indexed `[actual][predicted]`. Per-class
//! precision, recall and F-measure come from its margins; overall numbers
//! are reported both macro-averaged (mean over classes with support) and
//! micro-averaged (pooled counts — for single-label classification the
//! micro recall equals overall accuracy exactly). Classes absent from the
//! evaluation report zeros with an explicit flag rather than NaN.
//!
//! Splits are stratified per class with seeded shuffling, so the same seed
//! always produces the same partition.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{EmotionClass, Session, CLASS_COUNT};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no predictions to score")]
    Empty,
    #[error("predictions and labels disagree: {predictions} vs {labels}")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("class {class} has {count} sessions; stratified split needs at least 2")]
    ClassTooSmall { class: EmotionClass, count: usize },
    #[error("train fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("bad csv: {0}")]
    Csv(String),
}

/// F-measure with the zero-denominator convention: 0 when P+R = 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    let denom = precision + recall;
    if denom > 0.0 {
        2.0 * precision * recall / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// counts[actual][predicted]
    pub counts: [[u32; CLASS_COUNT]; CLASS_COUNT],
}

impl ConfusionMatrix {
    pub fn new() -> ConfusionMatrix {
        ConfusionMatrix::default()
    }

    pub fn record(&mut self, actual: EmotionClass, predicted: EmotionClass) {
        self.counts[actual.code()][predicted.code()] += 1;
    }

    pub fn from_pairs(pairs: &[(EmotionClass, EmotionClass)]) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::new();
        for (actual, predicted) in pairs {
            m.record(*actual, *predicted);
        }
        m
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (cell, v) in row.iter_mut().zip(other_row) {
                *cell += v;
            }
        }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u32 {
        (0..CLASS_COUNT).map(|i| self.counts[i][i]).sum()
    }

    /// Rows actually observed for this class.
    pub fn support(&self, class: EmotionClass) -> u32 {
        self.counts[class.code()].iter().sum()
    }

    /// Row-normalized rates; None for rows with zero support (flagged
    /// instead of normalized).
    pub fn normalized(&self) -> [Option<[f64; CLASS_COUNT]>; CLASS_COUNT] {
        let mut out = [None; CLASS_COUNT];
        for (i, row) in self.counts.iter().enumerate() {
            let support: u32 = row.iter().sum();
            if support > 0 {
                let mut rates = [0.0; CLASS_COUNT];
                for (j, v) in row.iter().enumerate() {
                    rates[j] = f64::from(*v) / f64::from(support);
                }
                out[i] = Some(rates);
            }
        }
        out
    }

    /// Counts as CSV with a class-name header column and row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("actual\\predicted");
        for c in EmotionClass::ALL {
            out.push(',');
            out.push_str(c.name());
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(EmotionClass::ALL[i].name());
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ConfusionMatrix, EvalError> {
        let bad = |m: String| EvalError::Csv(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() != CLASS_COUNT + 1 {
            return Err(bad(format!("expected {} columns", CLASS_COUNT + 1)));
        }
        let mut m = ConfusionMatrix::new();
        let mut rows_seen = 0;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != CLASS_COUNT + 1 {
                return Err(bad(format!("row `{line}` has {} fields", fields.len())));
            }
            let class = EmotionClass::from_name(fields[0])
                .ok_or_else(|| bad(format!("unknown class `{}`", fields[0])))?;
            for (j, field) in fields[1..].iter().enumerate() {
                m.counts[class.code()][j] = field
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad count `{field}`")))?;
            }
            rows_seen += 1;
        }
        if rows_seen != CLASS_COUNT {
            return Err(bad(format!("expected {CLASS_COUNT} rows, got {rows_seen}")));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: EmotionClass,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub support: u32,
    /// True when the class never occurred; its zeros are placeholders.
    pub zero_support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    /// trace/total.
    pub accuracy: f64,
    /// Means over classes with support.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f: f64,
    /// Pooled counts; equals accuracy for single-label predictions.
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f: f64,
}

/// Score (actual, predicted) pairs.
pub fn metrics(pairs: &[(EmotionClass, EmotionClass)]) -> Result<MetricsReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(metrics_from_confusion(ConfusionMatrix::from_pairs(pairs)))
}

/// Score parallel prediction/label slices.
pub fn metrics_of(
    predictions: &[EmotionClass],
    labels: &[EmotionClass],
) -> Result<MetricsReport, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let pairs: Vec<(EmotionClass, EmotionClass)> = labels
        .iter()
        .copied()
        .zip(predictions.iter().copied())
        .collect();
    metrics(&pairs)
}

pub fn metrics_from_confusion(confusion: ConfusionMatrix) -> MetricsReport {
    let mut per_class = Vec::with_capacity(CLASS_COUNT);
    let mut tp_sum = 0u32;
    let mut fp_sum = 0u32;
    let mut fn_sum = 0u32;
    for class in EmotionClass::ALL {
        let c = class.code();
        let tp = confusion.counts[c][c];
        let fn_ = confusion.support(class) - tp;
        let fp: u32 = (0..CLASS_COUNT)
            .filter(|r| *r != c)
            .map(|r| confusion.counts[r][c])
            .sum();
        let precision = if tp + fp > 0 {
            f64::from(tp) / f64::from(tp + fp)
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            f64::from(tp) / f64::from(tp + fn_)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            class,
            precision,
            recall,
            f_measure: f_measure(precision, recall),
            support: confusion.support(class),
            zero_support: confusion.support(class) == 0,
        });
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn_;
    }
    let supported: Vec<&ClassMetrics> = per_class.iter().filter(|m| !m.zero_support).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        supported.iter().map(|m| f(m)).sum::<f64>() / supported.len() as f64
    };
    let micro_precision = f64::from(tp_sum) / f64::from(tp_sum + fp_sum);
    let micro_recall = f64::from(tp_sum) / f64::from(tp_sum + fn_sum);
    MetricsReport {
        accuracy: f64::from(confusion.trace()) / f64::from(confusion.total()),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f: mean(|m| m.f_measure),
        micro_precision,
        micro_recall,
        micro_f: f_measure(micro_precision, micro_recall),
        per_class,
        confusion,
    }
}

/// Stratified holdout split over labels: per class, seeded shuffle, then
/// `round(n·fraction)` to train clamped so both sides keep at least one.
/// Returns (train, test) index sets, disjoint and exhaustive.
pub fn split_dataset(
    labels: &[EmotionClass],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::BadFraction(fraction));
    }
    let mut by_class: BTreeMap<EmotionClass, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        by_class.entry(*label).or_default().push(i);
    }
    for (class, indices) in &by_class {
        if indices.len() < 2 {
            return Err(EvalError::ClassTooSmall {
                class: *class,
                count: indices.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (_, mut indices) in by_class {
        indices.shuffle(&mut rng);
        let n = indices.len();
        let take = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&indices[..take]);
        test.extend_from_slice(&indices[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// `split_dataset` keyed off the sessions' own labels.
pub fn split_sessions(
    sessions: &[Session],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    let labels: Vec<EmotionClass> = sessions.iter().map(|s| s.label).collect();
    split_dataset(&labels, fraction, seed)
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

/// Deterministic plain-text report: config echo, per-class table,
/// confusion counts, row-normalized rates, and labeled overall numbers.
pub fn render_text(
    title: &str,
    config: &BTreeMap<String, String>,
    report: &MetricsReport,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "== {title} ==");
    if !config.is_empty() {
        let _ = writeln!(out, "config:");
        for (k, v) in config {
            let _ = writeln!(out, "  {k} = {v}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<10} {:>9} {:>9} {:>9} {:>8}",
        "class", "precision", "recall", "f-measure", "support"
    );
    for m in &report.per_class {
        let flag = if m.zero_support { "  (no support)" } else { "" };
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>9} {:>8}{}",
            m.class.name(),
            fmt3(m.precision),
            fmt3(m.recall),
            fmt3(m.f_measure),
            m.support,
            flag
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "confusion matrix (rows actual, columns predicted):");
    let mut header = format!("{:<10}", "");
    for c in EmotionClass::ALL {
        let _ = write!(header, " {:>8}", c.name());
    }
    let _ = writeln!(out, "{header}");
    for (i, row) in report.confusion.counts.iter().enumerate() {
        let mut line = format!("{:<10}", EmotionClass::ALL[i].name());
        for v in row {
            let _ = write!(line, " {v:>8}");
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "row-normalized rates:");
    for (i, row) in report.confusion.normalized().iter().enumerate() {
        let mut line = format!("{:<10}", EmotionClass::ALL[i].name());
        match row {
            Some(rates) => {
                for r in rates {
                    let _ = write!(line, " {:>8}", fmt3(*r));
                }
            }
            None => {
                let _ = write!(line, " (no support)");
            }
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "overall accuracy           = {}", fmt3(report.accuracy));
    let _ = writeln!(
        out,
        "macro precision/recall/f   = {}/{}/{}",
        fmt3(report.macro_precision),
        fmt3(report.macro_recall),
        fmt3(report.macro_f)
    );
    let _ = writeln!(
        out,
        "micro precision/recall/f   = {}/{}/{}",
        fmt3(report.micro_precision),
        fmt3(report.micro_recall),
        fmt3(report.micro_f)
    );
    out
}

/// Per-class metrics as CSV.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("class,precision,recall,f_measure,support,zero_support\n");
    for m in &report.per_class {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            m.class.name(),
            m.precision,
            m.recall,
            m.f_measure,
            m.support,
            m.zero_support
        );
    }
    out
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Category, ClassifiedComment, Sentiment};

/// Minimum per-category accuracy for a classifier to be considered usable.
pub const ACCURACY_GATE: f64 = 0.75;
/// Minimum per-category F1.
pub const F1_GATE: f64 = 0.71;

/// One gold-annotated news-comment pair. `labels` covers all eleven categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub news_text: String,
    pub comment_text: String,
    pub labels: BTreeMap<Category, bool>,
    pub sentiment: Sentiment,
}

impl LabeledExample {
    pub fn is_positive(&self, category: Category) -> bool {
        self.labels.get(&category).copied().unwrap_or(false)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GoldError {
    #[error("reading gold file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: labels missing category {category}")]
    MissingCategory { line: usize, category: Category },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
}

/// Reads a gold corpus: one JSON [`LabeledExample`] per line, blank lines
/// and `#` comments ignored.
pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<LabeledExample>, GoldError> {
    parse_gold(&std::fs::read_to_string(path)?)
}

pub fn parse_gold(raw: &str) -> Result<Vec<LabeledExample>, GoldError> {
    let mut out: Vec<LabeledExample> = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (i, line) in raw.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let ex: LabeledExample = serde_json::from_str(trimmed).map_err(|e| GoldError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(category) = Category::ALL
            .into_iter()
            .find(|c| !ex.labels.contains_key(c))
        {
            return Err(GoldError::MissingCategory {
                line: line_no,
                category,
            });
        }
        if !ids.insert(ex.id.clone()) {
            return Err(GoldError::DuplicateId {
                line: line_no,
                id: ex.id,
            });
        }
        out.push(ex);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, gold: bool, predicted: bool) {
        match (gold, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub category: Category,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub passes_gate: bool,
}

impl ClassifierMetrics {
    /// Derives the metrics from confusion counts. Precision, recall and F1
    /// are 0 when their denominators are 0.
    pub fn from_counts(category: Category, counts: ConfusionCounts) -> Self {
        let accuracy = ratio(counts.tp + counts.tn, counts.total());
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall = ratio(counts.tp, counts.tp + counts.fn_);
        // harmonic mean of precision and recall, as one rounding step
        let f1 = ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn_);
        Self {
            category,
            accuracy,
            precision,
            recall,
            f1,
            counts,
            passes_gate: accuracy >= ACCURACY_GATE && f1 >= F1_GATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_items: usize,
    pub per_category: BTreeMap<Category, ClassifierMetrics>,
    pub sentiment_accuracy: f64,
    pub accuracy_gate: f64,
    pub f1_gate: f64,
    pub all_pass: bool,
}

impl EvaluationReport {
    pub fn failing(&self) -> impl Iterator<Item = &ClassifierMetrics> {
        self.per_category.values().filter(|m| !m.passes_gate)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:>8} {:>9} {:>8} {:>8} {:>4} {:>4} {:>4} {:>4}  gate",
            "category", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn"
        );
        for m in self.per_category.values() {
            let _ = writeln!(
                out,
                "{:<22} {:>8.3} {:>9.3} {:>8.3} {:>8.3} {:>4} {:>4} {:>4} {:>4}  {}",
                m.category.as_str(),
                m.accuracy,
                m.precision,
                m.recall,
                m.f1,
                m.counts.tp,
                m.counts.fp,
                m.counts.fn_,
                m.counts.tn,
                if m.passes_gate { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            out,
            "sentiment accuracy {:.3} over {} items; gates accuracy >= {}, f1 >= {}: {}",
            self.sentiment_accuracy,
            self.n_items,
            self.accuracy_gate,
            self.f1_gate,
            if self.all_pass {
                "all pass"
            } else {
                "some FAIL"
            }
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{gold} gold items but {predictions} predictions")]
    LengthMismatch { gold: usize, predictions: usize },
}

/// Per-category confusion counts and metrics; predictions align 1:1 with gold.
pub fn evaluate(
    gold: &[LabeledExample],
    predictions: &[ClassifiedComment],
) -> Result<EvaluationReport, EvalError> {
    if gold.len() != predictions.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            predictions: predictions.len(),
        });
    }
    let mut counts: BTreeMap<Category, ConfusionCounts> = Category::ALL
        .into_iter()
        .map(|c| (c, ConfusionCounts::default()))
        .collect();
    let mut sentiment_hits = 0u64;
    for (g, p) in gold.iter().zip(predictions) {
        for c in Category::ALL {
            counts
                .get_mut(&c)
                .expect("all categories")
                .record(g.is_positive(c), p.has(c));
        }
        if g.sentiment == p.sentiment {
            sentiment_hits += 1;
        }
    }
    let per_category: BTreeMap<Category, ClassifierMetrics> = counts
        .into_iter()
        .map(|(c, k)| (c, ClassifierMetrics::from_counts(c, k)))
        .collect();
    let all_pass = per_category.values().all(|m| m.passes_gate);
    Ok(EvaluationReport {
        n_items: gold.len(),
        per_category,
        sentiment_accuracy: ratio(sentiment_hits, gold.len() as u64),
        accuracy_gate: ACCURACY_GATE,
        f1_gate: F1_GATE,
        all_pass,
    })
}

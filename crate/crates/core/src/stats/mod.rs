//! Human-evaluation statistics: score aggregates and paired ablation tests.

pub mod ablation;
pub mod wilcoxon;

pub use ablation::{
    ablation_table, load_paired_scores, parse_paired_scores, render_table, AblationError,
    AblationRow, PairedScore,
};
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_signed_rank_with, Alternative, Method, MethodChoice,
    WilcoxonError, WilcoxonResult,
};

use serde::{Deserialize, Serialize};

/// Five-point rater metrics for main-point summaries.
pub const SUMMARY_METRICS: [&str; 5] = [
    "readability",
    "completeness",
    "relevance",
    "precision",
    "trustworthiness",
];
/// Five-point rater metrics for keyword and question hints.
pub const HINT_METRICS: [&str; 3] = ["relevance", "accessibility", "usefulness"];

/// Published rater results, kept as documentation targets only. They cannot
/// be reproduced without the original raters.
pub mod reference {
    /// (metric, mean, sd) for summaries.
    pub const SUMMARY: [(&str, f64, f64); 5] = [
        ("readability", 3.800, 0.870),
        ("completeness", 3.625, 0.881),
        ("relevance", 3.600, 0.682),
        ("precision", 3.675, 0.859),
        ("trustworthiness", 3.750, 0.899),
    ];
    /// (metric, mean, sd) for hints generated with comments.
    pub const HINTS_WITH_COMMENTS: [(&str, f64, f64); 3] = [
        ("relevance", 3.475, 0.688),
        ("accessibility", 3.875, 0.623),
        ("usefulness", 3.6, 0.758),
    ];
    /// (metric, mean, sd) for hints generated from the article alone.
    pub const HINTS_WITHOUT_COMMENTS: [(&str, f64, f64); 3] = [
        ("relevance", 3.13, 1.04),
        ("accessibility", 3.5, 0.64),
        ("usefulness", 3.05, 0.99),
    ];
    /// Reported W (min convention) per hint metric for the with/without comparison.
    pub const HINT_W: [(&str, f64); 3] = [
        ("relevance", 41.0),
        ("accessibility", 17.5),
        ("usefulness", 15.0),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreAggregate {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single score.
    pub std_dev: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggregateError {
    #[error("no scores")]
    EmptyInput,
    #[error("non-finite score")]
    NonFinite,
}

pub fn aggregate(scores: &[f64]) -> Result<ScoreAggregate, AggregateError> {
    if scores.is_empty() {
        return Err(AggregateError::EmptyInput);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(AggregateError::NonFinite);
    }
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let std_dev = if n == 1 {
        0.0
    } else {
        let ss: f64 = scores.iter().map(|s| (s - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(ScoreAggregate { mean, std_dev, n })
}

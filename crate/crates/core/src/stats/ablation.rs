//! Paired rater scores for the with/without-comments comparison.
//!
//! Input is CSV with header `article_id,metric,score_with,score_without`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::wilcoxon::{wilcoxon_signed_rank, Alternative, WilcoxonResult};
use super::{aggregate, ScoreAggregate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedScore {
    pub article_id: String,
    pub metric: String,
    pub score_with: f64,
    pub score_without: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum AblationError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: duplicate pair ({article_id}, {metric})")]
    Duplicate {
        row: usize,
        article_id: String,
        metric: String,
    },
    #[error("no paired scores")]
    Empty,
}

pub fn load_paired_scores(path: &Path) -> Result<Vec<PairedScore>, AblationError> {
    let text = std::fs::read_to_string(path).map_err(|source| AblationError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_paired_scores(&text)
}

pub fn parse_paired_scores(text: &str) -> Result<Vec<PairedScore>, AblationError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, record) in reader.deserialize::<PairedScore>().enumerate() {
        // header is row 1
        let row = i + 2;
        let score = record.map_err(|e| AblationError::Parse {
            row,
            message: e.to_string(),
        })?;
        if !score.score_with.is_finite() || !score.score_without.is_finite() {
            return Err(AblationError::Parse {
                row,
                message: "non-finite score".into(),
            });
        }
        if !seen.insert((score.article_id.clone(), score.metric.clone())) {
            return Err(AblationError::Duplicate {
                row,
                article_id: score.article_id,
                metric: score.metric,
            });
        }
        out.push(score);
    }
    if out.is_empty() {
        return Err(AblationError::Empty);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub metric: String,
    pub n_pairs: usize,
    pub with_comments: ScoreAggregate,
    pub without_comments: ScoreAggregate,
    /// None when every pair is tied.
    pub wilcoxon: Option<WilcoxonResult>,
}

/// One row per metric, in order of first appearance.
pub fn ablation_table(scores: &[PairedScore], alternative: Alternative) -> Vec<AblationRow> {
    let mut metrics: Vec<&str> = Vec::new();
    for s in scores {
        if !metrics.contains(&s.metric.as_str()) {
            metrics.push(&s.metric);
        }
    }
    metrics
        .into_iter()
        .map(|metric| {
            let (with, without): (Vec<f64>, Vec<f64>) = scores
                .iter()
                .filter(|s| s.metric == metric)
                .map(|s| (s.score_with, s.score_without))
                .unzip();
            // inputs are non-empty and finite by construction
            AblationRow {
                metric: metric.to_string(),
                n_pairs: with.len(),
                with_comments: aggregate(&with).expect("validated scores"),
                without_comments: aggregate(&without).expect("validated scores"),
                wilcoxon: wilcoxon_signed_rank(&with, &without, alternative).ok(),
            }
        })
        .collect()
}

pub fn render_table(rows: &[AblationRow]) -> String {
    let mut out = format!(
        "{:<16} {:>5} {:>13} {:>13} {:>8} {:>5} {:>10} {}\n",
        "metric", "n", "with M/SD", "without M/SD", "W", "n_eff", "p", "method"
    );
    for r in rows {
        let stats = match &r.wilcoxon {
            Some(w) => format!(
                "{:>8.1} {:>5} {:>10.4e} {}",
                w.w_statistic,
                w.n_effective,
                w.p_value,
                match w.method {
                    super::Method::Exact => "exact",
                    super::Method::NormalApprox => "normal",
                }
            ),
            None => format!("{:>8} {:>5} {:>10} all pairs tied", "-", 0, "-"),
        };
        out.push_str(&format!(
            "{:<16} {:>5} {:>6.3}/{:<6.3} {:>6.3}/{:<6.3} {}\n",
            r.metric,
            r.n_pairs,
            r.with_comments.mean,
            r.with_comments.std_dev,
            r.without_comments.mean,
            r.without_comments.std_dev,
            stats
        ));
    }
    out
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Two-rater Gwet AC1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub ac1: f64,
    pub observed_agreement: f64,
    pub chance_agreement: f64,
    pub n_items: usize,
    pub n_categories: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgreementError {
    #[error("no items to compare")]
    EmptyInput,
    #[error("rater A has {a} labels, rater B has {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("label space needs at least 2 categories, got {0}")]
    LabelSpaceTooSmall(usize),
    #[error("label {0:?} is outside the label space")]
    LabelOutOfSpace(String),
    #[error("chance agreement is 1; AC1 is undefined")]
    DegenerateDistribution,
}

/// Gwet's AC1 for two raters over a label space of K categories.
///
/// `pa` is the fraction of items both raters labelled identically. With
/// `π_k = (count_a(k) + count_b(k)) / 2n`, chance agreement is
/// `pe = Σ_k π_k (1 − π_k) / (K − 1)` and `AC1 = (pa − pe) / (1 − pe)`.
pub fn gwet_ac1<L>(
    rater_a: &[L],
    rater_b: &[L],
    label_space: &[L],
) -> Result<AgreementResult, AgreementError>
where
    L: Ord + std::fmt::Debug,
{
    if rater_a.len() != rater_b.len() {
        return Err(AgreementError::LengthMismatch {
            a: rater_a.len(),
            b: rater_b.len(),
        });
    }
    if rater_a.is_empty() {
        return Err(AgreementError::EmptyInput);
    }
    let mut counts: BTreeMap<&L, u64> = label_space.iter().map(|l| (l, 0)).collect();
    let k = counts.len();
    if k < 2 {
        return Err(AgreementError::LabelSpaceTooSmall(k));
    }
    for label in rater_a.iter().chain(rater_b) {
        *counts
            .get_mut(label)
            .ok_or_else(|| AgreementError::LabelOutOfSpace(format!("{label:?}")))? += 1;
    }

    let n = rater_a.len();
    let agreed = rater_a.iter().zip(rater_b).filter(|(a, b)| a == b).count();
    let pa = agreed as f64 / n as f64;
    let two_n = 2.0 * n as f64;
    let spread: f64 = counts
        .values()
        .map(|&c| {
            let pi = c as f64 / two_n;
            pi * (1.0 - pi)
        })
        .sum();
    let pe = spread / (k - 1) as f64;
    if pe >= 1.0 {
        return Err(AgreementError::DegenerateDistribution);
    }
    Ok(AgreementResult {
        ac1: (pa - pe) / (1.0 - pe),
        observed_agreement: pa,
        chance_agreement: pe,
        n_items: n,
        n_categories: k,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum RatingsError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },
    #[error("item {0:?} rated by only one rater")]
    Unpaired(String),
}

#[derive(Debug, Deserialize)]
struct Rating {
    item_id: String,
    label: String,
}

/// Reads a rater file: CSV with header `item_id,label`.
pub fn load_ratings(path: &Path) -> Result<BTreeMap<String, String>, RatingsError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| RatingsError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (i, rec) in reader.deserialize::<Rating>().enumerate() {
        let err = |message: String| RatingsError::Parse {
            path: shown.clone(),
            row: i + 2,
            message,
        };
        let r = rec.map_err(|e| err(e.to_string()))?;
        if out.insert(r.item_id.clone(), r.label).is_some() {
            return Err(err(format!("duplicate item {:?}", r.item_id)));
        }
    }
    Ok(out)
}

/// Pairs two raters' labels by item id, in id order.
pub fn align_ratings(
    a: &BTreeMap<String, String>,
    b: &BTreeMap<String, String>,
) -> Result<(Vec<String>, Vec<String>), RatingsError> {
    if let Some(id) = a
        .keys()
        .find(|k| !b.contains_key(*k))
        .or_else(|| b.keys().find(|k| !a.contains_key(*k)))
    {
        return Err(RatingsError::Unpaired(id.clone()));
    }
    Ok(a.iter().map(|(k, v)| (v.clone(), b[k].clone())).unzip())
}

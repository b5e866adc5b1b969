use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest n for which the exact distribution is used automatically.
pub const EXACT_MAX_N: usize = 25;
/// Largest n accepted when the exact method is forced (counts fit in u64).
pub const FORCED_EXACT_MAX_N: usize = 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// x tends to be larger than y.
    Greater,
    /// x tends to be smaller than y.
    Less,
}

impl std::str::FromStr for Alternative {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-sided" | "two_sided" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            other => Err(format!("unknown alternative {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodChoice {
    /// Exact when n ≤ 25 and no tied |d|, otherwise normal approximation.
    #[default]
    Auto,
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W⁺, W⁻).
    pub w_statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    pub p_value: f64,
    pub method: Method,
    pub alternative: Alternative,
    /// Standardized statistic, for the normal approximation only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WilcoxonError {
    #[error("x has {x} values, y has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("no pairs")]
    EmptyInput,
    #[error("all differences are zero")]
    AllZeroDifferences,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("exact distribution limited to n <= {FORCED_EXACT_MAX_N}, got {0}")]
    ExactTooLarge(usize),
}

/// Wilcoxon signed-rank test with automatic method selection.
pub fn wilcoxon_signed_rank(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
) -> Result<WilcoxonResult, WilcoxonError> {
    wilcoxon_signed_rank_with(x, y, alternative, MethodChoice::Auto)
}

/// Signed ranks of the non-zero differences `x − y`: average ranks of |d|
/// for ties, doubled so that they are integers.
#[derive(Debug, Clone)]
pub struct SignedRanks {
    pub doubled_ranks: Vec<u64>,
    pub positive: Vec<bool>,
    /// Sizes of groups of tied |d|.
    pub tie_groups: Vec<usize>,
}

impl SignedRanks {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self, WilcoxonError> {
        if x.len() != y.len() {
            return Err(WilcoxonError::LengthMismatch {
                x: x.len(),
                y: y.len(),
            });
        }
        if x.is_empty() {
            return Err(WilcoxonError::EmptyInput);
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(WilcoxonError::NonFinite);
        }
        let mut diffs: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(a, b)| a - b)
            .filter(|d| *d != 0.0)
            .collect();
        if diffs.is_empty() {
            return Err(WilcoxonError::AllZeroDifferences);
        }
        diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

        let n = diffs.len();
        let mut doubled_ranks = vec![0u64; n];
        let mut tie_groups = Vec::new();
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && diffs[j].abs() == diffs[i].abs() {
                j += 1;
            }
            // ranks i+1..=j averaged, doubled: (i+1 + j)
            let doubled = (i + 1 + j) as u64;
            doubled_ranks[i..j].fill(doubled);
            tie_groups.push(j - i);
            i = j;
        }
        let positive = diffs.iter().map(|d| *d > 0.0).collect();
        Ok(Self {
            doubled_ranks,
            positive,
            tie_groups,
        })
    }

    pub fn n(&self) -> usize {
        self.doubled_ranks.len()
    }

    pub fn has_ties(&self) -> bool {
        self.tie_groups.iter().any(|&t| t > 1)
    }

    /// 2·W⁺.
    pub fn doubled_w_plus(&self) -> u64 {
        self.doubled_ranks
            .iter()
            .zip(&self.positive)
            .filter(|(_, p)| **p)
            .map(|(r, _)| r)
            .sum()
    }

    pub fn doubled_total(&self) -> u64 {
        self.doubled_ranks.iter().sum()
    }
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    choice: MethodChoice,
) -> Result<WilcoxonResult, WilcoxonError> {
    let ranks = SignedRanks::new(x, y)?;
    let n = ranks.n();
    let method = match choice {
        MethodChoice::Auto if n <= EXACT_MAX_N && !ranks.has_ties() => Method::Exact,
        MethodChoice::Auto => Method::NormalApprox,
        MethodChoice::Exact if n > FORCED_EXACT_MAX_N => {
            return Err(WilcoxonError::ExactTooLarge(n))
        }
        MethodChoice::Exact => Method::Exact,
        MethodChoice::NormalApprox => Method::NormalApprox,
    };

    let s = ranks.doubled_w_plus();
    let total = ranks.doubled_total();
    let w_plus = s as f64 / 2.0;
    let w_minus = (total - s) as f64 / 2.0;

    let (p, z) = match method {
        Method::Exact => (exact_p(&ranks, s, total, alternative), None),
        Method::NormalApprox => {
            let (p, z) = normal_p(&ranks, w_plus, alternative);
            (p, Some(z))
        }
    };
    Ok(WilcoxonResult {
        w_statistic: w_plus.min(w_minus),
        w_plus,
        w_minus,
        n_effective: n,
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        method,
        alternative,
        z,
    })
}

/// Number of sign assignments giving each doubled W⁺ value.
fn null_counts(doubled_ranks: &[u64], total: u64) -> Vec<u64> {
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn exact_p(ranks: &SignedRanks, s: u64, total: u64, alternative: Alternative) -> f64 {
    let counts = null_counts(&ranks.doubled_ranks, total);
    let assignments = 2f64.powi(ranks.n() as i32);
    let tally = |pred: &dyn Fn(u64) -> bool| -> u64 {
        counts
            .iter()
            .enumerate()
            .filter(|(v, _)| pred(*v as u64))
            .map(|(_, c)| *c)
            .sum()
    };
    let hits = match alternative {
        Alternative::TwoSided => {
            let w = s.min(total - s);
            tally(&|v| v.min(total - v) <= w)
        }
        Alternative::Greater => tally(&|v| v >= s),
        Alternative::Less => tally(&|v| v <= s),
    };
    hits as f64 / assignments
}

/// Normal approximation with tie-corrected variance and continuity correction.
fn normal_p(ranks: &SignedRanks, w_plus: f64, alternative: Alternative) -> (f64, f64) {
    let n = ranks.n() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ranks
        .tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    let sd = (n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term).sqrt();
    let normal = Normal::standard();
    match alternative {
        Alternative::TwoSided => {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
            ((2.0 * normal.sf(z)).min(1.0), z)
        }
        Alternative::Greater => {
            let z = (w_plus - mean - 0.5) / sd;
            (normal.sf(z), z)
        }
        Alternative::Less => {
            let z = (w_plus - mean + 0.5) / sd;
            (normal.cdf(z), z)
        }
    }
}

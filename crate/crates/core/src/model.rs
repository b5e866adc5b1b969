//! Comment taxonomy and the shared domain types.
//!
//! Every type here is a plain immutable value once built; all of them are
//! `Send + Sync` and serialize with stable snake_case names.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// The four themes that group comment categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theme {
    InformationEnrichment,
    PersonalEngagement,
    CriticalReflection,
    PeripheralContent,
}

impl Theme {
    pub const ALL: [Theme; 4] = [
        Theme::InformationEnrichment,
        Theme::PersonalEngagement,
        Theme::CriticalReflection,
        Theme::PeripheralContent,
    ];
}

/// Functional category of a first-level comment.
///
/// Ordering follows the taxonomy table, which is also the order in which the
/// per-category classifiers run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Contextualization,
    ExternalInformation,
    Analysis,
    Association,
    Attitude,
    Skepticism,
    Provocation,
    Entertainment,
    Polarization,
    Advertisement,
    Nonsense,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::Contextualization,
        Category::ExternalInformation,
        Category::Analysis,
        Category::Association,
        Category::Attitude,
        Category::Skepticism,
        Category::Provocation,
        Category::Entertainment,
        Category::Polarization,
        Category::Advertisement,
        Category::Nonsense,
    ];

    /// Categories whose comments feed the summarizer.
    pub const INFORMATIONAL: [Category; 2] =
        [Category::Contextualization, Category::ExternalInformation];

    /// Categories whose comments feed keyword and question generation.
    pub const INSPIRING: [Category; 2] = [Category::Skepticism, Category::Provocation];

    /// Categories grouped under the "Others" filter.
    pub const PERIPHERAL: [Category; 4] = [
        Category::Entertainment,
        Category::Polarization,
        Category::Advertisement,
        Category::Nonsense,
    ];

    pub fn theme(self) -> Theme {
        theme_of(self)
    }

    /// Stable snake_case identifier, identical to the serialized form.
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Contextualization => "contextualization",
            Category::ExternalInformation => "external_information",
            Category::Analysis => "analysis",
            Category::Association => "association",
            Category::Attitude => "attitude",
            Category::Skepticism => "skepticism",
            Category::Provocation => "provocation",
            Category::Entertainment => "entertainment",
            Category::Polarization => "polarization",
            Category::Advertisement => "advertisement",
            Category::Nonsense => "nonsense",
        }
    }

    /// Human-readable label.
    pub fn label(self) -> &'static str {
        match self {
            Category::Contextualization => "Contextualization",
            Category::ExternalInformation => "External Information",
            Category::Analysis => "Analysis",
            Category::Association => "Association",
            Category::Attitude => "Attitude",
            Category::Skepticism => "Skepticism",
            Category::Provocation => "Provocation",
            Category::Entertainment => "Entertainment",
            Category::Polarization => "Polarization",
            Category::Advertisement => "Advertisement",
            Category::Nonsense => "Nonsense",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} {value:?}")]
pub struct UnknownName {
    pub kind: &'static str,
    pub value: String,
}

impl FromStr for Category {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownName {
                kind: "category",
                value: s.to_string(),
            })
    }
}

/// Maps every category to its theme. Total over all eleven categories.
pub fn theme_of(category: Category) -> Theme {
    use Category::*;
    match category {
        Contextualization | ExternalInformation => Theme::InformationEnrichment,
        Analysis | Association | Attitude => Theme::PersonalEngagement,
        Skepticism | Provocation => Theme::CriticalReflection,
        Entertainment | Polarization | Advertisement | Nonsense => Theme::PeripheralContent,
    }
}

/// Attitude of a comment, orthogonal to its categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sentiment {
    Positive,
    Neutral,
    Negative,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Positive, Sentiment::Neutral, Sentiment::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Positive => "positive",
            Sentiment::Neutral => "neutral",
            Sentiment::Negative => "negative",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sentiment {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sentiment::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownName {
                kind: "sentiment",
                value: s.to_string(),
            })
    }
}

/// Display-only engagement counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub likes: u64,
    pub reply_count: u64,
}

/// A reply in a news post's thread. `level == 1` marks a first-level comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub parent_id: String,
    pub author: String,
    pub text: String,
    pub level: u32,
}

impl Comment {
    pub fn is_first_level(&self) -> bool {
        self.level == 1
    }
}

/// A news post with its comment thread in ingestion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub author: String,
    pub text: String,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub metrics: Metrics,
    #[serde(default)]
    pub comments: Vec<Comment>,
}

impl Article {
    pub fn comment(&self, id: &str) -> Option<&Comment> {
        self.comments.iter().find(|c| c.id == id)
    }

    pub fn first_level(&self) -> impl Iterator<Item = &Comment> {
        self.comments.iter().filter(|c| c.is_first_level())
    }
}

/// Output of the classifiers for one first-level comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedComment {
    pub comment_id: String,
    pub categories: BTreeSet<Category>,
    pub sentiment: Sentiment,
}

impl ClassifiedComment {
    pub fn new(
        comment_id: impl Into<String>,
        categories: impl IntoIterator<Item = Category>,
        sentiment: Sentiment,
    ) -> Self {
        Self {
            comment_id: comment_id.into(),
            categories: categories.into_iter().collect(),
            sentiment,
        }
    }

    pub fn has(&self, category: Category) -> bool {
        self.categories.contains(&category)
    }

    pub fn is_informational(&self) -> bool {
        is_informational(self)
    }

    pub fn is_inspiring(&self) -> bool {
        is_inspiring(self)
    }

    pub fn is_peripheral(&self) -> bool {
        is_peripheral(self)
    }
}

/// Tagged Contextualization or External Information.
pub fn is_informational(c: &ClassifiedComment) -> bool {
    Category::INFORMATIONAL
        .iter()
        .any(|k| c.categories.contains(k))
}

/// Tagged Skepticism or Provocation.
pub fn is_inspiring(c: &ClassifiedComment) -> bool {
    Category::INSPIRING.iter().any(|k| c.categories.contains(k))
}

/// Non-empty and tagged only with peripheral categories.
pub fn is_peripheral(c: &ClassifiedComment) -> bool {
    !c.categories.is_empty()
        && c.categories
            .iter()
            .all(|k| theme_of(*k) == Theme::PeripheralContent)
}

/// One bullet of the comment-enhanced summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MainPoint {
    /// 1-based position in the summary.
    pub index: usize,
    pub text: String,
    pub supporting_comment_ids: BTreeSet<String>,
}

/// A critical-thinking keyword with its questions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalHint {
    pub keyword: String,
    pub questions: Vec<String>,
}

/// Everything the pipeline produced for one article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedArticle {
    pub article_id: String,
    pub classifications: Vec<ClassifiedComment>,
    pub main_points: Vec<MainPoint>,
    pub hints: Vec<CriticalHint>,
    pub pipeline_version: String,
    #[serde(with = "timestamp")]
    pub produced_at: DateTime<Utc>,
    /// Comments whose classification failed within the tolerated error rate.
    /// They carry an empty category set and neutral sentiment.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classification_failures: Vec<String>,
}

impl ProcessedArticle {
    pub fn classification(&self, comment_id: &str) -> Option<&ClassifiedComment> {
        self.classifications
            .iter()
            .find(|c| c.comment_id == comment_id)
    }

    pub fn main_point(&self, index: usize) -> Option<&MainPoint> {
        self.main_points.iter().find(|p| p.index == index)
    }
}

/// RFC 3339 UTC timestamps with whole-second precision.
pub mod timestamp {
    use chrono::{DateTime, SecondsFormat, Timelike, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(serde::de::Error::custom)
    }

    pub fn format(value: &DateTime<Utc>) -> String {
        value.to_rfc3339_opts(SecondsFormat::Secs, true)
    }

    pub fn parse(raw: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        let parsed = DateTime::parse_from_rfc3339(raw)?.with_timezone(&Utc);
        Ok(truncate(parsed))
    }

    pub fn truncate(value: DateTime<Utc>) -> DateTime<Utc> {
        value.with_nanosecond(0).unwrap_or(value)
    }
}

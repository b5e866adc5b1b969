//! Comment filtering for the reading view.
//!
//! Options within a facet union; the content, sentiment and point facets
//! intersect. Results keep article order.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Article, Category, ClassifiedComment, Comment, ProcessedArticle, Sentiment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentOption {
    AllContent,
    Analysis,
    Association,
    Skepticism,
    Provocation,
    /// Comments whose categories are all peripheral (and non-empty).
    Others,
}

impl ContentOption {
    pub const ALL: [ContentOption; 6] = [
        ContentOption::AllContent,
        ContentOption::Analysis,
        ContentOption::Association,
        ContentOption::Skepticism,
        ContentOption::Provocation,
        ContentOption::Others,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContentOption::AllContent => "all",
            ContentOption::Analysis => "analysis",
            ContentOption::Association => "association",
            ContentOption::Skepticism => "skepticism",
            ContentOption::Provocation => "provocation",
            ContentOption::Others => "others",
        }
    }

    fn category(self) -> Option<Category> {
        match self {
            ContentOption::Analysis => Some(Category::Analysis),
            ContentOption::Association => Some(Category::Association),
            ContentOption::Skepticism => Some(Category::Skepticism),
            ContentOption::Provocation => Some(Category::Provocation),
            ContentOption::AllContent | ContentOption::Others => None,
        }
    }

    pub fn matches(self, c: &ClassifiedComment) -> bool {
        match self {
            ContentOption::AllContent => true,
            ContentOption::Others => c.is_peripheral(),
            other => c.has(other.category().expect("category option")),
        }
    }
}

impl FromStr for ContentOption {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "all_content" | "allcontent" => Ok(ContentOption::AllContent),
            "analysis" => Ok(ContentOption::Analysis),
            "association" => Ok(ContentOption::Association),
            "skepticism" => Ok(ContentOption::Skepticism),
            "provocation" => Ok(ContentOption::Provocation),
            "others" => Ok(ContentOption::Others),
            _ => Err(FilterError::UnknownOption {
                facet: "content",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FilterError {
    #[error("no main point with index {0}")]
    UnknownPointIndex(usize),
    #[error("unknown {facet} value {value:?}")]
    UnknownOption { facet: &'static str, value: String },
    #[error("point must be a non-negative integer, got {0:?}")]
    BadPoint(String),
    #[error("processed output belongs to {processed:?}, not {article:?}")]
    ArticleMismatch { processed: String, article: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterQuery {
    /// Empty means all content.
    #[serde(default)]
    pub content: BTreeSet<ContentOption>,
    /// Empty means every sentiment.
    #[serde(default)]
    pub sentiment: BTreeSet<Sentiment>,
    #[serde(default)]
    pub point: Option<usize>,
}

impl FilterQuery {
    pub fn content(mut self, options: impl IntoIterator<Item = ContentOption>) -> Self {
        self.content.extend(options);
        self
    }

    pub fn sentiment(mut self, options: impl IntoIterator<Item = Sentiment>) -> Self {
        self.sentiment.extend(options);
        self
    }

    pub fn point(mut self, index: usize) -> Self {
        self.point = Some(index);
        self
    }

    /// Parses comma-separated facet values as they appear in a URL query.
    pub fn from_params(
        content: Option<&str>,
        sentiment: Option<&str>,
        point: Option<&str>,
    ) -> Result<Self, FilterError> {
        let mut q = FilterQuery::default();
        for v in split_list(content) {
            q.content.insert(v.parse()?);
        }
        for v in split_list(sentiment) {
            q.sentiment
                .insert(v.to_ascii_lowercase().parse().map_err(|_| {
                    FilterError::UnknownOption {
                        facet: "sentiment",
                        value: v.to_string(),
                    }
                })?);
        }
        if let Some(p) = point.map(str::trim).filter(|p| !p.is_empty()) {
            q.point = Some(
                p.parse()
                    .map_err(|_| FilterError::BadPoint(p.to_string()))?,
            );
        }
        Ok(q)
    }

    fn content_matches(&self, c: &ClassifiedComment) -> bool {
        self.content.is_empty() || self.content.iter().any(|o| o.matches(c))
    }

    fn sentiment_matches(&self, c: &ClassifiedComment) -> bool {
        self.sentiment.is_empty() || self.sentiment.contains(&c.sentiment)
    }
}

fn split_list(raw: Option<&str>) -> impl Iterator<Item = &str> {
    raw.into_iter()
        .flat_map(|s| s.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

/// A level-1 comment and its tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedComment {
    #[serde(flatten)]
    pub comment: Comment,
    pub categories: BTreeSet<Category>,
    pub sentiment: Sentiment,
}

pub fn filter_comments<'a>(
    processed: &ProcessedArticle,
    article: &'a Article,
    query: &FilterQuery,
) -> Result<Vec<&'a Comment>, FilterError> {
    Ok(filter_tagged(processed, article, query)?
        .into_iter()
        .map(|(c, _)| c)
        .collect())
}

/// Like [`filter_comments`] but pairs each comment with its classification.
pub fn filter_tagged<'a, 'p>(
    processed: &'p ProcessedArticle,
    article: &'a Article,
    query: &FilterQuery,
) -> Result<Vec<(&'a Comment, &'p ClassifiedComment)>, FilterError> {
    if processed.article_id != article.id {
        return Err(FilterError::ArticleMismatch {
            processed: processed.article_id.clone(),
            article: article.id.clone(),
        });
    }
    let supporting = match query.point {
        Some(i) => Some(
            &processed
                .main_point(i)
                .ok_or(FilterError::UnknownPointIndex(i))?
                .supporting_comment_ids,
        ),
        None => None,
    };
    Ok(article
        .first_level()
        .filter_map(|comment| {
            let tags = processed.classification(&comment.id)?;
            let keep = query.content_matches(tags)
                && query.sentiment_matches(tags)
                && supporting.is_none_or(|s| s.contains(&comment.id));
            keep.then_some((comment, tags))
        })
        .collect())
}

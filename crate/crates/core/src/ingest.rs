//! Corpus loading and validation.
//!
//! A corpus file holds one article as a single JSON document:
//!
//! ```json
//! {
//!   "format_version": "cnr-corpus/1",
//!   "article": {
//!     "id": "...", "author": "...", "text": "...",
//!     "created_at": "2024-05-01T12:00:00Z",
//!     "metrics": { "likes": 0, "reply_count": 0 },
//!     "comments": [
//!       { "id": "...", "parent_id": "...", "author": "...", "text": "...", "level": 1 }
//!     ]
//!   }
//! }
//! ```
//!
//! Comments are flat and keep the order of the source page. Each comment
//! names its parent and its depth; the depth is re-derived from the parent
//! chain and must agree.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{Article, Comment};

pub const FORMAT_VERSION: &str = "cnr-corpus/1";
pub const MAX_ARTICLE_CHARS: usize = 20_000;
pub const MAX_COMMENT_CHARS: usize = 5_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub format_version: String,
    pub article: Article,
}

impl CorpusDocument {
    pub fn new(article: Article) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            article,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: file not found")]
    NotFound { path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed: {0}")]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("unsupported format_version {0:?}")]
    UnsupportedVersion(String),
    #[error("{field} must not be empty")]
    EmptyField { field: String },
    #[error("duplicate comment id {0:?}")]
    DuplicateId(String),
    #[error("comment {comment:?} reuses the article id")]
    CollidesWithArticle { comment: String },
    #[error("comment {comment:?} references missing parent {parent:?}")]
    DanglingParent { comment: String, parent: String },
    #[error("comment {comment:?} is its own ancestor")]
    Cycle { comment: String },
    #[error("comment {comment:?} has level {declared}, parent chain implies {expected}")]
    BadLevel {
        comment: String,
        declared: u32,
        expected: u32,
    },
    #[error("{field} has {chars} characters, limit is {limit}")]
    TooLong {
        field: String,
        chars: usize,
        limit: usize,
    },
}

/// Reads, parses and validates one corpus file.
pub fn load_article(path: impl AsRef<Path>) -> Result<Article, IngestError> {
    load_document(path).map(|doc| doc.article)
}

pub fn load_document(path: impl AsRef<Path>) -> Result<CorpusDocument, IngestError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            IngestError::NotFound {
                path: path.to_path_buf(),
            }
        } else {
            IngestError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    parse_document(&raw)
}

/// Parses and validates a corpus document from text.
pub fn parse_document(raw: &str) -> Result<CorpusDocument, IngestError> {
    let doc: CorpusDocument = serde_json::from_str(raw).map_err(|e| IngestError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate_document(&doc)?;
    Ok(doc)
}

pub fn validate_document(doc: &CorpusDocument) -> Result<(), ValidationError> {
    if doc.format_version != FORMAT_VERSION {
        return Err(ValidationError::UnsupportedVersion(
            doc.format_version.clone(),
        ));
    }
    validate_article(&doc.article)
}

pub fn validate_article(article: &Article) -> Result<(), ValidationError> {
    if article.id.is_empty() {
        return Err(ValidationError::EmptyField {
            field: "article.id".into(),
        });
    }
    check_len("article.text", &article.text, MAX_ARTICLE_CHARS)?;

    let mut by_id: HashMap<&str, &Comment> = HashMap::with_capacity(article.comments.len());
    for c in &article.comments {
        if c.id.is_empty() {
            return Err(ValidationError::EmptyField {
                field: "comment.id".into(),
            });
        }
        if c.id == article.id {
            return Err(ValidationError::CollidesWithArticle {
                comment: c.id.clone(),
            });
        }
        if by_id.insert(c.id.as_str(), c).is_some() {
            return Err(ValidationError::DuplicateId(c.id.clone()));
        }
        check_len(
            &format!("comment {:?} text", c.id),
            &c.text,
            MAX_COMMENT_CHARS,
        )?;
    }

    for c in &article.comments {
        let expected = depth(c, &article.id, &by_id)?;
        if expected != c.level {
            return Err(ValidationError::BadLevel {
                comment: c.id.clone(),
                declared: c.level,
                expected,
            });
        }
    }
    Ok(())
}

fn depth(
    comment: &Comment,
    article_id: &str,
    by_id: &HashMap<&str, &Comment>,
) -> Result<u32, ValidationError> {
    let mut level = 1u32;
    let mut current = comment;
    while current.parent_id != article_id {
        let parent = by_id.get(current.parent_id.as_str()).ok_or_else(|| {
            ValidationError::DanglingParent {
                comment: current.id.clone(),
                parent: current.parent_id.clone(),
            }
        })?;
        level += 1;
        if level as usize > by_id.len() {
            return Err(ValidationError::Cycle {
                comment: comment.id.clone(),
            });
        }
        current = parent;
    }
    Ok(level)
}

fn check_len(field: &str, text: &str, limit: usize) -> Result<(), ValidationError> {
    let chars = text.chars().count();
    if chars > limit {
        return Err(ValidationError::TooLong {
            field: field.to_string(),
            chars,
            limit,
        });
    }
    Ok(())
}

/// The first-level comments, in article order.
pub fn first_level_comments(article: &Article) -> Vec<&Comment> {
    article.first_level().collect()
}

/// A news body joined with one first-level comment: the classifier input unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NewsCommentPair<'a> {
    pub news_text: &'a str,
    pub comment: &'a Comment,
}

pub fn make_pairs(article: &Article) -> Vec<NewsCommentPair<'_>> {
    article
        .first_level()
        .map(|comment| NewsCommentPair {
            news_text: &article.text,
            comment,
        })
        .collect()
}

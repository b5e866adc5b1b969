//! Which classified comments feed which generation stage.

use crate::model::{Article, ClassifiedComment, Comment};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RoutingError {
    #[error("comment {comment_id:?} is not {expected}")]
    Violation {
        comment_id: String,
        expected: &'static str,
    },
    #[error("comment {0:?} is not a first-level comment of the article")]
    UnknownComment(String),
}

/// Contextualization or External Information comments, in input order.
pub fn route_informational(classified: &[ClassifiedComment]) -> Vec<ClassifiedComment> {
    classified
        .iter()
        .filter(|c| c.is_informational())
        .cloned()
        .collect()
}

/// Skepticism or Provocation comments, in input order.
pub fn route_inspiring(classified: &[ClassifiedComment]) -> Vec<ClassifiedComment> {
    classified
        .iter()
        .filter(|c| c.is_inspiring())
        .cloned()
        .collect()
}

/// Checks every routed comment against `accept` and resolves it to its
/// first-level comment in the article.
pub(crate) fn resolve<'a>(
    article: &'a Article,
    routed: &[ClassifiedComment],
    accept: fn(&ClassifiedComment) -> bool,
    expected: &'static str,
) -> Result<Vec<&'a Comment>, RoutingError> {
    routed
        .iter()
        .map(|c| {
            if !accept(c) {
                return Err(RoutingError::Violation {
                    comment_id: c.comment_id.clone(),
                    expected,
                });
            }
            article
                .comment(&c.comment_id)
                .filter(|x| x.is_first_level())
                .ok_or_else(|| RoutingError::UnknownComment(c.comment_id.clone()))
        })
        .collect()
}

/// `[n] text` lines with 1-based ordinals, the format prompts use for comments.
pub(crate) fn numbered(comments: &[&Comment], first_ordinal: usize) -> Vec<String> {
    comments
        .iter()
        .enumerate()
        .map(|(i, c)| format!("[{}] {}", first_ordinal + i, one_line(&c.text)))
        .collect()
}

pub(crate) fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

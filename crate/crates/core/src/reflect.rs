//! Critical-thinking keywords and questions from inspiring comments.

use std::collections::BTreeSet;

use crate::gateway::{
    parse, DecodeSettings, Gateway, GatewayError, GatewayRequest, KEYWORDS_TEMPLATE,
    QUESTIONS_TEMPLATE,
};
use crate::model::{is_inspiring, Article, ClassifiedComment, Comment, CriticalHint};
use crate::routing::{numbered, resolve, RoutingError};

pub const MAX_KEYWORDS: usize = 6;
pub const MAX_KEYWORD_CHARS: usize = 40;
pub const MAX_QUESTIONS: usize = 3;
const NO_COMMENTS: &str = "(no comments)";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReflectError {
    #[error("no keywords to generate questions for")]
    NoKeywords,
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub struct Reflector {
    gateway: Gateway,
}

impl Reflector {
    pub fn new(gateway: Gateway) -> Self {
        Self { gateway }
    }

    /// Up to [`MAX_KEYWORDS`] distinct keywords (case-insensitive), each at
    /// most [`MAX_KEYWORD_CHARS`] characters, in the order the backend gave.
    pub fn extract_keywords(
        &self,
        article: &Article,
        inspiring: &[ClassifiedComment],
    ) -> Result<Vec<String>, ReflectError> {
        let comments = resolve(article, inspiring, is_inspiring, "inspiring")?;
        let base = GatewayRequest::new(KEYWORDS_TEMPLATE, DecodeSettings::generate(64))
            .bind("news", article.text.as_str());
        let mut keywords = Vec::new();
        for lines in self.comment_chunks(&base, &comments)? {
            let req = base.clone().bind("comments", lines);
            keywords.extend(self.gateway.complete_with(&req, parse::parse_keywords)?.0);
        }
        Ok(finish_keywords(keywords))
    }

    /// One hint per keyword with 1 to [`MAX_QUESTIONS`] questions. A keyword
    /// whose replies never parse is dropped.
    pub fn generate_questions(
        &self,
        article: &Article,
        inspiring: &[ClassifiedComment],
        keywords: &[String],
    ) -> Result<Vec<CriticalHint>, ReflectError> {
        if keywords.is_empty() {
            return Err(ReflectError::NoKeywords);
        }
        let comments = resolve(article, inspiring, is_inspiring, "inspiring")?;
        let mut hints = Vec::with_capacity(keywords.len());
        for keyword in keywords {
            let base = GatewayRequest::new(QUESTIONS_TEMPLATE, DecodeSettings::generate(256))
                .bind("news", article.text.as_str())
                .bind("keyword", keyword.as_str());
            let mut questions: Vec<String> = Vec::new();
            for lines in self.comment_chunks(&base, &comments)? {
                let req = base.clone().bind("comments", lines);
                match self.gateway.complete_with(&req, parse::parse_questions) {
                    Ok((qs, _)) => {
                        for q in qs {
                            if !questions.iter().any(|x| x.eq_ignore_ascii_case(&q)) {
                                questions.push(q);
                            }
                        }
                    }
                    Err(GatewayError::RetriesExhausted { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            questions.truncate(MAX_QUESTIONS);
            if questions.is_empty() {
                tracing::warn!(%keyword, "no parseable questions; keyword dropped");
                continue;
            }
            hints.push(CriticalHint {
                keyword: keyword.clone(),
                questions,
            });
        }
        Ok(hints)
    }

    /// Keywords then questions; no keywords means no hints.
    pub fn reflect_article(
        &self,
        article: &Article,
        inspiring: &[ClassifiedComment],
    ) -> Result<Vec<CriticalHint>, ReflectError> {
        let keywords = self.extract_keywords(article, inspiring)?;
        if keywords.is_empty() {
            return Ok(Vec::new());
        }
        self.generate_questions(article, inspiring, &keywords)
    }

    fn comment_chunks(
        &self,
        base: &GatewayRequest,
        comments: &[&Comment],
    ) -> Result<Vec<String>, GatewayError> {
        if comments.is_empty() {
            return Ok(vec![NO_COMMENTS.to_string()]);
        }
        let lines = numbered(comments, 1);
        Ok(self
            .gateway
            .chunk_for_budget(base, "comments", &lines, "\n")?
            .into_iter()
            .map(|r| lines[r].join("\n"))
            .collect())
    }
}

fn finish_keywords(raw: Vec<String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for kw in raw {
        let kw = kw.trim().to_string();
        if kw.is_empty() {
            continue;
        }
        if kw.chars().count() > MAX_KEYWORD_CHARS {
            tracing::warn!(keyword = %kw, "keyword longer than {MAX_KEYWORD_CHARS} characters dropped");
            continue;
        }
        if seen.insert(kw.to_lowercase()) {
            out.push(kw);
        }
    }
    out.truncate(MAX_KEYWORDS);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{BackendCall, BackendError, ResponderBackend};
    use crate::model::{Category, Sentiment};
    use chrono::DateTime;

    fn article() -> Article {
        Article {
            id: "gym".into(),
            author: "<Name>".into(),
            text: "A gym chain lets members use the locker room matching their gender identity."
                .into(),
            created_at: DateTime::from_timestamp(1_700_000_000, 0).unwrap(),
            metrics: Default::default(),
            comments: vec![
                Comment {
                    id: "s1".into(),
                    parent_id: "gym".into(),
                    author: "<Name>".into(),
                    text: "Who checked that this policy is even real?".into(),
                    level: 1,
                },
                Comment {
                    id: "e1".into(),
                    parent_id: "gym".into(),
                    author: "<Name>".into(),
                    text: "lol gym selfies incoming".into(),
                    level: 1,
                },
            ],
        }
    }

    fn skeptic() -> ClassifiedComment {
        ClassifiedComment::new("s1", [Category::Skepticism], Sentiment::Negative)
    }

    fn reflector(
        respond: impl Fn(BackendCall<'_>) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Reflector {
        Reflector::new(Gateway::with_backend(ResponderBackend::new("t", respond)))
    }

    #[test]
    fn keywords_from_backend() {
        let r = reflector(|_| Ok("safety\nprivacy\nchildren".into()));
        assert_eq!(
            r.extract_keywords(&article(), &[skeptic()]).unwrap(),
            ["safety", "privacy", "children"]
        );
    }

    #[test]
    fn keywords_dedup_cap_and_length() {
        let r = reflector(|_| {
            Ok(format!(
                "Safety\nsafety\n{}\na\nb\nc\nd\ne\nf",
                "x".repeat(41)
            ))
        });
        let kws = r.extract_keywords(&article(), &[skeptic()]).unwrap();
        assert_eq!(kws, ["Safety", "a", "b", "c", "d", "e"]);
    }

    #[test]
    fn routing_guard() {
        let r = reflector(|_| Ok("x".into()));
        let fun = ClassifiedComment::new("e1", [Category::Entertainment], Sentiment::Positive);
        assert!(matches!(
            r.extract_keywords(&article(), &[fun]),
            Err(ReflectError::Routing(RoutingError::Violation { .. }))
        ));
    }

    #[test]
    fn article_only_extraction_may_be_empty() {
        let r = reflector(|c| {
            assert!(c.prompt.contains(NO_COMMENTS));
            Ok("none".into())
        });
        assert!(r.reflect_article(&article(), &[]).unwrap().is_empty());
    }

    #[test]
    fn questions_per_keyword() {
        let r = reflector(|c| {
            Ok(if c.prompt.contains("Keyword: locker room safety") {
                "- How can it ensure the safety and comfort of all patrons?\n- Who was consulted"
                    .into()
            } else {
                "- What data supports this?".into()
            })
        });
        let hints = r
            .generate_questions(
                &article(),
                &[skeptic()],
                &["locker room safety".to_string(), "evidence".to_string()],
            )
            .unwrap();
        assert_eq!(hints.len(), 2);
        assert_eq!(hints[0].keyword, "locker room safety");
        assert_eq!(
            hints[0].questions,
            [
                "How can it ensure the safety and comfort of all patrons?",
                "Who was consulted?"
            ]
        );
        assert!(hints
            .iter()
            .all(|h| h.questions.iter().all(|q| q.ends_with('?'))));
    }

    #[test]
    fn unparseable_keyword_dropped_others_kept() {
        let r = reflector(|c| {
            Ok(if c.prompt.contains("Keyword: bad") {
                "   ".into()
            } else {
                "- Is it fair?".into()
            })
        });
        let hints = r
            .generate_questions(
                &article(),
                &[skeptic()],
                &["good".to_string(), "bad".to_string(), "fine".to_string()],
            )
            .unwrap();
        let kws: Vec<_> = hints.iter().map(|h| h.keyword.as_str()).collect();
        assert_eq!(kws, ["good", "fine"]);
    }

    #[test]
    fn backend_failure_propagates() {
        let r = reflector(|_| Err(BackendError::Timeout));
        assert_eq!(
            r.generate_questions(&article(), &[], &["k".to_string()])
                .unwrap_err(),
            ReflectError::Gateway(GatewayError::Timeout)
        );
        assert_eq!(
            r.generate_questions(&article(), &[], &[]).unwrap_err(),
            ReflectError::NoKeywords
        );
    }

    #[test]
    fn at_most_three_questions() {
        let r = reflector(|_| Ok("- a?\n- b?\n- c?\n- d?".into()));
        let hints = r
            .generate_questions(&article(), &[], &["k".to_string()])
            .unwrap();
        assert_eq!(hints[0].questions.len(), 3);
    }
}

//! Comment-enhanced main points and their supporting comments.
//!
//! Two calls per article: one generates the points from the news body and
//! the informational comments, a second links each point to the comments
//! that contribute to it.

use std::collections::BTreeSet;

use crate::gateway::{
    parse, DecodeSettings, Gateway, GatewayError, GatewayRequest, LINK_TEMPLATE,
    SUMMARIZE_MERGE_TEMPLATE, SUMMARIZE_TEMPLATE,
};
use crate::model::{is_informational, Article, ClassifiedComment, MainPoint};
use crate::routing::{numbered, one_line, resolve, RoutingError};

pub const MIN_POINTS: usize = 3;
pub const MAX_POINTS: usize = 8;
pub const MAX_POINT_CHARS: usize = 240;
const NO_COMMENTS: &str = "(no informative comments)";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SummarizeError {
    #[error("article has no text to summarize")]
    EmptyArticle,
    #[error("no main points to link")]
    NoPoints,
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub struct Summarizer {
    gateway: Gateway,
}

impl Summarizer {
    pub fn new(gateway: Gateway) -> Self {
        Self { gateway }
    }

    /// Main points from the article and its informational comments: at most
    /// [`MAX_POINTS`], each trimmed to [`MAX_POINT_CHARS`]. Falls back to the
    /// article alone when `informational` is empty.
    pub fn generate_main_points(
        &self,
        article: &Article,
        informational: &[ClassifiedComment],
    ) -> Result<Vec<String>, SummarizeError> {
        if article.text.trim().is_empty() {
            return Err(SummarizeError::EmptyArticle);
        }
        let comments = resolve(article, informational, is_informational, "informational")?;
        let lines = numbered(&comments, 1);
        let base = GatewayRequest::new(SUMMARIZE_TEMPLATE, DecodeSettings::generate(512))
            .bind("news", article.text.as_str());

        let chunks = self
            .gateway
            .chunk_for_budget(&base, "comments", &lines, "\n")?;
        let points = if chunks.len() == 1 {
            self.summarize(base, &lines)?
        } else {
            tracing::info!(chunks = chunks.len(), "summarizing comments in chunks");
            let mut drafts = Vec::new();
            for range in chunks {
                drafts.extend(self.summarize(base.clone(), &lines[range])?);
            }
            let merge =
                GatewayRequest::new(SUMMARIZE_MERGE_TEMPLATE, DecodeSettings::generate(512))
                    .bind("news", article.text.as_str())
                    .bind(
                        "comments",
                        drafts
                            .iter()
                            .map(|d| format!("- {d}"))
                            .collect::<Vec<_>>()
                            .join("\n"),
                    );
            self.gateway.complete_with(&merge, parse::parse_bullets)?.0
        };
        Ok(finish_points(points))
    }

    fn summarize(
        &self,
        req: GatewayRequest,
        lines: &[String],
    ) -> Result<Vec<String>, SummarizeError> {
        let comments = if lines.is_empty() {
            NO_COMMENTS.to_string()
        } else {
            lines.join("\n")
        };
        let req = req.bind("comments", comments);
        Ok(self.gateway.complete_with(&req, parse::parse_bullets)?.0)
    }

    /// Links each point to the informational comments the backend cites.
    /// Citations of comments outside the provided set are dropped.
    pub fn link_relevance(
        &self,
        article: &Article,
        points: &[String],
        informational: &[ClassifiedComment],
    ) -> Result<Vec<MainPoint>, SummarizeError> {
        if points.is_empty() {
            return Err(SummarizeError::NoPoints);
        }
        let comments = resolve(article, informational, is_informational, "informational")?;
        let mut support: Vec<BTreeSet<String>> = vec![BTreeSet::new(); points.len()];

        if !comments.is_empty() {
            let lines = numbered(&comments, 1);
            let point_list = points
                .iter()
                .enumerate()
                .map(|(i, p)| format!("{}. {}", i + 1, one_line(p)))
                .collect::<Vec<_>>()
                .join("\n");
            let base = GatewayRequest::new(LINK_TEMPLATE, DecodeSettings::generate(256))
                .bind("points", point_list);
            for range in self
                .gateway
                .chunk_for_budget(&base, "comments", &lines, "\n")?
            {
                let req = base
                    .clone()
                    .bind("comments", lines[range.clone()].join("\n"));
                let (cited, _) = self.gateway.complete_with(&req, parse::parse_citations)?;
                for (point, ordinals) in cited {
                    let Some(slot) = point.checked_sub(1).and_then(|i| support.get_mut(i)) else {
                        tracing::warn!(point, "backend cited an unknown main point; ignored");
                        continue;
                    };
                    for ordinal in ordinals {
                        // ordinals are global; only those shown in this chunk count
                        match ordinal.checked_sub(1).filter(|i| range.contains(i)) {
                            Some(i) => {
                                slot.insert(comments[i].id.clone());
                            }
                            None => tracing::warn!(
                                point,
                                ordinal,
                                "backend cited a comment that was not provided; link dropped"
                            ),
                        }
                    }
                }
            }
        }

        Ok(points
            .iter()
            .zip(support)
            .enumerate()
            .map(|(i, (text, ids))| MainPoint {
                index: i + 1,
                text: text.clone(),
                supporting_comment_ids: ids,
            })
            .collect())
    }

    /// Both steps in order.
    pub fn summarize_article(
        &self,
        article: &Article,
        informational: &[ClassifiedComment],
    ) -> Result<Vec<MainPoint>, SummarizeError> {
        let points = self.generate_main_points(article, informational)?;
        self.link_relevance(article, &points, informational)
    }
}

fn finish_points(points: Vec<String>) -> Vec<String> {
    if points.len() < MIN_POINTS {
        tracing::debug!(count = points.len(), "fewer main points than requested");
    }
    points
        .into_iter()
        .map(|p| truncate_chars(p.trim(), MAX_POINT_CHARS))
        .filter(|p| !p.is_empty())
        .take(MAX_POINTS)
        .collect()
}

/// Cuts to at most `limit` characters, marking the cut with an ellipsis.
pub fn truncate_chars(text: &str, limit: usize) -> String {
    if text.chars().count() <= limit {
        return text.to_string();
    }
    let head: String = text.chars().take(limit - 1).collect();
    format!("{}…", head.trim_end())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{BackendCall, GatewayConfig, ResponderBackend, TemplateSet};
    use crate::model::{Category, Comment, Sentiment};
    use chrono::DateTime;
    use parking_lot::Mutex;
    use std::sync::Arc;

    fn article(n: usize) -> Article {
        Article {
            id: "a".into(),
            author: "<Name>".into(),
            text: "The city of <City> closed two bridges after flooding.".into(),
            created_at: DateTime::from_timestamp(1_700_000_000, 0).unwrap(),
            metrics: Default::default(),
            comments: (1..=n)
                .map(|i| Comment {
                    id: format!("c{i}"),
                    parent_id: "a".into(),
                    author: "<Name>".into(),
                    text: format!("comment number {i} with details"),
                    level: 1,
                })
                .collect(),
        }
    }

    fn info(id: &str) -> ClassifiedComment {
        ClassifiedComment::new(id, [Category::ExternalInformation], Sentiment::Neutral)
    }

    fn summarizer(
        respond: impl Fn(BackendCall<'_>) -> String + Send + Sync + 'static,
    ) -> Summarizer {
        Summarizer::new(Gateway::with_backend(ResponderBackend::new(
            "t",
            move |c| Ok(respond(c)),
        )))
    }

    #[test]
    fn recorded_bullets_kept_in_order() {
        let s = summarizer(|_| "- one\n- two\n- three\n- four\n- five".into());
        let points = s.generate_main_points(&article(2), &[info("c1")]).unwrap();
        assert_eq!(points, ["one", "two", "three", "four", "five"]);
    }

    #[test]
    fn empty_informational_falls_back_to_article() {
        let prompts = Arc::new(Mutex::new(Vec::new()));
        let p2 = prompts.clone();
        let s = summarizer(move |c| {
            p2.lock().push(c.prompt.to_string());
            "- the bridges closed".into()
        });
        let points = s.generate_main_points(&article(2), &[]).unwrap();
        assert_eq!(points.len(), 1);
        assert!(prompts.lock()[0].contains(NO_COMMENTS));
    }

    #[test]
    fn routing_guard() {
        let s = summarizer(|_| "- x".into());
        let analysis = ClassifiedComment::new("c1", [Category::Analysis], Sentiment::Neutral);
        assert!(matches!(
            s.generate_main_points(&article(2), &[analysis]),
            Err(SummarizeError::Routing(RoutingError::Violation { .. }))
        ));
        assert!(matches!(
            s.generate_main_points(&article(2), &[info("zz")]),
            Err(SummarizeError::Routing(RoutingError::UnknownComment(_)))
        ));
    }

    #[test]
    fn empty_article_rejected() {
        let s = summarizer(|_| "- x".into());
        let mut a = article(0);
        a.text = "  ".into();
        assert_eq!(
            s.generate_main_points(&a, &[]).unwrap_err(),
            SummarizeError::EmptyArticle
        );
    }

    #[test]
    fn points_capped_and_trimmed() {
        let long = "x".repeat(300);
        let s = summarizer(move |_| {
            let mut out: Vec<String> = (1..=10).map(|i| format!("- p{i}")).collect();
            out[0] = format!("- {long}");
            out.join("\n")
        });
        let points = s.generate_main_points(&article(1), &[]).unwrap();
        assert_eq!(points.len(), MAX_POINTS);
        assert_eq!(points[0].chars().count(), MAX_POINT_CHARS);
        assert!(points[0].ends_with('…'));
    }

    #[test]
    fn links_map_ordinals_and_drop_unknown() {
        // informational comments are c2 and c7 -> ordinals [1] and [2]
        let s = summarizer(|_| "1: [1] [2]\n2: [99]\n3: none\n9: [1]".into());
        let points: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let linked = s
            .link_relevance(&article(8), &points, &[info("c2"), info("c7")])
            .unwrap();
        assert_eq!(linked.len(), 3);
        assert_eq!(
            linked[0].supporting_comment_ids,
            BTreeSet::from(["c2".to_string(), "c7".to_string()])
        );
        assert!(linked[1].supporting_comment_ids.is_empty());
        assert!(linked[2].supporting_comment_ids.is_empty());
        assert_eq!(
            linked.iter().map(|p| p.index).collect::<Vec<_>>(),
            [1, 2, 3]
        );
    }

    #[test]
    fn linking_without_comments_makes_no_call() {
        let s = summarizer(|_| panic!("no call expected"));
        let linked = s
            .link_relevance(&article(1), &["a".to_string()], &[])
            .unwrap();
        assert!(linked[0].supporting_comment_ids.is_empty());
        assert_eq!(
            s.link_relevance(&article(1), &[], &[]).unwrap_err(),
            SummarizeError::NoPoints
        );
    }

    #[test]
    fn oversized_comment_lists_are_chunked_and_merged() {
        let calls = Arc::new(Mutex::new(Vec::new()));
        let c2 = calls.clone();
        let backend = ResponderBackend::new("t", move |c| {
            c2.lock()
                .push((c.template.to_string(), c.prompt.to_string()));
            Ok(match c.template {
                SUMMARIZE_TEMPLATE => "- draft".into(),
                SUMMARIZE_MERGE_TEMPLATE => "- merged one\n- merged two".into(),
                LINK_TEMPLATE => {
                    // cite every ordinal visible in this chunk for point 1
                    let cited: Vec<String> = (1..=40)
                        .filter(|i| c.prompt.contains(&format!("[{i}] ")))
                        .map(|i| format!("[{i}]"))
                        .collect();
                    format!("1: {}", cited.join(" "))
                }
                other => panic!("unexpected {other}"),
            })
        });
        let gw = Gateway::new(
            Arc::new(backend),
            TemplateSet::builtin(),
            GatewayConfig {
                context_budget_chars: 1_400,
                ..Default::default()
            },
        );
        let s = Summarizer::new(gw);
        let a = article(30);
        let informational: Vec<_> = a.comments.iter().map(|c| info(&c.id)).collect();
        let points = s.summarize_article(&a, &informational).unwrap();

        let calls = calls.lock();
        let summarize_calls = calls
            .iter()
            .filter(|(t, _)| t == SUMMARIZE_TEMPLATE)
            .count();
        assert!(summarize_calls > 1);
        assert_eq!(
            calls
                .iter()
                .filter(|(t, _)| t == SUMMARIZE_MERGE_TEMPLATE)
                .count(),
            1
        );
        assert!(calls
            .iter()
            .all(|(_, p)| p.chars().count() <= 1_400 || p.contains("Draft points")));
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].text, "merged one");
        // every comment appears in exactly one link chunk, so all 30 are cited
        assert_eq!(points[0].supporting_comment_ids.len(), 30);
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        let s = "é".repeat(250);
        let t = truncate_chars(&s, 240);
        assert_eq!(t.chars().count(), 240);
    }
}

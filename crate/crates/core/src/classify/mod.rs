//! Eleven per-category yes/no classifiers and one ternary sentiment
//! classifier over news-comment pairs, plus evaluation metrics and
//! inter-rater agreement.

mod agreement;
mod fewshot;
mod metrics;

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;

pub use agreement::{
    align_ratings, gwet_ac1, load_ratings, AgreementError, AgreementResult, RatingsError,
};
pub use fewshot::{Exemplar, FewShotBank, FewShotError, FEWSHOT_FORMAT_VERSION};
pub use metrics::{
    evaluate, load_gold, parse_gold, ClassifierMetrics, ConfusionCounts, EvalError,
    EvaluationReport, GoldError, LabeledExample, ACCURACY_GATE, F1_GATE,
};

use crate::gateway::{
    classifier_template_name, parse, DecodeSettings, Gateway, GatewayError, GatewayRequest,
    SENTIMENT_TEMPLATE,
};
use crate::model::{Article, Category, ClassifiedComment, Comment, Sentiment};

/// Calls made per comment on the success path: one per category plus sentiment.
pub const CALLS_PER_COMMENT: usize = Category::ALL.len() + 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error("comment {comment_id:?}, {} classifier: {source}", .category.map(Category::as_str).unwrap_or("sentiment"))]
    Gateway {
        comment_id: String,
        /// `None` for the sentiment call.
        category: Option<Category>,
        #[source]
        source: GatewayError,
    },
    #[error("{failed} of {total} comments failed classification; first: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: Box<ClassifyError>,
    },
}

/// Per-article classification outcome. Failed comments (within the
/// tolerated rate) are listed separately and absent from `classified`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticleClassification {
    pub classified: Vec<ClassifiedComment>,
    pub failed: Vec<(String, ClassifyError)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    pipeline_version: String,
    article_id: String,
    comment_id: String,
}

pub struct Classifier {
    gateway: Gateway,
    bank: FewShotBank,
    pipeline_version: String,
    /// Fraction of comments allowed to fail before the whole article fails.
    max_failure_rate: f64,
    cache: Mutex<HashMap<CacheKey, ClassifiedComment>>,
}

impl Classifier {
    pub fn new(gateway: Gateway, bank: FewShotBank, pipeline_version: impl Into<String>) -> Self {
        Self {
            gateway,
            bank,
            pipeline_version: pipeline_version.into(),
            max_failure_rate: 0.10,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_max_failure_rate(mut self, rate: f64) -> Self {
        self.max_failure_rate = rate;
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// Builds the request for one category's classifier.
    pub fn category_request(
        &self,
        category: Category,
        news: &str,
        comment: &str,
    ) -> GatewayRequest {
        GatewayRequest::new(classifier_template_name(category), DecodeSettings::CLASSIFY)
            .bind("news", news)
            .bind("comment", comment)
            .bind("exemplars", self.bank.render(category))
    }

    pub fn sentiment_request(&self, news: &str, comment: &str) -> GatewayRequest {
        GatewayRequest::new(SENTIMENT_TEMPLATE, DecodeSettings::CLASSIFY)
            .bind("news", news)
            .bind("comment", comment)
    }

    /// Runs all eleven category classifiers and the sentiment classifier.
    /// Any failure discards the partial result.
    pub fn classify_comment(
        &self,
        news_text: &str,
        comment: &Comment,
    ) -> Result<ClassifiedComment, ClassifyError> {
        self.classify_text(&comment.id, news_text, &comment.text)
    }

    pub fn classify_text(
        &self,
        comment_id: &str,
        news_text: &str,
        comment_text: &str,
    ) -> Result<ClassifiedComment, ClassifyError> {
        let mut categories = BTreeSet::new();
        for category in Category::ALL {
            let req = self.category_request(category, news_text, comment_text);
            let (yes, _) = self
                .gateway
                .complete_with(&req, parse::parse_yes_no)
                .map_err(|source| ClassifyError::Gateway {
                    comment_id: comment_id.to_string(),
                    category: Some(category),
                    source,
                })?;
            if yes {
                categories.insert(category);
            }
        }
        let req = self.sentiment_request(news_text, comment_text);
        let (sentiment, _) = self
            .gateway
            .complete_with(&req, parse::parse_sentiment)
            .map_err(|source| ClassifyError::Gateway {
                comment_id: comment_id.to_string(),
                category: None,
                source,
            })?;
        Ok(ClassifiedComment {
            comment_id: comment_id.to_string(),
            categories,
            sentiment,
        })
    }

    /// Classifies every first-level comment, in article order, running up to
    /// the gateway's in-flight cap in parallel. `progress(done, total)` is
    /// called after each comment.
    pub fn classify_article(
        &self,
        article: &Article,
        progress: &(dyn Fn(usize, usize) + Sync),
    ) -> Result<ArticleClassification, ClassifyError> {
        let comments: Vec<&Comment> = article.first_level().collect();
        let total = comments.len();
        if total == 0 {
            return Ok(ArticleClassification {
                classified: Vec::new(),
                failed: Vec::new(),
            });
        }

        let results: Mutex<Vec<Option<Result<ClassifiedComment, ClassifyError>>>> =
            Mutex::new(vec![None; total]);
        let next = AtomicUsize::new(0);
        let done = AtomicUsize::new(0);
        let workers = self.gateway.config().max_in_flight.clamp(1, total);

        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= total {
                        break;
                    }
                    let outcome = self.classify_cached(article, comments[i]);
                    results.lock()[i] = Some(outcome);
                    progress(done.fetch_add(1, Ordering::SeqCst) + 1, total);
                });
            }
        });

        let mut classified = Vec::with_capacity(total);
        let mut failed = Vec::new();
        for (comment, outcome) in comments.iter().zip(results.into_inner()) {
            match outcome.expect("every index visited") {
                Ok(c) => classified.push(c),
                Err(e) => {
                    tracing::warn!(comment = %comment.id, error = %e, "comment classification failed");
                    failed.push((comment.id.clone(), e));
                }
            }
        }
        if failed.len() as f64 > self.max_failure_rate * total as f64 {
            let first = failed.swap_remove(0).1;
            return Err(ClassifyError::TooManyFailures {
                failed: failed.len() + 1,
                total,
                first: Box::new(first),
            });
        }
        Ok(ArticleClassification { classified, failed })
    }

    fn classify_cached(
        &self,
        article: &Article,
        comment: &Comment,
    ) -> Result<ClassifiedComment, ClassifyError> {
        let key = CacheKey {
            pipeline_version: self.pipeline_version.clone(),
            article_id: article.id.clone(),
            comment_id: comment.id.clone(),
        };
        if let Some(hit) = self.cache.lock().get(&key) {
            return Ok(hit.clone());
        }
        let fresh = self.classify_comment(&article.text, comment)?;
        self.cache.lock().insert(key, fresh.clone());
        Ok(fresh)
    }

    /// Predicts every gold item, for evaluation against its labels.
    pub fn predict_gold(
        &self,
        gold: &[LabeledExample],
    ) -> Result<Vec<ClassifiedComment>, ClassifyError> {
        gold.iter()
            .map(|ex| self.classify_text(&ex.id, &ex.news_text, &ex.comment_text))
            .collect()
    }
}

/// Fallback record for a comment whose classification failed.
pub fn unclassified(comment_id: &str) -> ClassifiedComment {
    ClassifiedComment {
        comment_id: comment_id.to_string(),
        categories: BTreeSet::new(),
        sentiment: Sentiment::Neutral,
    }
}

//! classify → route → summarize + reflect, producing a [`ProcessedArticle`].

use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::classify::{unclassified, Classifier, ClassifyError, FewShotBank};
use crate::gateway::Gateway;
use crate::model::{Article, ClassifiedComment, CriticalHint, ProcessedArticle};
use crate::reflect::{ReflectError, Reflector};
use crate::routing::{route_informational, route_inspiring};
use crate::summarize::{SummarizeError, Summarizer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Classifying,
    Summarizing,
    Reflecting,
    Done,
    Failed { reason: String },
}

impl JobState {
    /// Position in the forward order; `Failed` is terminal like `Done`.
    pub fn rank(&self) -> u8 {
        match self {
            JobState::Pending => 0,
            JobState::Classifying => 1,
            JobState::Summarizing => 2,
            JobState::Reflecting => 3,
            JobState::Done | JobState::Failed { .. } => 4,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.rank() == 4
    }

    pub fn is_running(&self) -> bool {
        (1..4).contains(&self.rank())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub processed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobStatus {
    pub article_id: String,
    #[serde(flatten)]
    pub state: JobState,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("classification: {0}")]
    Classify(#[from] ClassifyError),
    #[error("summarization: {0}")]
    Summarize(#[from] SummarizeError),
    #[error("reflection: {0}")]
    Reflect(#[from] ReflectError),
}

/// Where a run's `produced_at` timestamp comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProducedAt {
    Now,
    /// The article's own `created_at`; keeps scripted runs reproducible.
    ArticleCreated,
    Fixed(DateTime<Utc>),
}

impl ProducedAt {
    pub fn resolve(&self, article: &Article) -> DateTime<Utc> {
        match self {
            ProducedAt::Now => Utc::now(),
            ProducedAt::ArticleCreated => article.created_at,
            ProducedAt::Fixed(t) => *t,
        }
    }
}

pub struct Pipeline {
    classifier: Classifier,
    summarizer: Summarizer,
    reflector: Reflector,
    version: String,
}

/// `cnr-<crate version>+<prompt set version>`.
pub fn pipeline_version(gateway: &Gateway) -> String {
    format!(
        "cnr-{}+{}",
        env!("CARGO_PKG_VERSION"),
        gateway.templates().version()
    )
}

impl Pipeline {
    pub fn new(gateway: Gateway) -> Self {
        let version = pipeline_version(&gateway);
        Self {
            classifier: Classifier::new(gateway.clone(), FewShotBank::builtin(), version.clone()),
            summarizer: Summarizer::new(gateway.clone()),
            reflector: Reflector::new(gateway),
            version,
        }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    pub fn reflector(&self) -> &Reflector {
        &self.reflector
    }

    /// Runs every stage. `observe` sees each state change and each
    /// classified comment.
    pub fn process(
        &self,
        article: &Article,
        produced_at: DateTime<Utc>,
        observe: &(dyn Fn(JobState, Progress) + Sync),
    ) -> Result<ProcessedArticle, PipelineError> {
        let total = article.first_level().count();
        let at = |processed| Progress { processed, total };

        observe(JobState::Classifying, at(0));
        let started = Instant::now();
        let outcome = self
            .classifier
            .classify_article(article, &|done, _| observe(JobState::Classifying, at(done)))?;
        log_stage(article, "classify", started);

        // every level-1 comment gets a record, failures as empty tags
        let failures: Vec<String> = outcome.failed.iter().map(|(id, _)| id.clone()).collect();
        let classifications: Vec<ClassifiedComment> = article
            .first_level()
            .map(|c| {
                outcome
                    .classified
                    .iter()
                    .find(|x| x.comment_id == c.id)
                    .cloned()
                    .unwrap_or_else(|| unclassified(&c.id))
            })
            .collect();

        observe(JobState::Summarizing, at(total));
        let started = Instant::now();
        let main_points = self
            .summarizer
            .summarize_article(article, &route_informational(&classifications))?;
        log_stage(article, "summarize", started);

        observe(JobState::Reflecting, at(total));
        let started = Instant::now();
        let hints = self
            .reflector
            .reflect_article(article, &route_inspiring(&classifications))?;
        log_stage(article, "reflect", started);

        observe(JobState::Done, at(total));
        Ok(ProcessedArticle {
            article_id: article.id.clone(),
            classifications,
            main_points,
            hints,
            pipeline_version: self.version.clone(),
            produced_at: crate::model::timestamp::truncate(produced_at),
            classification_failures: failures,
        })
    }

    /// Hints from the article text alone, for the with/without-comments
    /// comparison. Uses the same prompts with an empty comment section.
    pub fn hints_without_comments(
        &self,
        article: &Article,
    ) -> Result<Vec<CriticalHint>, PipelineError> {
        Ok(self.reflector.reflect_article(article, &[])?)
    }
}

fn log_stage(article: &Article, stage: &str, started: Instant) {
    tracing::info!(
        article = %article.id,
        stage,
        elapsed_ms = started.elapsed().as_millis() as u64,
        "stage finished"
    );
}

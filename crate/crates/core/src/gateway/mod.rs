//! Single choke point for language-model calls.
//!
//! Requests name a template and its bindings; the gateway renders the prompt,
//! caps concurrent in-flight calls, parses the reply and retries unparseable
//! replies with a format nudge appended to the prompt.

mod backend;
mod http;
pub mod parse;
mod template;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};

pub use backend::{
    prompt_hash, Backend, BackendCall, BackendError, DecodeSettings, RecordingBackend,
    ResponderBackend, Script, ScriptEntry, ScriptError, ScriptedBackend, SCRIPT_FORMAT_VERSION,
};
pub use http::{HttpBackend, HttpBackendConfig, API_KEY_ENV};
pub use parse::Unparseable;
pub use template::{
    classifier_template_name, PromptTemplate, TaskKind, TemplateSet, EXEMPLARS_PER_LABEL,
    KEYWORDS_TEMPLATE, LINK_TEMPLATE, QUESTIONS_TEMPLATE, SENTIMENT_TEMPLATE, SIGIL_CLOSE,
    SIGIL_OPEN, SUMMARIZE_MERGE_TEMPLATE, SUMMARIZE_TEMPLATE, TEMPLATE_SET_VERSION,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("missing binding for placeholder {0:?}")]
    MissingBinding(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("invalid template {name:?}: {reason}")]
    InvalidTemplate { name: String, reason: String },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend timed out")]
    Timeout,
    #[error("no scripted response for prompt {hash} (template {template})")]
    ScriptMiss { hash: String, template: String },
    #[error("retries exhausted; last response {last_raw:?}")]
    RetriesExhausted { last_raw: String },
}

impl From<BackendError> for GatewayError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Unavailable(m) => GatewayError::BackendUnavailable(m),
            BackendError::Timeout => GatewayError::Timeout,
            BackendError::ScriptMiss { hash, template } => {
                GatewayError::ScriptMiss { hash, template }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Extra attempts after the first unparseable reply.
    pub retry_limit: usize,
    pub max_in_flight: usize,
    /// Character budget for a whole rendered prompt; comment lists that do
    /// not fit are split into chunks.
    pub context_budget_chars: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            retry_limit: 2,
            max_in_flight: 4,
            context_budget_chars: 16_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayRequest {
    pub template: String,
    pub bindings: BTreeMap<String, String>,
    pub decode: DecodeSettings,
}

impl GatewayRequest {
    pub fn new(template: impl Into<String>, decode: DecodeSettings) -> Self {
        Self {
            template: template.into(),
            bindings: BTreeMap::new(),
            decode,
        }
    }

    pub fn bind(mut self, key: &str, value: impl Into<String>) -> Self {
        self.bindings.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayResponse {
    pub text: String,
    pub latency: Duration,
    pub backend_id: String,
    /// Attempts made, including the successful one.
    pub attempts: usize,
}

/// Suffix appended to the prompt when a reply could not be parsed.
pub fn nudge(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::BinaryClassify => "Answer only yes or no.",
        TaskKind::SentimentClassify => "Answer only positive, neutral, or negative.",
        TaskKind::Summarize => "Answer only with a list of lines starting with \"- \".",
        TaskKind::LinkRelevance => "Answer only with lines like \"1: [2] [5]\".",
        TaskKind::ExtractKeywords => "Answer only with one keyword per line.",
        TaskKind::GenerateQuestions => "Answer only with one question per line.",
    }
}

struct Permits {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut n = self.available.lock();
        while *n == 0 {
            self.freed.wait(&mut n);
        }
        *n -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.available.lock() += 1;
        self.0.freed.notify_one();
    }
}

/// Shareable handle; clones share the backend, permits and counters.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
}

struct Inner {
    backend: Arc<dyn Backend>,
    templates: TemplateSet,
    config: GatewayConfig,
    permits: Permits,
    calls: AtomicU64,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, templates: TemplateSet, config: GatewayConfig) -> Self {
        let cap = config.max_in_flight.max(1);
        Self {
            inner: Arc::new(Inner {
                backend,
                templates,
                permits: Permits {
                    available: Mutex::new(cap),
                    freed: Condvar::new(),
                },
                config,
                calls: AtomicU64::new(0),
            }),
        }
    }

    /// Builtin templates and default configuration.
    pub fn with_backend(backend: impl Backend + 'static) -> Self {
        Self::new(
            Arc::new(backend),
            TemplateSet::builtin(),
            GatewayConfig::default(),
        )
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.inner.templates
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.inner.config
    }

    pub fn backend_id(&self) -> &str {
        self.inner.backend.id()
    }

    /// Backend calls issued so far, retries included.
    pub fn calls(&self) -> u64 {
        self.inner.calls.load(Ordering::Relaxed)
    }

    pub fn render(&self, req: &GatewayRequest) -> Result<String, GatewayError> {
        self.inner
            .templates
            .get(&req.template)?
            .render(&req.bindings)
    }

    /// Sends the request; empty replies count as unparseable.
    pub fn complete(&self, req: &GatewayRequest) -> Result<GatewayResponse, GatewayError> {
        self.complete_with(req, |raw| {
            if raw.trim().is_empty() {
                Err(Unparseable::new(raw))
            } else {
                Ok(())
            }
        })
        .map(|(_, resp)| resp)
    }

    /// Sends the request and parses the reply, retrying with a nudge up to
    /// `retry_limit` extra times.
    pub fn complete_with<T>(
        &self,
        req: &GatewayRequest,
        parse: impl Fn(&str) -> Result<T, Unparseable>,
    ) -> Result<(T, GatewayResponse), GatewayError> {
        let template = self.inner.templates.get(&req.template)?;
        let prompt = template.render(&req.bindings)?;
        let nudged = format!("{}\n{}\n", prompt.trim_end(), nudge(template.task_kind()));
        let started = Instant::now();
        let mut last_raw = String::new();
        for attempt in 0..=self.inner.config.retry_limit {
            let call = BackendCall {
                template: template.name(),
                prompt: if attempt == 0 { &prompt } else { &nudged },
                settings: req.decode,
            };
            let raw = {
                let _permit = self.inner.permits.acquire();
                self.inner.calls.fetch_add(1, Ordering::Relaxed);
                self.inner.backend.complete(call)?
            };
            match parse(&raw) {
                Ok(value) => {
                    return Ok((
                        value,
                        GatewayResponse {
                            text: raw,
                            latency: started.elapsed(),
                            backend_id: self.inner.backend.id().to_string(),
                            attempts: attempt + 1,
                        },
                    ))
                }
                Err(_) => {
                    tracing::debug!(template = template.name(), attempt, "unparseable reply");
                    last_raw = raw;
                }
            }
        }
        Err(GatewayError::RetriesExhausted { last_raw })
    }

    /// Splits `items` into ordered chunks so that the request rendered with
    /// one chunk bound to `slot` stays within the context budget.
    pub fn chunk_for_budget(
        &self,
        req: &GatewayRequest,
        slot: &str,
        items: &[String],
        separator: &str,
    ) -> Result<Vec<std::ops::Range<usize>>, GatewayError> {
        let mut empty = req.clone();
        empty.bindings.insert(slot.to_string(), String::new());
        let fixed = self.render(&empty)?.chars().count();
        let budget = self.inner.config.context_budget_chars.saturating_sub(fixed);
        Ok(chunk_by_budget(items, budget, separator.chars().count()))
    }
}

/// Greedy in-order chunking: each chunk's joined length stays within
/// `budget` characters, except that a single oversized item gets a chunk of
/// its own. Never returns an empty chunk; empty input gives one empty range.
pub fn chunk_by_budget(
    items: &[String],
    budget: usize,
    separator_chars: usize,
) -> Vec<std::ops::Range<usize>> {
    if items.is_empty() {
        #[allow(clippy::single_range_in_vec_init)]
        return vec![0..0];
    }
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut used = 0usize;
    for (i, item) in items.iter().enumerate() {
        let len = item.chars().count();
        let extra = if i == start {
            len
        } else {
            len + separator_chars
        };
        if i > start && used + extra > budget {
            chunks.push(start..i);
            start = i;
            used = len;
        } else {
            used += extra;
        }
    }
    chunks.push(start..items.len());
    chunks
}

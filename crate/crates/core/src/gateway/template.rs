use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::model::Category;

pub const SIGIL_OPEN: &str = "{{";
pub const SIGIL_CLOSE: &str = "}}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    BinaryClassify,
    SentimentClassify,
    Summarize,
    LinkRelevance,
    ExtractKeywords,
    GenerateQuestions,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::BinaryClassify,
        TaskKind::SentimentClassify,
        TaskKind::Summarize,
        TaskKind::LinkRelevance,
        TaskKind::ExtractKeywords,
        TaskKind::GenerateQuestions,
    ];

    /// The exact placeholder set a template of this kind must use.
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            TaskKind::BinaryClassify => &["comment", "exemplars", "news"],
            TaskKind::SentimentClassify => &["comment", "news"],
            TaskKind::Summarize => &["comments", "news"],
            TaskKind::LinkRelevance => &["comments", "points"],
            TaskKind::ExtractKeywords => &["comments", "news"],
            TaskKind::GenerateQuestions => &["comments", "keyword", "news"],
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, TaskKind::BinaryClassify | TaskKind::SentimentClassify)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::BinaryClassify => "binary_classify",
            TaskKind::SentimentClassify => "sentiment_classify",
            TaskKind::Summarize => "summarize",
            TaskKind::LinkRelevance => "link_relevance",
            TaskKind::ExtractKeywords => "extract_keywords",
            TaskKind::GenerateQuestions => "generate_questions",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| GatewayError::InvalidTemplate {
                name: String::new(),
                reason: format!("unknown task kind {s:?}"),
            })
    }
}

/// Number of few-shot exemplars a binary classifier prompt carries per label.
pub const EXEMPLARS_PER_LABEL: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    task_kind: TaskKind,
    body: String,
    few_shot_slots: usize,
}

impl PromptTemplate {
    pub fn new(
        name: impl Into<String>,
        task_kind: TaskKind,
        body: impl Into<String>,
        few_shot_slots: usize,
    ) -> Result<Self, GatewayError> {
        let name = name.into();
        let body = body.into();
        let invalid = |reason: String| GatewayError::InvalidTemplate {
            name: name.clone(),
            reason,
        };

        let found = scan_placeholders(&body).map_err(invalid)?;
        let declared: BTreeSet<&str> = task_kind.placeholders().iter().copied().collect();
        let used: BTreeSet<&str> = found.iter().map(String::as_str).collect();
        if used != declared {
            return Err(invalid(format!(
                "placeholders {used:?} differ from {declared:?} required by {task_kind}"
            )));
        }
        let expected_slots = match task_kind {
            TaskKind::BinaryClassify => 2 * EXEMPLARS_PER_LABEL,
            _ => 0,
        };
        if few_shot_slots != expected_slots {
            return Err(invalid(format!(
                "{task_kind} templates take {expected_slots} few-shot slots, got {few_shot_slots}"
            )));
        }
        Ok(Self {
            name,
            task_kind,
            body,
            few_shot_slots,
        })
    }

    /// Parses the on-disk form: `key: value` header lines, a `---` line, then the body.
    pub fn parse(source: &str) -> Result<Self, GatewayError> {
        let (header, body) =
            source
                .split_once("\n---\n")
                .ok_or_else(|| GatewayError::InvalidTemplate {
                    name: String::new(),
                    reason: "missing `---` header separator".into(),
                })?;
        let mut fields = BTreeMap::new();
        for line in header.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| GatewayError::InvalidTemplate {
                    name: String::new(),
                    reason: format!("bad header line {line:?}"),
                })?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| GatewayError::InvalidTemplate {
                    name: fields.get("name").cloned().unwrap_or_default(),
                    reason: format!("missing header {key:?}"),
                })
        };
        let name = get("name")?;
        let task_kind: TaskKind =
            get("task")?
                .parse()
                .map_err(|_| GatewayError::InvalidTemplate {
                    name: name.clone(),
                    reason: "unknown task kind".into(),
                })?;
        let slots =
            get("few_shot_slots")?
                .parse::<usize>()
                .map_err(|e| GatewayError::InvalidTemplate {
                    name: name.clone(),
                    reason: format!("few_shot_slots: {e}"),
                })?;
        Self::new(name, task_kind, body.trim_end().to_string() + "\n", slots)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn few_shot_slots(&self) -> usize {
        self.few_shot_slots
    }

    /// Substitutes every placeholder. Sigils inside bound values are broken
    /// up so the output never contains `{{` or `}}`.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<String, GatewayError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut rest = self.body.as_str();
        while let Some(start) = rest.find(SIGIL_OPEN) {
            out.push_str(&rest[..start]);
            let after = &rest[start + SIGIL_OPEN.len()..];
            // validated in `new`
            let end = after.find(SIGIL_CLOSE).expect("closed placeholder");
            let key = &after[..end];
            let value = bindings
                .get(key)
                .ok_or_else(|| GatewayError::MissingBinding(key.to_string()))?;
            out.push_str(&neutralize(value));
            rest = &after[end + SIGIL_CLOSE.len()..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn neutralize(value: &str) -> String {
    if !value.contains('{') && !value.contains('}') {
        return value.to_string();
    }
    let mut out = String::with_capacity(value.len() + 4);
    let mut prev = None;
    for ch in value.chars() {
        if (ch == '{' || ch == '}') && prev == Some(ch) {
            out.push(' ');
        }
        out.push(ch);
        prev = Some(ch);
    }
    // a trailing brace could pair with template text that follows
    if out.ends_with('{') || out.ends_with('}') {
        out.push(' ');
    }
    if out.starts_with('{') || out.starts_with('}') {
        out.insert(0, ' ');
    }
    out
}

fn scan_placeholders(body: &str) -> Result<Vec<String>, String> {
    let mut found = Vec::new();
    let mut rest = body;
    while let Some(start) = rest.find(SIGIL_OPEN) {
        let after = &rest[start + SIGIL_OPEN.len()..];
        let end = after
            .find(SIGIL_CLOSE)
            .ok_or_else(|| "unterminated placeholder".to_string())?;
        let key = &after[..end];
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
            return Err(format!("malformed placeholder name {key:?}"));
        }
        found.push(key.to_string());
        rest = &after[end + SIGIL_CLOSE.len()..];
    }
    if rest.contains(SIGIL_CLOSE) {
        return Err("stray closing sigil".into());
    }
    Ok(found)
}

/// Template name of the binary classifier for one category.
pub fn classifier_template_name(category: Category) -> String {
    format!("cls_{}", category.as_str())
}

pub const SENTIMENT_TEMPLATE: &str = "sentiment";
pub const SUMMARIZE_TEMPLATE: &str = "summarize";
pub const SUMMARIZE_MERGE_TEMPLATE: &str = "summarize_merge";
pub const LINK_TEMPLATE: &str = "link_relevance";
pub const KEYWORDS_TEMPLATE: &str = "extract_keywords";
pub const QUESTIONS_TEMPLATE: &str = "generate_questions";

/// Versioned prompt set compiled into the binary from `prompts/`.
pub const TEMPLATE_SET_VERSION: &str = "prompts-v1";

const BUILTIN: &[&str] = &[
    include_str!("../../prompts/v1/cls_contextualization.txt"),
    include_str!("../../prompts/v1/cls_external_information.txt"),
    include_str!("../../prompts/v1/cls_analysis.txt"),
    include_str!("../../prompts/v1/cls_association.txt"),
    include_str!("../../prompts/v1/cls_attitude.txt"),
    include_str!("../../prompts/v1/cls_skepticism.txt"),
    include_str!("../../prompts/v1/cls_provocation.txt"),
    include_str!("../../prompts/v1/cls_entertainment.txt"),
    include_str!("../../prompts/v1/cls_polarization.txt"),
    include_str!("../../prompts/v1/cls_advertisement.txt"),
    include_str!("../../prompts/v1/cls_nonsense.txt"),
    include_str!("../../prompts/v1/sentiment.txt"),
    include_str!("../../prompts/v1/summarize.txt"),
    include_str!("../../prompts/v1/summarize_merge.txt"),
    include_str!("../../prompts/v1/link_relevance.txt"),
    include_str!("../../prompts/v1/extract_keywords.txt"),
    include_str!("../../prompts/v1/generate_questions.txt"),
];

#[derive(Debug, Clone)]
pub struct TemplateSet {
    version: String,
    templates: BTreeMap<String, PromptTemplate>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let mut set = Self::empty(TEMPLATE_SET_VERSION);
        for source in BUILTIN {
            let t = PromptTemplate::parse(source).expect("builtin templates are valid");
            set.insert(t);
        }
        set
    }

    pub fn empty(version: impl Into<String>) -> Self {
        Self {
            version: version.into(),
            templates: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.name.clone(), template);
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, GatewayError> {
        self.templates
            .get(name)
            .ok_or_else(|| GatewayError::UnknownTemplate(name.to_string()))
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

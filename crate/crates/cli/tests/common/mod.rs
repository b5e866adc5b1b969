//! Shared helpers for the CLI integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cnr_core::gateway::{BackendCall, BackendError, ResponderBackend};
use cnr_core::ingest::load_article;
use cnr_core::model::{Article, Category, Sentiment};
use serde::Deserialize;

pub const GOLDEN_SCRIPT: &str = "golden/golden.script.json";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_articles() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixtures().join("articles"))
        .expect("fixtures/articles exists")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
}

pub fn cnr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnr"))
        .args(args)
        .env_remove("CNR_DATA_DIR")
        .env_remove("CNR_BACKEND_URL")
        .output()
        .expect("cnr binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Ingests the fixtures and processes them with the committed golden script.
/// Returns each article's processed document bytes, keyed by id.
pub fn golden_run(data_dir: &Path) -> BTreeMap<String, String> {
    let data = data_dir.to_str().unwrap();
    let files: Vec<String> = fixture_articles()
        .iter()
        .map(|p| p.to_str().unwrap().to_string())
        .collect();
    let mut args = vec!["ingest", "--data-dir", data];
    args.extend(files.iter().map(String::as_str));
    let o = cnr(&args);
    assert!(
        o.status.success(),
        "ingest failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );

    let script = fixtures().join(GOLDEN_SCRIPT);
    let o = cnr(&[
        "process",
        "--all",
        "--data-dir",
        data,
        "--scripted",
        script.to_str().unwrap(),
    ]);
    assert!(
        o.status.success(),
        "process failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );

    let store = cnr_core::store::Store::open(data_dir).unwrap();
    store
        .article_ids()
        .unwrap()
        .into_iter()
        .map(|id| {
            let bytes = std::fs::read_to_string(store.processed_path(&id)).unwrap();
            (id, bytes)
        })
        .collect()
}

#[derive(Debug, Deserialize)]
pub struct Annotations {
    pub articles: BTreeMap<String, ArticleAnnotation>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ArticleAnnotation {
    pub labels: BTreeMap<String, Label>,
    pub points: Vec<PointAnnotation>,
    pub hints: Vec<HintAnnotation>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Label {
    pub categories: Vec<Category>,
    pub sentiment: Sentiment,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PointAnnotation {
    pub text: String,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct HintAnnotation {
    pub keyword: String,
    pub questions: Vec<String>,
}

pub fn annotations() -> Annotations {
    let raw = std::fs::read_to_string(fixtures().join("golden/annotations.json")).unwrap();
    serde_json::from_str(&raw).unwrap()
}

/// A stand-in model that answers every prompt from the hand annotations.
pub fn annotated_backend() -> ResponderBackend {
    let ann = annotations();
    let articles: Vec<(Article, ArticleAnnotation)> = fixture_articles()
        .iter()
        .map(|p| {
            let a = load_article(p).unwrap();
            let note = ann.articles[&a.id].clone();
            (a, note)
        })
        .collect();
    ResponderBackend::new("annotated", move |call: BackendCall<'_>| {
        respond(&articles, call.template, call.prompt)
    })
}

fn respond(
    articles: &[(Article, ArticleAnnotation)],
    template: &str,
    prompt: &str,
) -> Result<String, BackendError> {
    let unknown = || BackendError::Unavailable(format!("no annotation answers {template}"));
    let by_news = || {
        articles
            .iter()
            .find(|(a, _)| prompt.contains(&format!("News:\n{}\n", a.text)))
            .ok_or_else(unknown)
    };
    let label_of = |tail: &str| -> Result<Label, BackendError> {
        let (article, note) = by_news()?;
        let body = prompt.rsplit("\nComment:\n").next().unwrap();
        let text = body.split(tail).next().unwrap().trim_end();
        let comment = article
            .comments
            .iter()
            .find(|c| c.text == text)
            .ok_or_else(unknown)?;
        note.labels.get(&comment.id).cloned().ok_or_else(unknown)
    };

    if let Some(cat) = template.strip_prefix("cls_") {
        let label = label_of("\n\nDoes the comment")?;
        let yes = label.categories.iter().any(|c| c.as_str() == cat);
        return Ok(if yes { "Yes" } else { "No" }.into());
    }
    match template {
        "sentiment" => Ok(label_of("\n\nIs the comment")?.sentiment.as_str().into()),
        "summarize" => {
            let (_, note) = by_news()?;
            Ok(note
                .points
                .iter()
                .map(|p| format!("- {}", p.text))
                .collect::<Vec<_>>()
                .join("\n"))
        }
        "link_relevance" => {
            let (article, note) = articles
                .iter()
                .find(|(_, n)| n.points.iter().all(|p| prompt.contains(&p.text)))
                .ok_or_else(unknown)?;
            let section = prompt
                .split("\nComments:\n")
                .nth(1)
                .and_then(|s| s.split("\n\n").next())
                .ok_or_else(unknown)?;
            let mut ordinal_of = BTreeMap::new();
            for line in section.lines() {
                let (num, text) = line
                    .strip_prefix('[')
                    .and_then(|l| l.split_once("] "))
                    .ok_or_else(unknown)?;
                if let Some(c) = article.comments.iter().find(|c| c.text == text) {
                    ordinal_of.insert(c.id.clone(), num.to_string());
                }
            }
            Ok(note
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let cited: Vec<String> = p
                        .sources
                        .iter()
                        .filter_map(|id| ordinal_of.get(id))
                        .map(|n| format!("[{n}]"))
                        .collect();
                    if cited.is_empty() {
                        format!("{}: none", i + 1)
                    } else {
                        format!("{}: {}", i + 1, cited.join(" "))
                    }
                })
                .collect::<Vec<_>>()
                .join("\n"))
        }
        "extract_keywords" => {
            let (_, note) = by_news()?;
            Ok(note
                .hints
                .iter()
                .map(|h| h.keyword.clone())
                .collect::<Vec<_>>()
                .join("\n"))
        }
        "generate_questions" => {
            let (_, note) = by_news()?;
            let hint = note
                .hints
                .iter()
                .find(|h| prompt.contains(&format!("Keyword: {}\n", h.keyword)))
                .ok_or_else(unknown)?;
            Ok(hint
                .questions
                .iter()
                .map(|q| format!("- {q}"))
                .collect::<Vec<_>>()
                .join("\n"))
        }
        _ => Err(unknown()),
    }
}

//! Embedded on-disk document store.
//!
//! One JSON file per article under `articles/` and per processed output under
//! `processed/`, named by the hex-encoded id. Writes go to a temporary file in
//! the same directory and are renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ingest::{validate_document, CorpusDocument, ValidationError};
use crate::model::{Article, ProcessedArticle};

const ARTICLES: &str = "articles";
const PROCESSED: &str = "processed";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: corrupt document: {source}")]
    Corrupt {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("article {0:?} already stored")]
    AlreadyExists(String),
    #[error("article {0:?} not found")]
    NotFound(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

pub struct Store {
    root: PathBuf,
    write_lock: Mutex<()>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in [ARTICLES, PROCESSED] {
            let dir = root.join(sub);
            std::fs::create_dir_all(&dir).map_err(|source| StoreError::Io { path: dir, source })?;
        }
        Ok(Self {
            root,
            write_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Validates and stores a new article. Refuses to overwrite.
    pub fn insert_article(&self, doc: &CorpusDocument) -> Result<(), StoreError> {
        validate_document(doc)?;
        let path = self.path(ARTICLES, &doc.article.id);
        let _guard = self.write_lock.lock();
        if path.exists() {
            return Err(StoreError::AlreadyExists(doc.article.id.clone()));
        }
        write_atomic(&path, doc)
    }

    /// Stores an article, replacing any previous version.
    pub fn put_article(&self, doc: &CorpusDocument) -> Result<(), StoreError> {
        validate_document(doc)?;
        let path = self.path(ARTICLES, &doc.article.id);
        let _guard = self.write_lock.lock();
        write_atomic(&path, doc)
    }

    pub fn article(&self, id: &str) -> Result<Option<Article>, StoreError> {
        Ok(read_json::<CorpusDocument>(&self.path(ARTICLES, id))?.map(|d| d.article))
    }

    pub fn require_article(&self, id: &str) -> Result<Article, StoreError> {
        self.article(id)?
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    /// Stored article ids, sorted.
    pub fn article_ids(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join(ARTICLES);
        let entries =
            std::fs::read_dir(&dir).map_err(|source| StoreError::Io { path: dir, source })?;
        let mut ids = Vec::new();
        for entry in entries.flatten() {
            let name = entry.file_name();
            let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".json")) else {
                continue;
            };
            if let Some(id) = hex::decode(stem)
                .ok()
                .and_then(|b| String::from_utf8(b).ok())
            {
                ids.push(id);
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn put_processed(&self, processed: &ProcessedArticle) -> Result<(), StoreError> {
        let path = self.path(PROCESSED, &processed.article_id);
        let _guard = self.write_lock.lock();
        write_atomic(&path, processed)
    }

    pub fn processed(&self, id: &str) -> Result<Option<ProcessedArticle>, StoreError> {
        read_json(&self.path(PROCESSED, id))
    }

    pub fn processed_path(&self, id: &str) -> PathBuf {
        self.path(PROCESSED, id)
    }

    fn path(&self, kind: &str, id: &str) -> PathBuf {
        self.root
            .join(kind)
            .join(format!("{}.json", hex::encode(id)))
    }
}

/// Pretty JSON with a trailing newline; the canonical on-disk form.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("model types serialize");
    s.push('\n');
    s
}

fn write_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    let io = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(to_canonical_json(value).as_bytes())
        .map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(source) => {
            return Err(StoreError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|source| StoreError::Corrupt {
            path: path.to_path_buf(),
            source,
        })
}

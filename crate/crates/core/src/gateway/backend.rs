use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Decoding parameters forwarded to the backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeSettings {
    pub temperature: f32,
    pub max_output_tokens: u32,
    pub seed: Option<u64>,
}

impl DecodeSettings {
    pub const CLASSIFY: DecodeSettings = DecodeSettings {
        temperature: 0.0,
        max_output_tokens: 16,
        seed: Some(0),
    };

    pub const fn generate(max_output_tokens: u32) -> Self {
        DecodeSettings {
            temperature: 0.2,
            max_output_tokens,
            seed: Some(0),
        }
    }
}

/// One prompt as the backend sees it.
#[derive(Debug, Clone, Copy)]
pub struct BackendCall<'a> {
    pub template: &'a str,
    pub prompt: &'a str,
    pub settings: DecodeSettings,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend timed out")]
    Timeout,
    #[error("no scripted response for prompt {hash} (template {template})")]
    ScriptMiss { hash: String, template: String },
}

/// A language-model backend. Implementations must be safe to call from
/// several threads at once.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, call: BackendCall<'_>) -> Result<String, BackendError>;
}

/// Hex SHA-256 of the rendered prompt, the key used by scripts.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub const SCRIPT_FORMAT_VERSION: &str = "cnr-script/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub prompt_sha256: String,
    /// Template that produced the prompt; informational only.
    pub template: String,
    pub response: String,
}

/// Recorded prompt/response pairs for the scripted backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub format_version: String,
    pub entries: Vec<ScriptEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("reading script: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing script: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported script format_version {0:?}")]
    Version(String),
    #[error("prompt {0} has conflicting responses")]
    Conflict(String),
}

impl Default for Script {
    fn default() -> Self {
        Self {
            format_version: SCRIPT_FORMAT_VERSION.to_string(),
            entries: Vec::new(),
        }
    }
}

impl Script {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let raw = std::fs::read_to_string(path)?;
        let script: Script = serde_json::from_str(&raw)?;
        if script.format_version != SCRIPT_FORMAT_VERSION {
            return Err(ScriptError::Version(script.format_version));
        }
        Ok(script)
    }

    /// Pretty JSON with entries sorted by hash, so recordings diff cleanly.
    pub fn to_json(&self) -> String {
        let mut sorted = self.clone();
        sorted
            .entries
            .sort_by(|a, b| a.prompt_sha256.cmp(&b.prompt_sha256));
        sorted.entries.dedup();
        serde_json::to_string_pretty(&sorted).expect("script serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScriptError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Replays recorded responses keyed on the prompt hash. Prompts that are not
/// in the script fail with [`BackendError::ScriptMiss`].
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    responses: BTreeMap<String, String>,
}

impl ScriptedBackend {
    pub fn new(script: &Script) -> Result<Self, ScriptError> {
        let mut responses = BTreeMap::new();
        for e in &script.entries {
            if let Some(prev) = responses.insert(e.prompt_sha256.clone(), e.response.clone()) {
                if prev != e.response {
                    return Err(ScriptError::Conflict(e.prompt_sha256.clone()));
                }
            }
        }
        Ok(Self { responses })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        Self::new(&Script::load(path)?)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, call: BackendCall<'_>) -> Result<String, BackendError> {
        let hash = prompt_hash(call.prompt);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or_else(|| BackendError::ScriptMiss {
                hash,
                template: call.template.to_string(),
            })
    }
}

type ResponderFn = dyn Fn(BackendCall<'_>) -> Result<String, BackendError> + Send + Sync;

/// Answers each prompt with a caller-supplied function. Used to drive the
/// pipeline from synthetic labels and to author scripts.
#[derive(Clone)]
pub struct ResponderBackend {
    id: String,
    respond: Arc<ResponderFn>,
}

impl ResponderBackend {
    pub fn new(
        id: impl Into<String>,
        respond: impl Fn(BackendCall<'_>) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            respond: Arc::new(respond),
        }
    }
}

impl std::fmt::Debug for ResponderBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResponderBackend")
            .field("id", &self.id)
            .finish()
    }
}

impl Backend for ResponderBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, call: BackendCall<'_>) -> Result<String, BackendError> {
        (self.respond)(call)
    }
}

/// Wraps a backend and records every successful exchange as a script entry.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<Vec<ScriptEntry>>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            recorded: Mutex::new(Vec::new()),
        }
    }

    pub fn script(&self) -> Script {
        Script {
            format_version: SCRIPT_FORMAT_VERSION.to_string(),
            entries: self.recorded.lock().clone(),
        }
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, call: BackendCall<'_>) -> Result<String, BackendError> {
        let response = self.inner.complete(call)?;
        self.recorded.lock().push(ScriptEntry {
            prompt_sha256: prompt_hash(call.prompt),
            template: call.template.to_string(),
            response: response.clone(),
        });
        Ok(response)
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, call: BackendCall<'_>) -> Result<String, BackendError> {
        (**self).complete(call)
    }
}

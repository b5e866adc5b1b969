use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::gateway::EXEMPLARS_PER_LABEL;
use crate::model::Category;

pub const FEWSHOT_FORMAT_VERSION: &str = "cnr-fewshot/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub news: String,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LabelExemplars {
    yes: Vec<Exemplar>,
    no: Vec<Exemplar>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FewShotFile {
    format_version: String,
    categories: BTreeMap<Category, LabelExemplars>,
}

#[derive(Debug, thiserror::Error)]
pub enum FewShotError {
    #[error("parsing few-shot bank: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported few-shot format_version {0:?}")]
    Version(String),
    #[error("few-shot bank has no entry for {0}")]
    MissingCategory(Category),
    #[error("{category}: expected {expected} exemplars per label, found {yes} yes / {no} no")]
    WrongCount {
        category: Category,
        expected: usize,
        yes: usize,
        no: usize,
    },
}

/// Per-category exemplars for the binary classifier prompts: exactly
/// [`EXEMPLARS_PER_LABEL`] positive and negative examples each.
#[derive(Debug, Clone)]
pub struct FewShotBank {
    rendered: BTreeMap<Category, String>,
}

impl FewShotBank {
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../prompts/v1/fewshot.json")).expect("builtin bank is valid")
    }

    pub fn parse(raw: &str) -> Result<Self, FewShotError> {
        let file: FewShotFile = serde_json::from_str(raw)?;
        if file.format_version != FEWSHOT_FORMAT_VERSION {
            return Err(FewShotError::Version(file.format_version));
        }
        let mut rendered = BTreeMap::new();
        for category in Category::ALL {
            let entry = file
                .categories
                .get(&category)
                .ok_or(FewShotError::MissingCategory(category))?;
            if entry.yes.len() != EXEMPLARS_PER_LABEL || entry.no.len() != EXEMPLARS_PER_LABEL {
                return Err(FewShotError::WrongCount {
                    category,
                    expected: EXEMPLARS_PER_LABEL,
                    yes: entry.yes.len(),
                    no: entry.no.len(),
                });
            }
            rendered.insert(category, render(entry));
        }
        Ok(Self { rendered })
    }

    /// Exemplar block for the category's prompt, alternating yes and no.
    pub fn render(&self, category: Category) -> &str {
        &self.rendered[&category]
    }

    /// Every exemplar comment text, for checking that evaluation items are
    /// disjoint from the prompts.
    pub fn contains_comment(&self, text: &str) -> bool {
        self.rendered
            .values()
            .any(|block| block.contains(&format!("Comment: {text}\n")))
    }
}

fn render(entry: &LabelExemplars) -> String {
    let mut out = String::new();
    for (yes, no) in entry.yes.iter().zip(&entry.no) {
        for (ex, answer) in [(yes, "Yes"), (no, "No")] {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!(
                "News: {}\nComment: {}\nAnswer: {answer}\n",
                ex.news, ex.comment
            ));
        }
    }
    out
}

//! Parsers for raw model output. Each returns [`Unparseable`] when the text
//! does not follow the requested format, which makes the gateway retry.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::Sentiment;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unparseable response: {raw:?}")]
pub struct Unparseable {
    pub raw: String,
}

impl Unparseable {
    pub fn new(raw: &str) -> Self {
        Self {
            raw: raw.to_string(),
        }
    }
}

fn words(raw: &str) -> impl Iterator<Item = String> + '_ {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Leading "yes"/"no" token, case-insensitive, ignoring punctuation and whitespace.
pub fn parse_yes_no(raw: &str) -> Result<bool, Unparseable> {
    match words(raw).next().as_deref() {
        Some("yes") => Ok(true),
        Some("no") => Ok(false),
        _ => Err(Unparseable::new(raw)),
    }
}

/// Exactly one of positive/neutral/negative must occur among the words.
pub fn parse_sentiment(raw: &str) -> Result<Sentiment, Unparseable> {
    let seen: BTreeSet<Sentiment> = words(raw)
        .filter_map(|w| w.parse::<Sentiment>().ok())
        .collect();
    match seen.len() {
        1 => Ok(*seen.iter().next().unwrap()),
        _ => Err(Unparseable::new(raw)),
    }
}

/// Strips a list marker ("- ", "* ", "• ", "3. ", "3) ") from a line.
pub fn strip_list_marker(line: &str) -> Option<&str> {
    let line = line.trim();
    for marker in ["- ", "* ", "• ", "– "] {
        if let Some(rest) = line.strip_prefix(marker) {
            return Some(rest.trim());
        }
    }
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return Some(rest.trim());
        }
    }
    None
}

/// Bulleted or numbered list items. Lines that are not list items are ignored.
pub fn parse_bullets(raw: &str) -> Result<Vec<String>, Unparseable> {
    let items: Vec<String> = raw
        .lines()
        .filter_map(strip_list_marker)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if items.is_empty() {
        return Err(Unparseable::new(raw));
    }
    Ok(items)
}

/// Point-to-comment citations in the form `1: [2] [5]`.
///
/// Keys are 1-based point ordinals, values 1-based comment ordinals, both as
/// written by the model (range checking is the caller's job). A line
/// `2: none` yields an empty set for point 2.
pub fn parse_citations(raw: &str) -> Result<BTreeMap<usize, BTreeSet<usize>>, Unparseable> {
    let mut out: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for line in raw.lines() {
        let line = line.trim().trim_start_matches(['-', '*']).trim();
        let line = line
            .strip_prefix("Point")
            .or_else(|| line.strip_prefix("point"))
            .unwrap_or(line)
            .trim_start();
        let Some((head, tail)) = line.split_once(':') else {
            continue;
        };
        let Ok(point) = head.trim().parse::<usize>() else {
            continue;
        };
        let cited = out.entry(point).or_default();
        let mut rest = tail;
        while let Some(open) = rest.find('[') {
            let Some(close) = rest[open..].find(']') else {
                break;
            };
            let inner = &rest[open + 1..open + close];
            for part in inner.split(',') {
                if let Ok(n) = part.trim().parse::<usize>() {
                    cited.insert(n);
                }
            }
            rest = &rest[open + close + 1..];
        }
    }
    if out.is_empty() {
        return Err(Unparseable::new(raw));
    }
    Ok(out)
}

/// Keywords, one per line or comma separated. `none` means an empty list.
/// Duplicates are removed case-insensitively, keeping the first spelling.
pub fn parse_keywords(raw: &str) -> Result<Vec<String>, Unparseable> {
    let trimmed = raw.trim();
    if trimmed.trim_end_matches('.').eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for line in trimmed.lines() {
        let line = strip_list_marker(line).unwrap_or(line.trim());
        for piece in line.split(',') {
            let kw = piece
                .trim()
                .trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '.')
                .trim();
            if kw.is_empty() {
                continue;
            }
            if seen.insert(kw.to_lowercase()) {
                out.push(kw.to_string());
            }
        }
    }
    if out.is_empty() {
        return Err(Unparseable::new(raw));
    }
    Ok(out)
}

/// Ensures a question ends with exactly one question mark.
pub fn normalize_question(text: &str) -> String {
    let core = text.trim().trim_end_matches(|c: char| {
        c == '?' || c == '.' || c == '!' || c == ':' || c.is_whitespace()
    });
    format!("{core}?")
}

/// Questions, one per line with or without list markers.
pub fn parse_questions(raw: &str) -> Result<Vec<String>, Unparseable> {
    let out: Vec<String> = raw
        .lines()
        .map(|l| strip_list_marker(l).unwrap_or(l.trim()))
        .filter(|l| l.chars().any(char::is_alphanumeric))
        .map(normalize_question)
        .collect();
    if out.is_empty() {
        return Err(Unparseable::new(raw));
    }
    Ok(out)
}

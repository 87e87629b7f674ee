//! Parsing of model responses.
//!
//! Models wrap JSON in code fences or add prose around it, so the first
//! `{` that starts a complete JSON object is taken as the payload.

use serde_json::{Map, Value};

use super::{AnnotatorError, CaptionPair, ClipQA, QuestionType};
use crate::curator::Span;

pub const BRIEF_KEY: &str = "Brief Caption";
pub const DETAILED_KEY: &str = "Detailed Caption";

/// Extracts the first JSON object embedded in `text`.
pub fn extract_json_object(text: &str) -> Result<Map<String, Value>, AnnotatorError> {
    let mut first_err = None;
    for (pos, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => return Ok(map),
            Some(Err(e)) if first_err.is_none() => {
                // report relative to the whole response
                let line = text[..pos].matches('\n').count() + e.line();
                let column = if e.line() == 1 {
                    pos - text[..pos].rfind('\n').map_or(0, |i| i + 1) + e.column()
                } else {
                    e.column()
                };
                first_err = Some(AnnotatorError::Unparseable {
                    line,
                    column,
                    msg: e.to_string(),
                });
            }
            _ => {}
        }
    }
    Err(first_err.unwrap_or(AnnotatorError::Unparseable {
        line: 1,
        column: 0,
        msg: "no JSON object found".into(),
    }))
}

fn required_str(map: &Map<String, Value>, key: &str) -> Result<String, AnnotatorError> {
    match map.get(key) {
        None | Some(Value::Null) => Err(AnnotatorError::MissingKey(key.to_string())),
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(_) => Err(AnnotatorError::InvalidEntry {
            key: key.to_string(),
            msg: "expected a non-empty string".into(),
        }),
    }
}

pub fn parse_caption_response(text: &str) -> Result<CaptionPair, AnnotatorError> {
    let map = extract_json_object(text)?;
    Ok(CaptionPair {
        brief: required_str(&map, BRIEF_KEY)?,
        detailed: required_str(&map, DETAILED_KEY)?,
    })
}

/// Maps a response key to its position in `expected`: either the type name
/// itself or the positional `question_type_<n>` form used by the template.
fn resolve_key(key: &str, expected: &[QuestionType]) -> Option<usize> {
    if let Some(i) = expected.iter().position(|t| t.name == key) {
        return Some(i);
    }
    key.strip_prefix("question_type_")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1 && n <= expected.len())
        .map(|n| n - 1)
}

/// Parses a QA response. `null` entries are skipped; the rest come back in
/// the order of `expected`, each tagged with `span`.
pub fn parse_qa_response(text: &str, expected: &[QuestionType], span: Span) -> Result<Vec<ClipQA>, AnnotatorError> {
    let map = extract_json_object(text)?;
    let mut found: Vec<(usize, ClipQA)> = Vec::new();
    for (key, value) in &map {
        let idx = resolve_key(key, expected).ok_or_else(|| AnnotatorError::UnknownTypeKey(key.clone()))?;
        let entry = match value {
            Value::Null => continue,
            Value::Object(m) => m,
            _ => {
                return Err(AnnotatorError::InvalidEntry {
                    key: key.clone(),
                    msg: "expected an object or null".into(),
                })
            }
        };
        let field = |k: &str| {
            required_str(entry, k).map_err(|e| AnnotatorError::InvalidEntry {
                key: key.clone(),
                msg: e.to_string(),
            })
        };
        if found.iter().any(|(i, _)| *i == idx) {
            return Err(AnnotatorError::InvalidEntry {
                key: key.clone(),
                msg: "question type answered twice".into(),
            });
        }
        found.push((
            idx,
            ClipQA {
                qtype: expected[idx].name.clone(),
                question: field("Q")?,
                answer: field("A")?,
                span,
            },
        ));
    }
    found.sort_by_key(|(i, _)| *i);
    Ok(found.into_iter().map(|(_, qa)| qa).collect())
}

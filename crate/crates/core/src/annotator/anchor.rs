//! Clip-to-video question anchoring.
//!
//! A clip question like "What color is the car?" is ambiguous over a whole
//! video. The anchored form prefixes the clip's interval and a short scene
//! description taken from the brief caption. The description must not give
//! the answer away; that is checked as a case-insensitive substring test of
//! the trimmed answer against the description.

use super::{check_span, AnchoredQA, AnnotatorError, ClipQA};

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Seconds in their shortest exact form: `12`, `18.5`, `12.25`.
pub fn fmt_anchor_seconds(s: f64) -> String {
    format!("{s}")
}

/// True when `context` contains the normalized answer.
pub fn leaks_answer(answer: &str, context: &str) -> bool {
    let a = normalize(answer);
    !a.is_empty() && normalize(context).contains(&a)
}

fn scene(brief: &str) -> &str {
    brief.trim().trim_end_matches('.').trim_end()
}

/// Builds `Between {start}s and {end}s, in the scene where {brief}: {question}`,
/// or [`AnnotatorError::LeakDetected`] when the brief contains the answer.
pub fn anchor(qa: &ClipQA, brief: &str) -> Result<AnchoredQA, AnnotatorError> {
    check_span(qa.span)?;
    if qa.question.trim().is_empty() || normalize(&qa.answer).is_empty() {
        return Err(AnnotatorError::InvalidEntry {
            key: qa.qtype.clone(),
            msg: "question and answer must be non-empty".into(),
        });
    }
    let context = scene(brief);
    if context.is_empty() {
        return Err(AnnotatorError::EmptyInput("brief caption"));
    }
    if leaks_answer(&qa.answer, context) {
        return Err(AnnotatorError::LeakDetected(qa.answer.trim().to_string()));
    }
    Ok(AnchoredQA {
        qtype: qa.qtype.clone(),
        question_anchored: format!(
            "Between {}s and {}s, in the scene where {}: {}",
            fmt_anchor_seconds(qa.span.start_s),
            fmt_anchor_seconds(qa.span.end_s),
            context,
            qa.question.trim()
        ),
        answer: qa.answer.clone(),
        span: qa.span,
    })
}

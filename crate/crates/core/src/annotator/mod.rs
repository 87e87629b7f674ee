//! Two-level video QA annotation.
//!
//! Story level: human chapters are captioned one by one, the captions are
//! aggregated into a timeline, and long-form QA is generated from it.
//! Clip level: each short clip is captioned, QA is generated from the
//! detailed caption, and each question is anchored with its time interval
//! and a context sentence drawn from the brief caption.
//!
//! The LLM itself sits behind [`client::LlmClient`].

pub mod anchor;
pub mod client;
pub mod mock;
pub mod parse;
pub mod pipeline;
pub mod prompts;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curator::Span;

pub use anchor::anchor;
pub use client::{ClientError, LlmClient, LlmRequest, LlmResponse};
pub use parse::{parse_caption_response, parse_qa_response};
pub use pipeline::{run_pipeline, AnnotationRecord, Job, PipelinePolicy, PipelineSummary};
pub use prompts::{
    aggregate_chapter_captions, caption_frames_plan, question_type_pool, render_caption_prompt,
    render_clip_qa_prompt, render_video_qa_prompt, sample_question_types,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotatorError {
    #[error("empty {0}")]
    EmptyInput(&'static str),
    #[error("unparseable payload at line {line}, column {column}: {msg}")]
    Unparseable { line: usize, column: usize, msg: String },
    #[error("missing key {0:?}")]
    MissingKey(String),
    #[error("unknown question type key {0:?}")]
    UnknownTypeKey(String),
    #[error("invalid entry for {key:?}: {msg}")]
    InvalidEntry { key: String, msg: String },
    #[error("insufficient chapters: {0} (need at least 2)")]
    InsufficientChapters(usize),
    #[error("chapters must be sorted and non-overlapping")]
    UnsortedChapters,
    #[error("invalid span [{0}, {1})")]
    InvalidSpan(f64, f64),
    #[error("requested {k} question types from a pool of {pool}")]
    TooManyTypes { k: usize, pool: usize },
    #[error("context anchor reveals the answer {0:?}")]
    LeakDetected(String),
}

/// A titled segment of a long video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chapter {
    pub title: String,
    pub span: Span,
}

impl Chapter {
    pub fn new(title: impl Into<String>, start_s: f64, end_s: f64) -> Self {
        Self {
            title: title.into(),
            span: Span { start_s, end_s },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionPair {
    pub brief: String,
    pub detailed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionType {
    pub index: u32,
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipQA {
    pub qtype: String,
    pub question: String,
    pub answer: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredQA {
    pub qtype: String,
    pub question_anchored: String,
    pub answer: String,
    pub span: Span,
}

pub(crate) fn check_span(span: Span) -> Result<(), AnnotatorError> {
    if span.start_s.is_finite() && span.end_s.is_finite() && span.start_s >= 0.0 && span.end_s > span.start_s {
        Ok(())
    } else {
        Err(AnnotatorError::InvalidSpan(span.start_s, span.end_s))
    }
}

//! Job orchestration: caption, generate QA, anchor; with retries, pacing and
//! per-job failure isolation.

use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::anchor::anchor;
use super::client::{backoff_delay, ClientError, LlmClient, LlmRequest, RateLimiter};
use super::parse::{parse_caption_response, parse_qa_response};
use super::prompts::{
    aggregate_chapter_captions, caption_frames_plan, check_chapters, question_type_pool, render_anchor_regen_prompt,
    render_caption_prompt, render_clip_qa_prompt, render_video_qa_prompt, sample_question_types,
};
use super::{AnnotatorError, CaptionPair, Chapter};
use crate::curator::Span;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChapterSpec {
    pub title: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JobKind {
    Story(Vec<ChapterSpec>),
    Clips(Vec<ClipSpec>),
}

/// One line of the job file: either `chapters` (story level) or `clips`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JobWire", into = "JobWire")]
pub struct Job {
    pub video_id: String,
    pub uri: String,
    pub kind: JobKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobWire {
    video_id: String,
    uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chapters: Option<Vec<ChapterSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clips: Option<Vec<ClipSpec>>,
}

impl TryFrom<JobWire> for Job {
    type Error = String;

    fn try_from(w: JobWire) -> Result<Self, String> {
        let kind = match (w.chapters, w.clips) {
            (Some(c), None) => JobKind::Story(c),
            (None, Some(c)) => JobKind::Clips(c),
            _ => return Err(format!("job {:?} needs exactly one of `chapters` or `clips`", w.video_id)),
        };
        Ok(Job {
            video_id: w.video_id,
            uri: w.uri,
            kind,
        })
    }
}

impl From<Job> for JobWire {
    fn from(j: Job) -> Self {
        let (chapters, clips) = match j.kind {
            JobKind::Story(c) => (Some(c), None),
            JobKind::Clips(c) => (None, Some(c)),
        };
        JobWire {
            video_id: j.video_id,
            uri: j.uri,
            chapters,
            clips,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Story,
    Clip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Validate,
    Caption,
    Qa,
    Anchor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub start: f64,
    pub end: f64,
    pub title: String,
    pub brief: String,
    pub detailed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    #[serde(rename = "type")]
    pub qtype: String,
    pub q: String,
    pub a: String,
    /// Anchored question; `None` for story-level QA, which already refers
    /// to the whole video.
    pub anchored_q: Option<String>,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub reason: String,
}

/// One output line per job, successful or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub kind: RecordKind,
    pub captions: Vec<CaptionRecord>,
    pub qa: Vec<QaRecord>,
    pub status: Status,
    pub retry_count: u32,
    /// QA pairs dropped because no non-revealing context anchor was found.
    pub dropped_qa: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub video_id: String,
    pub stage: Stage,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub total: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub retries: u64,
    pub dropped_qa: u64,
    /// Sorted by video id.
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelinePolicy {
    /// Retries per request after the first attempt.
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_max: Duration,
    pub max_in_flight: usize,
    pub requests_per_minute: Option<f64>,
    pub types_per_request: usize,
    pub seed: u64,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub max_anchor_regenerations: u32,
}

impl Default for PipelinePolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            backoff_max: Duration::from_secs(30),
            max_in_flight: 4,
            requests_per_minute: None,
            types_per_request: 5,
            seed: 0,
            temperature: 0.2,
            max_output_tokens: 2048,
            max_anchor_regenerations: 2,
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Per-segment seed so question types vary across clips but replay exactly.
fn segment_seed(base: u64, video_id: &str, segment: usize) -> u64 {
    (base ^ fnv1a(video_id))
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(segment as u64)
}

fn frame_refs(uri: &str, timestamps: &[f64]) -> Vec<String> {
    timestamps.iter().map(|t| format!("{uri}#t={t}")).collect()
}

struct JobRunner<'a, C: ?Sized> {
    client: &'a C,
    policy: &'a PipelinePolicy,
    limiter: Option<&'a RateLimiter>,
    retries: u32,
}

impl<C: LlmClient + ?Sized> JobRunner<'_, C> {
    fn call<T>(
        &mut self,
        stage: Stage,
        prompt: String,
        image_refs: Vec<String>,
        parse: impl Fn(&str) -> Result<T, AnnotatorError>,
    ) -> Result<T, Failure> {
        let req = LlmRequest {
            prompt,
            image_refs,
            temperature: self.policy.temperature,
            max_output_tokens: self.policy.max_output_tokens,
        };
        let mut last = String::new();
        for attempt in 0..=self.policy.max_retries {
            if attempt > 0 {
                self.retries += 1;
                let d = backoff_delay(self.policy.backoff_base, self.policy.backoff_max, attempt);
                if !d.is_zero() {
                    thread::sleep(d);
                }
            }
            if let Some(l) = self.limiter {
                l.acquire();
            }
            match self.client.submit(&req) {
                Ok(resp) => match parse(&resp.text) {
                    Ok(v) => return Ok(v),
                    Err(e) => last = format!("bad response: {e}"),
                },
                Err(ClientError::Transient(e)) => last = format!("transient: {e}"),
                Err(e @ ClientError::Permanent(_)) => {
                    return Err(Failure {
                        stage,
                        reason: e.to_string(),
                    })
                }
            }
        }
        Err(Failure {
            stage,
            reason: format!("{last} (after {} attempts)", self.policy.max_retries + 1),
        })
    }

    fn caption(&mut self, chapter: &Chapter, uri: &str) -> Result<(CaptionPair, Vec<String>), Failure> {
        let invalid = |e: AnnotatorError| Failure {
            stage: Stage::Validate,
            reason: e.to_string(),
        };
        let frames = frame_refs(uri, &caption_frames_plan(chapter).map_err(invalid)?);
        let prompt = render_caption_prompt(&chapter.title).map_err(invalid)?;
        let pair = self.call(Stage::Caption, prompt, frames.clone(), parse_caption_response)?;
        Ok((pair, frames))
    }

    fn run_clips(&mut self, job: &Job, clips: &[ClipSpec], rec: &mut AnnotationRecord) -> Result<(), Failure> {
        if clips.is_empty() {
            return Err(Failure {
                stage: Stage::Validate,
                reason: "job has no clips".into(),
            });
        }
        let pool = question_type_pool();
        for (i, clip) in clips.iter().enumerate() {
            let title = clip.title.clone().unwrap_or_else(|| job.video_id.clone());
            let chapter = Chapter::new(title, clip.start, clip.end);
            let (caption, frames) = self.caption(&chapter, &job.uri)?;
            rec.captions.push(CaptionRecord {
                start: clip.start,
                end: clip.end,
                title: chapter.title.clone(),
                brief: caption.brief.clone(),
                detailed: caption.detailed.clone(),
            });

            let seed = segment_seed(self.policy.seed, &job.video_id, i);
            let types = sample_question_types(pool, self.policy.types_per_request, seed).map_err(|e| Failure {
                stage: Stage::Validate,
                reason: e.to_string(),
            })?;
            let prompt = render_clip_qa_prompt(&caption.detailed, &caption.brief, &types).map_err(|e| Failure {
                stage: Stage::Qa,
                reason: e.to_string(),
            })?;
            let span = chapter.span;
            let qas = self.call(Stage::Qa, prompt, Vec::new(), |t| parse_qa_response(t, &types, span))?;

            for qa in qas {
                let mut brief = caption.brief.clone();
                let mut anchored = None;
                for _ in 0..=self.policy.max_anchor_regenerations {
                    match anchor(&qa, &brief) {
                        Ok(a) => {
                            anchored = Some(a);
                            break;
                        }
                        Err(AnnotatorError::LeakDetected(term)) => {
                            let Ok(prompt) = render_anchor_regen_prompt(&chapter.title, &term) else {
                                break;
                            };
                            match self.call(Stage::Anchor, prompt, frames.clone(), parse_caption_response) {
                                Ok(fresh) => brief = fresh.brief,
                                Err(_) => break,
                            }
                        }
                        Err(_) => break,
                    }
                }
                match anchored {
                    Some(a) => rec.qa.push(QaRecord {
                        qtype: a.qtype,
                        q: qa.question.clone(),
                        a: a.answer,
                        anchored_q: Some(a.question_anchored),
                        start: span.start_s,
                        end: span.end_s,
                    }),
                    None => rec.dropped_qa += 1,
                }
            }
        }
        Ok(())
    }

    fn run_story(&mut self, job: &Job, specs: &[ChapterSpec], rec: &mut AnnotationRecord) -> Result<(), Failure> {
        let chapters: Vec<Chapter> = specs.iter().map(|c| Chapter::new(c.title.clone(), c.start, c.end)).collect();
        check_chapters(&chapters).map_err(|e| Failure {
            stage: Stage::Validate,
            reason: e.to_string(),
        })?;
        let mut captioned = Vec::with_capacity(chapters.len());
        for ch in &chapters {
            let (caption, _) = self.caption(ch, &job.uri)?;
            rec.captions.push(CaptionRecord {
                start: ch.span.start_s,
                end: ch.span.end_s,
                title: ch.title.clone(),
                brief: caption.brief.clone(),
                detailed: caption.detailed.clone(),
            });
            captioned.push((ch.clone(), caption));
        }
        let invalid = |e: AnnotatorError| Failure {
            stage: Stage::Qa,
            reason: e.to_string(),
        };
        let aggregated = aggregate_chapter_captions(&captioned).map_err(invalid)?;
        let types = sample_question_types(
            question_type_pool(),
            self.policy.types_per_request,
            segment_seed(self.policy.seed, &job.video_id, 0),
        )
        .map_err(invalid)?;
        let prompt = render_video_qa_prompt(&aggregated, &types).map_err(invalid)?;
        let span = Span {
            start_s: chapters[0].span.start_s,
            end_s: chapters[chapters.len() - 1].span.end_s,
        };
        let qas = self.call(Stage::Qa, prompt, Vec::new(), |t| parse_qa_response(t, &types, span))?;
        rec.qa.extend(qas.into_iter().map(|qa| QaRecord {
            qtype: qa.qtype,
            q: qa.question,
            a: qa.answer,
            anchored_q: None,
            start: span.start_s,
            end: span.end_s,
        }));
        Ok(())
    }
}

/// Runs one job to completion. Never panics on endpoint or payload errors;
/// those end up in the record's `failure`.
pub fn run_job<C: LlmClient + ?Sized>(
    job: &Job,
    client: &C,
    policy: &PipelinePolicy,
    limiter: Option<&RateLimiter>,
) -> AnnotationRecord {
    let mut runner = JobRunner {
        client,
        policy,
        limiter,
        retries: 0,
    };
    let mut rec = AnnotationRecord {
        video_id: job.video_id.clone(),
        kind: match job.kind {
            JobKind::Story(_) => RecordKind::Story,
            JobKind::Clips(_) => RecordKind::Clip,
        },
        captions: Vec::new(),
        qa: Vec::new(),
        status: Status::Ok,
        retry_count: 0,
        dropped_qa: 0,
        failure: None,
    };
    let outcome = match &job.kind {
        JobKind::Story(specs) => runner.run_story(job, specs, &mut rec),
        JobKind::Clips(clips) => runner.run_clips(job, clips, &mut rec),
    };
    rec.retry_count = runner.retries;
    if let Err(f) = outcome {
        rec.status = Status::Failed;
        rec.failure = Some(f);
    }
    rec
}

/// Runs all jobs with up to `policy.max_in_flight` concurrent workers. Every
/// job yields exactly one record, handed to `sink` from the calling thread
/// in completion order. A sink error stops further writes and is returned
/// once the workers have drained.
pub fn run_pipeline<C, F>(jobs: &[Job], client: &C, policy: &PipelinePolicy, mut sink: F) -> io::Result<PipelineSummary>
where
    C: LlmClient + ?Sized,
    F: FnMut(&AnnotationRecord) -> io::Result<()>,
{
    let limiter = policy
        .requests_per_minute
        .filter(|r| *r > 0.0)
        .map(|r| RateLimiter::new(r, policy.max_in_flight.max(1) as u32));
    let workers = policy.max_in_flight.clamp(1, jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let mut summary = PipelineSummary {
        total: jobs.len(),
        ..Default::default()
    };
    let mut sink_err = None;

    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<AnnotationRecord>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, limiter) = (&next, limiter.as_ref());
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                if tx.send(run_job(job, client, policy, limiter)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for rec in rx {
            summary.retries += rec.retry_count as u64;
            summary.dropped_qa += rec.dropped_qa as u64;
            match &rec.failure {
                None => summary.succeeded += 1,
                Some(f) => {
                    summary.failed += 1;
                    summary.failures.push(FailureRecord {
                        video_id: rec.video_id.clone(),
                        stage: f.stage,
                        reason: f.reason.clone(),
                    });
                }
            }
            if sink_err.is_none() {
                if let Err(e) = sink(&rec) {
                    sink_err = Some(e);
                }
            }
        }
    });

    summary.failures.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    match sink_err {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

//! Prompt templates, the question-type pool and timeline formatting.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_span, AnnotatorError, CaptionPair, Chapter, QuestionType};

pub const CAPTION_TEMPLATE: &str = include_str!("../../templates/caption.txt");
pub const CLIP_QA_TEMPLATE: &str = include_str!("../../templates/clip_qa.txt");
pub const VIDEO_QA_TEMPLATE: &str = include_str!("../../templates/video_qa.txt");

const QUESTION_TYPES_TSV: &str = include_str!("../../data/question_types.tsv");

/// Caption frame sampling: up to 2 frames per second, at most 50.
pub const CAPTION_FPS: f64 = 2.0;
pub const CAPTION_MAX_FRAMES: u32 = 50;

/// The 63 question categories, in table order.
pub fn question_type_pool() -> &'static [QuestionType] {
    static POOL: OnceLock<Vec<QuestionType>> = OnceLock::new();
    POOL.get_or_init(|| {
        QUESTION_TYPES_TSV
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| {
                let mut f = l.splitn(3, '\t');
                let index = f.next().and_then(|s| s.parse().ok()).expect("index column");
                let name = f.next().expect("name column").to_string();
                let description = f.next().expect("description column").to_string();
                QuestionType {
                    index,
                    name,
                    description,
                }
            })
            .collect()
    })
}

pub fn find_question_type(name: &str) -> Option<&'static QuestionType> {
    question_type_pool().iter().find(|q| q.name == name)
}

/// `k` distinct types in a seed-determined order.
pub fn sample_question_types(
    pool: &[QuestionType],
    k: usize,
    seed: u64,
) -> Result<Vec<QuestionType>, AnnotatorError> {
    if k > pool.len() {
        return Err(AnnotatorError::TooManyTypes { k, pool: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = pool.to_vec();
    picked.shuffle(&mut rng);
    picked.truncate(k);
    Ok(picked)
}

/// Frame timestamps for captioning a chapter: `min(50, ceil(2 * len))`
/// frames, midpoint-uniform within the span.
pub fn caption_frames_plan(chapter: &Chapter) -> Result<Vec<f64>, AnnotatorError> {
    check_span(chapter.span)?;
    let len = chapter.span.len();
    let n = ((CAPTION_FPS * len).ceil() as u32).clamp(1, CAPTION_MAX_FRAMES);
    let step = len / n as f64;
    Ok((0..n).map(|k| chapter.span.start_s + (k as f64 + 0.5) * step).collect())
}

// Replaces `{name}` placeholders in one pass, so substituted text is never
// scanned again. Unknown braces are left alone.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    'scan: while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        for (name, value) in vars {
            let key_len = name.len() + 2;
            if tail.len() >= key_len && tail[1..].starts_with(name) && tail[1 + name.len()..].starts_with('}') {
                out.push_str(value);
                rest = &tail[key_len..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

fn non_empty<'a>(s: &'a str, what: &'static str) -> Result<&'a str, AnnotatorError> {
    if s.trim().is_empty() {
        Err(AnnotatorError::EmptyInput(what))
    } else {
        Ok(s)
    }
}

/// Renders selected types as `name: description` lines.
pub fn render_type_pool(types: &[QuestionType]) -> String {
    types
        .iter()
        .map(|t| format!("{}: {}", t.name, t.description))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_caption_prompt(title: &str) -> Result<String, AnnotatorError> {
    Ok(fill(CAPTION_TEMPLATE, &[("title", non_empty(title, "title")?)]))
}

/// Caption prompt asking for a fresh brief caption that avoids `avoid`.
pub fn render_anchor_regen_prompt(title: &str, avoid: &str) -> Result<String, AnnotatorError> {
    let mut p = render_caption_prompt(title)?;
    p.push_str(&format!(
        "\n\nThe Brief Caption must not mention or imply \"{}\".",
        non_empty(avoid, "avoid term")?
    ));
    Ok(p)
}

pub fn render_clip_qa_prompt(caption: &str, brief: &str, types: &[QuestionType]) -> Result<String, AnnotatorError> {
    if types.is_empty() {
        return Err(AnnotatorError::EmptyInput("question types"));
    }
    let pool = render_type_pool(types);
    Ok(fill(
        CLIP_QA_TEMPLATE,
        &[
            ("caption", non_empty(caption, "caption")?),
            ("brief_caption", non_empty(brief, "brief caption")?),
            ("question_type_pool", &pool),
        ],
    ))
}

pub fn render_video_qa_prompt(aggregated: &str, types: &[QuestionType]) -> Result<String, AnnotatorError> {
    if types.is_empty() {
        return Err(AnnotatorError::EmptyInput("question types"));
    }
    let pool = render_type_pool(types);
    Ok(fill(
        VIDEO_QA_TEMPLATE,
        &[
            ("caption", non_empty(aggregated, "caption")?),
            ("question_type_pool", &pool),
        ],
    ))
}

/// Seconds as an integer when whole, otherwise with one decimal.
pub fn fmt_timeline_seconds(s: f64) -> String {
    if s.fract() == 0.0 {
        format!("{}", s as i64)
    } else {
        format!("{s:.1}")
    }
}

/// Validates that chapters are sorted, non-overlapping and at least two.
pub fn check_chapters(chapters: &[Chapter]) -> Result<(), AnnotatorError> {
    if chapters.len() < 2 {
        return Err(AnnotatorError::InsufficientChapters(chapters.len()));
    }
    for c in chapters {
        check_span(c.span)?;
    }
    if chapters.windows(2).any(|w| w[1].span.start_s < w[0].span.end_s) {
        return Err(AnnotatorError::UnsortedChapters);
    }
    Ok(())
}

/// One `start ~ end: detailed caption` line per chapter.
pub fn aggregate_chapter_captions(chapters: &[(Chapter, CaptionPair)]) -> Result<String, AnnotatorError> {
    let only: Vec<Chapter> = chapters.iter().map(|(c, _)| c.clone()).collect();
    check_chapters(&only)?;
    Ok(chapters
        .iter()
        .map(|(c, cap)| {
            format!(
                "{} ~ {}: {}",
                fmt_timeline_seconds(c.span.start_s),
                fmt_timeline_seconds(c.span.end_s),
                cap.detailed
            )
        })
        .collect::<Vec<_>>()
        .join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap(d: &str) -> CaptionPair {
        CaptionPair {
            brief: "b".into(),
            detailed: d.into(),
        }
    }

    #[test]
    fn pool_shape() {
        let pool = question_type_pool();
        assert_eq!(pool.len(), 63);
        assert!(pool.iter().enumerate().all(|(i, q)| q.index == i as u32 + 1));
        assert_eq!(pool[0].name, "object_recognition");
        assert_eq!(pool[62].name, "anomaly_recognition");
        assert!(find_question_type("camera_movement").is_some());
    }

    #[test]
    fn sampling() {
        let pool = question_type_pool();
        let a = sample_question_types(pool, 5, 11).unwrap();
        assert_eq!(a.len(), 5);
        let mut names: Vec<&str> = a.iter().map(|q| q.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 5);
        assert_eq!(a, sample_question_types(pool, 5, 11).unwrap());
        let all = sample_question_types(pool, 63, 3).unwrap();
        assert_eq!(all.len(), 63);
        assert!(matches!(
            sample_question_types(pool, 64, 3),
            Err(AnnotatorError::TooManyTypes { k: 64, pool: 63 })
        ));
    }

    #[test]
    fn frame_plan() {
        assert_eq!(caption_frames_plan(&Chapter::new("t", 0.0, 10.0)).unwrap().len(), 20);
        assert_eq!(caption_frames_plan(&Chapter::new("t", 5.0, 105.0)).unwrap().len(), 50);
        let one = caption_frames_plan(&Chapter::new("t", 3.0, 3.4)).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0] - 3.2).abs() < 1e-12);
        assert!(caption_frames_plan(&Chapter::new("t", 3.0, 3.0)).is_err());
    }

    #[test]
    fn caption_prompt() {
        let p = render_caption_prompt("Opening scene").unwrap();
        assert!(p.contains("titled \"Opening scene\"."));
        assert!(p.contains("{\"Brief Caption\":\"concise summary of the video\","));
        assert_eq!(render_caption_prompt(""), Err(AnnotatorError::EmptyInput("title")));
        // substituted values are not rescanned
        let p = render_caption_prompt("{title}").unwrap();
        assert!(p.contains("titled \"{title}\""));
    }

    #[test]
    fn qa_prompts_differ_in_brief_clause() {
        let types = &question_type_pool()[..2];
        let clip = render_clip_qa_prompt("detailed", "brief", types).unwrap();
        let video = render_video_qa_prompt("0 ~ 1: x", types).unwrap();
        let clause = "cannot be fully answered using only the brief caption";
        assert!(clip.contains(clause));
        assert!(!video.contains(clause));
        assert!(clip.contains("object_recognition: Questions about what an object is\nobject_properties: "));
        assert!(render_clip_qa_prompt("d", "", types).is_err());
        assert!(render_video_qa_prompt("d", &[]).is_err());
    }

    #[test]
    fn aggregation() {
        let chapters = vec![
            (Chapter::new("a", 0.0, 10.0), cap("first")),
            (Chapter::new("b", 10.0, 25.0), cap("second")),
        ];
        assert_eq!(aggregate_chapter_captions(&chapters).unwrap(), "0 ~ 10: first\n10 ~ 25: second");
        let frac = vec![
            (Chapter::new("a", 0.0, 10.25), cap("x")),
            (Chapter::new("b", 12.0, 20.0), cap("y")),
        ];
        assert!(aggregate_chapter_captions(&frac).unwrap().starts_with("0 ~ 10.2: x"));
        assert_eq!(
            aggregate_chapter_captions(&chapters[..1]),
            Err(AnnotatorError::InsufficientChapters(1))
        );
        let unsorted = vec![chapters[1].clone(), chapters[0].clone()];
        assert_eq!(aggregate_chapter_captions(&unsorted), Err(AnnotatorError::UnsortedChapters));
        assert!(AnnotatorError::InsufficientChapters(1).to_string().contains("insufficient chapters"));
    }
}

//! Novelty-driven video selection.
//!
//! Per-second embeddings of each video are cut into fixed-length clips and
//! pooled into one vector per clip. A candidate clip's novelty is its maximum
//! cosine similarity against every clip of the reference (already collected)
//! set; clips strictly below `tau` are novel, and a video is selected when it
//! has at least one novel clip.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;

#[derive(Debug, Error)]
pub enum CuratorError {
    #[error("cannot pool an empty set of vectors")]
    EmptyPool,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("reference set is empty")]
    EmptyReference,
    #[error("tau {0} outside (-1, 1]")]
    InvalidTau(f64),
    #[error("{path}: {msg}")]
    BadFile { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Half-open time interval `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
}

impl Span {
    pub fn len(self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn is_empty(self) -> bool {
        self.end_s <= self.start_s
    }
}

/// Default clip length in seconds.
pub const CLIP_LEN_S: f64 = 10.0;
/// Shortest trailing clip that is still kept.
pub const MIN_TAIL_S: f64 = 1.0;

/// Consecutive `[k*L, (k+1)*L)` spans; a shorter final span is kept when it
/// lasts at least one second.
pub fn segment_clips(duration_s: f64, clip_len_s: f64) -> Vec<Span> {
    if !(duration_s > 0.0 && clip_len_s > 0.0) {
        return Vec::new();
    }
    let full = (duration_s / clip_len_s).floor() as usize;
    let mut spans: Vec<Span> = (0..full)
        .map(|k| Span {
            start_s: k as f64 * clip_len_s,
            end_s: (k + 1) as f64 * clip_len_s,
        })
        .collect();
    let tail_start = full as f64 * clip_len_s;
    if duration_s - tail_start >= MIN_TAIL_S {
        spans.push(Span {
            start_s: tail_start,
            end_s: duration_s,
        });
    }
    spans
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Mean,
    Max,
}

/// Pools a clip's per-second vectors into one vector.
pub fn pool_clip<V: AsRef<[f32]>>(vectors: &[V], pooling: Pooling) -> Result<Vec<f64>, CuratorError> {
    let first = vectors.first().ok_or(CuratorError::EmptyPool)?.as_ref();
    let dim = first.len();
    let init = match pooling {
        Pooling::Mean => 0.0,
        Pooling::Max => f64::NEG_INFINITY,
    };
    let mut acc = vec![init; dim];
    for v in vectors {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(CuratorError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        for (a, &x) in acc.iter_mut().zip(v) {
            match pooling {
                Pooling::Mean => *a += x as f64,
                Pooling::Max => *a = a.max(x as f64),
            }
        }
    }
    if pooling == Pooling::Mean {
        let n = vectors.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
    }
    Ok(acc)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, CuratorError> {
    if a.len() != b.len() {
        return Err(CuratorError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(CuratorError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Pooled embedding of one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipFeature {
    pub video_id: String,
    pub clip_index: u32,
    pub span: Span,
    pub vector: Vec<f64>,
}

/// Maximum-similarity search over a fixed reference set.
pub trait SimilaritySearch: Sync {
    fn dim(&self) -> usize;
    /// Largest cosine similarity between `query` and any reference clip.
    fn max_similarity(&self, query: &[f64]) -> Result<f64, CuratorError>;
}

/// Reference vectors normalised once and stored row-major; queries scan them
/// in blocks of [`BLOCK_ROWS`] rows.
pub struct ReferenceIndex {
    dim: usize,
    rows: usize,
    unit: Vec<f64>,
}

pub const BLOCK_ROWS: usize = 256;

impl ReferenceIndex {
    pub fn new(reference: &[ClipFeature]) -> Result<Self, CuratorError> {
        Self::from_vectors(reference.iter().map(|c| c.vector.as_slice()))
    }

    pub fn from_vectors<'a>(vectors: impl IntoIterator<Item = &'a [f64]>) -> Result<Self, CuratorError> {
        let mut dim = None;
        let mut unit = Vec::new();
        let mut rows = 0;
        for v in vectors {
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(CuratorError::DimensionMismatch { expected: d, got: v.len() });
            }
            let n = norm(v);
            if n == 0.0 {
                return Err(CuratorError::ZeroVector);
            }
            unit.extend(v.iter().map(|x| x / n));
            rows += 1;
        }
        let dim = dim.ok_or(CuratorError::EmptyReference)?;
        Ok(Self { dim, rows, unit })
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    fn scan(&self, q: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for block in self.unit.chunks(BLOCK_ROWS * self.dim) {
            let block_best = block
                .chunks_exact(self.dim)
                .map(|row| dot(row, q))
                .fold(f64::NEG_INFINITY, f64::max);
            best = best.max(block_best);
        }
        best
    }
}

impl SimilaritySearch for ReferenceIndex {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_similarity(&self, query: &[f64]) -> Result<f64, CuratorError> {
        if query.len() != self.dim {
            return Err(CuratorError::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let n = norm(query);
        if n == 0.0 {
            return Err(CuratorError::ZeroVector);
        }
        let q: Vec<f64> = query.iter().map(|x| x / n).collect();
        Ok(self.scan(&q).clamp(-1.0, 1.0))
    }
}

/// Straight pairwise [`cosine`] over the raw reference vectors.
pub struct ExhaustiveScan<'a> {
    reference: &'a [ClipFeature],
}

impl<'a> ExhaustiveScan<'a> {
    pub fn new(reference: &'a [ClipFeature]) -> Result<Self, CuratorError> {
        if reference.is_empty() {
            return Err(CuratorError::EmptyReference);
        }
        Ok(Self { reference })
    }
}

impl SimilaritySearch for ExhaustiveScan<'_> {
    fn dim(&self) -> usize {
        self.reference[0].vector.len()
    }

    fn max_similarity(&self, query: &[f64]) -> Result<f64, CuratorError> {
        let mut best = f64::NEG_INFINITY;
        for r in self.reference {
            best = best.max(cosine(&r.vector, query)?);
        }
        Ok(best)
    }
}

pub fn max_similarity(candidate: &ClipFeature, reference: &dyn SimilaritySearch) -> Result<f64, CuratorError> {
    reference.max_similarity(&candidate.vector)
}

/// Maximum similarity for every candidate, in input order.
pub fn max_similarity_batch(
    candidates: &[ClipFeature],
    reference: &dyn SimilaritySearch,
    exec: Exec,
) -> Result<Vec<f64>, CuratorError> {
    exec.map(candidates, |c| reference.max_similarity(&c.vector))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyReport {
    pub video_id: String,
    /// Maximum similarity per clip, in clip order.
    pub per_clip_smax: Vec<f64>,
    /// Indices of clips with similarity strictly below `tau`.
    pub novel_clips: Vec<u32>,
    pub selected: bool,
}

/// Builds one report per video from `(video_id, clip_index)`-keyed
/// similarities. A clip is novel iff `smax < tau`.
pub fn novelty_reports(scored: &[(&ClipFeature, f64)], tau: f64) -> Result<Vec<NoveltyReport>, CuratorError> {
    if !(tau > -1.0 && tau <= 1.0) {
        return Err(CuratorError::InvalidTau(tau));
    }
    let mut by_video: BTreeMap<&str, Vec<(u32, f64)>> = BTreeMap::new();
    for (clip, s) in scored {
        by_video.entry(&clip.video_id).or_default().push((clip.clip_index, *s));
    }
    Ok(by_video
        .into_iter()
        .map(|(video_id, mut clips)| {
            clips.sort_by_key(|c| c.0);
            let novel_clips: Vec<u32> = clips.iter().filter(|c| c.1 < tau).map(|c| c.0).collect();
            NoveltyReport {
                video_id: video_id.to_string(),
                per_clip_smax: clips.iter().map(|c| c.1).collect(),
                selected: !novel_clips.is_empty(),
                novel_clips,
            }
        })
        .collect())
}

/// Scores every candidate clip against `reference` and reports per video,
/// ordered by video id.
pub fn select_novel(
    candidates: &[ClipFeature],
    reference: &dyn SimilaritySearch,
    tau: f64,
    exec: Exec,
) -> Result<Vec<NoveltyReport>, CuratorError> {
    if !(tau > -1.0 && tau <= 1.0) {
        return Err(CuratorError::InvalidTau(tau));
    }
    let smax = max_similarity_batch(candidates, reference, exec)?;
    let scored: Vec<(&ClipFeature, f64)> = candidates.iter().zip(smax).collect();
    novelty_reports(&scored, tau)
}

/// Sample encoding of an embedding file body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// `count * dim` little-endian `f32` values.
    #[default]
    F32le,
    /// One line of whitespace-separated numbers per vector.
    Text,
}

/// First line of an embedding file, as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub video_id: String,
    pub dim: usize,
    pub fps: f64,
    pub count: usize,
    #[serde(default)]
    pub encoding: Encoding,
}

/// Per-frame embeddings of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoEmbeddings {
    pub video_id: String,
    pub fps: f64,
    pub dim: usize,
    pub frames: Vec<Vec<f32>>,
}

impl VideoEmbeddings {
    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    /// Pools the frames of every clip. Frame `i` sits at `i / fps` seconds;
    /// spans without any frame are skipped.
    pub fn clip_features(&self, clip_len_s: f64, pooling: Pooling) -> Result<Vec<ClipFeature>, CuratorError> {
        let mut out = Vec::new();
        for (k, span) in segment_clips(self.duration_s(), clip_len_s).into_iter().enumerate() {
            let lo = ((span.start_s * self.fps).ceil() as usize).min(self.frames.len());
            let hi = ((span.end_s * self.fps).ceil() as usize).min(self.frames.len());
            let members = &self.frames[lo..hi.max(lo)];
            if members.is_empty() {
                continue;
            }
            out.push(ClipFeature {
                video_id: self.video_id.clone(),
                clip_index: k as u32,
                span,
                vector: pool_clip(&members, pooling)?,
            });
        }
        Ok(out)
    }
}

fn bad(path: &str, msg: impl Into<String>) -> CuratorError {
    CuratorError::BadFile {
        path: path.to_string(),
        msg: msg.into(),
    }
}

/// Reads an embedding file: one JSON header line, then the body in the
/// header's encoding.
pub fn read_embeddings<R: BufRead>(mut r: R, path: &str) -> Result<VideoEmbeddings, CuratorError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h: EmbeddingHeader =
        serde_json::from_str(line.trim()).map_err(|e| bad(path, format!("bad header: {e}")))?;
    if h.dim == 0 || !(h.fps.is_finite() && h.fps > 0.0) {
        return Err(bad(path, "dim and fps must be positive"));
    }
    let frames = match h.encoding {
        Encoding::F32le => {
            let mut body = Vec::new();
            r.read_to_end(&mut body)?;
            if body.len() != h.count * h.dim * 4 {
                return Err(bad(
                    path,
                    format!("expected {} body bytes, found {}", h.count * h.dim * 4, body.len()),
                ));
            }
            body.chunks_exact(h.dim * 4)
                .map(|row| {
                    row.chunks_exact(4)
                        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                        .collect()
                })
                .collect()
        }
        Encoding::Text => {
            let mut frames = Vec::with_capacity(h.count);
            for (i, l) in r.lines().enumerate() {
                let l = l?;
                if l.trim().is_empty() {
                    continue;
                }
                let v: Vec<f32> = l
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| bad(path, format!("vector {i}: {e}")))?;
                if v.len() != h.dim {
                    return Err(bad(path, format!("vector {i} has {} values, expected {}", v.len(), h.dim)));
                }
                frames.push(v);
            }
            if frames.len() != h.count {
                return Err(bad(path, format!("expected {} vectors, found {}", h.count, frames.len())));
            }
            frames
        }
    };
    Ok(VideoEmbeddings {
        video_id: h.video_id,
        fps: h.fps,
        dim: h.dim,
        frames,
    })
}

pub fn write_embeddings<W: Write>(mut w: W, video: &VideoEmbeddings, encoding: Encoding) -> io::Result<()> {
    let header = EmbeddingHeader {
        video_id: video.video_id.clone(),
        dim: video.dim,
        fps: video.fps,
        count: video.frames.len(),
        encoding,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for f in &video.frames {
        match encoding {
            Encoding::F32le => {
                for x in f {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            Encoding::Text => {
                let line: Vec<String> = f.iter().map(|x| x.to_string()).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
    }
    Ok(())
}

/// Loads every regular file of `dir`, sorted by file name.
pub fn read_embedding_dir(dir: &Path) -> Result<Vec<VideoEmbeddings>, CuratorError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let f = io::BufReader::new(fs::File::open(p)?);
            read_embeddings(f, &p.display().to_string())
        })
        .collect()
}

//! Sample data model and the newline-delimited manifest format.
//!
//! One sample per line:
//!
//! ```text
//! {"id":"a","items":[{"kind":"image","width":896,"height":448,"uri":"a.jpg"}],"text_tokens":100,"tags":["src"]}
//! ```
//!
//! Item kinds are `image` (`width`, `height`), `video` (`duration_s`) and
//! `document` (`pages`); every item carries a `uri`. Fields belonging to a
//! different kind are rejected.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pixel dimensions of an image. Both sides are at least one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    pub width_px: u32,
    pub height_px: u32,
}

impl ImageDims {
    /// Returns `None` when either side is zero.
    pub fn new(width_px: u32, height_px: u32) -> Option<Self> {
        (width_px >= 1 && height_px >= 1).then_some(Self { width_px, height_px })
    }

    pub fn area(self) -> u64 {
        self.width_px as u64 * self.height_px as u64
    }
}

impl fmt::Display for ImageDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width_px, self.height_px)
    }
}

/// One visual input of a sample.
#[derive(Debug, Clone, PartialEq)]
pub enum VisualItem {
    Image { dims: ImageDims, uri: String },
    Video { duration_s: f64, uri: String },
    Document { pages: u32, uri: String },
}

impl VisualItem {
    pub fn kind(&self) -> ItemKind {
        match self {
            VisualItem::Image { .. } => ItemKind::Image,
            VisualItem::Video { .. } => ItemKind::Video,
            VisualItem::Document { .. } => ItemKind::Document,
        }
    }

    pub fn uri(&self) -> &str {
        match self {
            VisualItem::Image { uri, .. }
            | VisualItem::Video { uri, .. }
            | VisualItem::Document { uri, .. } => uri,
        }
    }

    /// Videos and documents are sampled in time (frames, pages).
    pub fn is_temporal(&self) -> bool {
        !matches!(self, VisualItem::Image { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Image,
    Video,
    Document,
}

/// A training record: visual items plus the fixed token length of its text.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub items: Vec<VisualItem>,
    pub text_tokens: u64,
    pub tags: Vec<String>,
}

impl Sample {
    pub fn images(&self) -> impl Iterator<Item = ImageDims> + '_ {
        self.items.iter().filter_map(|it| match it {
            VisualItem::Image { dims, .. } => Some(*dims),
            _ => None,
        })
    }

    /// Serializes to one manifest line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&WireSample::from(self)).expect("sample serialization is infallible")
    }
}

#[derive(Serialize)]
struct WireSample<'a> {
    id: &'a str,
    items: Vec<WireItem<'a>>,
    text_tokens: u64,
    tags: &'a [String],
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum WireItem<'a> {
    Image { width: u32, height: u32, uri: &'a str },
    Video { duration_s: f64, uri: &'a str },
    Document { pages: u32, uri: &'a str },
}

impl<'a> From<&'a Sample> for WireSample<'a> {
    fn from(s: &'a Sample) -> Self {
        let items = s
            .items
            .iter()
            .map(|it| match it {
                VisualItem::Image { dims, uri } => WireItem::Image {
                    width: dims.width_px,
                    height: dims.height_px,
                    uri,
                },
                VisualItem::Video { duration_s, uri } => WireItem::Video {
                    duration_s: *duration_s,
                    uri,
                },
                VisualItem::Document { pages, uri } => WireItem::Document { pages: *pages, uri },
            })
            .collect();
        WireSample {
            id: &s.id,
            items,
            text_tokens: s.text_tokens,
            tags: &s.tags,
        }
    }
}

// Permissive shapes used only for parsing, so each problem can be reported
// against the exact field that caused it.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    id: Option<String>,
    items: Option<Vec<serde_json::Value>>,
    text_tokens: Option<serde_json::Value>,
    #[serde(default)]
    tags: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawItem {
    kind: Option<String>,
    width: Option<serde_json::Value>,
    height: Option<serde_json::Value>,
    duration_s: Option<serde_json::Value>,
    pages: Option<serde_json::Value>,
    uri: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestErrorKind {
    Malformed(String),
    MissingField,
    UnexpectedField,
    UnknownKind(String),
    InvalidDimension,
    InvalidDuration,
    InvalidPages,
    InvalidTokenCount,
    DuplicateId(String),
    Io(String),
}

impl fmt::Display for ManifestErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestErrorKind::Malformed(msg) => write!(f, "malformed record ({msg})"),
            ManifestErrorKind::MissingField => f.write_str("missing field"),
            ManifestErrorKind::UnexpectedField => f.write_str("unexpected field"),
            ManifestErrorKind::UnknownKind(k) => write!(f, "unknown kind {k:?}"),
            ManifestErrorKind::InvalidDimension => f.write_str("invalid dimension"),
            ManifestErrorKind::InvalidDuration => f.write_str("invalid duration"),
            ManifestErrorKind::InvalidPages => f.write_str("invalid page count"),
            ManifestErrorKind::InvalidTokenCount => f.write_str("invalid token count"),
            ManifestErrorKind::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
            ManifestErrorKind::Io(msg) => write!(f, "read failure ({msg})"),
        }
    }
}

/// A manifest problem, always tied to a 1-based line number and a field path.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at line {line} (field `{field}`)")]
pub struct ManifestError {
    pub line: usize,
    pub field: String,
    pub kind: ManifestErrorKind,
}

impl ManifestError {
    fn new(line: usize, field: impl Into<String>, kind: ManifestErrorKind) -> Self {
        Self {
            line,
            field: field.into(),
            kind,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self.kind, ManifestErrorKind::Io(_))
    }
}

fn as_positive_u32(v: &serde_json::Value) -> Option<u32> {
    v.as_u64().filter(|&n| n >= 1).and_then(|n| u32::try_from(n).ok())
}

fn parse_item(line: usize, idx: usize, value: serde_json::Value) -> Result<VisualItem, ManifestError> {
    let path = |f: &str| format!("items[{idx}].{f}");
    let raw: RawItem = serde_json::from_value(value)
        .map_err(|e| ManifestError::new(line, format!("items[{idx}]"), ManifestErrorKind::Malformed(e.to_string())))?;
    let kind = raw
        .kind
        .ok_or_else(|| ManifestError::new(line, path("kind"), ManifestErrorKind::MissingField))?;
    let uri = raw
        .uri
        .ok_or_else(|| ManifestError::new(line, path("uri"), ManifestErrorKind::MissingField))?;
    let present = [
        ("width", raw.width.is_some()),
        ("height", raw.height.is_some()),
        ("duration_s", raw.duration_s.is_some()),
        ("pages", raw.pages.is_some()),
    ];
    let allowed: &[&str] = match kind.as_str() {
        "image" => &["width", "height"],
        "video" => &["duration_s"],
        "document" => &["pages"],
        other => {
            return Err(ManifestError::new(
                line,
                path("kind"),
                ManifestErrorKind::UnknownKind(other.to_string()),
            ))
        }
    };
    if let Some((name, _)) = present.iter().find(|(n, p)| *p && !allowed.contains(n)) {
        return Err(ManifestError::new(line, path(name), ManifestErrorKind::UnexpectedField));
    }
    let require = |v: Option<serde_json::Value>, name: &str| {
        v.ok_or_else(|| ManifestError::new(line, path(name), ManifestErrorKind::MissingField))
    };
    Ok(match kind.as_str() {
        "image" => {
            let w = require(raw.width, "width")?;
            let h = require(raw.height, "height")?;
            let width_px = as_positive_u32(&w)
                .ok_or_else(|| ManifestError::new(line, path("width"), ManifestErrorKind::InvalidDimension))?;
            let height_px = as_positive_u32(&h)
                .ok_or_else(|| ManifestError::new(line, path("height"), ManifestErrorKind::InvalidDimension))?;
            VisualItem::Image {
                dims: ImageDims { width_px, height_px },
                uri,
            }
        }
        "video" => {
            let d = require(raw.duration_s, "duration_s")?;
            let duration_s = d
                .as_f64()
                .filter(|d| d.is_finite() && *d > 0.0)
                .ok_or_else(|| ManifestError::new(line, path("duration_s"), ManifestErrorKind::InvalidDuration))?;
            VisualItem::Video { duration_s, uri }
        }
        _ => {
            let p = require(raw.pages, "pages")?;
            let pages = as_positive_u32(&p)
                .ok_or_else(|| ManifestError::new(line, path("pages"), ManifestErrorKind::InvalidPages))?;
            VisualItem::Document { pages, uri }
        }
    })
}

/// Parses one manifest line. Duplicate ids are not detected here because
/// that needs state across lines; see [`ManifestReader`].
pub fn parse_line(line: usize, text: &str) -> Result<Sample, ManifestError> {
    let raw: RawSample = serde_json::from_str(text)
        .map_err(|e| ManifestError::new(line, "<record>", ManifestErrorKind::Malformed(e.to_string())))?;
    let id = raw
        .id
        .ok_or_else(|| ManifestError::new(line, "id", ManifestErrorKind::MissingField))?;
    let text_tokens = raw
        .text_tokens
        .ok_or_else(|| ManifestError::new(line, "text_tokens", ManifestErrorKind::MissingField))?
        .as_u64()
        .ok_or_else(|| ManifestError::new(line, "text_tokens", ManifestErrorKind::InvalidTokenCount))?;
    let items = raw
        .items
        .ok_or_else(|| ManifestError::new(line, "items", ManifestErrorKind::MissingField))?
        .into_iter()
        .enumerate()
        .map(|(i, v)| parse_item(line, i, v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sample {
        id,
        items,
        text_tokens,
        tags: raw.tags,
    })
}

/// Streaming manifest parser. Yields one result per non-blank line and
/// rejects ids seen earlier in the same stream.
pub struct ManifestReader<R> {
    reader: R,
    line: usize,
    seen: HashSet<String>,
    buf: String,
}

impl<R: BufRead> ManifestReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            line: 0,
            seen: HashSet::new(),
            buf: String::new(),
        }
    }

    /// Reads up to `max` raw non-blank lines as `(line_number, text)`, for
    /// callers that parse chunks in parallel and then call [`Self::admit`].
    pub fn next_chunk(&mut self, max: usize) -> Result<Vec<(usize, String)>, ManifestError> {
        let mut out = Vec::with_capacity(max.min(4096));
        while out.len() < max {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => break,
                Ok(_) => {
                    self.line += 1;
                    let trimmed = self.buf.trim();
                    if !trimmed.is_empty() {
                        out.push((self.line, trimmed.to_string()));
                    }
                }
                Err(e) => {
                    return Err(ManifestError::new(self.line + 1, "<record>", ManifestErrorKind::Io(e.to_string())))
                }
            }
        }
        Ok(out)
    }

    /// Registers a parsed sample's id, failing on duplicates.
    pub fn admit(&mut self, line: usize, sample: Sample) -> Result<Sample, ManifestError> {
        if !self.seen.insert(sample.id.clone()) {
            return Err(ManifestError::new(line, "id", ManifestErrorKind::DuplicateId(sample.id)));
        }
        Ok(sample)
    }
}

impl<R: BufRead> Iterator for ManifestReader<R> {
    type Item = Result<Sample, ManifestError>;

    fn next(&mut self) -> Option<Self::Item> {
        let chunk = match self.next_chunk(1) {
            Ok(c) => c,
            Err(e) => return Some(Err(e)),
        };
        let (line, text) = chunk.into_iter().next()?;
        Some(parse_line(line, &text).and_then(|s| self.admit(line, s)))
    }
}

/// Parses a whole manifest, stopping at the first error.
pub fn parse_manifest<R: BufRead>(reader: R) -> Result<Vec<Sample>, ManifestError> {
    ManifestReader::new(reader).collect()
}

/// Parses a whole manifest and reports every error instead of stopping.
pub fn validate_manifest<R: BufRead>(reader: R) -> (Vec<Sample>, Vec<ManifestError>) {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for r in ManifestReader::new(reader) {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => errors.push(e),
        }
    }
    (ok, errors)
}

/// Bucket edges for the text-token histogram; the last bucket is open-ended.
pub const TEXT_TOKEN_EDGES: [f64; 10] = [
    0.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0, 8192.0, 16384.0, 32768.0, 65536.0,
];

/// Bucket edges (seconds) for the video duration histogram.
pub const DURATION_EDGES_S: [f64; 9] = [0.0, 10.0, 30.0, 60.0, 180.0, 600.0, 1800.0, 3600.0, 7200.0];

/// Fixed-edge histogram: bucket `i` is `[edges[i], edges[i+1])`, the last one
/// is `[edges[last], inf)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(edges: &[f64]) -> Self {
        Self {
            edges: edges.to_vec(),
            counts: vec![0; edges.len()],
        }
    }

    pub fn add(&mut self, value: f64) {
        let idx = self.edges.partition_point(|&e| e <= value).saturating_sub(1);
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestStats {
    pub sample_count: u64,
    pub image_count: u64,
    pub video_count: u64,
    pub document_count: u64,
    pub total_text_tokens: u64,
    pub text_tokens: Histogram,
    pub video_duration_s: Histogram,
    pub tag_counts: HashMap<String, u64>,
}

pub fn manifest_stats(samples: &[Sample]) -> ManifestStats {
    let mut st = ManifestStats {
        sample_count: 0,
        image_count: 0,
        video_count: 0,
        document_count: 0,
        total_text_tokens: 0,
        text_tokens: Histogram::new(&TEXT_TOKEN_EDGES),
        video_duration_s: Histogram::new(&DURATION_EDGES_S),
        tag_counts: HashMap::new(),
    };
    for s in samples {
        st.sample_count += 1;
        st.total_text_tokens += s.text_tokens;
        st.text_tokens.add(s.text_tokens as f64);
        for t in &s.tags {
            *st.tag_counts.entry(t.clone()).or_default() += 1;
        }
        for it in &s.items {
            match it {
                VisualItem::Image { .. } => st.image_count += 1,
                VisualItem::Video { duration_s, .. } => {
                    st.video_count += 1;
                    st.video_duration_s.add(*duration_s);
                }
                VisualItem::Document { .. } => st.document_count += 1,
            }
        }
    }
    st
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<Sample>, ManifestError> {
        parse_manifest(s.as_bytes())
    }

    #[test]
    fn empty_stream() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n\n").unwrap().is_empty());
    }

    #[test]
    fn single_image_record() {
        let got = parse(r#"{"id":"a","items":[{"kind":"image","width":896,"height":448,"uri":"a.jpg"}],"text_tokens":100}"#)
            .unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].text_tokens, 100);
        assert_eq!(
            got[0].items,
            vec![VisualItem::Image {
                dims: ImageDims::new(896, 448).unwrap(),
                uri: "a.jpg".into()
            }]
        );
    }

    #[test]
    fn negative_duration() {
        let err = parse(r#"{"id":"a","items":[{"kind":"video","duration_s":-1,"uri":"v"}],"text_tokens":1}"#).unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.kind, ManifestErrorKind::InvalidDuration);
        assert_eq!(err.field, "items[0].duration_s");
        assert!(err.to_string().starts_with("invalid duration at line 1"));
    }

    #[test]
    fn reports_line_and_field() {
        let text = concat!(
            r#"{"id":"a","items":[],"text_tokens":1}"#,
            "\n\n",
            r#"{"id":"b","items":[{"kind":"audio","uri":"x"}],"text_tokens":1}"#,
            "\n",
            r#"{"id":"a","items":[],"text_tokens":1}"#,
            "\n",
            r#"{"id":"c","items":[{"kind":"image","width":0,"height":3,"uri":"x"}],"text_tokens":1}"#,
            "\n",
            r#"{"id":"d","items":[{"kind":"image","width":3,"height":3,"pages":2,"uri":"x"}],"text_tokens":1}"#,
            "\n",
            r#"{"id":"e","items":[],"text_tokens":-5}"#,
            "\n",
            r#"{"id":"f","items":[{"kind":"document","pages":0,"uri":"x"}],"text_tokens":1}"#,
            "\n",
            "not json\n",
        );
        let (ok, errs) = validate_manifest(text.as_bytes());
        assert_eq!(ok.len(), 1);
        let summary: Vec<(usize, &str, &ManifestErrorKind)> =
            errs.iter().map(|e| (e.line, e.field.as_str(), &e.kind)).collect();
        assert_eq!(
            summary,
            vec![
                (3, "items[0].kind", &ManifestErrorKind::UnknownKind("audio".into())),
                (4, "id", &ManifestErrorKind::DuplicateId("a".into())),
                (5, "items[0].width", &ManifestErrorKind::InvalidDimension),
                (6, "items[0].pages", &ManifestErrorKind::UnexpectedField),
                (7, "text_tokens", &ManifestErrorKind::InvalidTokenCount),
                (8, "items[0].pages", &ManifestErrorKind::InvalidPages),
            ]
            .into_iter()
            .chain(std::iter::once((9, "<record>", &errs[6].kind)))
            .collect::<Vec<_>>()
        );
        assert!(matches!(errs[6].kind, ManifestErrorKind::Malformed(_)));
    }

    #[test]
    fn missing_fields() {
        let err = parse(r#"{"items":[],"text_tokens":1}"#).unwrap_err();
        assert_eq!((err.field.as_str(), err.kind), ("id", ManifestErrorKind::MissingField));
        let err = parse(r#"{"id":"x","items":[{"kind":"video","uri":"v"}],"text_tokens":1}"#).unwrap_err();
        assert_eq!(err.field, "items[0].duration_s");
        let err = parse(r#"{"id":"x","items":[],"text_tokens":1,"extra":2}"#).unwrap_err();
        assert!(matches!(err.kind, ManifestErrorKind::Malformed(_)));
    }

    #[test]
    fn stats_counts() {
        let s = manifest_stats(&[]);
        assert_eq!((s.sample_count, s.image_count, s.video_count, s.document_count), (0, 0, 0, 0));
        assert_eq!(s.text_tokens.total(), 0);

        let v = |d: f64| VisualItem::Video {
            duration_s: d,
            uri: String::new(),
        };
        let samples = vec![
            Sample {
                id: "a".into(),
                items: vec![v(5.0), v(600.0)],
                text_tokens: 300,
                tags: vec![],
            },
            Sample {
                id: "b".into(),
                items: vec![
                    VisualItem::Image {
                        dims: ImageDims::new(2, 2).unwrap(),
                        uri: String::new(),
                    },
                    VisualItem::Document {
                        pages: 3,
                        uri: String::new(),
                    },
                ],
                text_tokens: 0,
                tags: vec!["x".into()],
            },
        ];
        let s = manifest_stats(&samples);
        assert_eq!((s.video_count, s.image_count, s.document_count), (2, 1, 1));
        // 5 s falls in [0,10), 600 s in [600,1800)
        assert_eq!(s.video_duration_s.counts[0], 1);
        assert_eq!(s.video_duration_s.counts[5], 1);
        assert_eq!(s.video_duration_s.total(), 2);
        assert_eq!(s.text_tokens.counts[0], 1);
        assert_eq!(s.text_tokens.counts[1], 1);
    }

    #[test]
    fn histogram_open_last_bucket() {
        let mut h = Histogram::new(&[0.0, 10.0]);
        h.add(10.0);
        h.add(1e9);
        h.add(9.999);
        assert_eq!(h.counts, vec![1, 2]);
    }
}

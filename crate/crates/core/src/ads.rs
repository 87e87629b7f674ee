//! Automatic degradation sampling.
//!
//! A sample is fitted into a fixed sequence budget without ever truncating
//! its text. The visual budget `l_max - text_tokens` is spent in two phases:
//!
//! 1. **Temporal.** Every image is charged one tile (256 tokens). The rest
//!    buys frames/pages at 256 tokens each, up to `ceil(fps * duration)` per
//!    video and `pages` per document. Each video must get its minimum frame
//!    count, otherwise the sample is discarded.
//! 2. **Tiling.** With the temporal units fixed, the largest per-image tile
//!    cap from the ladder whose total image cost fits the residual budget is
//!    chosen.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::manifest::{ImageDims, Sample, VisualItem};
use crate::tiling::{grid_tokens, select_grid, TileGrid, TilingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdsConfig {
    /// Maximum sequence length in tokens.
    pub l_max: u64,
    /// Minimum frames per video.
    pub min_frames: u32,
    /// Target video sampling rate in frames per second.
    pub fps_target: f64,
    /// Candidate per-image tile caps, strictly descending, ending at 1.
    pub tile_ladder: Vec<u32>,
    /// Tokens per frame or page.
    pub temporal_tokens: u64,
    pub tiling: TilingConfig,
}

impl AdsConfig {
    pub fn new(l_max: u64) -> Self {
        Self {
            l_max,
            min_frames: 8,
            fps_target: 2.0,
            tile_ladder: vec![12, 8, 6, 4, 2, 1],
            temporal_tokens: 256,
            tiling: TilingConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), AdsError> {
        let bad = |m: String| Err(AdsError::InvalidConfig(m));
        if self.l_max == 0 {
            return bad("l_max must be positive".into());
        }
        if self.min_frames == 0 || self.temporal_tokens == 0 {
            return bad("min_frames and temporal_tokens must be positive".into());
        }
        if !(self.fps_target.is_finite() && self.fps_target > 0.0) {
            return bad(format!("fps_target {} must be positive", self.fps_target));
        }
        if self.tile_ladder.last() != Some(&1) || self.tile_ladder.windows(2).any(|w| w[0] <= w[1]) {
            return bad(format!("tile ladder {:?} must be strictly descending and end at 1", self.tile_ladder));
        }
        if self.tile_ladder[0] > self.tiling.max_tiles {
            return bad(format!(
                "tile ladder top {} exceeds max_tiles {}",
                self.tile_ladder[0], self.tiling.max_tiles
            ));
        }
        self.tiling.validate().map_err(AdsError::InvalidConfig)
    }
}

impl Default for AdsConfig {
    fn default() -> Self {
        Self::new(32768)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdsError {
    #[error("text_overflow: {text_tokens} text tokens leave no room under l_max {l_max}")]
    TextOverflow { text_tokens: u64, l_max: u64 },
    #[error("item is an image and has no temporal units")]
    NotTemporal,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Split of the sequence budget between text and visual content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub l_text: u64,
    pub l_visual: u64,
}

pub fn compute_budget(sample: &Sample, cfg: &AdsConfig) -> Result<Budget, AdsError> {
    if sample.text_tokens >= cfg.l_max {
        return Err(AdsError::TextOverflow {
            text_tokens: sample.text_tokens,
            l_max: cfg.l_max,
        });
    }
    Ok(Budget {
        l_text: sample.text_tokens,
        l_visual: cfg.l_max - sample.text_tokens,
    })
}

/// Maximum temporal units of an item: `ceil(fps * duration)` frames for a
/// video, every page for a document.
pub fn temporal_cap(item: &VisualItem, cfg: &AdsConfig) -> Result<u32, AdsError> {
    match item {
        VisualItem::Video { duration_s, .. } => {
            let n = (cfg.fps_target * duration_s).ceil();
            Ok(if n >= u32::MAX as f64 { u32::MAX } else { (n as u32).max(1) })
        }
        VisualItem::Document { pages, .. } => Ok(*pages),
        VisualItem::Image { .. } => Err(AdsError::NotTemporal),
    }
}

/// Midpoint-uniform timestamps: `(k + 0.5) * duration / n` for `k in 0..n`.
pub fn frame_timestamps(duration_s: f64, n: u32) -> Vec<f64> {
    let step = duration_s / n as f64;
    (0..n).map(|k| (k as f64 + 0.5) * step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// A video cannot reach its minimum frames, or the images alone do not fit.
    InsufficientBudget,
    /// The text alone fills the sequence.
    TextOverflow,
}

impl DiscardReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscardReason::InsufficientBudget => "insufficient_budget",
            DiscardReason::TextOverflow => "text_overflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Planned,
    Discarded(DiscardReason),
}

/// Allocation for one item of the sample, in item order.
#[derive(Debug, Clone, PartialEq)]
pub enum ItemPlan {
    Image { grid: TileGrid, tokens: u64 },
    Video { frames: u32, timestamps: Vec<f64> },
    Document { pages: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub sample_id: String,
    pub verdict: Verdict,
    pub l_text: u64,
    /// Chosen per-image tile cap `t*` (0 when discarded).
    pub tile_cap: u32,
    pub items: Vec<ItemPlan>,
    pub total_tokens: u64,
}

impl SamplingPlan {
    fn discarded(sample: &Sample, reason: DiscardReason) -> Self {
        Self {
            sample_id: sample.id.clone(),
            verdict: Verdict::Discarded(reason),
            l_text: sample.text_tokens,
            tile_cap: 0,
            items: Vec::new(),
            total_tokens: 0,
        }
    }

    pub fn is_planned(&self) -> bool {
        self.verdict == Verdict::Planned
    }

    /// Frames/pages per item; images report 0.
    pub fn temporal_counts(&self) -> Vec<u32> {
        self.items
            .iter()
            .map(|it| match it {
                ItemPlan::Video { frames, .. } => *frames,
                ItemPlan::Document { pages } => *pages,
                ItemPlan::Image { .. } => 0,
            })
            .collect()
    }

    /// Total temporal units `n*`.
    pub fn temporal_units(&self) -> u64 {
        self.temporal_counts().iter().map(|&n| n as u64).sum()
    }

    pub fn image_grids(&self) -> Vec<TileGrid> {
        self.items
            .iter()
            .filter_map(|it| match it {
                ItemPlan::Image { grid, .. } => Some(*grid),
                _ => None,
            })
            .collect()
    }
}

/// Splits `total` units over items proportionally to `caps`, largest
/// remainder first (ties to the lower index). Requires `total <= sum(caps)`,
/// which keeps every share within its cap.
fn distribute(total: u64, caps: &[u64]) -> Vec<u64> {
    let sum: u64 = caps.iter().sum();
    if sum == 0 {
        return vec![0; caps.len()];
    }
    debug_assert!(total <= sum);
    let mut shares: Vec<u64> = Vec::with_capacity(caps.len());
    let mut rems: Vec<(u128, usize)> = Vec::with_capacity(caps.len());
    for (i, &c) in caps.iter().enumerate() {
        let prod = total as u128 * c as u128;
        shares.push((prod / sum as u128) as u64);
        rems.push((prod % sum as u128, i));
    }
    let leftover = total - shares.iter().sum::<u64>();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rems.iter().take(leftover as usize) {
        shares[i] += 1;
    }
    shares
}

/// Plans one sample. Fails only when the text alone overflows the budget;
/// samples whose visual content cannot be fitted come back discarded.
pub fn plan(sample: &Sample, cfg: &AdsConfig) -> Result<SamplingPlan, AdsError> {
    let budget = compute_budget(sample, cfg)?;
    let unit = cfg.temporal_tokens;
    let images: Vec<ImageDims> = sample.images().collect();
    let base_image_cost = cfg.tiling.tile_tokens * images.len() as u64;

    let Some(avail) = budget.l_visual.checked_sub(base_image_cost) else {
        return Ok(SamplingPlan::discarded(sample, DiscardReason::InsufficientBudget));
    };

    // Phase 1: temporal units with every image at one tile.
    let mut caps = Vec::new();
    let mut reserve = Vec::new();
    for it in sample.items.iter().filter(|it| it.is_temporal()) {
        let cap = temporal_cap(it, cfg)? as u64;
        caps.push(cap);
        reserve.push(match it {
            VisualItem::Video { .. } => cap.min(cfg.min_frames as u64),
            _ => 1,
        });
    }
    let n_star = caps.iter().sum::<u64>().min(avail / unit);
    let reserved: u64 = reserve.iter().sum();
    if reserved > n_star {
        return Ok(SamplingPlan::discarded(sample, DiscardReason::InsufficientBudget));
    }
    let headroom: Vec<u64> = caps.iter().zip(&reserve).map(|(c, r)| c - r).collect();
    let alloc: Vec<u64> = distribute(n_star - reserved, &headroom)
        .into_iter()
        .zip(&reserve)
        .map(|(a, r)| a + r)
        .collect();

    // Phase 2: largest tile cap that fits what the temporal units left over.
    let residual = budget.l_visual - unit * n_star;
    let mut chosen = None;
    for &t in &cfg.tile_ladder {
        let grids: Vec<TileGrid> = images.iter().map(|&d| select_grid(d, &cfg.tiling, Some(t))).collect();
        let cost: u64 = grids.iter().map(|&g| grid_tokens(g, &cfg.tiling)).sum();
        if cost <= residual {
            chosen = Some((t, grids, cost));
            break;
        }
    }
    // t = 1 costs exactly base_image_cost, which phase 1 already reserved.
    let (tile_cap, grids, image_cost) = chosen.expect("ladder ends at 1 and one tile per image always fits");

    let mut grid_iter = grids.into_iter();
    let mut alloc_iter = alloc.into_iter();
    let items = sample
        .items
        .iter()
        .map(|it| match it {
            VisualItem::Image { .. } => {
                let grid = grid_iter.next().expect("one grid per image");
                ItemPlan::Image {
                    grid,
                    tokens: grid_tokens(grid, &cfg.tiling),
                }
            }
            VisualItem::Video { duration_s, .. } => {
                let frames = alloc_iter.next().expect("one allocation per temporal item") as u32;
                ItemPlan::Video {
                    frames,
                    timestamps: frame_timestamps(*duration_s, frames),
                }
            }
            VisualItem::Document { .. } => ItemPlan::Document {
                pages: alloc_iter.next().expect("one allocation per temporal item") as u32,
            },
        })
        .collect();

    Ok(SamplingPlan {
        sample_id: sample.id.clone(),
        verdict: Verdict::Planned,
        l_text: budget.l_text,
        tile_cap,
        items,
        total_tokens: budget.l_text + unit * n_star + image_cost,
    })
}

/// Plans a batch; text overflow is folded into a discarded plan so the
/// output has exactly one plan per input sample.
pub fn plan_batch(samples: &[Sample], cfg: &AdsConfig, exec: Exec) -> Vec<SamplingPlan> {
    exec.map(samples, |s| plan_or_discard(s, cfg))
}

pub fn plan_or_discard(sample: &Sample, cfg: &AdsConfig) -> SamplingPlan {
    match plan(sample, cfg) {
        Ok(p) => p,
        Err(_) => SamplingPlan::discarded(sample, DiscardReason::TextOverflow),
    }
}

/// One line of the plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub id: String,
    /// `"planned"` or `"discarded"`.
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub tile_cap: u32,
    /// Frames (video) or pages (document) per item; 0 for images.
    pub n_per_item: Vec<u32>,
    /// Frame timestamps per item; empty for images and documents.
    pub timestamps: Vec<Vec<f64>>,
    /// `[cols, rows]` per item; `null` for non-images.
    #[serde(default)]
    pub grids: Vec<Option<[u32; 2]>>,
    #[serde(default)]
    pub l_text: u64,
    pub total_tokens: u64,
}

impl PlanRecord {
    pub fn is_planned(&self) -> bool {
        self.verdict == "planned"
    }
}

impl From<&SamplingPlan> for PlanRecord {
    fn from(p: &SamplingPlan) -> Self {
        let (verdict, reason) = match p.verdict {
            Verdict::Planned => ("planned", None),
            Verdict::Discarded(r) => ("discarded", Some(r.as_str().to_string())),
        };
        PlanRecord {
            id: p.sample_id.clone(),
            verdict: verdict.into(),
            reason,
            tile_cap: p.tile_cap,
            n_per_item: p.temporal_counts(),
            timestamps: p
                .items
                .iter()
                .map(|it| match it {
                    ItemPlan::Video { timestamps, .. } => timestamps.clone(),
                    _ => Vec::new(),
                })
                .collect(),
            grids: p
                .items
                .iter()
                .map(|it| match it {
                    ItemPlan::Image { grid, .. } => Some([grid.cols, grid.rows]),
                    _ => None,
                })
                .collect(),
            l_text: p.l_text,
            total_tokens: p.total_tokens,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(items: Vec<VisualItem>, text: u64) -> Sample {
        Sample {
            id: "s".into(),
            items,
            text_tokens: text,
            tags: vec![],
        }
    }

    fn video(d: f64) -> VisualItem {
        VisualItem::Video {
            duration_s: d,
            uri: "v".into(),
        }
    }

    fn doc(p: u32) -> VisualItem {
        VisualItem::Document { pages: p, uri: "d".into() }
    }

    fn image(w: u32, h: u32) -> VisualItem {
        VisualItem::Image {
            dims: ImageDims::new(w, h).unwrap(),
            uri: "i".into(),
        }
    }

    #[test]
    fn budget_examples() {
        let b = compute_budget(&sample(vec![], 768), &AdsConfig::new(32768)).unwrap();
        assert_eq!((b.l_text, b.l_visual), (768, 32000));
        let b = compute_budget(&sample(vec![], 0), &AdsConfig::new(4096)).unwrap();
        assert_eq!((b.l_text, b.l_visual), (0, 4096));
        assert!(matches!(
            compute_budget(&sample(vec![], 40000), &AdsConfig::new(32768)),
            Err(AdsError::TextOverflow { .. })
        ));
        assert!(compute_budget(&sample(vec![], 32768), &AdsConfig::new(32768)).is_err());
    }

    #[test]
    fn temporal_cap_examples() {
        let cfg = AdsConfig::default();
        assert_eq!(temporal_cap(&video(100.0), &cfg).unwrap(), 200);
        assert_eq!(temporal_cap(&doc(10), &cfg).unwrap(), 10);
        assert_eq!(temporal_cap(&video(0.4), &cfg).unwrap(), 1);
        assert_eq!(temporal_cap(&image(1, 1), &cfg), Err(AdsError::NotTemporal));
    }

    #[test]
    fn timestamps_examples() {
        assert_eq!(frame_timestamps(10.0, 1), vec![5.0]);
        assert_eq!(frame_timestamps(10.0, 4), vec![1.25, 3.75, 6.25, 8.75]);
        let ts = frame_timestamps(10.0, 20);
        assert_eq!(ts.len(), 20);
        assert_eq!(ts[0], 0.25);
        assert_eq!(ts[19], 9.75);
        assert!(ts.windows(2).all(|w| (w[1] - w[0] - 0.5).abs() < 1e-12));
    }

    #[test]
    fn plan_worked_examples() {
        let p = plan(&sample(vec![video(100.0)], 768), &AdsConfig::new(32768)).unwrap();
        assert!(p.is_planned());
        assert_eq!(p.temporal_counts(), vec![125]);
        assert_eq!(p.total_tokens, 32768);

        let p = plan(&sample(vec![doc(10)], 1000), &AdsConfig::new(8192)).unwrap();
        assert_eq!(p.temporal_counts(), vec![10]);
        assert_eq!(p.total_tokens, 3560);

        let imgs = vec![image(896, 448), image(896, 448), image(896, 448)];
        let p = plan(&sample(imgs, 1000), &AdsConfig::new(4096)).unwrap();
        assert_eq!(p.tile_cap, 12);
        assert_eq!(p.image_grids(), vec![TileGrid::new(2, 1); 3]);
        assert_eq!(p.total_tokens, 3304);

        let p = plan(&sample(vec![video(100.0)], 1500), &AdsConfig::new(2048)).unwrap();
        assert_eq!(p.verdict, Verdict::Discarded(DiscardReason::InsufficientBudget));
    }

    #[test]
    fn text_only_and_image_overflow() {
        let p = plan(&sample(vec![], 100), &AdsConfig::new(4096)).unwrap();
        assert!(p.is_planned());
        assert_eq!(p.total_tokens, 100);
        // two images need 512 tokens at one tile each
        let p = plan(&sample(vec![image(10, 10), image(10, 10)], 3700), &AdsConfig::new(4096)).unwrap();
        assert_eq!(p.verdict, Verdict::Discarded(DiscardReason::InsufficientBudget));
    }

    #[test]
    fn short_video_needs_only_its_cap() {
        // 2 s video has 4 candidate frames, below min_frames
        let p = plan(&sample(vec![video(2.0)], 0), &AdsConfig::new(4096)).unwrap();
        assert!(p.is_planned());
        assert_eq!(p.temporal_counts(), vec![4]);
    }

    #[test]
    fn multi_item_distribution() {
        // caps 200 and 20, 60 units available
        let cfg = AdsConfig::new(60 * 256);
        let p = plan(&sample(vec![video(100.0), video(10.0)], 0), &cfg).unwrap();
        let n = p.temporal_counts();
        assert_eq!(n.iter().sum::<u32>(), 60);
        assert!(n[0] <= 200 && n[1] <= 20 && n[1] >= 8);
        assert_eq!(distribute(10, &[4, 4, 4]), vec![4, 3, 3]);
        assert_eq!(distribute(5, &[0, 10]), vec![0, 5]);
        assert_eq!(distribute(0, &[0, 0]), vec![0, 0]);
    }

    #[test]
    fn mixed_images_and_video() {
        let cfg = AdsConfig::new(10_000);
        let p = plan(&sample(vec![image(896, 448), video(1000.0)], 0), &cfg).unwrap();
        // 10000 - 256 = 9744 -> 38 frames, residual 10000 - 9728 = 272
        assert_eq!(p.temporal_counts(), vec![0, 38]);
        assert_eq!(p.tile_cap, 1);
        assert_eq!(p.total_tokens, 38 * 256 + 256);
    }

    #[test]
    fn config_validation() {
        assert!(AdsConfig::default().validate().is_ok());
        let mut c = AdsConfig::default();
        c.tile_ladder = vec![12, 12, 1];
        assert!(c.validate().is_err());
        c.tile_ladder = vec![12, 4];
        assert!(c.validate().is_err());
        c.tile_ladder = vec![16, 1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn plan_record_shape() {
        let p = plan(&sample(vec![image(896, 448), video(10.0)], 10), &AdsConfig::new(32768)).unwrap();
        let rec = PlanRecord::from(&p);
        assert_eq!(rec.n_per_item, vec![0, 20]);
        assert_eq!(rec.grids, vec![Some([2, 1]), None]);
        assert_eq!(rec.timestamps[1].len(), 20);
        let line = serde_json::to_string(&rec).unwrap();
        let back: PlanRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }
}

//! Sequence packing, progressive stage settings and short/long data mixing.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ads::{PlanRecord, SamplingPlan};
use crate::exec::Exec;

/// A sample as seen by the packer: an id and its planned token count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackItem {
    pub id: String,
    pub tokens: u64,
}

impl PackItem {
    pub fn new(id: impl Into<String>, tokens: u64) -> Self {
        Self { id: id.into(), tokens }
    }
}

impl From<&SamplingPlan> for PackItem {
    fn from(p: &SamplingPlan) -> Self {
        Self::new(p.sample_id.clone(), p.total_tokens)
    }
}

impl From<&PlanRecord> for PackItem {
    fn from(p: &PlanRecord) -> Self {
        Self::new(p.id.clone(), p.total_tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedSequence {
    pub pack_id: u64,
    pub member_ids: Vec<String>,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PackError {
    #[error("sample {id:?} has {tokens} tokens, more than the pack capacity {l_max}")]
    Oversized { id: String, tokens: u64, l_max: u64 },
    #[error("sample {0:?} was discarded by the planner and cannot be packed")]
    NotPlanned(String),
    #[error("pack capacity must be positive")]
    ZeroCapacity,
}

/// Strategy for grouping items into capacity-bounded sequences.
pub trait Packer {
    fn pack(&self, items: &[PackItem], l_max: u64) -> Result<Vec<PackedSequence>, PackError>;
}

fn check_capacity(items: &[PackItem], l_max: u64) -> Result<(), PackError> {
    if l_max == 0 {
        return Err(PackError::ZeroCapacity);
    }
    match items.iter().find(|it| it.tokens > l_max) {
        Some(it) => Err(PackError::Oversized {
            id: it.id.clone(),
            tokens: it.tokens,
            l_max,
        }),
        None => Ok(()),
    }
}

// Longest first; equal lengths by id so the output is independent of input order.
fn sorted_desc(items: &[PackItem]) -> Vec<&PackItem> {
    let mut v: Vec<&PackItem> = items.iter().collect();
    v.sort_by(|a, b| b.tokens.cmp(&a.tokens).then_with(|| a.id.cmp(&b.id)));
    v
}

/// Worst-fit decreasing: each item goes to the open pack with the most room
/// left (lowest pack id on ties), or opens a new pack when none fits.
#[derive(Debug, Clone, Copy, Default)]
pub struct WorstFitDecreasing;

impl Packer for WorstFitDecreasing {
    fn pack(&self, items: &[PackItem], l_max: u64) -> Result<Vec<PackedSequence>, PackError> {
        check_capacity(items, l_max)?;
        let mut packs: Vec<PackedSequence> = Vec::new();
        // (remaining capacity, Reverse(pack index)): max-heap pops the roomiest, oldest pack
        let mut heap: BinaryHeap<(u64, Reverse<usize>)> = BinaryHeap::new();
        for it in sorted_desc(items) {
            match heap.peek() {
                Some(&(room, Reverse(idx))) if room >= it.tokens => {
                    heap.pop();
                    packs[idx].member_ids.push(it.id.clone());
                    packs[idx].total_tokens += it.tokens;
                    heap.push((room - it.tokens, Reverse(idx)));
                }
                _ => {
                    let idx = packs.len();
                    packs.push(PackedSequence {
                        pack_id: idx as u64,
                        member_ids: vec![it.id.clone()],
                        total_tokens: it.tokens,
                    });
                    heap.push((l_max - it.tokens, Reverse(idx)));
                }
            }
        }
        Ok(packs)
    }
}

/// First-fit decreasing, kept as a comparison strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstFitDecreasing;

impl Packer for FirstFitDecreasing {
    fn pack(&self, items: &[PackItem], l_max: u64) -> Result<Vec<PackedSequence>, PackError> {
        check_capacity(items, l_max)?;
        let mut packs: Vec<PackedSequence> = Vec::new();
        for it in sorted_desc(items) {
            match packs.iter_mut().find(|p| p.total_tokens + it.tokens <= l_max) {
                Some(p) => {
                    p.member_ids.push(it.id.clone());
                    p.total_tokens += it.tokens;
                }
                None => packs.push(PackedSequence {
                    pack_id: packs.len() as u64,
                    member_ids: vec![it.id.clone()],
                    total_tokens: it.tokens,
                }),
            }
        }
        Ok(packs)
    }
}

/// Packs with [`WorstFitDecreasing`].
pub fn pack(items: &[PackItem], l_max: u64) -> Result<Vec<PackedSequence>, PackError> {
    WorstFitDecreasing.pack(items, l_max)
}

/// Packs planner output; every plan must be `planned`.
pub fn pack_plans(plans: &[SamplingPlan], l_max: u64) -> Result<Vec<PackedSequence>, PackError> {
    if let Some(p) = plans.iter().find(|p| !p.is_planned()) {
        return Err(PackError::NotPlanned(p.sample_id.clone()));
    }
    let items: Vec<PackItem> = plans.iter().map(PackItem::from).collect();
    pack(&items, l_max)
}

/// Approximate packing: items are dealt round-robin (in input order) into
/// `shards` independent streams, each stream is packed on its own, and the
/// packs are concatenated with renumbered ids. Capacity and partition still
/// hold; the pack count may exceed the single-stream result.
pub fn pack_sharded(
    items: &[PackItem],
    l_max: u64,
    shards: usize,
    exec: Exec,
) -> Result<Vec<PackedSequence>, PackError> {
    check_capacity(items, l_max)?;
    let shards = shards.max(1);
    let mut streams: Vec<Vec<PackItem>> = vec![Vec::new(); shards];
    for (i, it) in items.iter().enumerate() {
        streams[i % shards].push(it.clone());
    }
    let packed = exec.map(&streams, |s| pack(s, l_max));
    let mut out = Vec::new();
    for part in packed {
        for mut p in part? {
            p.pack_id = out.len() as u64;
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub pack_count: usize,
    pub total_tokens: u64,
    /// `None` when there are no packs.
    pub mean_utilization: Option<f64>,
    pub min_utilization: Option<f64>,
    pub max_utilization: Option<f64>,
}

pub fn balance_report(packs: &[PackedSequence], l_max: u64) -> BalanceReport {
    let utils: Vec<f64> = packs.iter().map(|p| p.total_tokens as f64 / l_max as f64).collect();
    let total_tokens = packs.iter().map(|p| p.total_tokens).sum();
    let n = utils.len();
    BalanceReport {
        pack_count: n,
        total_tokens,
        mean_utilization: (n > 0).then(|| total_tokens as f64 / (n as f64 * l_max as f64)),
        min_utilization: utils.iter().copied().reduce(f64::min),
        max_utilization: utils.iter().copied().reduce(f64::max),
    }
}

/// Settings for one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub name: String,
    pub l_max: u64,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub trainable_scope: String,
    /// Relative weight of short and long data.
    pub mix_short_long: (f64, f64),
    pub dataset: String,
    pub num_samples: String,
    pub tile_size_px: u32,
    pub max_tiles: u32,
    pub tile_tokens_rule: String,
}

/// The five-stage progressive schedule, in training order.
pub fn progressive_stages() -> Vec<StageConfig> {
    let stage = |name: &str, l_max, batch_size, learning_rate, scope: &str, mix, dataset: &str, n: &str| StageConfig {
        name: name.into(),
        l_max,
        batch_size,
        learning_rate,
        trainable_scope: scope.into(),
        mix_short_long: mix,
        dataset: dataset.into(),
        num_samples: n.into(),
        tile_size_px: 448,
        max_tiles: 12,
        tile_tokens_rule: "(i*j+1)*256".into(),
    };
    vec![
        stage("Stage-1", 4096, 1024, 2e-4, "mlp_connector", (1.0, 0.0), "ALLaVA", "1.2M"),
        stage("Stage-1.5", 8192, 1024, 2e-5, "full_model", (1.0, 0.0), "Rich Diverse Data", "21.6M"),
        stage("Stage-2", 32768, 256, 2e-5, "full_model", (1.0, 1.0), "Short+Long Data", "4.6M+4.6M"),
        stage("Stage-3", 65536, 128, 2e-5, "full_model", (1.0, 1.0), "Short+Long Data", "4.6M+4.6M"),
        stage("Stage-4", 131072, 128, 2e-5, "full_model", (1.0, 1.0), "Short+Long Data", "4.6M+4.6M"),
    ]
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixError {
    #[error("mix ratio ({0}, {1}) must be non-negative, finite and not all zero")]
    InvalidRatio(f64, f64),
}

/// Which source a mixed item came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Mixed<T> {
    Short(T),
    Long(T),
}

impl<T> Mixed<T> {
    pub fn into_inner(self) -> T {
        match self {
            Mixed::Short(t) | Mixed::Long(t) => t,
        }
    }
}

// `weight` copies of `items`: whole repetitions plus a seeded subset for the
// fractional part.
fn replicate<T: Clone>(items: &[T], weight: f64, rng: &mut ChaCha8Rng) -> Vec<T> {
    let whole = weight.floor() as usize;
    let mut out: Vec<T> = Vec::with_capacity(items.len() * (whole + 1));
    for _ in 0..whole {
        out.extend_from_slice(items);
    }
    let extra = ((weight - whole as f64) * items.len() as f64).round() as usize;
    if extra > 0 {
        let mut idx: Vec<usize> = (0..items.len()).collect();
        idx.shuffle(rng);
        idx.truncate(extra);
        idx.sort_unstable();
        out.extend(idx.into_iter().map(|i| items[i].clone()));
    }
    out
}

/// Interleaves short and long data. `ratio` weights each source by count:
/// `(1, 1)` keeps every item exactly once, `(2, 1)` repeats the short set
/// twice, `(1, 0.5)` keeps half of the long set. The result is a seeded
/// shuffle of both, so the same seed always gives the same order.
pub fn mix_datasets<T: Clone>(
    short: &[T],
    long: &[T],
    ratio: (f64, f64),
    seed: u64,
) -> Result<Vec<Mixed<T>>, MixError> {
    let (a, b) = ratio;
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0 && a + b > 0.0) {
        return Err(MixError::InvalidRatio(a, b));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Mixed<T>> = replicate(short, a, &mut rng).into_iter().map(Mixed::Short).collect();
    out.extend(replicate(long, b, &mut rng).into_iter().map(Mixed::Long));
    out.shuffle(&mut rng);
    Ok(out)
}

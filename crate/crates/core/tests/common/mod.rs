//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's selection, planning or packing code.

#![allow(dead_code)]

use longmm_core::ads::{plan_or_discard, DiscardReason, ItemPlan};
use longmm_core::manifest::{Sample, VisualItem};
use longmm_core::{AdsConfig, Verdict};
use num_bigint::BigInt;
use num_rational::BigRational;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Exact grid score with the area threshold taken as the rational 3/5.
pub fn exact_score(cols: u32, rows: u32, w: u32, h: u32, s: u32) -> BigRational {
    let big = |v: u64| BigInt::from(v);
    let area = BigRational::new(big(cols as u64 * rows as u64 * s as u64 * s as u64), big(w as u64 * h as u64));
    let thr = BigRational::new(big(3), big(5));
    let area = if area < thr { area } else { thr };
    // r_t / r_orig = cols*h / (rows*w)
    let a = BigRational::new(big(cols as u64 * h as u64), big(rows as u64 * w as u64));
    let aspect = if a > BigRational::from_integer(big(1)) { a.recip() } else { a };
    area * aspect
}

/// Brute-force argmax over every `cols * rows <= cap` grid with the tie-break
/// fewest tiles, then closest `cols/rows` to `w/h`, then fewest columns.
pub fn oracle_grid(w: u32, h: u32, cap: u32) -> (u32, u32) {
    let s = 448;
    let r_orig = BigRational::new(BigInt::from(w), BigInt::from(h));
    let mut best: Option<((u32, u32), BigRational, BigRational)> = None;
    for cols in 1..=cap {
        for rows in 1..=cap {
            if cols * rows > cap {
                continue;
            }
            let score = exact_score(cols, rows, w, h, s);
            let gap = {
                let d = BigRational::new(BigInt::from(cols), BigInt::from(rows)) - &r_orig;
                if d < BigRational::from_integer(BigInt::from(0)) {
                    -d
                } else {
                    d
                }
            };
            let better = match &best {
                None => true,
                Some(((bc, br), bs, bg)) => {
                    if score != *bs {
                        score > *bs
                    } else if cols * rows != bc * br {
                        cols * rows < bc * br
                    } else if gap != *bg {
                        gap < *bg
                    } else {
                        cols < *bc
                    }
                }
            };
            if better {
                best = Some(((cols, rows), score, gap));
            }
        }
    }
    best.unwrap().0
}

pub fn oracle_grid_tokens(cols: u32, rows: u32) -> u64 {
    let k = (cols * rows) as u64;
    if k == 1 {
        256
    } else {
        (k + 1) * 256
    }
}

/// Fewest bins of `cap` that hold `sizes`, by exhaustive search.
pub fn optimal_bins(sizes: &[u64], cap: u64) -> usize {
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut best = sorted.len();
    let mut loads = Vec::new();
    search(&sorted, 0, cap, &mut loads, &mut best);
    best
}

fn search(items: &[u64], i: usize, cap: u64, loads: &mut Vec<u64>, best: &mut usize) {
    if loads.len() >= *best {
        return;
    }
    if i == items.len() {
        *best = loads.len();
        return;
    }
    let mut tried = Vec::new();
    for b in 0..loads.len() {
        if loads[b] + items[i] <= cap && !tried.contains(&loads[b]) {
            tried.push(loads[b]);
            loads[b] += items[i];
            search(items, i + 1, cap, loads, best);
            loads[b] -= items[i];
        }
    }
    loads.push(items[i]);
    search(items, i + 1, cap, loads, best);
    loads.pop();
}

/// Straight double loop of textbook cosine similarity.
pub fn brute_smax(query: &[f64], reference: &[Vec<f64>]) -> f64 {
    reference
        .iter()
        .map(|r| {
            let dot: f64 = query.iter().zip(r).map(|(a, b)| a * b).sum();
            let nq: f64 = query.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nr: f64 = r.iter().map(|a| a * a).sum::<f64>().sqrt();
            dot / (nq * nr)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Clean and planted (brief, answer) pairs for the anchor leak check. Every
/// planted brief contains its answer up to case and surrounding whitespace;
/// no clean brief contains its answer at all.
pub fn leak_fixtures() -> (Vec<(String, String)>, Vec<(String, String)>) {
    let scenes = [
        "a cyclist crosses the bridge at dusk",
        "two children build a sandcastle near the water",
        "a chef plates dessert in a busy kitchen",
        "an old man feeds pigeons in the square",
        "a dog chases a ball across the lawn",
    ];
    let planted_answers = ["cyclist", "Sandcastle", "  KITCHEN ", "pigeons", "ball across", "dusk"];
    let clean_answers = ["seven", "purple", "a violin", "raining", "Tuesday", "zebra"];
    let mut planted = Vec::new();
    let mut clean = Vec::new();
    for s in scenes {
        for a in planted_answers {
            let needle = a.trim().to_lowercase();
            let brief = if s.contains(&needle) {
                s.to_string()
            } else {
                format!("{s}, with {} in view", a.trim().to_uppercase())
            };
            planted.push((brief, a.to_string()));
        }
        for a in clean_answers {
            clean.push((s.to_string(), a.to_string()));
        }
    }
    (planted, clean)
}

pub const LADDER: [u32; 6] = [12, 8, 6, 4, 2, 1];

pub fn oracle_image_cost(s: &Sample, cap: u32) -> u64 {
    s.images()
        .map(|d| {
            let (c, r) = oracle_grid(d.width_px, d.height_px, cap);
            oracle_grid_tokens(c, r)
        })
        .sum()
}

pub fn oracle_nmax(it: &VisualItem) -> u64 {
    match it {
        VisualItem::Video { duration_s, .. } => ((2.0 * duration_s).ceil() as u64).max(1),
        VisualItem::Document { pages, .. } => *pages as u64,
        VisualItem::Image { .. } => 0,
    }
}

/// Plans `s` and checks the result against everything derivable without
/// the planner: discard verdicts, text primacy, n* and t* maximality,
/// per-item bounds and exact token accounting.
pub fn check_plan(s: &Sample, l_max: u64) -> Result<(), String> {
    let p = plan_or_discard(s, &AdsConfig::new(l_max));
    if s.text_tokens >= l_max {
        ensure!(
            p.verdict == Verdict::Discarded(DiscardReason::TextOverflow),
            "text overflow not reported: {:?}",
            p.verdict
        );
        return Ok(());
    }
    let l_visual = l_max - s.text_tokens;
    let m = s.images().count() as u64;
    let temporal: Vec<&VisualItem> = s.items.iter().filter(|i| i.is_temporal()).collect();
    let floor: u64 = temporal
        .iter()
        .map(|it| match it {
            VisualItem::Video { .. } => oracle_nmax(it).min(8),
            _ => 1,
        })
        .sum();
    let sum_nmax: u64 = temporal.iter().map(|it| oracle_nmax(it)).sum();
    let feasible = l_visual >= 256 * m && (l_visual - 256 * m) / 256 >= floor;
    if !feasible {
        ensure!(
            p.verdict == Verdict::Discarded(DiscardReason::InsufficientBudget),
            "expected insufficient_budget, got {:?}",
            p.verdict
        );
        return Ok(());
    }
    ensure!(p.is_planned(), "feasible sample discarded: {:?}", p.verdict);
    ensure!(p.l_text == s.text_tokens, "text truncated to {}", p.l_text);

    let n_star = sum_nmax.min((l_visual - 256 * m) / 256);
    ensure!(p.temporal_units() == n_star, "n* {} != {}", p.temporal_units(), n_star);

    ensure!(p.items.len() == s.items.len(), "one plan entry per item");
    for (it, plan_item) in s.items.iter().zip(&p.items) {
        match (it, plan_item) {
            (VisualItem::Video { duration_s, .. }, ItemPlan::Video { frames, timestamps }) => {
                let n = *frames as u64;
                ensure!(n <= oracle_nmax(it) && n >= oracle_nmax(it).min(8), "video frames {n} out of range");
                ensure!(timestamps.len() as u64 == n, "timestamp count");
                ensure!(
                    timestamps.windows(2).all(|w| w[0] < w[1])
                        && timestamps.iter().all(|&x| x > 0.0 && x < *duration_s),
                    "timestamps out of order or range"
                );
            }
            (VisualItem::Document { pages, .. }, ItemPlan::Document { pages: n }) => {
                ensure!(*n >= 1 && n <= pages, "document pages {n} of {pages}");
            }
            (VisualItem::Image { .. }, ItemPlan::Image { .. }) => {}
            other => return Err(format!("item kinds out of order: {other:?}")),
        }
    }

    let residual = l_visual - 256 * n_star;
    let want = LADDER
        .iter()
        .copied()
        .find(|&c| oracle_image_cost(s, c) <= residual)
        .expect("one tile per image always fits");
    ensure!(p.tile_cap == want, "t* {} != {}", p.tile_cap, want);
    let image_cost = oracle_image_cost(s, want);
    let total = s.text_tokens + 256 * n_star + image_cost;
    ensure!(p.total_tokens == total, "total {} != {}", p.total_tokens, total);
    ensure!(p.total_tokens <= l_max, "total {} over budget {}", p.total_tokens, l_max);
    Ok(())
}

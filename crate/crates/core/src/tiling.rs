//! Area-preserving tile grid selection.
//!
//! An image of `W x H` pixels is resized onto a `cols x rows` canvas of
//! `s x s` tiles. Each candidate grid (with `cols * rows <= N`) is scored as
//!
//! ```text
//! min(cols*rows*s^2 / (W*H), threshold) * min(r_t / r_orig, r_orig / r_t)
//! ```
//!
//! with `r_t = cols/rows` and `r_orig = W/H`, and the best-scoring grid wins.
//! The area term stops rewarding growth once the canvas keeps `threshold` of
//! the original area, so larger grids only win through better aspect fit.
//!
//! Ties are frequent for small images (every grid saturates the area term),
//! and are resolved by fewest tiles, then closest aspect ratio, then fewest
//! columns. Scores are compared in `f64` and near-ties are re-checked with
//! exact rational arithmetic, so the selection never depends on rounding.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::manifest::ImageDims;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TilingConfig {
    /// Side length of a square tile in pixels.
    pub tile_size_px: u32,
    /// Upper bound on `cols * rows`.
    pub max_tiles: u32,
    /// Area fraction above which the area term saturates, in `(0, 1]`.
    pub area_threshold: f64,
    /// Tokens produced by one tile (and by the thumbnail).
    pub tile_tokens: u64,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self {
            tile_size_px: 448,
            max_tiles: 12,
            area_threshold: 0.6,
            tile_tokens: 256,
        }
    }
}

impl TilingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.tile_size_px == 0 || self.max_tiles == 0 || self.tile_tokens == 0 {
            return Err("tile_size_px, max_tiles and tile_tokens must be positive".into());
        }
        if !(self.area_threshold > 0.0 && self.area_threshold <= 1.0) {
            return Err(format!("area_threshold {} outside (0, 1]", self.area_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileGrid {
    pub cols: u32,
    pub rows: u32,
}

impl TileGrid {
    pub const fn new(cols: u32, rows: u32) -> Self {
        Self { cols, rows }
    }

    pub fn tiles(self) -> u32 {
        self.cols * self.rows
    }
}

/// Pixel box `[x0, x1) x [y0, y1)` on the resized canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileLayout {
    pub canvas_w: u32,
    pub canvas_h: u32,
    /// Row-major crop boxes, one per tile.
    pub rects: Vec<Rect>,
}

/// All grids with `cols * rows <= max_tiles`, ordered by `(cols, rows)`.
pub fn candidate_grids(max_tiles: u32) -> Vec<TileGrid> {
    (1..=max_tiles)
        .flat_map(|cols| (1..=max_tiles / cols).map(move |rows| TileGrid::new(cols, rows)))
        .collect()
}

/// Area-times-aspect score of `grid` for an image of `dims`.
pub fn score_grid(grid: TileGrid, dims: ImageDims, cfg: &TilingConfig) -> f64 {
    let s = cfg.tile_size_px as f64;
    let area_ratio = grid.tiles() as f64 * s * s / dims.area() as f64;
    let (lo, hi) = aspect_terms(grid, dims);
    area_ratio.min(cfg.area_threshold) * (lo as f64 / hi as f64)
}

// r_t / r_orig = cols*H / (rows*W); the aspect factor is min/max of the two.
fn aspect_terms(grid: TileGrid, dims: ImageDims) -> (u64, u64) {
    let a = grid.cols as u64 * dims.height_px as u64;
    let b = grid.rows as u64 * dims.width_px as u64;
    (a.min(b), a.max(b))
}

fn exact_score(grid: TileGrid, dims: ImageDims, cfg: &TilingConfig) -> BigRational {
    let s = cfg.tile_size_px as u64;
    let area = BigRational::new(
        BigInt::from(grid.tiles() as u64 * s * s),
        BigInt::from(dims.area()),
    );
    let thr = BigRational::from_float(cfg.area_threshold).expect("finite threshold");
    let (lo, hi) = aspect_terms(grid, dims);
    area.min(thr) * BigRational::new(BigInt::from(lo), BigInt::from(hi))
}

// |cols/rows - W/H| scaled by rows*H, which is enough to compare two grids:
// |c1 H - r1 W| / r1 vs |c2 H - r2 W| / r2.
fn aspect_gap(grid: TileGrid, dims: ImageDims) -> (u128, u128) {
    let num = (grid.cols as i128 * dims.height_px as i128 - grid.rows as i128 * dims.width_px as i128).unsigned_abs();
    (num, grid.rows as u128)
}

/// Tie-break between equally scored grids; `Less` means `a` is preferred.
fn tie_break(a: TileGrid, b: TileGrid, dims: ImageDims) -> Ordering {
    let (na, da) = aspect_gap(a, dims);
    let (nb, db) = aspect_gap(b, dims);
    a.tiles()
        .cmp(&b.tiles())
        .then_with(|| (na * db).cmp(&(nb * da)))
        .then_with(|| a.cols.cmp(&b.cols))
}

/// Picks the best grid among `candidate_grids(min(tile_cap, max_tiles))`.
///
/// `tile_cap` below 1 is treated as 1.
pub fn select_grid(dims: ImageDims, cfg: &TilingConfig, tile_cap: Option<u32>) -> TileGrid {
    let cap = tile_cap.map_or(cfg.max_tiles, |c| c.min(cfg.max_tiles)).max(1);
    let mut best = TileGrid::new(1, 1);
    let mut best_score = score_grid(best, dims, cfg);
    for grid in candidate_grids(cap).into_iter().skip(1) {
        let score = score_grid(grid, dims, cfg);
        let tol = 1e-9 * score.max(best_score);
        let ord = if (score - best_score).abs() > tol {
            score.partial_cmp(&best_score).unwrap_or(Ordering::Equal)
        } else {
            exact_score(grid, dims, cfg)
                .cmp(&exact_score(best, dims, cfg))
                .then_with(|| tie_break(best, grid, dims))
        };
        if ord == Ordering::Greater {
            best = grid;
            best_score = score;
        }
    }
    best
}

/// Tokens for a selected grid: one block per tile plus a thumbnail block
/// whenever the grid has more than one tile.
pub fn grid_tokens(grid: TileGrid, cfg: &TilingConfig) -> u64 {
    match grid.tiles() {
        1 => cfg.tile_tokens,
        k => (k as u64 + 1) * cfg.tile_tokens,
    }
}

/// Token cost of an image when at most `tile_cap` tiles are allowed.
pub fn image_tokens(dims: ImageDims, tile_cap: u32, cfg: &TilingConfig) -> u64 {
    grid_tokens(select_grid(dims, cfg, Some(tile_cap)), cfg)
}

/// Crop geometry for `grid`. The source image is expected to be resized to
/// `canvas_w x canvas_h` before cropping.
pub fn tile_layout(_dims: ImageDims, grid: TileGrid, cfg: &TilingConfig) -> TileLayout {
    let s = cfg.tile_size_px;
    let rects = (0..grid.rows)
        .flat_map(|r| {
            (0..grid.cols).map(move |c| Rect {
                x0: c * s,
                y0: r * s,
                x1: (c + 1) * s,
                y1: (r + 1) * s,
            })
        })
        .collect();
    TileLayout {
        canvas_w: grid.cols * s,
        canvas_h: grid.rows * s,
        rects,
    }
}

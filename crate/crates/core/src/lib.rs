//! Planning and curation toolkit for long-context multimodal training data.
//!
//! The crate is organised as a pipeline of independent stages:
//!
//! - [`manifest`]: sample records and their newline-delimited wire format.
//! - [`tiling`]: area-preserving tile grid selection and per-image token cost.
//! - [`ads`]: degradation sampling that fits a sample into a sequence budget.
//! - [`composer`]: length-balanced packing, progressive stages, data mixing.
//! - [`curator`]: embedding-similarity novelty selection of videos.
//! - [`annotator`]: prompt rendering, response parsing and the annotation pipeline.
//!
//! Data-parallel loops go through [`exec::Exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to a plain sequential loop
//! otherwise.

pub mod ads;
pub mod annotator;
pub mod composer;
pub mod curator;
pub mod exec;
pub mod manifest;
pub mod tiling;

pub use ads::{AdsConfig, Budget, SamplingPlan, Verdict};
pub use composer::{PackedSequence, StageConfig};
pub use curator::{ClipFeature, NoveltyReport};
pub use exec::Exec;
pub use manifest::{ImageDims, Sample, VisualItem};
pub use tiling::{TileGrid, TileLayout, TilingConfig};

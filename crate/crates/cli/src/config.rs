//! Config file schema. Every value is optional; whatever a file leaves out
//! falls through to the built-in default, and flags or `LONGMM_*` variables
//! override what it sets.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub log_level: Option<String>,
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub pack: PackSection,
    #[serde(default)]
    pub curate: CurateSection,
    #[serde(default)]
    pub annotate: AnnotateSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub l_max: Option<u64>,
    pub min_frames: Option<u32>,
    pub fps_target: Option<f64>,
    pub tile_ladder: Option<Vec<u32>>,
    pub chunk_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackSection {
    pub l_max: Option<u64>,
    pub strategy: Option<String>,
    pub shards: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurateSection {
    pub tau: Option<f64>,
    pub clip_len_s: Option<f64>,
    pub pooling: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotateSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
    pub max_in_flight: Option<usize>,
    pub max_retries: Option<u32>,
    pub requests_per_minute: Option<f64>,
    pub types_per_request: Option<usize>,
    pub timeout_s: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// First of flag/env (already merged by clap), config file, default.
pub fn pick<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

//! `longmm`: plan, pack, curate and annotate long-context multimodal data.
//!
//! Data goes to stdout (or `--output`) as newline-delimited JSON; logs and
//! summaries go to stderr. Exit codes: 0 success, 1 invalid input or usage,
//! 2 I/O failure, 3 some annotation jobs failed.

mod config;
mod http;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use longmm_core::ads::{plan_batch, AdsConfig, PlanRecord};
use longmm_core::annotator::mock::SyntheticClient;
use longmm_core::annotator::{run_pipeline, Job, LlmClient, PipelinePolicy};
use longmm_core::composer::{
    balance_report, pack_sharded, progressive_stages, FirstFitDecreasing, PackItem, Packer, WorstFitDecreasing,
};
use longmm_core::curator::{read_embedding_dir, select_novel, CuratorError, Pooling, ReferenceIndex, CLIP_LEN_S};
use longmm_core::manifest::{
    manifest_stats, parse_line, validate_manifest, ImageDims, ManifestError, ManifestReader,
};
use longmm_core::tiling::{grid_tokens, select_grid, tile_layout, TilingConfig};
use longmm_core::Exec;
use serde::Serialize;
use serde_json::json;

use crate::config::{pick, FileConfig};

#[derive(Parser, Debug)]
#[command(name = "longmm", version, about = "Token-budget planning, packing, curation and annotation for long-context multimodal data")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = "LONGMM_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "LONGMM_SEED")]
    seed: Option<u64>,
    /// Worker threads: 0 = all cores, 1 = sequential.
    #[arg(long, global = true, env = "LONGMM_JOBS")]
    jobs: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, env = "LONGMM_LOG_LEVEL")]
    log_level: Option<String>,
    /// Write data here instead of stdout.
    #[arg(short, long, global = true, env = "LONGMM_OUTPUT")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Manifest -> one sampling plan per sample.
    Plan(PlanArgs),
    /// Plans -> packed sequences.
    Pack(PackArgs),
    /// Print the progressive training stage table.
    Stages,
    /// Embedding files -> per-video novelty reports.
    Curate(CurateArgs),
    /// Job file -> annotation records.
    Annotate(AnnotateArgs),
    /// Lint a manifest or a plan file.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
struct PlanArgs {
    #[command(subcommand)]
    sub: Option<PlanSub>,
    /// Manifest path; stdin when omitted or `-`.
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(long, env = "LONGMM_L_MAX")]
    l_max: Option<u64>,
    #[arg(long, env = "LONGMM_MIN_FRAMES")]
    min_frames: Option<u32>,
    #[arg(long, env = "LONGMM_FPS_TARGET")]
    fps_target: Option<f64>,
    /// Comma-separated, strictly descending, ending at 1.
    #[arg(long, env = "LONGMM_TILE_LADDER", value_delimiter = ',')]
    tile_ladder: Option<Vec<u32>>,
    /// Samples read and planned per batch.
    #[arg(long, env = "LONGMM_CHUNK_SIZE")]
    chunk_size: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum PlanSub {
    /// Image sizes (`WxH` or `{"width","height"}` per line) -> tile grid, tokens and canvas.
    Tiling(TilingArgs),
}

#[derive(Args, Debug)]
struct TilingArgs {
    /// Size list; stdin when omitted or `-`.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Upper bound on tiles per image.
    #[arg(long, env = "LONGMM_TILE_CAP")]
    tile_cap: Option<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Strategy {
    Wfd,
    Ffd,
}

#[derive(Args, Debug)]
struct PackArgs {
    /// Plan file; stdin when omitted or `-`.
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(long, env = "LONGMM_L_MAX")]
    l_max: Option<u64>,
    #[arg(long, env = "LONGMM_STRATEGY")]
    strategy: Option<Strategy>,
    /// Pack this many round-robin shards independently (worst-fit only).
    #[arg(long, env = "LONGMM_SHARDS")]
    shards: Option<usize>,
}

#[derive(Args, Debug)]
struct CurateArgs {
    /// Directory of embedding files for already collected videos.
    #[arg(long, env = "LONGMM_REFERENCE")]
    reference: PathBuf,
    /// Directory of embedding files for candidate videos.
    #[arg(long, env = "LONGMM_CANDIDATES")]
    candidates: PathBuf,
    #[arg(long, env = "LONGMM_TAU")]
    tau: Option<f64>,
    #[arg(long, env = "LONGMM_CLIP_LEN")]
    clip_len: Option<f64>,
    #[arg(long, env = "LONGMM_POOLING")]
    pooling: Option<String>,
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    /// Job file; stdin when omitted or `-`.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Chat completions URL, or `mock://` for the offline synthetic client.
    #[arg(long, env = "LONGMM_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long, env = "LONGMM_MODEL")]
    model: Option<String>,
    #[arg(long, env = "LONGMM_API_KEY", hide_env_values = true)]
    api_key: Option<String>,
    #[arg(long, env = "LONGMM_TEMPERATURE")]
    temperature: Option<f64>,
    #[arg(long, env = "LONGMM_MAX_IN_FLIGHT")]
    max_in_flight: Option<usize>,
    #[arg(long, env = "LONGMM_MAX_RETRIES")]
    max_retries: Option<u32>,
    #[arg(long, env = "LONGMM_RPM")]
    requests_per_minute: Option<f64>,
    #[arg(long, env = "LONGMM_TYPES_PER_REQUEST")]
    types_per_request: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LintKind {
    Manifest,
    Plans,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// File to lint; stdin when omitted or `-`.
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "manifest")]
    kind: LintKind,
    /// Budget that planned totals must respect (plans only).
    #[arg(long, env = "LONGMM_L_MAX")]
    l_max: Option<u64>,
}

/// A failure with the exit code it maps to.
struct Fail {
    code: u8,
    err: anyhow::Error,
}

fn invalid(err: impl Into<anyhow::Error>) -> Fail {
    Fail { code: 1, err: err.into() }
}

fn io_fail(err: impl Into<anyhow::Error>) -> Fail {
    Fail { code: 2, err: err.into() }
}

fn manifest_fail(e: ManifestError) -> Fail {
    if e.is_io() {
        io_fail(e)
    } else {
        invalid(e)
    }
}

fn curator_fail(e: CuratorError) -> Fail {
    match e {
        CuratorError::Io(_) => io_fail(e),
        _ => invalid(e),
    }
}

type Out = Box<dyn Write>;

fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>, Fail> {
    match path {
        None => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) if p == Path::new("-") => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display())).map_err(io_fail)?;
            Ok(Box::new(BufReader::new(f)))
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Out, Fail> {
    Ok(match path {
        None => Box::new(BufWriter::new(io::stdout())),
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display())).map_err(io_fail)?;
            Box::new(BufWriter::new(f))
        }
    })
}

fn write_line<T: Serialize>(out: &mut Out, value: &T) -> Result<(), Fail> {
    serde_json::to_writer(&mut *out, value).map_err(io_fail)?;
    out.write_all(b"\n").map_err(io_fail)
}

fn echo_config(command: &str, effective: serde_json::Value) {
    eprintln!("longmm {command}: effective config {effective}");
}

/// Non-blank lines with 1-based numbers.
fn numbered_lines(input: Box<dyn BufRead>) -> impl Iterator<Item = Result<(usize, String), Fail>> {
    input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(io_fail(anyhow!(e).context(format!("reading line {}", i + 1))))),
    })
}

struct Globals {
    file: FileConfig,
    exec: Exec,
    jobs: usize,
    seed: u64,
    output: Option<PathBuf>,
}

#[derive(serde::Deserialize)]
struct SizeLine {
    width: u32,
    height: u32,
}

fn parse_size(text: &str) -> Option<ImageDims> {
    let t = text.trim();
    let (w, h) = if t.starts_with('{') {
        let s: SizeLine = serde_json::from_str(t).ok()?;
        (s.width, s.height)
    } else {
        let (w, h) = t.split_once(['x', 'X'])?;
        (w.trim().parse().ok()?, h.trim().parse().ok()?)
    };
    ImageDims::new(w, h)
}

fn cmd_tiling(g: &Globals, a: &TilingArgs) -> Result<u8, Fail> {
    let cfg = TilingConfig::default();
    let cap = a.tile_cap.unwrap_or(cfg.max_tiles);
    if cap == 0 || cap > cfg.max_tiles {
        return Err(invalid(anyhow!("tile cap {cap} outside 1..={}", cfg.max_tiles)));
    }
    echo_config("plan tiling", json!({"tile_cap": cap, "tiling": cfg}));
    let mut dims = Vec::new();
    for line in numbered_lines(open_input(a.input.as_deref())?) {
        let (n, text) = line?;
        dims.push(parse_size(&text).ok_or_else(|| invalid(anyhow!("line {n}: expected WxH or {{\"width\",\"height\"}}")))?);
    }
    let rows = g.exec.map(&dims, |d| {
        let grid = select_grid(*d, &cfg, Some(cap));
        let layout = tile_layout(*d, grid, &cfg);
        json!({"grid": [grid.cols, grid.rows], "tokens": grid_tokens(grid, &cfg),
               "canvas": [layout.canvas_w, layout.canvas_h]})
    });
    let mut out = open_output(g.output.as_deref())?;
    for r in &rows {
        write_line(&mut out, r)?;
    }
    out.flush().map_err(io_fail)?;
    Ok(0)
}

fn cmd_plan(g: &Globals, a: &PlanArgs) -> Result<u8, Fail> {
    if let Some(PlanSub::Tiling(t)) = &a.sub {
        return cmd_tiling(g, t);
    }
    let f = &g.file.plan;
    let mut cfg = AdsConfig::new(pick(a.l_max, f.l_max, 32768));
    cfg.min_frames = pick(a.min_frames, f.min_frames, cfg.min_frames);
    cfg.fps_target = pick(a.fps_target, f.fps_target, cfg.fps_target);
    cfg.tile_ladder = pick(a.tile_ladder.clone(), f.tile_ladder.clone(), cfg.tile_ladder);
    let chunk = pick(a.chunk_size, f.chunk_size, 4096).max(1);
    cfg.validate().map_err(invalid)?;
    echo_config(
        "plan",
        json!({"l_max": cfg.l_max, "min_frames": cfg.min_frames, "fps_target": cfg.fps_target,
               "tile_ladder": cfg.tile_ladder, "chunk_size": chunk, "jobs": g.jobs}),
    );

    let mut reader = ManifestReader::new(open_input(a.input.as_deref())?);
    let mut out = open_output(g.output.as_deref())?;
    let mut tally: BTreeMap<&'static str, u64> = BTreeMap::new();
    loop {
        let lines = reader.next_chunk(chunk).map_err(manifest_fail)?;
        if lines.is_empty() {
            break;
        }
        let parsed = g.exec.map(&lines, |(n, text)| parse_line(*n, text));
        let mut samples = Vec::with_capacity(parsed.len());
        let mut bad = None;
        for ((n, _), r) in lines.iter().zip(parsed) {
            match r.and_then(|s| reader.admit(*n, s)) {
                Ok(s) => samples.push(s),
                Err(e) => {
                    bad = Some(e);
                    break;
                }
            }
        }
        for p in plan_batch(&samples, &cfg, g.exec) {
            let rec = PlanRecord::from(&p);
            *tally.entry(if rec.is_planned() { "planned" } else { "discarded" }).or_default() += 1;
            write_line(&mut out, &rec)?;
        }
        if let Some(e) = bad {
            out.flush().map_err(io_fail)?;
            return Err(manifest_fail(e));
        }
    }
    out.flush().map_err(io_fail)?;
    info!("plan summary: {tally:?}");
    Ok(0)
}

fn cmd_pack(g: &Globals, a: &PackArgs) -> Result<u8, Fail> {
    let f = &g.file.pack;
    let l_max = pick(a.l_max, f.l_max, 32768);
    let strategy = match (a.strategy, f.strategy.as_deref()) {
        (Some(s), _) => s,
        (None, Some(s)) => Strategy::from_str(s, true).map_err(|e| invalid(anyhow!("pack.strategy: {e}")))?,
        (None, None) => Strategy::Wfd,
    };
    let shards = pick(a.shards, f.shards, 1).max(1);
    if shards > 1 && matches!(strategy, Strategy::Ffd) {
        return Err(invalid(anyhow!("sharded packing is only available with the wfd strategy")));
    }
    echo_config("pack", json!({"l_max": l_max, "strategy": strategy, "shards": shards, "jobs": g.jobs}));

    let mut items = Vec::new();
    let mut discarded = 0u64;
    for line in numbered_lines(open_input(a.input.as_deref())?) {
        let (n, text) = line?;
        let rec: PlanRecord =
            serde_json::from_str(&text).map_err(|e| invalid(anyhow!("line {n}: not a plan record: {e}")))?;
        if rec.is_planned() {
            items.push(PackItem::from(&rec));
        } else {
            discarded += 1;
        }
    }
    if discarded > 0 {
        warn!("skipped {discarded} discarded plans");
    }
    let packs = match (strategy, shards) {
        (Strategy::Wfd, 1) => WorstFitDecreasing.pack(&items, l_max),
        (Strategy::Wfd, s) => pack_sharded(&items, l_max, s, g.exec),
        (Strategy::Ffd, _) => FirstFitDecreasing.pack(&items, l_max),
    }
    .map_err(invalid)?;
    let mut out = open_output(g.output.as_deref())?;
    for p in &packs {
        write_line(&mut out, p)?;
    }
    out.flush().map_err(io_fail)?;
    eprintln!("{}", json!({"balance": balance_report(&packs, l_max), "skipped_discarded": discarded}));
    Ok(0)
}

fn cmd_stages(g: &Globals) -> Result<u8, Fail> {
    echo_config("stages", json!({}));
    let mut out = open_output(g.output.as_deref())?;
    write_line(&mut out, &progressive_stages())?;
    out.flush().map_err(io_fail)?;
    Ok(0)
}

fn cmd_curate(g: &Globals, a: &CurateArgs) -> Result<u8, Fail> {
    let f = &g.file.curate;
    let tau = pick(a.tau, f.tau, 0.5);
    let clip_len = pick(a.clip_len, f.clip_len_s, CLIP_LEN_S);
    if !(clip_len > 0.0 && clip_len.is_finite()) {
        return Err(invalid(anyhow!("clip length {clip_len} must be positive")));
    }
    let pooling = match pick(a.pooling.clone(), f.pooling.clone(), "mean".into()).as_str() {
        "mean" => Pooling::Mean,
        "max" => Pooling::Max,
        other => return Err(invalid(anyhow!("unknown pooling {other:?}; use mean or max"))),
    };
    echo_config(
        "curate",
        json!({"reference": a.reference, "candidates": a.candidates, "tau": tau, "clip_len_s": clip_len,
               "pooling": pooling, "jobs": g.jobs}),
    );

    let features = |dir: &Path| -> Result<Vec<_>, Fail> {
        let videos = read_embedding_dir(dir).map_err(curator_fail)?;
        let mut clips = Vec::new();
        for v in &videos {
            clips.extend(v.clip_features(clip_len, pooling).map_err(curator_fail)?);
        }
        info!("{}: {} videos, {} clips", dir.display(), videos.len(), clips.len());
        Ok(clips)
    };
    let reference = features(&a.reference)?;
    let candidates = features(&a.candidates)?;
    let index = ReferenceIndex::new(&reference).map_err(curator_fail)?;
    let reports = select_novel(&candidates, &index, tau, g.exec).map_err(curator_fail)?;
    let mut out = open_output(g.output.as_deref())?;
    for r in &reports {
        write_line(&mut out, r)?;
    }
    out.flush().map_err(io_fail)?;
    let selected = reports.iter().filter(|r| r.selected).count();
    eprintln!("{}", json!({"videos": reports.len(), "selected": selected}));
    Ok(0)
}

fn cmd_annotate(g: &Globals, a: &AnnotateArgs) -> Result<u8, Fail> {
    let f = &g.file.annotate;
    let d = PipelinePolicy::default();
    let endpoint = a
        .endpoint
        .clone()
        .or(f.endpoint.clone())
        .ok_or_else(|| invalid(anyhow!("no endpoint: pass --endpoint, set LONGMM_ENDPOINT or annotate.endpoint")))?;
    let model = pick(a.model.clone(), f.model.clone(), "gpt-4o".into());
    let policy = PipelinePolicy {
        max_retries: pick(a.max_retries, f.max_retries, d.max_retries),
        max_in_flight: pick(a.max_in_flight, f.max_in_flight, d.max_in_flight).max(1),
        requests_per_minute: a.requests_per_minute.or(f.requests_per_minute),
        types_per_request: pick(a.types_per_request, f.types_per_request, d.types_per_request),
        seed: g.seed,
        temperature: pick(a.temperature, f.temperature, d.temperature),
        max_output_tokens: f.max_output_tokens.unwrap_or(d.max_output_tokens),
        ..d
    };
    let timeout = Duration::from_secs_f64(f.timeout_s.unwrap_or(120.0));
    echo_config(
        "annotate",
        json!({"endpoint": endpoint, "model": model, "temperature": policy.temperature,
               "max_in_flight": policy.max_in_flight, "max_retries": policy.max_retries,
               "requests_per_minute": policy.requests_per_minute, "types_per_request": policy.types_per_request,
               "seed": policy.seed}),
    );

    let client: Box<dyn LlmClient> = if endpoint.starts_with("mock://") {
        Box::new(SyntheticClient)
    } else {
        Box::new(http::ChatCompletions::new(&endpoint, &model, a.api_key.clone(), timeout).map_err(invalid)?)
    };

    let mut jobs: Vec<Job> = Vec::new();
    let mut ids = HashSet::new();
    for line in numbered_lines(open_input(a.input.as_deref())?) {
        let (n, text) = line?;
        let job: Job = serde_json::from_str(&text).map_err(|e| invalid(anyhow!("line {n}: bad job: {e}")))?;
        if !ids.insert(job.video_id.clone()) {
            return Err(invalid(anyhow!("line {n}: duplicate video_id {:?}", job.video_id)));
        }
        jobs.push(job);
    }

    let mut out = open_output(g.output.as_deref())?;
    let summary = run_pipeline(&jobs, &client, &policy, |rec| {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
        out.flush()
    })
    .map_err(io_fail)?;
    eprintln!("{}", serde_json::to_string(&summary).map_err(io_fail)?);
    Ok(if summary.failed > 0 { 3 } else { 0 })
}

fn lint_plan(rec: &PlanRecord, l_max: u64) -> Result<(), String> {
    let n = rec.n_per_item.len();
    if rec.timestamps.len() != n || rec.grids.len() != n {
        return Err("n_per_item, timestamps and grids differ in length".into());
    }
    match rec.verdict.as_str() {
        "planned" => {
            if rec.total_tokens > l_max {
                return Err(format!("total_tokens {} exceeds l_max {l_max}", rec.total_tokens));
            }
            if rec.total_tokens < rec.l_text {
                return Err("total_tokens below l_text".into());
            }
            for (i, ts) in rec.timestamps.iter().enumerate() {
                if !ts.is_empty() && ts.len() != rec.n_per_item[i] as usize {
                    return Err(format!("item {i}: {} timestamps for {} frames", ts.len(), rec.n_per_item[i]));
                }
                if ts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(format!("item {i}: timestamps not increasing"));
                }
            }
            Ok(())
        }
        "discarded" => match rec.reason.as_deref() {
            Some("insufficient_budget" | "text_overflow") => Ok(()),
            other => Err(format!("discarded with reason {other:?}")),
        },
        other => Err(format!("unknown verdict {other:?}")),
    }
}

fn cmd_validate(g: &Globals, a: &ValidateArgs) -> Result<u8, Fail> {
    echo_config("validate", json!({"kind": format!("{:?}", a.kind).to_lowercase(), "l_max": a.l_max}));
    let input = open_input(a.input.as_deref())?;
    let mut out = open_output(g.output.as_deref())?;
    let (report, n_errors, io_error) = match a.kind {
        LintKind::Manifest => {
            let (ok, errs) = validate_manifest(input);
            let io_error = errs.iter().any(|e| e.is_io());
            let errors: Vec<_> = errs
                .iter()
                .map(|e| json!({"line": e.line, "field": e.field, "message": e.kind.to_string()}))
                .collect();
            let report = json!({"kind": "manifest", "valid": ok.len(), "invalid": errs.len(),
                                "errors": errors, "stats": manifest_stats(&ok)});
            (report, errs.len(), io_error)
        }
        LintKind::Plans => {
            let l_max = pick(a.l_max, g.file.plan.l_max, 32768);
            let mut errors = Vec::new();
            let mut valid = 0;
            let mut seen = HashSet::new();
            for line in numbered_lines(input) {
                let (n, text) = line?;
                let checked = serde_json::from_str::<PlanRecord>(&text)
                    .map_err(|e| format!("not a plan record: {e}"))
                    .and_then(|rec| {
                        lint_plan(&rec, l_max)?;
                        if seen.insert(rec.id.clone()) {
                            Ok(())
                        } else {
                            Err(format!("duplicate id {:?}", rec.id))
                        }
                    });
                match checked {
                    Ok(()) => valid += 1,
                    Err(msg) => errors.push(json!({"line": n, "message": msg})),
                }
            }
            let n = errors.len();
            (json!({"kind": "plans", "l_max": l_max, "valid": valid, "invalid": n, "errors": errors}), n, false)
        }
    };
    write_line(&mut out, &report)?;
    out.flush().map_err(io_fail)?;
    Ok(match (io_error, n_errors) {
        (true, _) => 2,
        (false, 0) => 0,
        _ => 1,
    })
}

fn run(cli: Cli) -> Result<u8, Fail> {
    let file = FileConfig::load(cli.config.as_deref()).map_err(|e| {
        if e.downcast_ref::<io::Error>().is_some() {
            io_fail(e)
        } else {
            invalid(e)
        }
    })?;
    let level = pick(cli.log_level.clone(), file.log_level.clone(), "info".into());
    env_logger::Builder::new()
        .parse_filters(&level)
        .target(env_logger::Target::Stderr)
        .try_init()
        .ok();
    let jobs = pick(cli.jobs, file.jobs, 0);
    let g = Globals {
        exec: Exec::from_jobs(jobs),
        jobs,
        seed: pick(cli.seed, file.seed, 0),
        output: cli.output.clone(),
        file,
    };
    match &cli.command {
        Command::Plan(a) => cmd_plan(&g, a),
        Command::Pack(a) => cmd_pack(&g, a),
        Command::Stages => cmd_stages(&g),
        Command::Curate(a) => cmd_curate(&g, a),
        Command::Annotate(a) => cmd_annotate(&g, a),
        Command::Validate(a) => cmd_validate(&g, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

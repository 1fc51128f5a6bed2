//! Subcommand implementations. This is a thin orchestration layer over the
//! core library: every command reads artifacts from the directory layout in
//! [`PipelineConfig`], does one stage of work, and writes artifacts back.
//! Results go to stdout, progress to the log, errors to stderr as JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use coughep_core::containers::{atomic_write, write_json};
use coughep_core::evaluation::Tiling;
use coughep_core::{
    auc, average_precision, compare_datasets, confusion_at, curve_to_csv, export_clips,
    export_scores, extract_patch_frames, extract_segments, filtered_metric_sweep_pooled,
    frame_labels, grid_search_head, grid_search_lr, import_scores, load_checkpoint, load_wav,
    median_filter, mel_spectrogram, parse_annotations, partition_stats, pick_threshold,
    power_profile, pr_curve, read_segments_tsv, roc_curve, score_head, score_lr, segment_stats,
    sweep_to_csv, threshold_scores, tile_to_intervals_with, write_manifest, write_segments_tsv,
    AnnotationSet, Checkpoint, ClipManifest, Criterion, Error as CoreError,
    FrameGeometry, FrameLabels, GridCell, HeadLayerData, HiddenStateExport, IntervalScores,
    Label, OperatingPoint, PartitionStats, PatchFrame, PatchSequence,
    ProfileClass, Provenance, ScoreSequence, Segment, Waveform,
};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::synth::synth_corpus;

/// Mel frames per patch: 16 hops of 10ms, a 160ms analysis span.
pub const PATCH_WIDTH: usize = 16;
/// Patch hop in mel frames: one prediction every 100ms.
pub const PATCH_STRIDE: usize = 10;
/// Grid used for pooled metrics.
pub const INTERVAL_MS: u32 = 10;

#[derive(Parser)]
#[command(name = "coughep", version, about = "Cough endpointing pipeline")]
pub struct Cli {
    /// TOML or JSON pipeline config; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the config seed (drives synthesis and training).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-recording stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Score tiling for evaluation: skip | frame_length.
    #[arg(long, global = true)]
    pub tiling: Option<Tiling>,
    /// Named operating point (C, EE or P) from thresholds.json.
    #[arg(long, global = true)]
    pub threshold_name: Option<String>,
    /// Median filter width in frames (odd).
    #[arg(long, global = true)]
    pub filter_width: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic split: background noise plus cough-like events.
    Synth {
        #[arg(long)]
        split: String,
        /// Recordings to generate (default from config).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Compute log-mel spectrograms for every recording in a split.
    Features {
        #[arg(long)]
        split: String,
    },
    /// Grid-search the logistic baseline and save the best checkpoint.
    TrainLr {
        #[arg(long, default_value = "train")]
        train_split: String,
        #[arg(long, default_value = "dev")]
        dev_split: String,
    },
    /// Grid-search an MLP head over hidden-state exports (and layers).
    TrainHead {
        #[arg(long, default_value = "train")]
        train_split: String,
        #[arg(long, default_value = "dev")]
        dev_split: String,
        /// Directory of .hsx1 exports; overrides the config.
        #[arg(long)]
        hidden_dir: Option<PathBuf>,
    },
    /// Score a split with a trained checkpoint.
    Score {
        #[arg(long)]
        split: String,
        /// Checkpoint path (default: models/lr.ckp1, then models/head.ckp1).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Hidden-state exports, required for head checkpoints.
        #[arg(long)]
        hidden_dir: Option<PathBuf>,
    },
    /// Threshold scores, median-filter, and write segment TSVs.
    Segment {
        #[arg(long)]
        split: String,
    },
    /// Pooled AUC/AP for a split; coverage and purity at --threshold-name.
    Evaluate {
        #[arg(long)]
        split: String,
    },
    /// Fit C/EE/P operating points on a development split.
    PickThresholds {
        #[arg(long, default_value = "dev")]
        split: String,
    },
    /// AUC/AP as a function of median filter width.
    SweepFilter {
        #[arg(long)]
        split: String,
        /// Odd widths to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 3, 5, 7, 9])]
        widths: Vec<usize>,
    },
    /// Cut detected and ground-truth clips, then compare the two datasets.
    Export {
        #[arg(long)]
        split: String,
    },
    /// Annotation statistics for a split (plus segment stats when present).
    Stats {
        #[arg(long)]
        split: String,
    },
    /// Average power spectra of cough vs non-cough audio.
    Profile {
        #[arg(long)]
        split: String,
    },
}

struct Ctx {
    cfg: PipelineConfig,
    /// --threshold-name as given; commands that need one default to "C".
    threshold_name: Option<String>,
    filter_width: usize,
}

impl Ctx {
    fn threshold_name(&self) -> &str {
        self.threshold_name.as_deref().unwrap_or("C")
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tiling {
        cfg.tiling = t;
    }
    // One seed rules everything downstream.
    cfg.train.seed = cfg.seed;
    cfg.synth.seed = cfg.seed;
    cfg.validate()?;
    if let Some(j) = cli.jobs {
        if j > 0 {
            // Ignore the error: the global pool can only be built once.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
        }
    }
    let ctx = Ctx {
        threshold_name: cli.threshold_name,
        filter_width: cli.filter_width.unwrap_or(1),
        cfg,
    };

    match cli.command {
        Command::Synth { split, count } => cmd_synth(&ctx, &split, count),
        Command::Features { split } => cmd_features(&ctx, &split),
        Command::TrainLr { train_split, dev_split } => cmd_train_lr(&ctx, &train_split, &dev_split),
        Command::TrainHead { train_split, dev_split, hidden_dir } => {
            cmd_train_head(&ctx, &train_split, &dev_split, hidden_dir)
        }
        Command::Score { split, model, hidden_dir } => cmd_score(&ctx, &split, model, hidden_dir),
        Command::Segment { split } => cmd_segment(&ctx, &split),
        Command::Evaluate { split } => cmd_evaluate(&ctx, &split),
        Command::PickThresholds { split } => cmd_pick_thresholds(&ctx, &split),
        Command::SweepFilter { split, widths } => cmd_sweep_filter(&ctx, &split, &widths),
        Command::Export { split } => cmd_export(&ctx, &split),
        Command::Stats { split } => cmd_stats(&ctx, &split),
        Command::Profile { split } => cmd_profile(&ctx, &split),
    }
}

// ---- shared plumbing -------------------------------------------------------

/// All `<id>.<ext>` files in a directory, sorted by id.
fn list_recordings(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|_| {
        CliError::usage(format!("no recordings under {}; run earlier stages first", dir.display()))
    })?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(|err| CoreError::io(dir, err))?.path();
        if path.extension().and_then(|x| x.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::usage(format!("no .{ext} files under {}", dir.display())));
    }
    out.sort();
    Ok(out)
}

fn annotations_for(cfg: &PipelineConfig, split: &str, id: &str) -> Result<AnnotationSet> {
    Ok(parse_annotations(cfg.annotation_split(split).join(format!("{id}.tsv")))?)
}

/// Load, normalize, and patch one recording.
fn patches_for(cfg: &PipelineConfig, wav_path: &Path) -> Result<PatchSequence<f64>> {
    let w: Waveform<f64> = load_wav(wav_path)?;
    let mut mel = mel_spectrogram(&w, &cfg.mel)?;
    mel.normalize();
    Ok(extract_patch_frames(&mel, PATCH_WIDTH, PATCH_STRIDE)?)
}

/// Patches plus frame labels for every recording in a split.
fn labelled_patches(
    cfg: &PipelineConfig,
    split: &str,
) -> Result<Vec<(String, PatchSequence<f64>, FrameLabels)>> {
    let wavs = list_recordings(&cfg.audio_split(split), "wav")?;
    wavs.par_iter()
        .map(|(id, path)| {
            let seq = patches_for(cfg, path)?;
            let ann = annotations_for(cfg, split, id)?;
            let labels = frame_labels(&ann, &seq.geometry, Label::Cough);
            Ok((id.clone(), seq, labels))
        })
        .collect()
}

/// Concatenate per-recording patches and labels into one training set.
fn pool_patches(
    runs: &[(String, PatchSequence<f64>, FrameLabels)],
) -> Result<(Vec<PatchFrame<f64>>, FrameLabels)> {
    let first = &runs.first().ok_or(CoreError::EmptyInput("no recordings"))?.1.geometry;
    let mut patches = Vec::new();
    let mut bits = Vec::new();
    for (_, seq, labels) in runs {
        patches.extend(seq.frames.iter().cloned());
        bits.extend_from_slice(labels.labels());
    }
    let geometry = FrameGeometry::new(first.frame_length_ms, first.frame_skip_ms, bits.len())?;
    Ok((patches, FrameLabels::new(bits, geometry)?))
}

/// Scores plus labels at score geometry for every recording in a split.
fn scored_runs(
    cfg: &PipelineConfig,
    split: &str,
) -> Result<Vec<(String, ScoreSequence<f64>, FrameLabels)>> {
    let files = list_recordings(&cfg.scores_dir(split), "csq1")?;
    files
        .par_iter()
        .map(|(id, path)| {
            let s: ScoreSequence<f64> = import_scores(path)?;
            let ann = annotations_for(cfg, split, id)?;
            let labels = frame_labels(&ann, &s.geometry, Label::Cough);
            Ok((id.clone(), s, labels))
        })
        .collect()
}

fn pooled_intervals(
    runs: &[(String, ScoreSequence<f64>, FrameLabels)],
    tiling: Tiling,
) -> Result<IntervalScores<f64>> {
    let parts: Vec<IntervalScores<f64>> = runs
        .iter()
        .map(|(_, s, l)| tile_to_intervals_with(s, l, INTERVAL_MS, tiling))
        .collect::<std::result::Result<_, _>>()?;
    Ok(IntervalScores::concat(&parts)?)
}

/// Operating points fitted by `pick-thresholds`, stored as one JSON file.
#[derive(Debug, Serialize, Deserialize)]
pub struct ThresholdsFile {
    pub split: String,
    pub tiling: Tiling,
    pub points: BTreeMap<String, OperatingPoint>,
    /// Criteria that could not be met, with the best achievable value.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

fn load_thresholds(cfg: &PipelineConfig) -> Result<ThresholdsFile> {
    let path = cfg.thresholds_path();
    let text = std::fs::read_to_string(&path).map_err(|_| {
        CliError::usage(format!("no {}; run pick-thresholds first", path.display()))
    })?;
    Ok(serde_json::from_str(&text).map_err(|e| CoreError::format(&path, &e.to_string()))?)
}

fn lookup_threshold<'a>(file: &'a ThresholdsFile, name: &str) -> Result<&'a OperatingPoint> {
    file.points.get(name).ok_or_else(|| {
        let known: Vec<&str> = file.points.keys().map(|k| k.as_str()).collect();
        CliError::usage(format!(
            "no operating point {name:?} in thresholds.json (have: {})",
            known.join(", ")
        ))
    })
}

/// Frame skip behind a split's scores; falls back to 100ms when unscored.
fn split_frame_skip(cfg: &PipelineConfig, split: &str) -> u32 {
    if let Ok(files) = list_recordings(&cfg.scores_dir(split), "csq1") {
        if let Some((_, path)) = files.first() {
            if let Ok(s) = import_scores::<f64>(path) {
                return s.geometry.frame_skip_ms;
            }
        }
    }
    log::warn!("{split}: no scores found, assuming a 100ms frame skip");
    100
}

fn best_cell(cells: &[GridCell]) -> Option<&GridCell> {
    let mut best: Option<&GridCell> = None;
    for c in cells {
        if best.is_none_or(|b| c.dev_ap > b.dev_ap) {
            best = Some(c);
        }
    }
    best
}

fn write_grid_report(path: &Path, layer_tag: Option<&str>, cells: &[GridCell]) -> Result<()> {
    let value = serde_json::json!({
        "layer_tag": layer_tag,
        "best": best_cell(cells),
        "cells": cells,
    });
    Ok(write_json(path, &value)?)
}

// ---- commands --------------------------------------------------------------

fn cmd_synth(ctx: &Ctx, split: &str, count: Option<usize>) -> Result<()> {
    let cfg = &ctx.cfg;
    let count = count.unwrap_or(cfg.synth.n_recordings);
    let ids = synth_corpus(&cfg.synth, split, count, &cfg.audio_dir, &cfg.annotation_dir)?;
    println!(
        "synth: wrote {} recordings to {}",
        ids.len(),
        cfg.audio_split(split).display()
    );
    Ok(())
}

fn cmd_features(ctx: &Ctx, split: &str) -> Result<()> {
    let cfg = &ctx.cfg;
    let wavs = list_recordings(&cfg.audio_split(split), "wav")?;
    let out_dir = cfg.features_dir(split);
    std::fs::create_dir_all(&out_dir).map_err(|e| CoreError::io(&out_dir, e))?;
    wavs.par_iter()
        .map(|(id, path)| {
            let w: Waveform<f64> = load_wav(path)?;
            let mel = mel_spectrogram(&w, &cfg.mel)?;
            mel.save(out_dir.join(format!("{id}.cep1")))?;
            log::info!("features {split}/{id}: {} frames", mel.n_frames());
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    println!("features: {} spectrograms -> {}", wavs.len(), out_dir.display());
    Ok(())
}

fn cmd_train_lr(ctx: &Ctx, train_split: &str, dev_split: &str) -> Result<()> {
    let cfg = &ctx.cfg;
    let train = labelled_patches(cfg, train_split)?;
    let (patches, labels) = pool_patches(&train)?;
    let dev: Vec<(PatchSequence<f64>, FrameLabels)> =
        labelled_patches(cfg, dev_split)?.into_iter().map(|(_, s, l)| (s, l)).collect();
    log::info!(
        "train-lr: {} train patches ({} positive), {} dev recordings",
        patches.len(),
        labels.n_positive(),
        dev.len()
    );

    let (model, cells) = grid_search_lr(&patches, &labels, &dev, &cfg.train)?;
    let models = cfg.models_dir();
    std::fs::create_dir_all(&models).map_err(|e| CoreError::io(&models, e))?;
    model.save(models.join("lr.ckp1"))?;
    write_grid_report(&models.join("lr_grid.json"), None, &cells)?;

    let best = best_cell(&cells).expect("grid is never empty");
    println!(
        "train-lr: best batch={} lr={:e} dev AP={:.4} -> {}",
        best.batch_size,
        best.learning_rate,
        best.dev_ap,
        models.join("lr.ckp1").display()
    );
    Ok(())
}

/// Hidden-state layouts: either `<root>/<split>/<id>.hsx1` (one unnamed
/// layer) or `<root>/<layer>/<split>/<id>.hsx1` (a layer sweep).
fn hidden_layer_roots(hidden: &Path, split: &str) -> Result<Vec<(String, PathBuf)>> {
    if hidden.join(split).is_dir() {
        return Ok(vec![("default".into(), hidden.to_path_buf())]);
    }
    let entries = std::fs::read_dir(hidden).map_err(|_| {
        CliError::usage(format!("no hidden-state exports under {}", hidden.display()))
    })?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(|err| CoreError::io(hidden, err))?.path();
        if path.is_dir() && path.join(split).is_dir() {
            if let Some(tag) = path.file_name().and_then(|s| s.to_str()) {
                out.push((tag.to_string(), path.clone()));
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::usage(format!(
            "no hidden-state exports for split {split:?} under {}",
            hidden.display()
        )));
    }
    out.sort();
    Ok(out)
}

/// Exports plus frame labels for a split below one layer root.
fn load_exports(
    cfg: &PipelineConfig,
    root: &Path,
    split: &str,
) -> Result<Vec<(HiddenStateExport<f64>, FrameLabels)>> {
    let files = list_recordings(&root.join(split), "hsx1")?;
    files
        .par_iter()
        .map(|(id, path)| {
            let export: HiddenStateExport<f64> = HiddenStateExport::load(path)?;
            let ann = annotations_for(cfg, split, id)?;
            let labels = frame_labels(&ann, &export.geometry, Label::Cough);
            Ok((export, labels))
        })
        .collect()
}

fn cmd_train_head(
    ctx: &Ctx,
    train_split: &str,
    dev_split: &str,
    hidden_dir: Option<PathBuf>,
) -> Result<()> {
    let cfg = &ctx.cfg;
    let hidden = hidden_dir
        .or_else(|| cfg.hidden_dir.clone())
        .ok_or_else(|| CliError::usage("no hidden-state directory; pass --hidden-dir or set hidden_dir"))?;

    let mut layers = Vec::new();
    for (tag, root) in hidden_layer_roots(&hidden, train_split)? {
        let train_parts = load_exports(cfg, &root, train_split)?;
        let exports: Vec<HiddenStateExport<f64>> =
            train_parts.iter().map(|(e, _)| e.clone()).collect();
        let train = HiddenStateExport::concat(&exports)?;
        let bits: Vec<bool> =
            train_parts.iter().flat_map(|(_, l)| l.labels().iter().copied()).collect();
        let train_labels = FrameLabels::new(bits, train.geometry)?;
        let dev = load_exports(cfg, &root, dev_split)?;
        log::info!("train-head[{tag}]: {} train frames, {} dev recordings", train.n_frames(), dev.len());
        layers.push(HeadLayerData { tag, train, train_labels, dev });
    }

    let (head, tag, cells) = grid_search_head(&layers, &cfg.train)?;
    let models = cfg.models_dir();
    std::fs::create_dir_all(&models).map_err(|e| CoreError::io(&models, e))?;
    head.save(models.join("head.ckp1"))?;
    write_grid_report(&models.join("head_grid.json"), Some(&tag), &cells)?;

    let best = best_cell(&cells).expect("grid is never empty");
    println!(
        "train-head: best layer={tag} batch={} lr={:e} dev AP={:.4} -> {}",
        best.batch_size,
        best.learning_rate,
        best.dev_ap,
        models.join("head.ckp1").display()
    );
    Ok(())
}

/// Directory holding `<split>/<id>.hsx1` for a head checkpoint: either the
/// hidden dir itself or the layer picked at training time.
fn hidden_root_for_scoring(cfg: &PipelineConfig, hidden: &Path, split: &str) -> Result<PathBuf> {
    if hidden.join(split).is_dir() {
        return Ok(hidden.to_path_buf());
    }
    let grid_path = cfg.models_dir().join("head_grid.json");
    if let Ok(text) = std::fs::read_to_string(&grid_path) {
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) {
            if let Some(tag) = value["layer_tag"].as_str() {
                if hidden.join(tag).join(split).is_dir() {
                    log::info!("score: using layer {tag:?} from {}", grid_path.display());
                    return Ok(hidden.join(tag));
                }
            }
        }
    }
    Err(CliError::usage(format!(
        "no hidden-state exports for split {split:?} under {}",
        hidden.display()
    )))
}

fn cmd_score(
    ctx: &Ctx,
    split: &str,
    model: Option<PathBuf>,
    hidden_dir: Option<PathBuf>,
) -> Result<()> {
    let cfg = &ctx.cfg;
    let model_path = match model {
        Some(p) => p,
        None => {
            let lr = cfg.models_dir().join("lr.ckp1");
            let head = cfg.models_dir().join("head.ckp1");
            if lr.is_file() {
                lr
            } else if head.is_file() {
                head
            } else {
                return Err(CliError::usage("no checkpoint found; train first or pass --model"));
            }
        }
    };
    let out_dir = cfg.scores_dir(split);
    std::fs::create_dir_all(&out_dir).map_err(|e| CoreError::io(&out_dir, e))?;

    let n = match load_checkpoint::<f64>(&model_path)? {
        Checkpoint::Lr(m) => {
            let wavs = list_recordings(&cfg.audio_split(split), "wav")?;
            wavs.par_iter()
                .map(|(id, path)| {
                    let seq = patches_for(cfg, path)?;
                    let scores = score_lr(&m, &seq)?;
                    export_scores(out_dir.join(format!("{id}.csq1")), &scores)?;
                    Ok(())
                })
                .collect::<Result<Vec<()>>>()?;
            wavs.len()
        }
        Checkpoint::Head(h) => {
            let hidden = hidden_dir
                .or_else(|| cfg.hidden_dir.clone())
                .ok_or_else(|| CliError::usage("head checkpoints need --hidden-dir"))?;
            let root = hidden_root_for_scoring(cfg, &hidden, split)?;
            let files = list_recordings(&root.join(split), "hsx1")?;
            files
                .par_iter()
                .map(|(id, path)| {
                    let export: HiddenStateExport<f64> = HiddenStateExport::load(path)?;
                    let scores = score_head(&h, &export)?;
                    export_scores(out_dir.join(format!("{id}.csq1")), &scores)?;
                    Ok(())
                })
                .collect::<Result<Vec<()>>>()?;
            files.len()
        }
    };
    println!("score: {n} recordings -> {}", out_dir.display());
    Ok(())
}

fn cmd_segment(ctx: &Ctx, split: &str) -> Result<()> {
    let cfg = &ctx.cfg;
    let name = ctx.threshold_name();
    let thresholds = load_thresholds(cfg)?;
    let op = lookup_threshold(&thresholds, name)?;
    let (theta, width) = (op.threshold, ctx.filter_width);

    let files = list_recordings(&cfg.scores_dir(split), "csq1")?;
    let out_dir = cfg.segments_dir(split);
    std::fs::create_dir_all(&out_dir).map_err(|e| CoreError::io(&out_dir, e))?;
    let per_rec: Vec<Vec<Segment>> = files
        .par_iter()
        .map(|(id, path)| {
            let s: ScoreSequence<f64> = import_scores(path)?;
            let provenance = Provenance {
                source: s.source.clone(),
                threshold: Some(theta),
                filter_width: width,
            };
            let bits = median_filter(&threshold_scores(&s, theta), width)?;
            let segs = extract_segments(&bits, &provenance);
            write_segments_tsv(out_dir.join(format!("{id}.tsv")), &segs)?;
            Ok(segs)
        })
        .collect::<Result<_>>()?;

    let all: Vec<Segment> = per_rec.into_iter().flatten().collect();
    let stats = segment_stats(&all);
    println!(
        "segment: {} segments (mean {:.0}ms, total {:.2} min) at {name}={theta} width={width} -> {}",
        stats.n_segments,
        stats.mean_ms,
        stats.total_minutes,
        out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    split: String,
    tiling: Tiling,
    n_recordings: usize,
    n_intervals: usize,
    n_positive: usize,
    auc: f64,
    ap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    operating_point: Option<OperatingEval>,
}

#[derive(Serialize)]
struct OperatingEval {
    name: String,
    threshold: f64,
    coverage: f64,
    purity: f64,
    fpr: f64,
}

fn cmd_evaluate(ctx: &Ctx, split: &str) -> Result<()> {
    let cfg = &ctx.cfg;
    let runs = scored_runs(cfg, split)?;
    let pooled = pooled_intervals(&runs, cfg.tiling)?;
    let roc = roc_curve(&pooled)?;
    let auc_value = auc(&roc);
    let ap_value = average_precision(&pr_curve(&pooled)?);
    let n_positive = pooled.labels.iter().filter(|&&y| y).count();

    println!(
        "evaluate {split}: AUC={auc_value:.4} AP={ap_value:.4} over {} intervals ({} positive, {} recordings)",
        pooled.len(),
        n_positive,
        runs.len()
    );

    // Report the requested operating point, or "C" when thresholds exist.
    let explicit = ctx.threshold_name.is_some();
    let name = match &ctx.threshold_name {
        Some(n) => Some(n.clone()),
        None if cfg.thresholds_path().is_file() => Some("C".to_string()),
        None => None,
    };
    let mut operating_point = None;
    if let Some(name) = name {
        let thresholds = load_thresholds(cfg)?;
        match lookup_threshold(&thresholds, &name) {
            Ok(op) => {
                let (tp, fp, tn, fn_) = confusion_at(&pooled, op.threshold);
                let coverage = tp as f64 / (tp + fn_) as f64;
                let purity = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
                let fpr = fp as f64 / (fp + tn) as f64;
                println!(
                    "evaluate {split} @ {name} (θ={}): coverage={coverage:.4} purity={purity:.4} fpr={fpr:.4}",
                    op.threshold
                );
                operating_point = Some(OperatingEval {
                    name,
                    threshold: op.threshold,
                    coverage,
                    purity,
                    fpr,
                });
            }
            Err(e) if !explicit => {
                log::info!("evaluate: {e}; reporting AUC/AP only");
            }
            Err(e) => return Err(e),
        }
    }

    let reports = cfg.reports_dir();
    std::fs::create_dir_all(&reports).map_err(|e| CoreError::io(&reports, e))?;
    atomic_write(reports.join(format!("roc_{split}.csv")), curve_to_csv(&roc).as_bytes())?;
    let report = EvalReport {
        split: split.to_string(),
        tiling: cfg.tiling,
        n_recordings: runs.len(),
        n_intervals: pooled.len(),
        n_positive,
        auc: auc_value,
        ap: ap_value,
        operating_point,
    };
    let value = serde_json::to_value(&report).expect("report serializes");
    write_json(reports.join(format!("evaluate_{split}.json")), &value)?;
    Ok(())
}

fn cmd_pick_thresholds(ctx: &Ctx, split: &str) -> Result<()> {
    let cfg = &ctx.cfg;
    if split.starts_with("test") {
        return Err(CliError::usage(format!(
            "refusing to fit thresholds on held-out split {split:?}"
        )));
    }
    let runs = scored_runs(cfg, split)?;
    let pooled = pooled_intervals(&runs, cfg.tiling)?;
    let curve = roc_curve(&pooled)?;

    let mut points = BTreeMap::new();
    let mut notes = BTreeMap::new();
    let criteria = [
        Criterion::Coverage { target: cfg.coverage_target },
        Criterion::EqualErrorRate,
        Criterion::Purity { target: cfg.purity_target },
    ];
    for criterion in criteria {
        let name = criterion.name().to_string();
        match pick_threshold(&curve, criterion) {
            Ok(op) => {
                println!(
                    "pick-thresholds {name}: θ={} coverage={:.4} purity={:.4}",
                    op.threshold, op.achieved_coverage, op.achieved_purity
                );
                points.insert(name, op);
            }
            Err(CoreError::UnattainableTarget { best_achievable, .. }) => {
                log::warn!("{name}: target not attainable (best {best_achievable:.4}); skipping");
                notes.insert(name, format!("unattainable; best achievable {best_achievable:.4}"));
            }
            Err(e) => return Err(e.into()),
        }
    }

    let file = ThresholdsFile { split: split.to_string(), tiling: cfg.tiling, points, notes };
    let path = cfg.thresholds_path();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
    }
    let value = serde_json::to_value(&file).expect("thresholds serialize");
    write_json(&path, &value)?;
    println!("pick-thresholds: {} points -> {}", file.points.len(), path.display());
    Ok(())
}

fn cmd_sweep_filter(ctx: &Ctx, split: &str, widths: &[usize]) -> Result<()> {
    let cfg = &ctx.cfg;
    let runs = scored_runs(cfg, split)?;
    let refs: Vec<(&ScoreSequence<f64>, &FrameLabels)> =
        runs.iter().map(|(_, s, l)| (s, l)).collect();
    let rows = filtered_metric_sweep_pooled(&refs, widths, INTERVAL_MS)?;

    println!("{:>6} {:>8} {:>8}", "width", "AUC", "AP");
    for r in &rows {
        println!("{:>6} {:>8.4} {:>8.4}", r.width, r.auc, r.ap);
    }
    let reports = cfg.reports_dir();
    std::fs::create_dir_all(&reports).map_err(|e| CoreError::io(&reports, e))?;
    let path = reports.join(format!("filter_sweep_{split}.csv"));
    atomic_write(&path, sweep_to_csv(&rows).as_bytes())?;
    println!("sweep-filter: {} widths -> {}", rows.len(), path.display());
    Ok(())
}

fn cmd_export(ctx: &Ctx, split: &str) -> Result<()> {
    let cfg = &ctx.cfg;
    let name = ctx.threshold_name();
    let wavs = list_recordings(&cfg.audio_split(split), "wav")?;
    let auto_dir = cfg.clips_dir(split).join("auto");
    let truth_dir = cfg.clips_dir(split).join("truth");

    let manifests: Vec<(ClipManifest, ClipManifest)> = wavs
        .par_iter()
        .map(|(id, wav_path)| {
            let w: Waveform<f64> = load_wav(wav_path)?;
            let segs = read_segments_tsv(cfg.segments_dir(split).join(format!("{id}.tsv")))?;
            let auto = export_clips(&w, &segs, &auto_dir, id, name)?;

            let ann = annotations_for(cfg, split, id)?;
            let truth_segs: Vec<Segment> = ann
                .of_label(Label::Cough)
                .map(|a| Segment {
                    start_ms: a.start_ms,
                    end_ms: a.end_ms,
                    provenance: Provenance::ground_truth(),
                })
                .collect();
            let truth = export_clips(&w, &truth_segs, &truth_dir, id, "truth")?;
            Ok((auto, truth))
        })
        .collect::<Result<_>>()?;

    let (autos, truths): (Vec<_>, Vec<_>) = manifests.into_iter().unzip();
    let auto = ClipManifest::merge(autos);
    let truth = ClipManifest::merge(truths);
    for w in auto.warnings.iter().chain(&truth.warnings) {
        log::warn!("export: {w}");
    }
    write_manifest(&auto, &auto_dir)?;
    write_manifest(&truth, &truth_dir)?;

    let report = compare_datasets(&auto, &truth, split_frame_skip(cfg, split));
    print!("{}", report.table());
    println!(
        "export: {} auto / {} truth clips -> {}",
        auto.entries.len(),
        truth.entries.len(),
        cfg.clips_dir(split).display()
    );
    let reports = cfg.reports_dir();
    std::fs::create_dir_all(&reports).map_err(|e| CoreError::io(&reports, e))?;
    let value = serde_json::to_value(&report).expect("report serializes");
    write_json(reports.join(format!("export_{split}.json")), &value)?;
    Ok(())
}

fn cmd_stats(ctx: &Ctx, split: &str) -> Result<()> {
    let cfg = &ctx.cfg;
    let tsvs = list_recordings(&cfg.annotation_split(split), "tsv")?;
    let sets: Vec<AnnotationSet> = tsvs
        .par_iter()
        .map(|(id, path)| {
            let set = parse_annotations(path)?;
            let wav_path = cfg.audio_split(split).join(format!("{id}.wav"));
            if wav_path.is_file() {
                let w: Waveform<f64> = load_wav(&wav_path)?;
                Ok(set.with_recording_duration(w.duration_ms())?)
            } else {
                Ok(set)
            }
        })
        .collect::<Result<_>>()?;

    let stats = partition_stats(&sets, Label::Cough)?;
    print!("{}", PartitionStats::table_header());
    print!("{}", stats.table(split));

    if cfg.segments_dir(split).is_dir() {
        let files = list_recordings(&cfg.segments_dir(split), "tsv")?;
        let mut segs = Vec::new();
        for (_, path) in &files {
            segs.extend(read_segments_tsv(path)?);
        }
        let s = segment_stats(&segs);
        println!(
            "segments: {} (mean {:.0} ± {:.0}ms, total {:.2} min)",
            s.n_segments, s.mean_ms, s.std_ms, s.total_minutes
        );
    }
    Ok(())
}

/// Complement of the (merged) cough spans within `[0, duration_ms)`.
fn non_cough_spans(set: &AnnotationSet) -> Vec<(u64, u64)> {
    let mut spans: Vec<(u64, u64)> = set.of_label(Label::Cough).map(|a| (a.start_ms, a.end_ms)).collect();
    spans.sort();
    let mut gaps = Vec::new();
    let mut cursor = 0;
    for (start, end) in spans {
        if start > cursor {
            gaps.push((cursor, start));
        }
        cursor = cursor.max(end);
    }
    let duration = set.recording_duration_ms();
    if duration > cursor {
        gaps.push((cursor, duration));
    }
    gaps
}

fn cmd_profile(ctx: &Ctx, split: &str) -> Result<()> {
    let cfg = &ctx.cfg;
    let wavs = list_recordings(&cfg.audio_split(split), "wav")?;
    let slices: Vec<(Vec<Waveform<f64>>, Vec<Waveform<f64>>)> = wavs
        .par_iter()
        .map(|(id, path)| {
            let w: Waveform<f64> = load_wav(path)?;
            let ann = annotations_for(cfg, split, id)?.with_recording_duration(w.duration_ms())?;
            let coughs: Vec<Waveform<f64>> =
                ann.of_label(Label::Cough).map(|a| w.slice_ms(a.start_ms, a.end_ms)).collect();
            let rest: Vec<Waveform<f64>> =
                non_cough_spans(&ann).iter().map(|&(a, b)| w.slice_ms(a, b)).collect();
            Ok((coughs, rest))
        })
        .collect::<Result<_>>()?;

    let mut coughs = Vec::new();
    let mut rest = Vec::new();
    for (c, r) in slices {
        coughs.extend(c);
        rest.extend(r);
    }
    let reports = cfg.reports_dir();
    std::fs::create_dir_all(&reports).map_err(|e| CoreError::io(&reports, e))?;
    for (slices, class, file) in [
        (&coughs, ProfileClass::Cough, "cough"),
        (&rest, ProfileClass::NonCough, "noncough"),
    ] {
        let profile = power_profile(slices, class)?;
        let peak = profile
            .mean_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| profile.freqs_hz[i])
            .unwrap_or(0.0);
        let path = reports.join(format!("profile_{split}_{file}.csv"));
        profile.write_csv(&path)?;
        println!(
            "profile {class}: {} segments, peak at {peak:.0}Hz -> {}",
            profile.n_segments,
            path.display()
        );
    }
    Ok(())
}

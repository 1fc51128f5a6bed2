//! Cough detection and isolation from long audio recordings: mel features,
//! frame-wise scoring, median-filtered endpointing, interval evaluation,
//! and clip export.
//!
//! Everything numeric is generic over the sample scalar (`f32`/`f64`);
//! the `F32`/`F64` aliases below pin the common instantiations.

pub mod annotations;
pub mod classifiers;
pub mod containers;
pub mod endpointing;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod features;
pub mod geometry;
pub mod scalar;

pub use annotations::{
    frame_labels, parse_annotations, partition_stats, Annotation, AnnotationSet, FrameLabels,
    Label, PartitionStats,
};
pub use classifiers::{
    export_scores, gelu, grid_search_head, grid_search_lr, import_scores, load_checkpoint,
    lr_schedule, score_head, score_lr, sigmoid, train_head, train_lr, Checkpoint, GridCell,
    HeadLayerData, HiddenStateExport, LRModel, MlpHead, PatchLayout, ScoreSequence, Scheduler,
    TrainConfig,
};
pub use endpointing::{
    duration_histogram, extract_segments, median_filter, read_segments_tsv, segment_stats,
    segments_to_tsv, threshold_scores, write_segments_tsv, BinarySequence, DatasetStats,
    DurationHistogram, Provenance, Segment,
};
pub use error::{Error, Result};
pub use evaluation::{
    auc, average_precision, confusion_at, curve_to_csv, filtered_metric_sweep,
    filtered_metric_sweep_pooled, pick_threshold, pr_curve, roc_curve, sweep_to_csv,
    tile_to_intervals, tile_to_intervals_with, Criterion, CurvePoint, IntervalScores,
    OperatingPoint, SweepRow, Tiling,
};
pub use export::{compare_datasets, export_clips, read_manifest, write_manifest, ClipEntry,
    ClipManifest, ComparisonReport};
pub use features::{
    extract_patch_frames, load_wav, mel_spectrogram, power_profile, write_wav, MelConfig,
    MelSpectrogram, PatchFrame, PatchSequence, PowerProfile, ProfileClass, WavEncoding, Waveform,
};
pub use geometry::FrameGeometry;
pub use scalar::Scalar;

/// Common concrete instantiations.
pub mod f32 {
    pub type Waveform = crate::features::Waveform<f32>;
    pub type MelSpectrogram = crate::features::MelSpectrogram<f32>;
    pub type PatchFrame = crate::features::PatchFrame<f32>;
    pub type PatchSequence = crate::features::PatchSequence<f32>;
    pub type ScoreSequence = crate::classifiers::ScoreSequence<f32>;
    pub type LRModel = crate::classifiers::LRModel<f32>;
    pub type MlpHead = crate::classifiers::MlpHead<f32>;
    pub type HiddenStateExport = crate::classifiers::HiddenStateExport<f32>;
    pub type IntervalScores = crate::evaluation::IntervalScores<f32>;
}

/// Double-precision aliases; the CLI pipeline runs on these.
pub mod f64 {
    pub type Waveform = crate::features::Waveform<f64>;
    pub type MelSpectrogram = crate::features::MelSpectrogram<f64>;
    pub type PatchFrame = crate::features::PatchFrame<f64>;
    pub type PatchSequence = crate::features::PatchSequence<f64>;
    pub type ScoreSequence = crate::classifiers::ScoreSequence<f64>;
    pub type LRModel = crate::classifiers::LRModel<f64>;
    pub type MlpHead = crate::classifiers::MlpHead<f64>;
    pub type HiddenStateExport = crate::classifiers::HiddenStateExport<f64>;
    pub type IntervalScores = crate::evaluation::IntervalScores<f64>;
}

//! Hyper-parameter grids and the cell-selection driver (best pooled AP on
//! the development split wins).

use serde::Serialize;

use crate::annotations::FrameLabels;
use crate::error::{Error, Result};
use crate::evaluation::{average_precision, pr_curve, tile_to_intervals, IntervalScores};
use crate::features::{PatchFrame, PatchSequence};
use crate::scalar::Scalar;

use super::{
    score_head, score_lr, train_head, train_lr, HiddenStateExport, LRModel, MlpHead, Scheduler,
    TrainConfig,
};

pub const LR_BATCH_GRID: [usize; 3] = [4, 8, 16];
pub const LR_RATE_GRID: [f64; 2] = [1e-2, 1e-3];
pub const HEAD_BATCH_GRID: [usize; 3] = [8, 16, 32];
pub const HEAD_RATE_GRID: [f64; 2] = [1e-4, 1e-5];

/// One trained grid cell and its development-set score.
#[derive(Clone, Debug, Serialize)]
pub struct GridCell {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Which export the cell trained on, when sweeping layers.
    pub layer_tag: Option<String>,
    pub dev_ap: f64,
}

fn pooled_ap<T: Scalar>(parts: &[IntervalScores<T>]) -> Result<f64> {
    let pooled = IntervalScores::concat(parts)?;
    Ok(average_precision(&pr_curve(&pooled)?))
}

/// Train the logistic baseline over batch {4,8,16} x rate {1e-2,1e-3}
/// (fixed learning rate, no schedule) and keep the model with the best
/// pooled AP over the dev recordings.
pub fn grid_search_lr<T: Scalar>(
    train_patches: &[PatchFrame<T>],
    train_labels: &FrameLabels,
    dev: &[(PatchSequence<T>, FrameLabels)],
    base: &TrainConfig,
) -> Result<(LRModel<T>, Vec<GridCell>)> {
    if dev.is_empty() {
        return Err(Error::EmptyInput("no dev recordings for model selection"));
    }
    let mut cells = Vec::new();
    let mut best: Option<(LRModel<T>, f64)> = None;
    for &batch_size in &LR_BATCH_GRID {
        for &learning_rate in &LR_RATE_GRID {
            let cfg = TrainConfig {
                batch_size,
                max_learning_rate: learning_rate,
                scheduler: Scheduler::None,
                ..base.clone()
            };
            let model = train_lr(train_patches, train_labels, &cfg)?;
            let parts = dev
                .iter()
                .map(|(seq, labels)| tile_to_intervals(&score_lr(&model, seq)?, labels))
                .collect::<Result<Vec<_>>>()?;
            let dev_ap = pooled_ap(&parts)?;
            cells.push(GridCell { batch_size, learning_rate, layer_tag: None, dev_ap });
            if best.as_ref().is_none_or(|(_, b)| dev_ap > *b) {
                best = Some((model, dev_ap));
            }
        }
    }
    Ok((best.unwrap().0, cells))
}

/// Training and selection data for one candidate export (e.g. one backbone
/// layer).
pub struct HeadLayerData<T> {
    pub tag: String,
    pub train: HiddenStateExport<T>,
    pub train_labels: FrameLabels,
    pub dev: Vec<(HiddenStateExport<T>, FrameLabels)>,
}

/// Sweep batch {8,16,32} x rate {1e-4,1e-5} over every offered export and
/// return the winning head with its layer tag.
pub fn grid_search_head<T: Scalar>(
    layers: &[HeadLayerData<T>],
    base: &TrainConfig,
) -> Result<(MlpHead<T>, String, Vec<GridCell>)> {
    if layers.is_empty() {
        return Err(Error::EmptyInput("no exports for model selection"));
    }
    let mut cells = Vec::new();
    let mut best: Option<(MlpHead<T>, String, f64)> = None;
    for layer in layers {
        if layer.dev.is_empty() {
            return Err(Error::EmptyInput("no dev recordings for model selection"));
        }
        for &batch_size in &HEAD_BATCH_GRID {
            for &learning_rate in &HEAD_RATE_GRID {
                let cfg = TrainConfig {
                    batch_size,
                    max_learning_rate: learning_rate,
                    ..base.clone()
                };
                let model = train_head(&layer.train, &layer.train_labels, &cfg)?;
                let parts = layer
                    .dev
                    .iter()
                    .map(|(e, labels)| tile_to_intervals(&score_head(&model, e)?, labels))
                    .collect::<Result<Vec<_>>>()?;
                let dev_ap = pooled_ap(&parts)?;
                cells.push(GridCell {
                    batch_size,
                    learning_rate,
                    layer_tag: Some(layer.tag.clone()),
                    dev_ap,
                });
                if best.as_ref().is_none_or(|(_, _, b)| dev_ap > *b) {
                    best = Some((model, layer.tag.clone(), dev_ap));
                }
            }
        }
    }
    let (model, tag, _) = best.unwrap();
    Ok((model, tag, cells))
}

//! Frame-wise cough scorers: a logistic-regression baseline over mel
//! patches, two-layer MLP heads over imported hidden states, and a file
//! adapter for externally produced scores.

mod grid;
mod head;
mod lr;
mod optim;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FrameGeometry;
use crate::scalar::Scalar;

pub use grid::{
    grid_search_head, grid_search_lr, GridCell, HeadLayerData, HEAD_BATCH_GRID, HEAD_RATE_GRID,
    LR_BATCH_GRID, LR_RATE_GRID,
};
pub use head::{score_head, train_head, HiddenStateExport, MlpHead, PatchLayout};
pub use lr::{score_lr, train_lr, LRModel};
pub use optim::AdamW;

/// Learning-rate schedule selector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    #[default]
    WarmupLinearDecay,
    None,
}

/// Optimization settings shared by every trainable model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_learning_rate: f64,
    pub epochs: usize,
    pub warmup_fraction: f64,
    pub scheduler: Scheduler,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            max_learning_rate: 1e-4,
            epochs: 16,
            warmup_fraction: 0.10,
            scheduler: Scheduler::WarmupLinearDecay,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults for the logistic-regression baseline, which trains at a
    /// fixed learning rate.
    pub fn lr_baseline() -> Self {
        TrainConfig {
            batch_size: 8,
            max_learning_rate: 1e-2,
            scheduler: Scheduler::None,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidConfig(reason));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.max_learning_rate > 0.0 && self.max_learning_rate.is_finite()) {
            return bad("max_learning_rate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!("warmup_fraction {} not in [0, 1)", self.warmup_fraction));
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be >= 0".into());
        }
        Ok(())
    }
}

/// Piecewise-linear warmup/decay: 0 up to the peak over the first
/// `warmup_fraction` of steps, then down to exactly 0 at `total_steps`.
/// The domain includes `total_steps` itself so the final value is defined.
/// With `Scheduler::None` the rate is constant.
pub fn lr_schedule(step: usize, total_steps: usize, cfg: &TrainConfig) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::InvalidConfig("total_steps must be > 0".into()));
    }
    if step > total_steps {
        return Err(Error::InvalidConfig(format!(
            "step {step} out of range 0..={total_steps}"
        )));
    }
    cfg.validate()?;
    match cfg.scheduler {
        Scheduler::None => Ok(cfg.max_learning_rate),
        Scheduler::WarmupLinearDecay => {
            let total = total_steps as f64;
            // Whole steps, so the peak lands exactly on a step boundary; at
            // least one decay step must remain.
            let warm = (cfg.warmup_fraction * total).round().min(total - 1.0);
            let s = step as f64;
            // Ratio first: the peak must hit max_learning_rate exactly.
            if s < warm {
                Ok(cfg.max_learning_rate * (s / warm))
            } else {
                Ok(cfg.max_learning_rate * ((total - s) / (total - warm)))
            }
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Standard normal CDF via erf.
#[inline]
fn phi<T: Scalar>(x: T) -> T {
    let half = T::cast(0.5);
    half * (T::one() + (x / T::cast(std::f64::consts::SQRT_2)).erf())
}

/// Exact Gaussian-error-linear unit, `x * Phi(x)` in the erf formulation.
pub fn gelu<T: Scalar>(x: T) -> T {
    x * phi(x)
}

/// d/dx gelu(x) = Phi(x) + x * pdf(x).
pub fn gelu_prime<T: Scalar>(x: T) -> T {
    let inv_sqrt_2pi = T::cast(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    let pdf = inv_sqrt_2pi * (-(x * x) * T::cast(0.5)).exp();
    phi(x) + x * pdf
}

/// Binary cross-entropy of a logit against a 0/1 target, in the stable
/// `max(z,0) - z*y + ln(1 + exp(-|z|))` form.
pub fn bce_logit<T: Scalar>(z: T, y: bool) -> T {
    let zy = if y { z } else { T::zero() };
    z.max(T::zero()) - zy + (T::one() + (-z.abs()).exp()).ln()
}

/// Per-frame posterior scores under a frame geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSequence<T> {
    pub scores: Vec<T>,
    pub geometry: FrameGeometry,
    pub source: String,
}

impl<T: Scalar> ScoreSequence<T> {
    pub fn new(scores: Vec<T>, geometry: FrameGeometry, source: impl Into<String>) -> Result<Self> {
        if scores.len() != geometry.n_frames {
            return Err(Error::Shape(format!(
                "{} scores for {} frames",
                scores.len(),
                geometry.n_frames
            )));
        }
        if scores
            .iter()
            .any(|s| !s.is_finite() || *s < T::zero() || *s > T::one())
        {
            return Err(Error::Validation {
                path: "<scores>".into(),
                line: 0,
                reason: "scores must be probabilities in [0, 1]".into(),
            });
        }
        Ok(ScoreSequence { scores, geometry, source: source.into() })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Whether a score container carries posteriors or raw logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Probability,
    Logit,
}

/// Write a `CSQ1` score container (probability payload).
pub fn export_scores<T: Scalar>(path: impl AsRef<Path>, s: &ScoreSequence<T>) -> Result<()> {
    let header = serde_json::json!({
        "frame_length_ms": s.geometry.frame_length_ms,
        "frame_skip_ms": s.geometry.frame_skip_ms,
        "n_frames": s.geometry.n_frames,
        "source": s.source,
        "kind": ScoreKind::Probability,
    });
    let payload: Vec<f32> = s
        .scores
        .iter()
        .map(|v| v.as_f64().clamp(0.0, 1.0) as f32)
        .collect();
    crate::containers::write_tagged(path, b"CSQ1", &header, &payload)
}

/// Read a `CSQ1` score container. Logit payloads (declared in the header)
/// are passed through the sigmoid; probability payloads must already lie
/// in [0, 1].
pub fn import_scores<T: Scalar>(path: impl AsRef<Path>) -> Result<ScoreSequence<T>> {
    let path = path.as_ref();
    let (header, payload) = crate::containers::read_tagged(path, b"CSQ1")?;
    let field = |name: &str| {
        header[name]
            .as_u64()
            .ok_or_else(|| Error::format(path, &format!("missing geometry field {name}")))
    };
    let frame_length_ms = field("frame_length_ms")? as u32;
    let frame_skip_ms = field("frame_skip_ms")? as u32;
    let n_frames = field("n_frames")? as usize;
    if n_frames != payload.len() {
        return Err(Error::format(
            path,
            &format!("header says {n_frames} frames, payload has {}", payload.len()),
        ));
    }
    let kind: ScoreKind = serde_json::from_value(header["kind"].clone())
        .map_err(|_| Error::format(path, "missing or invalid score kind"))?;
    let source = header["source"].as_str().unwrap_or("imported").to_string();
    let geometry = FrameGeometry::new(frame_length_ms, frame_skip_ms, n_frames)?;

    let scores: Vec<T> = match kind {
        ScoreKind::Logit => payload
            .into_iter()
            .map(|v| sigmoid(T::cast(v as f64)))
            .collect(),
        ScoreKind::Probability => {
            if payload.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::format(
                    path,
                    "probability payload has values outside [0, 1]",
                ));
            }
            payload.into_iter().map(|v| T::cast(v as f64)).collect()
        }
    };
    ScoreSequence::new(scores, geometry, source)
}

/// A model whose parameters live in one flat vector; lets the training
/// loop, optimizer, and gradient checks treat LR and MLP heads uniformly.
pub trait Trainable<T: Scalar> {
    fn params(&self) -> Vec<T>;
    fn set_params(&mut self, p: &[T]) -> Result<()>;
    /// Which flat parameters receive weight decay (weights yes, biases no).
    fn decay_mask(&self) -> Vec<bool>;
    /// Mean loss over the batch and its gradient in flat-parameter order.
    fn loss_and_grad(&self, xs: &[&[T]], ys: &[bool]) -> Result<(T, Vec<T>)>;
}

/// Mini-batch AdamW over shuffled epochs; deterministic for a given seed.
/// Returns the example-weighted mean loss of the final epoch.
pub fn fit<T: Scalar, M: Trainable<T>>(
    model: &mut M,
    xs: &[&[T]],
    ys: &[bool],
    cfg: &TrainConfig,
) -> Result<f64> {
    cfg.validate()?;
    if xs.is_empty() {
        return Err(Error::EmptyInput("no training examples"));
    }
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!(
            "{} examples vs {} labels",
            xs.len(),
            ys.len()
        )));
    }

    let n = xs.len();
    let n_batches = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * n_batches;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = model.params();
    let mask = model.decay_mask();
    let mut opt = AdamW::new(params.len(), cfg.weight_decay);
    let mut order: Vec<usize> = (0..n).collect();

    let mut step = 0usize;
    let mut last_epoch_loss = 0.0;
    let mut bx: Vec<&[T]> = Vec::with_capacity(cfg.batch_size);
    let mut by: Vec<bool> = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.push(xs[i]);
                by.push(ys[i]);
            }
            model.set_params(&params)?;
            let (loss, grad) = model.loss_and_grad(&bx, &by)?;
            let lr = lr_schedule(step, total_steps, cfg)?;
            opt.step(&mut params, &grad, T::cast(lr), &mask);
            weighted_loss += loss.as_f64() * chunk.len() as f64;
            step += 1;
        }
        last_epoch_loss = weighted_loss / n as f64;
    }
    model.set_params(&params)?;
    Ok(last_epoch_loss)
}

/// Central-difference check of `loss_and_grad` against the loss alone.
/// Returns the worst relative error over all parameters.
pub fn gradient_check<T: Scalar, M: Trainable<T>>(
    model: &mut M,
    xs: &[&[T]],
    ys: &[bool],
) -> Result<f64> {
    let base = model.params();
    let (_, grad) = model.loss_and_grad(xs, ys)?;
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let h = 1e-5 * base[i].as_f64().abs().max(1.0);
        let mut plus = base.clone();
        plus[i] = plus[i] + T::cast(h);
        model.set_params(&plus)?;
        let (lp, _) = model.loss_and_grad(xs, ys)?;
        let mut minus = base.clone();
        minus[i] = minus[i] - T::cast(h);
        model.set_params(&minus)?;
        let (lm, _) = model.loss_and_grad(xs, ys)?;
        let numeric = (lp.as_f64() - lm.as_f64()) / (2.0 * h);
        let analytic = grad[i].as_f64();
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    model.set_params(&base)?;
    Ok(worst)
}

/// A loaded model checkpoint of either kind.
pub enum Checkpoint<T> {
    Lr(LRModel<T>),
    Head(MlpHead<T>),
}

/// Read a `CKP1` checkpoint, dispatching on the header's `kind` field.
pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    let path = path.as_ref();
    let (header, payload) = crate::containers::read_tagged(path, b"CKP1")?;
    match header["kind"].as_str() {
        Some("lr") => Ok(Checkpoint::Lr(LRModel::from_checkpoint(path, &header, &payload)?)),
        Some("head") => Ok(Checkpoint::Head(MlpHead::from_checkpoint(path, &header, &payload)?)),
        _ => Err(Error::format(path, "checkpoint kind must be \"lr\" or \"head\"")),
    }
}

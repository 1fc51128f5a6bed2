//! Two-layer MLP heads over hidden states imported from transformer
//! backbones.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::annotations::FrameLabels;
use crate::error::{Error, Result};
use crate::geometry::FrameGeometry;
use crate::scalar::Scalar;

use super::{bce_logit, fit, gelu, gelu_prime, sigmoid, ScoreSequence, TrainConfig, Trainable};

/// How the vectors of one time frame are arranged: one per frame, or `k`
/// per frame ordered low to high frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchLayout {
    Flat,
    FreqPatches(usize),
}

impl PatchLayout {
    /// Vectors per time frame.
    pub fn patches(&self) -> usize {
        match self {
            PatchLayout::Flat => 1,
            PatchLayout::FreqPatches(k) => *k,
        }
    }
}

impl fmt::Display for PatchLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatchLayout::Flat => write!(f, "flat"),
            PatchLayout::FreqPatches(k) => write!(f, "freq_patches:{k}"),
        }
    }
}

impl FromStr for PatchLayout {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "flat" {
            return Ok(PatchLayout::Flat);
        }
        if let Some(k) = s.strip_prefix("freq_patches:") {
            let k: usize = k
                .parse()
                .map_err(|_| format!("bad patch count in layout {s:?}"))?;
            if k == 0 {
                return Err("freq_patches needs k >= 1".into());
            }
            return Ok(PatchLayout::FreqPatches(k));
        }
        Err(format!("unknown layout {s:?}, expected \"flat\" or \"freq_patches:k\""))
    }
}

impl Serialize for PatchLayout {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PatchLayout {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Hidden states lifted out of a backbone: one row per time frame, each
/// row holding `dim * layout.patches()` floats.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenStateExport<T> {
    pub data: Vec<T>,
    pub dim: usize,
    pub layout: PatchLayout,
    pub geometry: FrameGeometry,
    pub model_id: String,
    pub layer_index: u32,
}

impl<T: Scalar> HiddenStateExport<T> {
    pub fn new(
        data: Vec<T>,
        dim: usize,
        layout: PatchLayout,
        geometry: FrameGeometry,
        model_id: impl Into<String>,
        layer_index: u32,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("hidden-state dim must be > 0".into()));
        }
        let row = dim * layout.patches();
        if data.len() != row * geometry.n_frames {
            return Err(Error::Shape(format!(
                "{} values cannot form {} rows of width {}",
                data.len(),
                geometry.n_frames,
                row
            )));
        }
        Ok(HiddenStateExport {
            data,
            dim,
            layout,
            geometry,
            model_id: model_id.into(),
            layer_index,
        })
    }

    /// Width of one row: `dim` per patch, patches concatenated.
    pub fn row_dim(&self) -> usize {
        self.dim * self.layout.patches()
    }

    pub fn n_frames(&self) -> usize {
        self.geometry.n_frames
    }

    pub fn row(&self, n: usize) -> &[T] {
        let w = self.row_dim();
        &self.data[n * w..(n + 1) * w]
    }

    /// Stack several exports end to end (same backbone, layer, layout and
    /// frame timing); used to pool recordings for training.
    pub fn concat(parts: &[HiddenStateExport<T>]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyInput("no exports to concat"))?;
        let mut data = Vec::new();
        let mut n_frames = 0;
        for p in parts {
            if p.dim != first.dim
                || p.layout != first.layout
                || p.geometry.frame_length_ms != first.geometry.frame_length_ms
                || p.geometry.frame_skip_ms != first.geometry.frame_skip_ms
                || p.model_id != first.model_id
                || p.layer_index != first.layer_index
            {
                return Err(Error::Shape("exports disagree on layout or provenance".into()));
            }
            data.extend_from_slice(&p.data);
            n_frames += p.geometry.n_frames;
        }
        let geometry = FrameGeometry::new(
            first.geometry.frame_length_ms,
            first.geometry.frame_skip_ms,
            n_frames,
        )?;
        HiddenStateExport::new(data, first.dim, first.layout, geometry, first.model_id.clone(), first.layer_index)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = serde_json::json!({
            "dim": self.dim,
            "layout": self.layout,
            "n_frames": self.geometry.n_frames,
            "frame_length_ms": self.geometry.frame_length_ms,
            "frame_skip_ms": self.geometry.frame_skip_ms,
            "model_id": self.model_id,
            "layer_index": self.layer_index,
        });
        let payload: Vec<f32> = self.data.iter().map(|v| v.as_f64() as f32).collect();
        crate::containers::write_tagged(path, b"HSX1", &header, &payload)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, payload) = crate::containers::read_tagged(path, b"HSX1")?;
        let field = |name: &str| {
            header[name]
                .as_u64()
                .ok_or_else(|| Error::format(path, &format!("missing field {name}")))
        };
        let dim = field("dim")? as usize;
        let layout: PatchLayout = serde_json::from_value(header["layout"].clone())
            .map_err(|e| Error::format(path, &format!("bad layout: {e}")))?;
        let geometry = FrameGeometry::new(
            field("frame_length_ms")? as u32,
            field("frame_skip_ms")? as u32,
            field("n_frames")? as usize,
        )?;
        let model_id = header["model_id"].as_str().unwrap_or("").to_string();
        let layer_index = header["layer_index"].as_u64().unwrap_or(0) as u32;
        let data = payload.into_iter().map(|v| T::cast(v as f64)).collect();
        HiddenStateExport::new(data, dim, layout, geometry, model_id, layer_index)
            .map_err(|e| match e {
                Error::Shape(reason) => Error::format(path, &reason),
                other => other,
            })
    }
}

/// layer1 `dim -> dim/2` (+GeLU, shared across patches), layer2 maps the
/// concatenated hidden activations to one logit.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpHead<T> {
    pub layout: PatchLayout,
    pub dim: usize,
    /// Row-major `[hidden x dim]`.
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    /// `[patches * hidden]`.
    pub w2: Vec<T>,
    pub b2: T,
}

impl<T: Scalar> MlpHead<T> {
    pub fn hidden_dim(&self) -> usize {
        self.dim / 2
    }

    /// Width of layer2's input: `patches * hidden`.
    pub fn concat_dim(&self) -> usize {
        self.layout.patches() * self.hidden_dim()
    }

    pub fn zeros(dim: usize, layout: PatchLayout) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Shape(format!("head needs dim >= 2, got {dim}")));
        }
        let hidden = dim / 2;
        let k = layout.patches();
        Ok(MlpHead {
            layout,
            dim,
            w1: vec![T::zero(); hidden * dim],
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); k * hidden],
            b2: T::zero(),
        })
    }

    /// Kaiming-style uniform init, `±sqrt(1/fan_in)` per layer, zero biases.
    pub fn init(dim: usize, layout: PatchLayout, seed: u64) -> Result<Self> {
        let mut head = Self::zeros(dim, layout)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [T], fan_in: usize| {
            let bound = (1.0 / fan_in as f64).sqrt();
            for v in w {
                *v = T::cast(rng.gen::<f64>() * 2.0 * bound - bound);
            }
        };
        let (dim, concat) = (head.dim, head.concat_dim());
        fill(&mut head.w1, dim);
        fill(&mut head.w2, concat);
        Ok(head)
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Pre-activations of layer1 for one row, patch by patch.
    fn preactivations(&self, x: &[T]) -> Result<Vec<T>> {
        let (dim, hidden, k) = (self.dim, self.hidden_dim(), self.layout.patches());
        if x.len() != dim * k {
            return Err(Error::Shape(format!(
                "row width {} does not match head dim {} x {} patches",
                x.len(),
                dim,
                k
            )));
        }
        let mut a = vec![T::zero(); k * hidden];
        for p in 0..k {
            let xp = &x[p * dim..(p + 1) * dim];
            for i in 0..hidden {
                let row = &self.w1[i * dim..(i + 1) * dim];
                let mut s = self.b1[i];
                for (w, v) in row.iter().zip(xp) {
                    s += *w * *v;
                }
                a[p * hidden + i] = s;
            }
        }
        Ok(a)
    }

    pub fn logit(&self, x: &[T]) -> Result<T> {
        let a = self.preactivations(x)?;
        let mut z = self.b2;
        for (w, ai) in self.w2.iter().zip(&a) {
            z += *w * gelu(*ai);
        }
        Ok(z)
    }

    pub fn score(&self, x: &[T]) -> Result<T> {
        Ok(sigmoid(self.logit(x)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = serde_json::json!({
            "kind": "head",
            "dim": self.dim,
            "layout": self.layout,
        });
        let mut payload: Vec<f32> = Vec::with_capacity(self.param_count());
        for part in [&self.w1, &self.b1, &self.w2] {
            payload.extend(part.iter().map(|v| v.as_f64() as f32));
        }
        payload.push(self.b2.as_f64() as f32);
        crate::containers::write_tagged(path, b"CKP1", &header, &payload)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, payload) = crate::containers::read_tagged(path, b"CKP1")?;
        if header["kind"].as_str() != Some("head") {
            return Err(Error::format(path, "not a head checkpoint"));
        }
        Self::from_checkpoint(path, &header, &payload)
    }

    pub(super) fn from_checkpoint(
        path: &Path,
        header: &serde_json::Value,
        payload: &[f32],
    ) -> Result<Self> {
        let dim = header["dim"]
            .as_u64()
            .ok_or_else(|| Error::format(path, "missing dim"))? as usize;
        let layout: PatchLayout = serde_json::from_value(header["layout"].clone())
            .map_err(|e| Error::format(path, &format!("bad layout: {e}")))?;
        let mut head = Self::zeros(dim, layout).map_err(|_| Error::format(path, "bad dim"))?;
        if payload.len() != head.param_count() {
            return Err(Error::format(
                path,
                &format!(
                    "payload holds {} values, expected {}",
                    payload.len(),
                    head.param_count()
                ),
            ));
        }
        let vals: Vec<T> = payload.iter().map(|&v| T::cast(v as f64)).collect();
        head.set_params(&vals)?;
        Ok(head)
    }
}

impl<T: Scalar> Trainable<T> for MlpHead<T> {
    fn params(&self) -> Vec<T> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    fn set_params(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} params for a head of {}",
                p.len(),
                self.param_count()
            )));
        }
        let (n1, nb1, n2) = (self.w1.len(), self.b1.len(), self.w2.len());
        self.w1.copy_from_slice(&p[..n1]);
        self.b1.copy_from_slice(&p[n1..n1 + nb1]);
        self.w2.copy_from_slice(&p[n1 + nb1..n1 + nb1 + n2]);
        self.b2 = p[n1 + nb1 + n2];
        Ok(())
    }

    fn decay_mask(&self) -> Vec<bool> {
        let mut m = vec![true; self.w1.len()];
        m.extend(std::iter::repeat(false).take(self.b1.len()));
        m.extend(std::iter::repeat(true).take(self.w2.len()));
        m.push(false);
        m
    }

    fn loss_and_grad(&self, xs: &[&[T]], ys: &[bool]) -> Result<(T, Vec<T>)> {
        if xs.is_empty() {
            return Err(Error::EmptyInput("empty batch"));
        }
        let (dim, hidden, k) = (self.dim, self.hidden_dim(), self.layout.patches());
        let (n1, nb1, n2) = (self.w1.len(), self.b1.len(), self.w2.len());
        let inv_n = T::one() / T::of_usize(xs.len());
        let mut loss = T::zero();
        let mut grad = vec![T::zero(); self.param_count()];
        let (gw1, rest) = grad.split_at_mut(n1);
        let (gb1, rest) = rest.split_at_mut(nb1);
        let (gw2, gb2) = rest.split_at_mut(n2);

        for (x, &y) in xs.iter().zip(ys) {
            let a = self.preactivations(x)?;
            let mut z = self.b2;
            for (w, ai) in self.w2.iter().zip(&a) {
                z += *w * gelu(*ai);
            }
            loss += bce_logit(z, y);
            let target = if y { T::one() } else { T::zero() };
            let r = (sigmoid(z) - target) * inv_n;
            gb2[0] += r;
            for p in 0..k {
                let xp = &x[p * dim..(p + 1) * dim];
                for i in 0..hidden {
                    let j = p * hidden + i;
                    gw2[j] += r * gelu(a[j]);
                    let da = r * self.w2[j] * gelu_prime(a[j]);
                    gb1[i] += da;
                    let grow = &mut gw1[i * dim..(i + 1) * dim];
                    for (g, v) in grow.iter_mut().zip(xp) {
                        *g += da * *v;
                    }
                }
            }
        }
        Ok((loss * inv_n, grad))
    }
}

/// Train a head on an export whose geometry matches the labels.
pub fn train_head<T: Scalar>(
    export: &HiddenStateExport<T>,
    labels: &FrameLabels,
    cfg: &TrainConfig,
) -> Result<MlpHead<T>> {
    if export.geometry != labels.geometry {
        return Err(Error::Shape(format!(
            "export geometry {:?} does not match labels {:?}",
            export.geometry, labels.geometry
        )));
    }
    let ys = labels.labels();
    if export.n_frames() == 0 {
        return Err(Error::EmptyInput("export has no frames"));
    }
    if ys.iter().all(|&y| y) || ys.iter().all(|&y| !y) {
        return Err(Error::Degenerate(
            "training labels contain a single class".into(),
        ));
    }
    let mut head = MlpHead::init(export.dim, export.layout, cfg.seed)?;
    let xs: Vec<&[T]> = (0..export.n_frames()).map(|n| export.row(n)).collect();
    fit(&mut head, &xs, ys, cfg)?;
    Ok(head)
}

/// Score every row of an export; output keeps the export's geometry and
/// names the backbone as its source.
pub fn score_head<T: Scalar>(
    head: &MlpHead<T>,
    export: &HiddenStateExport<T>,
) -> Result<ScoreSequence<T>> {
    if head.layout != export.layout || head.dim != export.dim {
        return Err(Error::Shape(format!(
            "head is {} dim {}, export is {} dim {}",
            head.layout, head.dim, export.layout, export.dim
        )));
    }
    let scores = (0..export.n_frames())
        .map(|n| head.score(export.row(n)))
        .collect::<Result<Vec<T>>>()?;
    let source = if export.model_id.is_empty() {
        "head".to_string()
    } else {
        export.model_id.clone()
    };
    ScoreSequence::new(scores, export.geometry, source)
}

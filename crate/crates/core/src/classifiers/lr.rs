//! Logistic regression over flattened mel patches.

use std::path::Path;

use crate::annotations::FrameLabels;
use crate::error::{Error, Result};
use crate::features::{PatchFrame, PatchSequence};
use crate::scalar::Scalar;

use super::{bce_logit, fit, sigmoid, ScoreSequence, TrainConfig, Trainable};

/// Linear scorer on a flat feature vector; with 128-mel, 16-frame patches
/// that is 2048 weights plus a bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LRModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Scalar> LRModel<T> {
    pub fn zeros(dim: usize) -> Self {
        LRModel { weights: vec![T::zero(); dim], bias: T::zero() }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + 1
    }

    pub fn logit(&self, x: &[T]) -> Result<T> {
        if x.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "feature length {} does not match model dim {}",
                x.len(),
                self.weights.len()
            )));
        }
        let mut z = self.bias;
        for (w, v) in self.weights.iter().zip(x) {
            z += *w * *v;
        }
        Ok(z)
    }

    pub fn score(&self, x: &[T]) -> Result<T> {
        Ok(sigmoid(self.logit(x)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = serde_json::json!({
            "kind": "lr",
            "dim": self.weights.len(),
        });
        let mut payload: Vec<f32> = self.weights.iter().map(|w| w.as_f64() as f32).collect();
        payload.push(self.bias.as_f64() as f32);
        crate::containers::write_tagged(path, b"CKP1", &header, &payload)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, payload) = crate::containers::read_tagged(path, b"CKP1")?;
        if header["kind"].as_str() != Some("lr") {
            return Err(Error::format(path, "not an lr checkpoint"));
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
        if payload.len() != dim + 1 {
            return Err(Error::format(
                path,
                &format!("payload holds {} values, expected {}", payload.len(), dim + 1),
            ));
        }
        Ok(LRModel {
            weights: payload[..dim].iter().map(|&v| T::cast(v as f64)).collect(),
            bias: T::cast(payload[dim] as f64),
        })
    }
}

impl<T: Scalar> Trainable<T> for LRModel<T> {
    fn params(&self) -> Vec<T> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    fn set_params(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.weights.len() + 1 {
            return Err(Error::Shape(format!(
                "{} params for lr of dim {}",
                p.len(),
                self.weights.len()
            )));
        }
        self.weights.copy_from_slice(&p[..p.len() - 1]);
        self.bias = p[p.len() - 1];
        Ok(())
    }

    fn decay_mask(&self) -> Vec<bool> {
        let mut m = vec![true; self.weights.len()];
        m.push(false);
        m
    }

    fn loss_and_grad(&self, xs: &[&[T]], ys: &[bool]) -> Result<(T, Vec<T>)> {
        if xs.is_empty() {
            return Err(Error::EmptyInput("empty batch"));
        }
        let dim = self.weights.len();
        let inv_n = T::one() / T::of_usize(xs.len());
        let mut loss = T::zero();
        let mut grad = vec![T::zero(); dim + 1];
        for (x, &y) in xs.iter().zip(ys) {
            let z = self.logit(x)?;
            loss += bce_logit(z, y);
            let target = if y { T::one() } else { T::zero() };
            let r = (sigmoid(z) - target) * inv_n;
            for (g, v) in grad[..dim].iter_mut().zip(*x) {
                *g += r * *v;
            }
            grad[dim] += r;
        }
        Ok((loss * inv_n, grad))
    }
}

/// Fit a logistic regression to labelled patch frames from zero-initialized
/// parameters.
pub fn train_lr<T: Scalar>(
    patches: &[PatchFrame<T>],
    labels: &FrameLabels,
    cfg: &TrainConfig,
) -> Result<LRModel<T>> {
    let labels = labels.labels();
    if patches.is_empty() {
        return Err(Error::EmptyInput("no training patches"));
    }
    if patches.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} patches vs {} labels",
            patches.len(),
            labels.len()
        )));
    }
    let dim = patches[0].values.len();
    if let Some(p) = patches.iter().find(|p| p.values.len() != dim) {
        return Err(Error::Shape(format!(
            "mixed patch sizes: {} and {}",
            dim,
            p.values.len()
        )));
    }
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(Error::Degenerate(
            "training labels contain a single class".into(),
        ));
    }
    let mut model = LRModel::zeros(dim);
    let xs: Vec<&[T]> = patches.iter().map(|p| p.values.as_slice()).collect();
    fit(&mut model, &xs, labels, cfg)?;
    Ok(model)
}

/// Score every patch frame in a sequence; output inherits the patch
/// geometry.
pub fn score_lr<T: Scalar>(
    model: &LRModel<T>,
    seq: &PatchSequence<T>,
) -> Result<ScoreSequence<T>> {
    let scores = seq
        .frames
        .iter()
        .map(|f| model.score(&f.values))
        .collect::<Result<Vec<T>>>()?;
    ScoreSequence::new(scores, seq.geometry, "lr")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::gradient_check;
    use crate::geometry::FrameGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn patch<T: Scalar>(values: Vec<T>) -> PatchFrame<T> {
        let n = values.len();
        PatchFrame { values, n_mels: n, patch_width: 1, center_time: 0.0 }
    }

    fn fl(ys: &[bool]) -> FrameLabels {
        let g = FrameGeometry::new(160, 100, ys.len()).unwrap();
        FrameLabels::new(ys.to_vec(), g).unwrap()
    }

    #[test]
    fn standard_patch_gives_2049_params() {
        let m = LRModel::<f64>::zeros(128 * 16);
        assert_eq!(m.param_count(), 2049);
    }

    #[test]
    fn score_worked_examples() {
        let m = LRModel::<f64>::zeros(4);
        assert_eq!(m.score(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.5);

        let mut hot = LRModel::<f64>::zeros(4);
        hot.bias = 20.0;
        assert!(hot.score(&[0.0; 4]).unwrap() > 0.9999);

        let m1 = LRModel { weights: vec![1.0f64], bias: -2.0 };
        assert_eq!(m1.score(&[2.0]).unwrap(), 0.5);
    }

    #[test]
    fn dim_mismatch_is_shape_error() {
        let m = LRModel::<f64>::zeros(4);
        assert!(matches!(m.score(&[1.0; 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn single_class_rejected() {
        let ps: Vec<PatchFrame<f64>> = (0..4).map(|_| patch(vec![0.0; 3])).collect();
        let err = train_lr(&ps, &fl(&[true; 4]), &TrainConfig::lr_baseline());
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    fn separable_set(n: usize, dim: usize, seed: u64) -> (Vec<PatchFrame<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = i % 2 == 0;
            let shift = if y { 1.5 } else { -1.5 };
            let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5 + shift).collect();
            xs.push(patch(v));
            ys.push(y);
        }
        (xs, ys)
    }

    #[test]
    fn separable_data_reaches_full_accuracy() {
        let (xs, ys) = separable_set(64, 8, 11);
        let cfg = TrainConfig { epochs: 40, ..TrainConfig::lr_baseline() };
        let m = train_lr(&xs, &fl(&ys), &cfg).unwrap();
        let correct = xs
            .iter()
            .zip(&ys)
            .filter(|(x, &y)| (m.score(&x.values).unwrap() >= 0.5) == y)
            .count();
        assert_eq!(correct, xs.len());
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (xs, ys) = separable_set(32, 6, 3);
        let cfg = TrainConfig::lr_baseline();
        let a = train_lr(&xs, &fl(&ys), &cfg).unwrap();
        let b = train_lr(&xs, &fl(&ys), &cfg).unwrap();
        let bits = |m: &LRModel<f64>| -> Vec<u64> {
            m.params().iter().map(|p| p.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn label_flip_mirrors_the_model() {
        // From zero init the whole optimization is antisymmetric in the
        // labels, so flipping them must negate every parameter (up to
        // rounding noise well below 1e-3).
        let (xs, ys) = separable_set(48, 5, 9);
        let flipped: Vec<bool> = ys.iter().map(|&y| !y).collect();
        let cfg = TrainConfig { epochs: 8, ..TrainConfig::lr_baseline() };
        let a = train_lr(&xs, &fl(&ys), &cfg).unwrap();
        let b = train_lr(&xs, &fl(&flipped), &cfg).unwrap();
        for (pa, pb) in a.params().iter().zip(b.params()) {
            assert!((pa + pb).abs() < 1e-3, "{pa} vs {pb}");
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut m = LRModel::<f64> {
            weights: (0..7).map(|_| rng.gen::<f64>() - 0.5).collect(),
            bias: 0.3,
        };
        let data: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..7).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let xs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
        let ys: Vec<bool> = (0..12).map(|i| i % 3 == 0).collect();
        let worst = gradient_check(&mut m, &xs, &ys).unwrap();
        assert!(worst < 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn scores_inherit_patch_geometry() {
        let g = FrameGeometry::new(160, 100, 3).unwrap();
        let seq = PatchSequence {
            frames: (0..3).map(|_| patch(vec![0.0f64; 4])).collect(),
            geometry: g,
        };
        let s = score_lr(&LRModel::zeros(4), &seq).unwrap();
        assert_eq!(s.geometry, g);
        assert_eq!(s.source, "lr");
        assert_eq!(s.scores, vec![0.5; 3]);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckp1");
        let m = LRModel { weights: vec![0.25f64, -1.5, 3.0], bias: 0.125 };
        m.save(&path).unwrap();
        let r = LRModel::<f64>::load(&path).unwrap();
        assert_eq!(r, m);
        match crate::classifiers::load_checkpoint::<f64>(&path).unwrap() {
            crate::classifiers::Checkpoint::Lr(k) => assert_eq!(k, m),
            _ => panic!("wrong checkpoint kind"),
        }
    }
}

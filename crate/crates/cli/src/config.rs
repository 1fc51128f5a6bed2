use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use coughep_core::evaluation::Tiling;
use coughep_core::{Error as CoreError, MelConfig, TrainConfig};

use crate::error::{CliError, Result};
use crate::synth::SynthConfig;

/// Everything a pipeline run needs, loadable from one TOML or JSON file.
/// Flag overrides are applied after loading.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Recordings under `<audio_dir>/<split>/<id>.wav`.
    pub audio_dir: PathBuf,
    /// Annotations under `<annotation_dir>/<split>/<id>.tsv`.
    pub annotation_dir: PathBuf,
    /// All derived artifacts live below this directory.
    pub out_dir: PathBuf,
    /// Hidden-state exports: `<hidden_dir>/<layer>/<split>/<id>.hsx1`, or
    /// `<hidden_dir>/<split>/<id>.hsx1` for a single unnamed layer.
    pub hidden_dir: Option<PathBuf>,
    pub tiling: Tiling,
    pub coverage_target: f64,
    pub purity_target: f64,
    pub seed: u64,
    pub mel: MelConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            audio_dir: "corpus/audio".into(),
            annotation_dir: "corpus/annotations".into(),
            out_dir: "artifacts".into(),
            hidden_dir: None,
            tiling: Tiling::Skip,
            coverage_target: 0.97,
            purity_target: 0.90,
            seed: 0,
            mel: MelConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Core(CoreError::io(path, e)))?;
        let cfg: PipelineConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| CoreError::format(path, &e.to_string()))?,
            _ => toml::from_str(&text)
                .map_err(|e| CoreError::format(path, &e.to_string()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("coverage_target", self.coverage_target),
            ("purity_target", self.purity_target),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(CliError::Core(CoreError::InvalidConfig(format!(
                    "{name} {v} not in (0, 1)"
                ))));
            }
        }
        self.train.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    pub fn audio_split(&self, split: &str) -> PathBuf {
        self.audio_dir.join(split)
    }

    pub fn annotation_split(&self, split: &str) -> PathBuf {
        self.annotation_dir.join(split)
    }

    pub fn features_dir(&self, split: &str) -> PathBuf {
        self.out_dir.join("features").join(split)
    }

    pub fn scores_dir(&self, split: &str) -> PathBuf {
        self.out_dir.join("scores").join(split)
    }

    pub fn segments_dir(&self, split: &str) -> PathBuf {
        self.out_dir.join("segments").join(split)
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out_dir.join("models")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }

    pub fn clips_dir(&self, split: &str) -> PathBuf {
        self.out_dir.join("clips").join(split)
    }

    pub fn thresholds_path(&self) -> PathBuf {
        self.out_dir.join("thresholds.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_load_identically() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("cfg.toml");
        std::fs::write(
            &toml_path,
            "seed = 7\ncoverage_target = 0.9\n[mel]\nn_mels = 64\n[synth]\nn_recordings = 2\n",
        )
        .unwrap();
        let json_path = dir.path().join("cfg.json");
        std::fs::write(
            &json_path,
            r#"{"seed": 7, "coverage_target": 0.9, "mel": {"n_mels": 64}, "synth": {"n_recordings": 2}}"#,
        )
        .unwrap();
        let a = PipelineConfig::load(&toml_path).unwrap();
        let b = PipelineConfig::load(&json_path).unwrap();
        assert_eq!(a.seed, 7);
        assert_eq!(a.mel.n_mels, 64);
        assert_eq!(a.synth.n_recordings, 2);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn bad_target_rejected() {
        let cfg = PipelineConfig { coverage_target: 1.5, ..PipelineConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.toml");
        std::fs::write(&p, "sede = 7\n").unwrap();
        assert!(PipelineConfig::load(&p).is_err());
    }
}

//! Audio ingestion and feature extraction: log-mel spectrograms, mel-patch
//! frames for the patch classifiers, and spectral power profiles.

pub mod filterbank;
pub mod wav;

use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FrameGeometry;
use crate::scalar::Scalar;

pub use wav::{load_wav, resample, write_wav, WavEncoding, Waveform, CANONICAL_SAMPLE_RATE};

/// Log-mel spectrogram parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MelConfig {
    pub n_mels: usize,
    pub window_ms: u32,
    pub hop_ms: u32,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    /// Added to filterbank energy before log10 so silent frames stay finite.
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            n_mels: 128,
            window_ms: 25,
            hop_ms: 10,
            fmin_hz: 0.0,
            fmax_hz: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl MelConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidConfig(reason));
        if self.n_mels == 0 {
            return bad("n_mels must be >= 1".into());
        }
        if self.hop_ms == 0 || self.window_ms == 0 {
            return bad("window_ms and hop_ms must be > 0".into());
        }
        if self.hop_ms > self.window_ms {
            return bad(format!(
                "hop_ms {} exceeds window_ms {}",
                self.hop_ms, self.window_ms
            ));
        }
        if !(self.fmin_hz >= 0.0 && self.fmax_hz > self.fmin_hz) {
            return bad("need 0 <= fmin_hz < fmax_hz".into());
        }
        if self.fmax_hz > sample_rate as f64 / 2.0 {
            return bad(format!(
                "fmax_hz {} exceeds Nyquist {}",
                self.fmax_hz,
                sample_rate as f64 / 2.0
            ));
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as u64 * self.window_ms as u64 / 1000) as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as u64 * self.hop_ms as u64 / 1000) as usize
    }

    pub fn n_fft(&self, sample_rate: u32) -> usize {
        self.window_samples(sample_rate).next_power_of_two()
    }
}

/// Log-power mel spectrogram, row-major `[n_frames x n_mels]`.
#[derive(Clone, Debug)]
pub struct MelSpectrogram<T> {
    values: Vec<T>,
    n_frames: usize,
    pub config: MelConfig,
    /// Time of the first window start, seconds.
    pub origin: f64,
}

impl<T: Scalar> MelSpectrogram<T> {
    #[inline]
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    #[inline]
    pub fn n_mels(&self) -> usize {
        self.config.n_mels
    }

    /// Mel values of frame `n` (length `n_mels`).
    #[inline]
    pub fn frame(&self, n: usize) -> &[T] {
        &self.values[n * self.config.n_mels..(n + 1) * self.config.n_mels]
    }

    /// Shift to zero mean and scale to unit variance over the whole matrix.
    /// A constant (e.g. all-silence) spectrogram is only centred.
    pub fn normalize(&mut self) {
        let n = self.values.len();
        if n == 0 {
            return;
        }
        let nf = T::of_usize(n);
        let mean = self.values.iter().copied().sum::<T>() / nf;
        let var = self
            .values
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<T>()
            / nf;
        let std = var.sqrt();
        let scale = if std > T::zero() { std } else { T::one() };
        for v in self.values.iter_mut() {
            *v = (*v - mean) / scale;
        }
    }

    /// Write as a `CEP1` matrix container plus a JSON sidecar at
    /// `<path>.json` carrying the configuration.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let data: Vec<f32> = self.values.iter().map(|v| v.as_f64() as f32).collect();
        crate::containers::write_matrix(path, self.n_frames, self.config.n_mels, &data)?;
        let sidecar = serde_json::json!({
            "config": self.config,
            "origin": self.origin,
            "n_frames": self.n_frames,
        });
        crate::containers::write_json(sidecar_path(path), &sidecar)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (rows, cols, data) = crate::containers::read_matrix(path)?;
        let sidecar = crate::containers::read_json(sidecar_path(path))?;
        let config: MelConfig = serde_json::from_value(sidecar["config"].clone())
            .map_err(|e| Error::format(path, &format!("bad sidecar config: {e}")))?;
        if cols != config.n_mels {
            return Err(Error::format(
                path,
                &format!("matrix has {cols} columns but config.n_mels is {}", config.n_mels),
            ));
        }
        Ok(MelSpectrogram {
            values: data.into_iter().map(|v| T::cast(v as f64)).collect(),
            n_frames: rows,
            config,
            origin: sidecar["origin"].as_f64().unwrap_or(0.0),
        })
    }

    /// CSV with a header row: time_s, then one column per mel bin.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("time_s");
        for m in 0..self.n_mels() {
            out.push_str(&format!(",mel_{m}"));
        }
        out.push('\n');
        let hop = self.config.hop_ms as f64 / 1000.0;
        for n in 0..self.n_frames {
            out.push_str(&format!("{}", self.origin + n as f64 * hop));
            for v in self.frame(n) {
                out.push_str(&format!(",{}", v.as_f64()));
            }
            out.push('\n');
        }
        crate::containers::atomic_write(path, out.as_bytes())
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Compute the log-mel spectrogram: Hann-windowed power spectra mapped
/// through a triangular mel filterbank, then `log10(energy + log_floor)`.
/// Frame `n` covers the window starting at `n * hop`.
pub fn mel_spectrogram<T: Scalar>(w: &Waveform<T>, cfg: &MelConfig) -> Result<MelSpectrogram<T>> {
    cfg.validate(w.sample_rate())?;
    let window = cfg.window_samples(w.sample_rate());
    let hop = cfg.hop_samples(w.sample_rate());
    if w.len() < window {
        return Err(Error::EmptyInput("waveform shorter than one analysis window"));
    }
    let n_fft = cfg.n_fft(w.sample_rate());
    let n_frames = (w.len() - window) / hop + 1;
    let fb = filterbank::build(cfg.n_mels, n_fft, w.sample_rate(), cfg.fmin_hz, cfg.fmax_hz)?;

    let hann = hann_window(window);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut power = vec![0.0f64; n_fft / 2 + 1];

    let samples = w.samples();
    let mut values = Vec::with_capacity(n_frames * cfg.n_mels);
    for n in 0..n_frames {
        let start = n * hop;
        for i in 0..window {
            buf[i] = Complex::new(samples[start + i].as_f64() * hann[i], 0.0);
        }
        for b in buf[window..].iter_mut() {
            *b = Complex::new(0.0, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, p) in power.iter_mut().enumerate() {
            *p = buf[k].norm_sqr();
        }
        for m in 0..cfg.n_mels {
            let energy: f64 = fb
                .row(m)
                .iter()
                .zip(power.iter())
                .map(|(w, p)| w * p)
                .sum();
            values.push(T::cast((energy + cfg.log_floor).log10()));
        }
    }

    Ok(MelSpectrogram {
        values,
        n_frames,
        config: cfg.clone(),
        origin: 0.0,
    })
}

/// Periodic Hann window of length `n`.
fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// A time-slab of the mel spectrogram, row-major `[n_mels x patch_width]`:
/// row m holds mel bin m over `patch_width` consecutive mel frames.
#[derive(Clone, Debug)]
pub struct PatchFrame<T> {
    pub values: Vec<T>,
    pub n_mels: usize,
    pub patch_width: usize,
    /// Midpoint of the spanned audio, seconds.
    pub center_time: f64,
}

impl<T: Scalar> PatchFrame<T> {
    /// Split along the frequency axis into slabs of `height` mel bins at
    /// the given stride; each slab is row-major `[height x patch_width]`.
    /// With 128 bins, height 16 and stride 10 this yields 12 slabs.
    pub fn freq_patches(&self, height: usize, stride: usize) -> Result<Vec<Vec<T>>> {
        if height == 0 || stride == 0 || height > self.n_mels {
            return Err(Error::InvalidConfig(format!(
                "cannot split {} mel bins into patches of height {height} at stride {stride}",
                self.n_mels
            )));
        }
        let count = (self.n_mels - height) / stride + 1;
        let mut out = Vec::with_capacity(count);
        for p in 0..count {
            let top = p * stride;
            let mut slab = Vec::with_capacity(height * self.patch_width);
            for row in top..top + height {
                slab.extend_from_slice(
                    &self.values[row * self.patch_width..(row + 1) * self.patch_width],
                );
            }
            out.push(slab);
        }
        Ok(out)
    }
}

/// Patch frames with the geometry they induce: frame length
/// `patch_width * hop`, frame skip `stride * hop`.
#[derive(Clone, Debug)]
pub struct PatchSequence<T> {
    pub frames: Vec<PatchFrame<T>>,
    pub geometry: FrameGeometry,
}

/// Number of patches produced by a sliding window of `width` at `stride`
/// over `n` positions: `floor((n - width) / stride) + 1`.
pub fn patch_count(n: usize, width: usize, stride: usize) -> usize {
    if n < width {
        0
    } else {
        (n - width) / stride + 1
    }
}

/// Cut the spectrogram into overlapping time-slabs: slab k spans mel-frame
/// columns `[k*stride, k*stride + patch_width)`. With the default mel hop of
/// 10ms and (width 16, stride 10) each slab spans 160ms and consecutive
/// centers are 100ms apart.
pub fn extract_patch_frames<T: Scalar>(
    m: &MelSpectrogram<T>,
    patch_width: usize,
    stride: usize,
) -> Result<PatchSequence<T>> {
    if patch_width == 0 || stride == 0 {
        return Err(Error::InvalidConfig("patch_width and stride must be > 0".into()));
    }
    if m.n_frames() < patch_width {
        return Err(Error::EmptyInput("fewer mel frames than one patch width"));
    }
    let count = patch_count(m.n_frames(), patch_width, stride);
    let n_mels = m.n_mels();
    let hop_s = m.config.hop_ms as f64 / 1000.0;

    let mut frames = Vec::with_capacity(count);
    for k in 0..count {
        let first = k * stride;
        let mut values = vec![T::zero(); n_mels * patch_width];
        for (j, col) in (first..first + patch_width).enumerate() {
            let src = m.frame(col);
            for mel in 0..n_mels {
                values[mel * patch_width + j] = src[mel];
            }
        }
        frames.push(PatchFrame {
            values,
            n_mels,
            patch_width,
            center_time: m.origin + (first as f64 + patch_width as f64 / 2.0) * hop_s,
        });
    }

    let geometry = FrameGeometry::new(
        patch_width as u32 * m.config.hop_ms,
        stride as u32 * m.config.hop_ms,
        count,
    )?;
    Ok(PatchSequence { frames, geometry })
}

/// Class tag for a power profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileClass {
    Cough,
    NonCough,
}

impl std::fmt::Display for ProfileClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProfileClass::Cough => write!(f, "cough"),
            ProfileClass::NonCough => write!(f, "non-cough"),
        }
    }
}

/// Mean and spread of spectral power across a set of segments.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerProfile {
    pub freqs_hz: Vec<f64>,
    pub mean_db: Vec<f64>,
    pub std_db: Vec<f64>,
    pub class_label: ProfileClass,
    pub n_segments: usize,
}

const PROFILE_WINDOW_MS: u32 = 25;
const PROFILE_FLOOR: f64 = 1e-10;

/// Welch-style power profile: per segment, Hann-windowed periodograms at 50%
/// overlap are averaged; mean and population std in dB are then taken across
/// segments per frequency bin.
pub fn power_profile<T: Scalar>(segments: &[Waveform<T>], class_label: ProfileClass) -> Result<PowerProfile> {
    if segments.is_empty() {
        return Err(Error::EmptyInput("no segments to profile"));
    }
    let rate = segments[0].sample_rate();
    if segments.iter().any(|s| s.sample_rate() != rate) {
        return Err(Error::InvalidConfig("segments have mixed sample rates".into()));
    }
    let window = (rate as u64 * PROFILE_WINDOW_MS as u64 / 1000) as usize;
    let hop = window / 2;
    if segments.iter().any(|s| s.len() < window) {
        return Err(Error::EmptyInput("segment shorter than one analysis window"));
    }

    let n_fft = window.next_power_of_two();
    let n_bins = n_fft / 2 + 1;
    let hann = hann_window(window);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    // Per-segment mean periodogram, in dB.
    let mut seg_db: Vec<Vec<f64>> = Vec::with_capacity(segments.len());
    for seg in segments {
        let samples = seg.samples();
        let n_frames = (samples.len() - window) / hop + 1;
        let mut acc = vec![0.0f64; n_bins];
        for n in 0..n_frames {
            let start = n * hop;
            for i in 0..window {
                buf[i] = Complex::new(samples[start + i].as_f64() * hann[i], 0.0);
            }
            for b in buf[window..].iter_mut() {
                *b = Complex::new(0.0, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, a) in acc.iter_mut().enumerate() {
                *a += buf[k].norm_sqr();
            }
        }
        seg_db.push(
            acc.into_iter()
                .map(|p| 10.0 * (p / n_frames as f64 + PROFILE_FLOOR).log10())
                .collect(),
        );
    }

    let n = segments.len() as f64;
    let mut mean_db = vec![0.0; n_bins];
    let mut std_db = vec![0.0; n_bins];
    for k in 0..n_bins {
        let mean = seg_db.iter().map(|s| s[k]).sum::<f64>() / n;
        let var = seg_db.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / n;
        mean_db[k] = mean;
        std_db[k] = var.sqrt();
    }

    Ok(PowerProfile {
        freqs_hz: (0..n_bins)
            .map(|k| k as f64 * rate as f64 / n_fft as f64)
            .collect(),
        mean_db,
        std_db,
        class_label,
        n_segments: segments.len(),
    })
}

impl PowerProfile {
    /// `CEP1` container with rows (freqs_hz, mean_db, std_db) and a JSON
    /// sidecar with the class label.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let cols = self.freqs_hz.len();
        let mut data = Vec::with_capacity(3 * cols);
        data.extend(self.freqs_hz.iter().map(|&v| v as f32));
        data.extend(self.mean_db.iter().map(|&v| v as f32));
        data.extend(self.std_db.iter().map(|&v| v as f32));
        crate::containers::write_matrix(path, 3, cols, &data)?;
        let sidecar = serde_json::json!({
            "class_label": self.class_label,
            "n_segments": self.n_segments,
        });
        crate::containers::write_json(sidecar_path(path), &sidecar)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("freq_hz,mean_db,std_db\n");
        for k in 0..self.freqs_hz.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.freqs_hz[k], self.mean_db[k], self.std_db[k]
            ));
        }
        crate::containers::atomic_write(path, out.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(freq: f64, rate: u32, seconds: f64, amp: f64) -> Waveform<f64> {
        let n = (rate as f64 * seconds) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Waveform::new(samples, rate).unwrap()
    }

    #[test]
    fn one_second_gives_98_frames() {
        let w = Waveform::<f64>::new(vec![0.0; 16_000], 16_000).unwrap();
        let m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        assert_eq!(m.n_frames(), 98); // floor((16000-400)/160)+1
        assert_eq!(m.n_mels(), 128);
    }

    #[test]
    fn frame_count_formula_holds() {
        let cfg = MelConfig::default();
        for n_samples in [400usize, 401, 559, 560, 16_000, 31_999] {
            let w = Waveform::<f64>::new(vec![0.0; n_samples], 16_000).unwrap();
            let m = mel_spectrogram(&w, &cfg).unwrap();
            assert_eq!(m.n_frames(), (n_samples - 400) / 160 + 1, "n={n_samples}");
        }
    }

    #[test]
    fn silence_hits_log_floor() {
        let w = Waveform::<f64>::new(vec![0.0; 8000], 16_000).unwrap();
        let m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        for n in 0..m.n_frames() {
            for &v in m.frame(n) {
                assert!((v - (-10.0)).abs() < 1e-12); // log10(1e-10)
            }
        }
    }

    #[test]
    fn tone_peaks_at_nearest_center() {
        // Oracle: recompute filter center frequencies from the mel points
        // directly rather than trusting the filterbank internals.
        let n_mels = 128usize;
        let (lo, hi) = (filterbank::hz_to_mel(0.0), filterbank::hz_to_mel(8000.0));
        let centers: Vec<f64> = (1..=n_mels)
            .map(|i| filterbank::mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let nearest = centers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 1000.0).abs().partial_cmp(&(b.1 - 1000.0).abs()).unwrap()
            })
            .unwrap()
            .0;

        let w = tone(1000.0, 16_000, 0.5, 0.8);
        let m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        for n in 0..m.n_frames() {
            let frame = m.frame(n);
            let argmax = frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert!(
                (argmax as i64 - nearest as i64).abs() <= 1,
                "frame {n}: argmax {argmax}, nearest center {nearest}"
            );
        }
    }

    #[test]
    fn too_short_waveform_is_empty_input() {
        let w = Waveform::<f64>::new(vec![0.0; 399], 16_000).unwrap();
        match mel_spectrogram(&w, &MelConfig::default()) {
            Err(Error::EmptyInput(_)) => {}
            other => panic!("expected empty-input error, got {other:?}"),
        }
    }

    #[test]
    fn normalize_zero_mean_unit_var() {
        let w = tone(700.0, 16_000, 1.0, 0.5);
        let mut m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        m.normalize();
        let n = (m.n_frames() * m.n_mels()) as f64;
        let mean: f64 = (0..m.n_frames()).flat_map(|i| m.frame(i)).sum::<f64>() / n;
        let var: f64 = (0..m.n_frames())
            .flat_map(|i| m.frame(i))
            .map(|&v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn patch_counts() {
        assert_eq!(patch_count(98, 16, 10), 9);
        assert_eq!(patch_count(16, 16, 10), 1);
        assert_eq!(patch_count(15, 16, 10), 0);
        assert_eq!(patch_count(128, 16, 10), 12);
    }

    #[test]
    fn patches_match_spectrogram_columns_exactly() {
        let w = tone(1234.0, 16_000, 1.0, 0.6);
        let m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let seq = extract_patch_frames(&m, 16, 10).unwrap();
        assert_eq!(seq.frames.len(), 9);
        assert_eq!(seq.geometry.frame_length_ms, 160);
        assert_eq!(seq.geometry.frame_skip_ms, 100);
        for (k, p) in seq.frames.iter().enumerate() {
            for j in 0..16 {
                let col = m.frame(k * 10 + j);
                for mel in 0..128 {
                    assert_eq!(p.values[mel * 16 + j], col[mel]);
                }
            }
            let want_center = (k * 10) as f64 * 0.01 + 0.08;
            assert!((p.center_time - want_center).abs() < 1e-12);
        }
    }

    #[test]
    fn stride_equal_width_is_disjoint() {
        let w = tone(500.0, 16_000, 1.0, 0.6);
        let m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let seq = extract_patch_frames(&m, 16, 16).unwrap();
        assert_eq!(seq.frames.len(), 98 / 16);
        assert_eq!(seq.geometry.frame_skip_ms, 160);
        assert_eq!(seq.geometry.frame_length_ms, 160);
    }

    #[test]
    fn twelve_frequency_patches() {
        let w = tone(500.0, 16_000, 0.5, 0.6);
        let m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let seq = extract_patch_frames(&m, 16, 10).unwrap();
        let slabs = seq.frames[0].freq_patches(16, 10).unwrap();
        assert_eq!(slabs.len(), 12);
        for slab in &slabs {
            assert_eq!(slab.len(), 256);
        }
        // Slab p row r equals mel bin p*10 + r.
        for (p, slab) in slabs.iter().enumerate() {
            for r in 0..16 {
                for j in 0..16 {
                    assert_eq!(slab[r * 16 + j], seq.frames[0].values[(p * 10 + r) * 16 + j]);
                }
            }
        }
    }

    #[test]
    fn mel_save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.cep1");
        let w = tone(900.0, 16_000, 0.5, 0.4);
        let m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        m.save(&path).unwrap();
        let r = MelSpectrogram::<f64>::load(&path).unwrap();
        assert_eq!(r.n_frames(), m.n_frames());
        assert_eq!(r.config, m.config);
        for n in 0..m.n_frames() {
            for (a, b) in r.frame(n).iter().zip(m.frame(n)) {
                assert!((a - b).abs() < 1e-6); // f32 payload
            }
        }
    }

    #[test]
    fn profile_peak_at_tone() {
        let seg = tone(1000.0, 16_000, 0.2, 0.9);
        let p = power_profile(&[seg], ProfileClass::Cough).unwrap();
        let argmax = p
            .mean_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((p.freqs_hz[argmax] - 1000.0).abs() <= 31.25);
    }

    #[test]
    fn identical_segments_zero_std() {
        let seg = tone(640.0, 16_000, 0.1, 0.5);
        let p = power_profile(&[seg.clone(), seg], ProfileClass::NonCough).unwrap();
        assert!(p.std_db.iter().all(|&s| s.abs() < 1e-9));
        assert_eq!(p.n_segments, 2);
    }

    #[test]
    fn white_noise_profile_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let segs: Vec<Waveform<f64>> = (0..50)
            .map(|_| {
                let samples: Vec<f64> = (0..8000).map(|_| rng.gen_range(-0.5..0.5)).collect();
                Waveform::new(samples, 16_000).unwrap()
            })
            .collect();
        let p = power_profile(&segs, ProfileClass::NonCough).unwrap();
        let lo = p.mean_db.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = p.mean_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 6.0, "profile spans {:.2} dB", hi - lo);
    }

    #[test]
    fn empty_profile_input_rejected() {
        match power_profile::<f64>(&[], ProfileClass::Cough) {
            Err(Error::EmptyInput(_)) => {}
            other => panic!("expected empty-input error, got {other:?}"),
        }
    }
}

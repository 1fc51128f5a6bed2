//! Synthetic corpora: background noise plus band-limited noise bursts with
//! known 10ms-aligned boundaries, for desk-scale end-to-end runs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use coughep_core::{Annotation, AnnotationSet, Error as CoreError, Label, Waveform};

use crate::error::Result;

const SAMPLE_RATE: u32 = 16_000;
const BACKGROUND_AMP: f64 = 0.05;
const MIN_EVENT_MS: u64 = 50;
const MIN_GAP_MS: u64 = 100;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_recordings: usize,
    pub recording_seconds: f64,
    pub events_per_recording: usize,
    pub event_duration_mean_ms: f64,
    pub event_duration_std_ms: f64,
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_recordings: 5,
            recording_seconds: 20.0,
            events_per_recording: 6,
            event_duration_mean_ms: 416.0,
            event_duration_std_ms: 207.0,
            snr_db: 10.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> std::result::Result<(), CoreError> {
        if !(self.recording_seconds > 0.0) {
            return Err(CoreError::InvalidConfig("recording_seconds must be > 0".into()));
        }
        if !(self.event_duration_mean_ms > 0.0) {
            return Err(CoreError::InvalidConfig("event duration mean must be > 0".into()));
        }
        if !(self.event_duration_std_ms >= 0.0) {
            return Err(CoreError::InvalidConfig("event duration std must be >= 0".into()));
        }
        Ok(())
    }
}

/// One generated recording, before anything is written to disk.
pub struct SynthRecording {
    pub id: String,
    pub waveform: Waveform<f64>,
    pub annotations: AnnotationSet,
}

fn mix_seed(seed: u64, split: &str, index: usize) -> u64 {
    // FNV-1a over the split name, then a golden-ratio stride per recording.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in split.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x100000001b3);
    }
    seed ^ h.wrapping_add((index as u64).wrapping_mul(0x9E3779B97F4A7C15))
}

fn round_to_grid(ms: f64) -> u64 {
    ((ms / 10.0).round() as u64) * 10
}

fn floor_to_grid(ms: f64) -> u64 {
    ((ms / 10.0).floor() as u64) * 10
}

/// Draw event durations and pack them onto the timeline with at least
/// `MIN_GAP_MS` between events and at the edges. All boundaries land on
/// the 10ms annotation grid.
fn place_events(
    cfg: &SynthConfig,
    total_ms: u64,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<(u64, u64)>, CoreError> {
    let k = cfg.events_per_recording;
    if k == 0 {
        return Ok(Vec::new());
    }
    let normal = Normal::new(cfg.event_duration_mean_ms, cfg.event_duration_std_ms)
        .map_err(|e| CoreError::InvalidConfig(e.to_string()))?;
    let durations: Vec<u64> = (0..k)
        .map(|_| round_to_grid(normal.sample(rng).max(MIN_EVENT_MS as f64)))
        .collect();
    let event_total: u64 = durations.iter().sum();
    let gap_floor = (k as u64 + 1) * MIN_GAP_MS;
    if event_total + gap_floor > total_ms {
        return Err(CoreError::InvalidConfig(format!(
            "cannot fit {k} events totalling {event_total}ms plus {gap_floor}ms of gaps \
             into a {total_ms}ms recording"
        )));
    }
    let slack = total_ms - event_total - gap_floor;
    let weights: Vec<f64> = (0..=k).map(|_| rng.gen::<f64>()).collect();
    let weight_sum: f64 = weights.iter().sum();
    let mut events = Vec::with_capacity(k);
    let mut t = 0u64;
    for (i, &d) in durations.iter().enumerate() {
        let extra = slack as f64 * weights[i] / weight_sum;
        t += MIN_GAP_MS + floor_to_grid(extra);
        events.push((t, t + d));
        t += d;
    }
    Ok(events)
}

/// Band-limited burst: white noise through a 3-tap moving average (energy
/// concentrated in the lower half of the band), shaped by a fast-attack /
/// slow-decay envelope, scaled to `snr_db` over the background power.
fn render_event(samples: &mut [f64], snr_db: f64, rng: &mut ChaCha8Rng) {
    let m = samples.len();
    if m == 0 {
        return;
    }
    let white: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let smooth: Vec<f64> = (0..m)
        .map(|i| {
            let a = white[i.saturating_sub(1)];
            let b = white[i];
            let c = white[(i + 1).min(m - 1)];
            (a + b + c) / 3.0
        })
        .collect();
    let attack = (m / 10).max(1);
    let shaped: Vec<f64> = smooth
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let env = if i < attack {
                i as f64 / attack as f64
            } else {
                let t = (i - attack) as f64 / (m - attack).max(1) as f64;
                (-3.0 * t).exp()
            };
            v * env
        })
        .collect();
    let background_power = BACKGROUND_AMP * BACKGROUND_AMP / 3.0;
    let target = background_power * 10f64.powf(snr_db / 10.0);
    let actual = shaped.iter().map(|v| v * v).sum::<f64>() / m as f64;
    if actual <= 0.0 {
        return;
    }
    let gain = (target / actual).sqrt();
    for (s, v) in samples.iter_mut().zip(&shaped) {
        *s = (*s + gain * v).clamp(-0.999, 0.999);
    }
}

/// Generate one recording deterministically from (seed, split, index).
pub fn synth_recording(
    cfg: &SynthConfig,
    split: &str,
    index: usize,
) -> std::result::Result<SynthRecording, CoreError> {
    cfg.validate()?;
    let id = format!("{split}{index:03}");
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, split, index));
    let total_ms = round_to_grid(cfg.recording_seconds * 1000.0).max(10);
    let events = place_events(cfg, total_ms, &mut rng)?;

    let n = (total_ms * SAMPLE_RATE as u64 / 1000) as usize;
    let mut samples: Vec<f64> = (0..n)
        .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * BACKGROUND_AMP)
        .collect();
    for &(start_ms, end_ms) in &events {
        let a = (start_ms * SAMPLE_RATE as u64 / 1000) as usize;
        let b = (end_ms * SAMPLE_RATE as u64 / 1000) as usize;
        render_event(&mut samples[a..b], cfg.snr_db, &mut rng);
    }

    let annotations = events
        .iter()
        .map(|&(start_ms, end_ms)| Annotation { start_ms, end_ms, label: Label::Cough })
        .collect();
    let set = AnnotationSet::new(id.clone(), annotations)?.with_recording_duration(total_ms)?;
    Ok(SynthRecording {
        id,
        waveform: Waveform::new(samples, SAMPLE_RATE)?,
        annotations: set,
    })
}

/// Write `count` recordings into `<audio_dir>/<split>` and
/// `<annotation_dir>/<split>`; returns the recording ids.
pub fn synth_corpus(
    cfg: &SynthConfig,
    split: &str,
    count: usize,
    audio_dir: &Path,
    annotation_dir: &Path,
) -> Result<Vec<String>> {
    let wav_dir = audio_dir.join(split);
    let tsv_dir = annotation_dir.join(split);
    for d in [&wav_dir, &tsv_dir] {
        std::fs::create_dir_all(d).map_err(|e| CoreError::io(d, e))?;
    }
    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        let rec = synth_recording(cfg, split, i)?;
        coughep_core::write_wav(
            wav_dir.join(format!("{}.wav", rec.id)),
            &rec.waveform,
            coughep_core::WavEncoding::Pcm16,
        )?;
        rec.annotations.write_tsv(tsv_dir.join(format!("{}.tsv", rec.id)))?;
        log::info!(
            "synth {split}/{}: {} events over {:.1}s",
            rec.id,
            rec.annotations.annotations().len(),
            rec.waveform.duration_seconds()
        );
        ids.push(rec.id);
    }
    Ok(ids)
}

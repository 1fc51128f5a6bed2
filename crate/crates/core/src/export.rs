//! Cut detected segments into standalone WAV clips with manifests, and
//! compare automatic datasets against ground truth.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::endpointing::{DatasetStats, Segment};
use crate::error::{Error, Result};
use crate::features::{write_wav, Waveform};
use crate::scalar::Scalar;

/// One exported clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_path: PathBuf,
    pub recording_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub source: String,
    pub threshold_name: String,
}

impl ClipEntry {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

/// Everything written by one export run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipManifest {
    pub entries: Vec<ClipEntry>,
    pub stats: DatasetStats,
    pub warnings: Vec<String>,
}

impl ClipManifest {
    pub fn from_entries(entries: Vec<ClipEntry>, warnings: Vec<String>) -> Self {
        let durations: Vec<u64> = entries.iter().map(|e| e.duration_ms()).collect();
        ClipManifest { stats: stats_of_durations(&durations), entries, warnings }
    }

    /// Merge per-recording manifests into one.
    pub fn merge(parts: Vec<ClipManifest>) -> Self {
        let mut entries = Vec::new();
        let mut warnings = Vec::new();
        for p in parts {
            entries.extend(p.entries);
            warnings.extend(p.warnings);
        }
        ClipManifest::from_entries(entries, warnings)
    }
}

fn stats_of_durations(durations_ms: &[u64]) -> DatasetStats {
    let n = durations_ms.len();
    if n == 0 {
        return DatasetStats { n_segments: 0, mean_ms: 0.0, std_ms: 0.0, total_minutes: 0.0 };
    }
    let total: u64 = durations_ms.iter().sum();
    let mean = total as f64 / n as f64;
    let var = durations_ms
        .iter()
        .map(|&d| (d as f64 - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    DatasetStats {
        n_segments: n,
        mean_ms: mean,
        std_ms: var.sqrt(),
        total_minutes: total as f64 / 60_000.0,
    }
}

/// Cut one clip per segment under `out_dir/<recording_id>/`, named by the
/// millisecond boundaries. Segments reaching past the recording end are
/// clipped to it with a warning; duplicates are skipped with a warning.
pub fn export_clips<T: Scalar>(
    w: &Waveform<T>,
    segs: &[Segment],
    out_dir: impl AsRef<Path>,
    recording_id: &str,
    threshold_name: &str,
) -> Result<ClipManifest> {
    let dir = out_dir.as_ref().join(recording_id);
    let duration = w.duration_ms();
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: HashSet<(u64, u64, String)> = HashSet::new();

    for seg in segs {
        if seg.start_ms >= duration {
            warnings.push(format!(
                "{recording_id}: segment [{}, {}) starts past the {duration}ms recording, skipped",
                seg.start_ms, seg.end_ms
            ));
            continue;
        }
        let mut end_ms = seg.end_ms;
        if end_ms > duration {
            warnings.push(format!(
                "{recording_id}: segment [{}, {}) clipped to {duration}ms recording end",
                seg.start_ms, seg.end_ms
            ));
            end_ms = duration;
        }
        if !seen.insert((seg.start_ms, end_ms, seg.provenance.source.clone())) {
            warnings.push(format!(
                "{recording_id}: duplicate segment [{}, {end_ms}) skipped",
                seg.start_ms
            ));
            continue;
        }
        let clip_path = dir.join(format!("{}_{}.wav", seg.start_ms, end_ms));
        if let Some(parent) = clip_path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let clip = w.slice_ms(seg.start_ms, end_ms);
        write_wav(&clip_path, &clip, w.source_encoding)?;
        entries.push(ClipEntry {
            clip_path,
            recording_id: recording_id.to_string(),
            start_ms: seg.start_ms,
            end_ms,
            source: seg.provenance.source.clone(),
            threshold_name: threshold_name.to_string(),
        });
    }
    Ok(ClipManifest::from_entries(entries, warnings))
}

/// Write `manifest.jsonl` (one entry per line) and `stats.json` under
/// `out_dir`.
pub fn write_manifest(manifest: &ClipManifest, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut lines = Vec::new();
    for e in &manifest.entries {
        let mut line = serde_json::to_vec(e).expect("entry serializes");
        line.push(b'\n');
        lines.write_all(&line).unwrap();
    }
    crate::containers::atomic_write(dir.join("manifest.jsonl"), &lines)?;
    let summary = serde_json::json!({
        "stats": manifest.stats,
        "warnings": manifest.warnings,
        "n_entries": manifest.entries.len(),
    });
    crate::containers::write_json(dir.join("stats.json"), &summary)
}

/// Reassemble a manifest from `manifest.jsonl` and `stats.json`.
pub fn read_manifest(out_dir: impl AsRef<Path>) -> Result<ClipManifest> {
    let dir = out_dir.as_ref();
    let path = dir.join("manifest.jsonl");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ClipEntry = serde_json::from_str(line).map_err(|err| Error::Validation {
            path: path.clone(),
            line: i + 1,
            reason: err.to_string(),
        })?;
        entries.push(e);
    }
    let summary = crate::containers::read_json(dir.join("stats.json"))?;
    let warnings = summary["warnings"]
        .as_array()
        .map(|a| {
            a.iter()
                .filter_map(|v| v.as_str().map(str::to_string))
                .collect()
        })
        .unwrap_or_default();
    Ok(ClipManifest::from_entries(entries, warnings))
}

/// Side-by-side statistics of an automatic dataset and its ground truth.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub auto: DatasetStats,
    pub truth: DatasetStats,
    /// auto count / truth count.
    pub count_ratio: f64,
    pub mean_delta_ms: f64,
    pub total_delta_minutes: f64,
    /// Fraction of segments exactly one frame skip long; a high value on
    /// the auto side signals boundary chatter.
    pub auto_fragmentation: f64,
    pub truth_fragmentation: f64,
}

impl ComparisonReport {
    /// Plain-text table: dataset, cough count, length mean ± std (ms),
    /// total (min).
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<12} {:>8} {:>14} {:>12}", "dataset", "coughs", "length (ms)", "total (min)")
            .unwrap();
        for (name, s) in [("automatic", &self.auto), ("ground truth", &self.truth)] {
            writeln!(
                out,
                "{:<12} {:>8} {:>7} \u{b1} {:>4} {:>12.2}",
                name,
                s.n_segments,
                s.mean_ms.round() as i64,
                s.std_ms.round() as i64,
                s.total_minutes
            )
            .unwrap();
        }
        writeln!(
            out,
            "count ratio {:.3}, mean delta {:+.1} ms, total delta {:+.2} min",
            self.count_ratio, self.mean_delta_ms, self.total_delta_minutes
        )
        .unwrap();
        writeln!(
            out,
            "one-frame segments: automatic {:.1}%, ground truth {:.1}%",
            100.0 * self.auto_fragmentation,
            100.0 * self.truth_fragmentation
        )
        .unwrap();
        out
    }
}

fn fragmentation(m: &ClipManifest, frame_skip_ms: u32) -> f64 {
    if m.entries.is_empty() {
        return 0.0;
    }
    let one = m
        .entries
        .iter()
        .filter(|e| e.duration_ms() == frame_skip_ms as u64)
        .count();
    one as f64 / m.entries.len() as f64
}

/// Compare an automatically extracted dataset with the ground-truth one.
pub fn compare_datasets(
    auto: &ClipManifest,
    truth: &ClipManifest,
    frame_skip_ms: u32,
) -> ComparisonReport {
    let ratio = if truth.stats.n_segments == 0 {
        f64::NAN
    } else {
        auto.stats.n_segments as f64 / truth.stats.n_segments as f64
    };
    ComparisonReport {
        auto: auto.stats.clone(),
        truth: truth.stats.clone(),
        count_ratio: ratio,
        mean_delta_ms: auto.stats.mean_ms - truth.stats.mean_ms,
        total_delta_minutes: auto.stats.total_minutes - truth.stats.total_minutes,
        auto_fragmentation: fragmentation(auto, frame_skip_ms),
        truth_fragmentation: fragmentation(truth, frame_skip_ms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpointing::{segment_stats, Provenance};
    use crate::features::load_wav;

    fn seg(start_ms: u64, end_ms: u64) -> Segment {
        Segment { start_ms, end_ms, provenance: Provenance::ground_truth() }
    }

    fn tone(seconds: f64) -> Waveform<f64> {
        let n = (seconds * 16_000.0).round() as usize;
        let samples = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin() * 0.3)
            .collect();
        Waveform::new(samples, 16_000).unwrap()
    }

    #[test]
    fn clip_is_sample_exact() {
        let dir = tempfile::tempdir().unwrap();
        let w = tone(1.0);
        let m = export_clips(&w, &[seg(20, 80)], dir.path(), "rec1", "C").unwrap();
        assert_eq!(m.entries.len(), 1);
        assert!(m.warnings.is_empty());
        let clip: Waveform<f64> = load_wav(&m.entries[0].clip_path).unwrap();
        assert_eq!(clip.len(), 960);
        assert_eq!(
            m.entries[0].clip_path,
            dir.path().join("rec1").join("20_80.wav")
        );
    }

    #[test]
    fn empty_list_gives_zero_stats() {
        let dir = tempfile::tempdir().unwrap();
        let m = export_clips(&tone(0.5), &[], dir.path(), "rec1", "C").unwrap();
        assert!(m.entries.is_empty());
        assert_eq!(m.stats.n_segments, 0);
        assert_eq!(m.stats.total_minutes, 0.0);
        write_manifest(&m, dir.path()).unwrap();
        let r = read_manifest(dir.path()).unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn reingested_durations_match_stats() {
        let dir = tempfile::tempdir().unwrap();
        let w = tone(2.0);
        let segs = [seg(0, 500), seg(700, 730), seg(1000, 1990)];
        let m = export_clips(&w, &segs, dir.path(), "r", "P").unwrap();
        let mut total_s = 0.0;
        for e in &m.entries {
            let clip: Waveform<f64> = load_wav(&e.clip_path).unwrap();
            total_s += clip.duration_seconds();
        }
        let budget = m.entries.len() as f64 / 16_000.0;
        assert!((total_s - m.stats.total_minutes * 60.0).abs() <= budget);
    }

    #[test]
    fn stats_match_segment_stats_when_nothing_is_clipped() {
        let dir = tempfile::tempdir().unwrap();
        let segs = [seg(0, 100), seg(300, 800), seg(900, 1200)];
        let m = export_clips(&tone(1.5), &segs, dir.path(), "r", "C").unwrap();
        let direct = segment_stats(&segs);
        assert_eq!(m.stats.n_segments, direct.n_segments);
        assert!((m.stats.mean_ms - direct.mean_ms).abs() < 1e-9);
        assert!((m.stats.std_ms - direct.std_ms).abs() < 1e-9);
        assert!((m.stats.total_minutes - direct.total_minutes).abs() < 1e-12);
    }

    #[test]
    fn overlong_segment_is_clipped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let m = export_clips(&tone(1.0), &[seg(900, 1400)], dir.path(), "r", "C").unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].end_ms, 1000);
        assert_eq!(m.warnings.len(), 1);
        assert!(m.warnings[0].contains("clipped"));

        let m2 = export_clips(&tone(1.0), &[seg(1000, 1400)], dir.path(), "r", "C").unwrap();
        assert!(m2.entries.is_empty());
        assert_eq!(m2.warnings.len(), 1);
    }

    #[test]
    fn duplicates_collapse_to_one_entry() {
        let dir = tempfile::tempdir().unwrap();
        let m = export_clips(&tone(1.0), &[seg(0, 100), seg(0, 100)], dir.path(), "r", "C")
            .unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn manifest_roundtrip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let w = tone(1.0);
        let m = export_clips(&w, &[seg(0, 200), seg(500, 640)], dir.path(), "rec", "EE").unwrap();
        write_manifest(&m, dir.path()).unwrap();
        let r = read_manifest(dir.path()).unwrap();
        assert_eq!(r, m);
    }

    fn manifest_of(durations: &[u64], skip: u64) -> ClipManifest {
        let mut t = 0;
        let entries = durations
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let e = ClipEntry {
                    clip_path: PathBuf::from(format!("{i}.wav")),
                    recording_id: "r".into(),
                    start_ms: t,
                    end_ms: t + d,
                    source: "m".into(),
                    threshold_name: "C".into(),
                };
                t += d + skip;
                e
            })
            .collect();
        ClipManifest::from_entries(entries, vec![])
    }

    #[test]
    fn identical_manifests_compare_to_zero_deltas() {
        let m = manifest_of(&[100, 250, 400], 50);
        let r = compare_datasets(&m, &m, 100);
        assert_eq!(r.count_ratio, 1.0);
        assert_eq!(r.mean_delta_ms, 0.0);
        assert_eq!(r.total_delta_minutes, 0.0);
        assert_eq!(r.auto_fragmentation, r.truth_fragmentation);
    }

    #[test]
    fn halving_every_segment_doubles_the_count() {
        let truth = manifest_of(&[200, 400, 600], 100);
        let halves: Vec<u64> = [200u64, 400, 600]
            .iter()
            .flat_map(|&d| [d / 2, d / 2])
            .collect();
        let auto = manifest_of(&halves, 100);
        let r = compare_datasets(&auto, &truth, 100);
        assert_eq!(r.count_ratio, 2.0);
        assert!(r.total_delta_minutes.abs() < 1e-12);
    }

    #[test]
    fn fragmentation_counts_one_frame_segments() {
        let m = manifest_of(&[100, 100, 300, 500], 100);
        let r = compare_datasets(&m, &m, 100);
        assert_eq!(r.auto_fragmentation, 0.5);
        assert!(r.table().contains("50.0%"));
    }
}

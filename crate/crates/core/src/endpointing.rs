//! From frame scores to cough segments: thresholding, median filtering,
//! run extraction, and segment statistics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::ScoreSequence;
use crate::error::{Error, Result};
use crate::geometry::FrameGeometry;
use crate::scalar::Scalar;

/// Binary frame decisions under a geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinarySequence {
    pub bits: Vec<bool>,
    pub geometry: FrameGeometry,
}

/// Where a segment came from: which scorer, at what threshold, after which
/// median filter. `threshold` is `None` for ground-truth segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub threshold: Option<f64>,
    pub filter_width: usize,
}

impl Provenance {
    pub fn ground_truth() -> Self {
        Provenance { source: "ground_truth".into(), threshold: None, filter_width: 1 }
    }
}

/// A detected event. Boundaries are multiples of the frame skip, stored in
/// integer milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_ms: u64,
    pub end_ms: u64,
    pub provenance: Provenance,
}

impl Segment {
    pub fn start_seconds(&self) -> f64 {
        self.start_ms as f64 / 1000.0
    }

    pub fn end_seconds(&self) -> f64 {
        self.end_ms as f64 / 1000.0
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

/// bit n = scores[n] >= threshold. Ties become positive so threshold sweeps
/// match the curve convention in the evaluation side exactly.
pub fn threshold_scores<T: Scalar>(s: &ScoreSequence<T>, threshold: f64) -> BinarySequence {
    BinarySequence {
        bits: s.scores.iter().map(|v| v.as_f64() >= threshold).collect(),
        geometry: s.geometry,
    }
}

/// Sliding-window majority vote. Edges are handled by replicating the first
/// and last values; width 1 is the identity.
pub fn median_filter(b: &BinarySequence, width: usize) -> Result<BinarySequence> {
    Ok(BinarySequence {
        bits: median_filter_bits(&b.bits, width)?,
        geometry: b.geometry,
    })
}

pub fn median_filter_bits(bits: &[bool], width: usize) -> Result<Vec<bool>> {
    if width % 2 == 0 || width == 0 {
        return Err(Error::InvalidConfig(format!("filter width must be odd, got {width}")));
    }
    if width == 1 || bits.is_empty() {
        return Ok(bits.to_vec());
    }
    let n = bits.len() as i64;
    let half = (width / 2) as i64;
    let need = (width + 1) / 2;
    let out = (0..n)
        .map(|i| {
            let mut ones = 0usize;
            for j in i - half..=i + half {
                let idx = j.clamp(0, n - 1) as usize;
                if bits[idx] {
                    ones += 1;
                }
            }
            ones >= need
        })
        .collect();
    Ok(out)
}

/// Each maximal run of 1-bits `[i..=j]` becomes a segment
/// `[i*T, (j+1)*T)`. No minimum duration or gap merging is applied.
pub fn extract_segments(b: &BinarySequence, provenance: &Provenance) -> Vec<Segment> {
    let t = b.geometry.frame_skip_ms as u64;
    let mut segments = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &bit) in b.bits.iter().enumerate() {
        match (bit, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                segments.push(Segment {
                    start_ms: s as u64 * t,
                    end_ms: i as u64 * t,
                    provenance: provenance.clone(),
                });
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        segments.push(Segment {
            start_ms: s as u64 * t,
            end_ms: b.bits.len() as u64 * t,
            provenance: provenance.clone(),
        });
    }
    segments
}

/// Count / mean / spread / total of segment durations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_segments: usize,
    pub mean_ms: f64,
    /// Population standard deviation.
    pub std_ms: f64,
    pub total_minutes: f64,
}

pub fn segment_stats(segs: &[Segment]) -> DatasetStats {
    let n = segs.len();
    if n == 0 {
        return DatasetStats { n_segments: 0, mean_ms: 0.0, std_ms: 0.0, total_minutes: 0.0 };
    }
    let durations: Vec<f64> = segs.iter().map(|s| s.duration_ms() as f64).collect();
    let total: f64 = durations.iter().sum();
    let mean = total / n as f64;
    let var = durations.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    DatasetStats {
        n_segments: n,
        mean_ms: mean,
        std_ms: var.sqrt(),
        total_minutes: total / 60_000.0,
    }
}

/// Histogram of segment durations in `[0, max)` with fixed-width bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationHistogram {
    pub bin_width_ms: u64,
    pub counts: Vec<u64>,
}

impl DurationHistogram {
    /// Bin index covering `[i*w, (i+1)*w)`.
    pub fn bin_range_ms(&self, i: usize) -> (u64, u64) {
        (i as u64 * self.bin_width_ms, (i as u64 + 1) * self.bin_width_ms)
    }
}

pub fn duration_histogram(segs: &[Segment], bin_width_ms: u64) -> Result<DurationHistogram> {
    if bin_width_ms == 0 {
        return Err(Error::InvalidConfig("bin width must be > 0".into()));
    }
    let n_bins = segs
        .iter()
        .map(|s| (s.duration_ms() / bin_width_ms) as usize + 1)
        .max()
        .unwrap_or(0);
    let mut counts = vec![0u64; n_bins];
    for s in segs {
        counts[(s.duration_ms() / bin_width_ms) as usize] += 1;
    }
    Ok(DurationHistogram { bin_width_ms, counts })
}

/// TSV wire format for segments. The first three columns mirror the
/// annotation format (label is always "cough") so detector output can be
/// re-ingested as ground truth; provenance rides in the extra columns.
pub fn segments_to_tsv(segs: &[Segment]) -> String {
    let mut out = String::from("start_ms\tend_ms\tlabel\tsource\tthreshold\tfilter_width\n");
    for s in segs {
        let threshold = match s.provenance.threshold {
            Some(t) => format!("{t}"),
            None => "-".into(),
        };
        out.push_str(&format!(
            "{}\t{}\tcough\t{}\t{}\t{}\n",
            s.start_ms, s.end_ms, s.provenance.source, threshold, s.provenance.filter_width
        ));
    }
    out
}

pub fn write_segments_tsv(path: impl AsRef<Path>, segs: &[Segment]) -> Result<()> {
    crate::containers::atomic_write(path, segments_to_tsv(segs).as_bytes())
}

/// Read a segment TSV back with full provenance.
pub fn read_segments_tsv(path: impl AsRef<Path>) -> Result<Vec<Segment>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let verr = |line: usize, reason: String| Error::Validation {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let mut segments = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if i == 0 {
            if !line.starts_with("start_ms\tend_ms\tlabel") {
                return Err(verr(1, "missing segment TSV header".into()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 6 {
            return Err(verr(i + 1, format!("expected 6 columns, got {}", cols.len())));
        }
        let start_ms: u64 = cols[0].parse().map_err(|_| verr(i + 1, "bad start_ms".into()))?;
        let end_ms: u64 = cols[1].parse().map_err(|_| verr(i + 1, "bad end_ms".into()))?;
        if end_ms <= start_ms {
            return Err(verr(i + 1, format!("end {end_ms} <= start {start_ms}")));
        }
        let threshold = if cols[4] == "-" {
            None
        } else {
            Some(cols[4].parse().map_err(|_| verr(i + 1, "bad threshold".into()))?)
        };
        segments.push(Segment {
            start_ms,
            end_ms,
            provenance: Provenance {
                source: cols[3].to_string(),
                threshold,
                filter_width: cols[5].parse().map_err(|_| verr(i + 1, "bad filter_width".into()))?,
            },
        });
    }
    Ok(segments)
}

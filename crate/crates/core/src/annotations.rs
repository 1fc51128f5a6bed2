//! Ground-truth annotations: TSV ingestion, frame-level label derivation,
//! and corpus partition statistics.
//!
//! Times are integer milliseconds on a 10ms grid throughout; seconds are
//! derived views.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FrameGeometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Cough,
    Count,
    Other,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Cough => write!(f, "cough"),
            Label::Count => write!(f, "count"),
            Label::Other => write!(f, "other"),
        }
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cough" => Ok(Label::Cough),
            "count" => Ok(Label::Count),
            "other" => Ok(Label::Other),
            other => Err(format!("unknown label {other:?} (expected cough, count or other)")),
        }
    }
}

/// One annotated event on the 10ms grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub start_ms: u64,
    pub end_ms: u64,
    pub label: Label,
}

impl Annotation {
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

/// All annotations of one recording, sorted by start time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub recording_id: String,
    annotations: Vec<Annotation>,
    /// Milliseconds; defaults to the last annotation end when not supplied.
    recording_duration_ms: u64,
}

impl AnnotationSet {
    pub fn new(recording_id: impl Into<String>, mut annotations: Vec<Annotation>) -> Result<Self> {
        annotations.sort_by_key(|a| (a.start_ms, a.end_ms));
        let set = AnnotationSet {
            recording_id: recording_id.into(),
            recording_duration_ms: annotations.iter().map(|a| a.end_ms).max().unwrap_or(0),
            annotations,
        };
        set.check(None)?;
        Ok(set)
    }

    /// Declare the true recording length; annotations must fit inside it.
    pub fn with_recording_duration(mut self, duration_ms: u64) -> Result<Self> {
        if let Some(a) = self.annotations.iter().find(|a| a.end_ms > duration_ms) {
            return Err(Error::Validation {
                path: self.recording_id.clone().into(),
                line: 0,
                reason: format!(
                    "annotation [{}, {}) extends past recording end {duration_ms}ms",
                    a.start_ms, a.end_ms
                ),
            });
        }
        self.recording_duration_ms = duration_ms;
        Ok(self)
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn recording_duration_ms(&self) -> u64 {
        self.recording_duration_ms
    }

    pub fn recording_duration_seconds(&self) -> f64 {
        self.recording_duration_ms as f64 / 1000.0
    }

    pub fn of_label(&self, label: Label) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(move |a| a.label == label)
    }

    fn check(&self, path: Option<&Path>) -> Result<()> {
        let path = path
            .map(Path::to_path_buf)
            .unwrap_or_else(|| self.recording_id.clone().into());
        for (i, a) in self.annotations.iter().enumerate() {
            if a.start_ms >= a.end_ms {
                return Err(Error::Validation {
                    path,
                    line: 0,
                    reason: format!("annotation {i} has end {} <= start {}", a.end_ms, a.start_ms),
                });
            }
            if a.start_ms % 10 != 0 || a.end_ms % 10 != 0 {
                return Err(Error::Validation {
                    path,
                    line: 0,
                    reason: format!("annotation {i} is not on the 10ms grid"),
                });
            }
        }
        // Same-label spans must not overlap (sorted by start already).
        let mut last_end: std::collections::HashMap<Label, u64> = Default::default();
        for a in &self.annotations {
            if let Some(&end) = last_end.get(&a.label) {
                if a.start_ms < end {
                    return Err(Error::Validation {
                        path,
                        line: 0,
                        reason: format!(
                            "overlapping {} annotations at {}ms",
                            a.label, a.start_ms
                        ),
                    });
                }
            }
            let e = last_end.entry(a.label).or_insert(0);
            *e = (*e).max(a.end_ms);
        }
        Ok(())
    }

    /// Parse TSV text. The header must start with fields
    /// `start_ms`, `end_ms`, `label`; extra columns are ignored, so segment
    /// TSVs written by the endpointing side re-ingest cleanly.
    pub fn parse_str(text: &str, recording_id: impl Into<String>) -> Result<Self> {
        Self::parse_inner(text, recording_id.into(), Path::new("<string>"))
    }

    fn parse_inner(text: &str, recording_id: String, path: &Path) -> Result<Self> {
        let verr = |line: usize, reason: String| Error::Validation {
            path: path.to_path_buf(),
            line,
            reason,
        };

        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                None => {
                    // Header-less empty file: treat as an empty set.
                    return AnnotationSet::new(recording_id, Vec::new());
                }
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => break (i, l),
            }
        };
        let fields: Vec<&str> = header.1.trim_end().split('\t').collect();
        if fields.len() < 3 || fields[0] != "start_ms" || fields[1] != "end_ms" || fields[2] != "label" {
            return Err(verr(
                header.0 + 1,
                "header must begin with start_ms\\tend_ms\\tlabel".into(),
            ));
        }

        let mut annotations = Vec::new();
        let mut prev_start: Option<u64> = None;
        for (i, raw) in lines {
            let line_no = i + 1;
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return Err(verr(line_no, format!("expected at least 3 columns, got {}", cols.len())));
            }
            let start_ms: u64 = cols[0]
                .parse()
                .map_err(|_| verr(line_no, format!("bad start_ms {:?}", cols[0])))?;
            let end_ms: u64 = cols[1]
                .parse()
                .map_err(|_| verr(line_no, format!("bad end_ms {:?}", cols[1])))?;
            let label: Label = cols[2]
                .parse()
                .map_err(|e| verr(line_no, e))?;
            if end_ms <= start_ms {
                return Err(verr(line_no, format!("end {end_ms} <= start {start_ms}")));
            }
            if start_ms % 10 != 0 || end_ms % 10 != 0 {
                return Err(verr(line_no, "times must be multiples of 10ms".into()));
            }
            if let Some(prev) = prev_start {
                if start_ms < prev {
                    return Err(verr(line_no, "rows must be sorted by start_ms".into()));
                }
            }
            prev_start = Some(start_ms);
            annotations.push(Annotation { start_ms, end_ms, label });
        }

        let set = AnnotationSet {
            recording_id,
            recording_duration_ms: annotations.iter().map(|a| a.end_ms).max().unwrap_or(0),
            annotations,
        };
        // Re-run overlap checks with the file path for error context.
        set.check(Some(path))?;
        Ok(set)
    }

    /// Serialize back to the TSV wire format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("start_ms\tend_ms\tlabel\n");
        for a in &self.annotations {
            out.push_str(&format!("{}\t{}\t{}\n", a.start_ms, a.end_ms, a.label));
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::containers::atomic_write(path, self.to_tsv().as_bytes())
    }
}

/// Load a TSV annotation file; the recording id is the file stem.
pub fn parse_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AnnotationSet::parse_inner(&text, id, path)
}

/// Per-frame binary labels under a given geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameLabels {
    labels: Vec<bool>,
    pub geometry: FrameGeometry,
}

impl FrameLabels {
    pub fn new(labels: Vec<bool>, geometry: FrameGeometry) -> Result<Self> {
        if labels.len() != geometry.n_frames {
            return Err(Error::Shape(format!(
                "{} labels for {} frames",
                labels.len(),
                geometry.n_frames
            )));
        }
        Ok(FrameLabels { labels, geometry })
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }
}

/// Label each frame positive iff annotations with `target_label` overlap
/// strictly more than half of the frame's owned interval `[n*T, (n+1)*T)`.
/// Exactly 50% is negative; frames past the recording end come out negative
/// because nothing overlaps them.
pub fn frame_labels(a: &AnnotationSet, g: &FrameGeometry, target_label: Label) -> FrameLabels {
    let t = g.frame_skip_ms as u64;
    let spans: Vec<(u64, u64)> = a
        .of_label(target_label)
        .map(|x| (x.start_ms, x.end_ms))
        .collect();
    let labels = (0..g.n_frames)
        .map(|n| {
            let (lo, hi) = g.owned_interval_ms(n);
            let mut overlap = 0u64;
            for &(s, e) in &spans {
                if s >= hi {
                    break; // sorted by start
                }
                let a = s.max(lo);
                let b = e.min(hi);
                if b > a {
                    overlap += b - a;
                }
            }
            2 * overlap > t
        })
        .collect();
    FrameLabels { labels, geometry: *g }
}

/// Corpus partition statistics for one event label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub n_recordings: usize,
    pub total_recording_hours: f64,
    pub n_coughs: usize,
    pub total_cough_hours: f64,
    pub mean_cough_ms: f64,
    /// Population standard deviation.
    pub std_cough_ms: f64,
}

impl PartitionStats {
    /// Aligned text table, one row.
    pub fn table(&self, name: &str) -> String {
        format!(
            "{:<12} {:>6} {:>8.2} {:>8} {:>8.2} {:>6.0} ± {:<6.0}\n",
            name,
            self.n_recordings,
            self.total_recording_hours,
            self.n_coughs,
            self.total_cough_hours,
            self.mean_cough_ms,
            self.std_cough_ms
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<12} {:>6} {:>8} {:>8} {:>8} {:>6}\n",
            "partition", "n_rec", "rec_h", "events", "event_h", "dur_ms"
        )
    }
}

/// Count and measure `label` events across recordings. Durations use the
/// population standard deviation; an empty event set reports zero means.
pub fn partition_stats(sets: &[AnnotationSet], label: Label) -> Result<PartitionStats> {
    if sets.is_empty() {
        return Err(Error::EmptyInput("no annotation sets"));
    }
    let total_recording_ms: u64 = sets.iter().map(|s| s.recording_duration_ms()).sum();
    let durations: Vec<u64> = sets
        .iter()
        .flat_map(|s| s.of_label(label).map(|a| a.duration_ms()))
        .collect();

    let n = durations.len();
    let total_ms: u64 = durations.iter().sum();
    let (mean, std) = if n == 0 {
        (0.0, 0.0)
    } else {
        let mean = total_ms as f64 / n as f64;
        let var = durations
            .iter()
            .map(|&d| (d as f64 - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        (mean, var.sqrt())
    };

    Ok(PartitionStats {
        n_recordings: sets.len(),
        total_recording_hours: total_recording_ms as f64 / 3_600_000.0,
        n_coughs: n,
        total_cough_hours: total_ms as f64 / 3_600_000.0,
        mean_cough_ms: mean,
        std_cough_ms: std,
    })
}

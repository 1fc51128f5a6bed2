//! Interval-based detection metrics: 10ms tiling of frame scores, ROC and
//! precision-recall curves, AUC/AP, and operating-point selection.

use serde::{Deserialize, Serialize};

use crate::annotations::FrameLabels;
use crate::classifiers::ScoreSequence;
use crate::endpointing::median_filter_bits;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How a prediction's score is spread over fixed-width intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Tiling {
    /// Each prediction owns its skip-length interval `[n*T, (n+1)*T)`;
    /// the timeline is covered exactly once.
    #[default]
    Skip,
    /// Each prediction covers its full frame length, centred on the
    /// prediction; spans from consecutive predictions overlap when the
    /// frame length exceeds the skip. Requires interval-resolution labels.
    FrameLength,
}

impl std::str::FromStr for Tiling {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "skip" => Ok(Tiling::Skip),
            "frame_length" => Ok(Tiling::FrameLength),
            other => Err(format!("unknown tiling {other:?} (expected skip or frame_length)")),
        }
    }
}

/// Scores and labels on a fixed-width interval grid.
#[derive(Clone, Debug)]
pub struct IntervalScores<T> {
    pub interval_ms: u32,
    pub scores: Vec<T>,
    pub labels: Vec<bool>,
}

impl<T: Scalar> IntervalScores<T> {
    pub fn new(interval_ms: u32, scores: Vec<T>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        Ok(IntervalScores { interval_ms, scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Pool interval scores from several recordings into one set.
    pub fn concat(parts: &[IntervalScores<T>]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::EmptyInput("no interval scores to concatenate"));
        };
        let interval_ms = first.interval_ms;
        if parts.iter().any(|p| p.interval_ms != interval_ms) {
            return Err(Error::InvalidConfig("mixed interval widths".into()));
        }
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            scores.extend_from_slice(&p.scores);
            labels.extend_from_slice(&p.labels);
        }
        Ok(IntervalScores { interval_ms, scores, labels })
    }
}

/// Ground-truth labels on the interval grid, derived from `labels`.
///
/// Two label resolutions are accepted:
/// * labels at the score geometry — each frame label is replicated over the
///   frame's owned intervals, in lockstep with its score;
/// * labels already at interval resolution (frame skip == interval width) —
///   used as-is, padded with negatives or truncated to the scored span.
fn interval_labels(
    labels: &FrameLabels,
    score_geometry: &crate::geometry::FrameGeometry,
    interval_ms: u32,
    n_intervals: usize,
) -> Result<Vec<bool>> {
    let lg = &labels.geometry;
    if lg.frame_skip_ms == score_geometry.frame_skip_ms
        && lg.frame_length_ms == score_geometry.frame_length_ms
    {
        let k = (score_geometry.frame_skip_ms / interval_ms) as usize;
        let mut out = Vec::with_capacity(n_intervals);
        for &b in labels.labels() {
            out.extend(std::iter::repeat(b).take(k));
        }
        out.resize(n_intervals, false);
        Ok(out)
    } else if lg.frame_skip_ms == interval_ms {
        let mut out = labels.labels().to_vec();
        out.resize(n_intervals, false);
        Ok(out)
    } else {
        Err(Error::InvalidConfig(format!(
            "labels at {}ms skip fit neither the score geometry ({}ms skip) nor the \
             {interval_ms}ms interval grid",
            lg.frame_skip_ms, score_geometry.frame_skip_ms
        )))
    }
}

/// Tile scores onto the default 10ms grid with skip-based coverage.
pub fn tile_to_intervals<T: Scalar>(
    s: &ScoreSequence<T>,
    labels: &FrameLabels,
) -> Result<IntervalScores<T>> {
    tile_to_intervals_with(s, labels, 10, Tiling::Skip)
}

/// Tile scores onto an interval grid.
///
/// Skip tiling replicates each score over `frame_skip / interval_ms`
/// intervals inside the prediction's owned span, covering the timeline
/// exactly once. Frame-length tiling replicates each score over
/// `frame_length / interval_ms` intervals centred on the prediction;
/// intervals outside the labelled span are dropped, and labels must be at
/// interval resolution since overlapping spans have no per-frame alignment.
pub fn tile_to_intervals_with<T: Scalar>(
    s: &ScoreSequence<T>,
    labels: &FrameLabels,
    interval_ms: u32,
    tiling: Tiling,
) -> Result<IntervalScores<T>> {
    if interval_ms == 0 {
        return Err(Error::InvalidConfig("interval_ms must be > 0".into()));
    }
    let g = &s.geometry;
    match tiling {
        Tiling::Skip => {
            if g.frame_skip_ms % interval_ms != 0 {
                return Err(Error::InvalidConfig(format!(
                    "frame skip {}ms not divisible by interval {}ms",
                    g.frame_skip_ms, interval_ms
                )));
            }
            let k = (g.frame_skip_ms / interval_ms) as usize;
            let n_intervals = g.n_frames * k;
            let mut scores = Vec::with_capacity(n_intervals);
            for &v in &s.scores {
                scores.extend(std::iter::repeat(v).take(k));
            }
            let labels = interval_labels(labels, g, interval_ms, n_intervals)?;
            IntervalScores::new(interval_ms, scores, labels)
        }
        Tiling::FrameLength => {
            if g.frame_length_ms % interval_ms != 0 {
                return Err(Error::InvalidConfig(format!(
                    "frame length {}ms not divisible by interval {}ms",
                    g.frame_length_ms, interval_ms
                )));
            }
            if labels.geometry.frame_skip_ms != interval_ms {
                return Err(Error::InvalidConfig(
                    "frame-length tiling needs labels at interval resolution".into(),
                ));
            }
            let m = (g.frame_length_ms / interval_ms) as i64;
            let truth = labels.labels();
            let mut scores = Vec::new();
            let mut out_labels = Vec::new();
            for n in 0..g.n_frames {
                let (span_start, _) = g.frame_span_ms(n);
                if span_start % interval_ms as i64 != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "frame span start {span_start}ms is off the {interval_ms}ms grid"
                    )));
                }
                let first = span_start / interval_ms as i64;
                for j in 0..m {
                    let idx = first + j;
                    if idx < 0 || idx as usize >= truth.len() {
                        continue;
                    }
                    scores.push(s.scores[n]);
                    out_labels.push(truth[idx as usize]);
                }
            }
            IntervalScores::new(interval_ms, scores, out_labels)
        }
    }
}

/// One point of a threshold sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    /// Coverage / recall, TP/P.
    pub tpr: f64,
    pub fpr: f64,
    /// Purity, TP/(TP+FP); 1.0 by convention when nothing is predicted.
    pub precision: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Confusion {
    tp: usize,
    fp: usize,
    pos: usize,
    neg: usize,
}

impl Confusion {
    fn point(&self, threshold: f64) -> CurvePoint {
        CurvePoint {
            threshold,
            tpr: if self.pos > 0 { self.tp as f64 / self.pos as f64 } else { 0.0 },
            fpr: if self.neg > 0 { self.fp as f64 / self.neg as f64 } else { 0.0 },
            precision: if self.tp + self.fp > 0 {
                self.tp as f64 / (self.tp + self.fp) as f64
            } else {
                1.0
            },
        }
    }
}

/// Confusion counts at a single threshold (prediction = score >= threshold).
pub fn confusion_at<T: Scalar>(iv: &IntervalScores<T>, threshold: f64) -> (usize, usize, usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fn_ = 0;
    for (v, &y) in iv.scores.iter().zip(&iv.labels) {
        let p = v.as_f64() >= threshold;
        match (p, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    (tp, fp, tn, fn_)
}

/// Sweep every distinct score (descending) plus +/- infinity sentinels.
/// Counting is incremental, so the whole curve costs one sort.
fn sweep<T: Scalar>(iv: &IntervalScores<T>) -> Vec<CurvePoint> {
    let pos = iv.labels.iter().filter(|&&y| y).count();
    let neg = iv.len() - pos;

    let mut order: Vec<usize> = (0..iv.len()).collect();
    order.sort_by(|&a, &b| {
        iv.scores[b]
            .partial_cmp(&iv.scores[a])
            .expect("scores must not be NaN")
    });

    let mut points = Vec::with_capacity(iv.len() + 2);
    let mut c = Confusion { tp: 0, fp: 0, pos, neg };
    points.push(c.point(f64::INFINITY));

    let mut i = 0;
    while i < order.len() {
        let threshold = iv.scores[order[i]].as_f64();
        // Admit the whole tie group at once.
        while i < order.len() && iv.scores[order[i]].as_f64() == threshold {
            if iv.labels[order[i]] {
                c.tp += 1;
            } else {
                c.fp += 1;
            }
            i += 1;
        }
        points.push(c.point(threshold));
    }
    points.push(c.point(f64::NEG_INFINITY));
    points
}

/// ROC curve over all distinct thresholds. Needs both classes present.
pub fn roc_curve<T: Scalar>(iv: &IntervalScores<T>) -> Result<Vec<CurvePoint>> {
    let pos = iv.labels.iter().filter(|&&y| y).count();
    if pos == 0 || pos == iv.len() || iv.is_empty() {
        return Err(Error::UndefinedMetric(
            "ROC needs at least one positive and one negative label".into(),
        ));
    }
    Ok(sweep(iv))
}

/// Area under the ROC curve by trapezoidal integration. Equals the
/// Mann-Whitney statistic: P(random positive outscores random negative),
/// ties counted half.
pub fn auc(curve: &[CurvePoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Precision-recall curve over all distinct thresholds. Needs at least one
/// positive label.
pub fn pr_curve<T: Scalar>(iv: &IntervalScores<T>) -> Result<Vec<CurvePoint>> {
    if !iv.labels.iter().any(|&y| y) {
        return Err(Error::UndefinedMetric("AP needs at least one positive label".into()));
    }
    Ok(sweep(iv))
}

/// Average precision by step integration: sum of (R_n - R_{n-1}) * P_n over
/// thresholds in descending order.
pub fn average_precision(curve: &[CurvePoint]) -> f64 {
    let mut pts: Vec<&CurvePoint> = curve.iter().collect();
    pts.sort_by(|a, b| b.threshold.partial_cmp(&a.threshold).unwrap());
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for p in pts {
        ap += (p.tpr - prev_recall) * p.precision;
        prev_recall = p.tpr;
    }
    ap
}

/// Operating-point selection rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    /// Largest threshold whose coverage meets the target.
    Coverage { target: f64 },
    /// Threshold where FPR is closest to FNR; ties go to the lower
    /// threshold.
    EqualErrorRate,
    /// Smallest threshold whose purity meets the target.
    Purity { target: f64 },
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Coverage { .. } => "C",
            Criterion::EqualErrorRate => "EE",
            Criterion::Purity { .. } => "P",
        }
    }
}

/// A named threshold with the dev-set statistics that selected it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub name: String,
    pub threshold: f64,
    pub achieved_coverage: f64,
    pub achieved_purity: f64,
}

/// Select a threshold from a development-set curve. Infinite sentinel
/// points are ignored so the result is always an observed score.
pub fn pick_threshold(curve: &[CurvePoint], criterion: Criterion) -> Result<OperatingPoint> {
    let finite: Vec<&CurvePoint> = curve.iter().filter(|p| p.threshold.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::EmptyInput("empty curve"));
    }
    let pick = |p: &CurvePoint| OperatingPoint {
        name: criterion.name().into(),
        threshold: p.threshold,
        achieved_coverage: p.tpr,
        achieved_purity: p.precision,
    };

    match criterion {
        Criterion::Coverage { target } => finite
            .iter()
            .filter(|p| p.tpr >= target)
            .max_by(|a, b| a.threshold.partial_cmp(&b.threshold).unwrap())
            .map(|p| pick(p))
            .ok_or_else(|| Error::UnattainableTarget {
                criterion: format!("coverage >= {target}"),
                best_achievable: finite.iter().map(|p| p.tpr).fold(0.0, f64::max),
            }),
        Criterion::Purity { target } => finite
            .iter()
            .filter(|p| p.precision >= target)
            .min_by(|a, b| a.threshold.partial_cmp(&b.threshold).unwrap())
            .map(|p| pick(p))
            .ok_or_else(|| Error::UnattainableTarget {
                criterion: format!("purity >= {target}"),
                best_achievable: finite.iter().map(|p| p.precision).fold(0.0, f64::max),
            }),
        Criterion::EqualErrorRate => {
            let mut best: Option<(&CurvePoint, f64)> = None;
            for p in &finite {
                let diff = (p.fpr - (1.0 - p.tpr)).abs();
                let better = match best {
                    None => true,
                    Some((bp, bd)) => diff < bd || (diff == bd && p.threshold < bp.threshold),
                };
                if better {
                    best = Some((p, diff));
                }
            }
            Ok(pick(best.unwrap().0))
        }
    }
}

/// AUC/AP after per-threshold median filtering.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub width: usize,
    pub auc: f64,
    pub ap: f64,
}

/// For each filter width: threshold the scores, median-filter the binary
/// decisions, tile to intervals, and integrate the resulting operating
/// points into AUC and AP. Width 1 reproduces the unfiltered metrics.
/// Uses skip tiling, since binary decisions tile the timeline once.
pub fn filtered_metric_sweep<T: Scalar>(
    s: &ScoreSequence<T>,
    labels: &FrameLabels,
    widths: &[usize],
    interval_ms: u32,
) -> Result<Vec<SweepRow>> {
    filtered_metric_sweep_pooled(&[(s, labels)], widths, interval_ms)
}

/// Multi-recording sweep. The filter runs inside each recording (so runs
/// never bleed into each other); the confusion counts are pooled across
/// recordings at every threshold.
pub fn filtered_metric_sweep_pooled<T: Scalar>(
    runs: &[(&ScoreSequence<T>, &FrameLabels)],
    widths: &[usize],
    interval_ms: u32,
) -> Result<Vec<SweepRow>> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("no recordings to sweep"));
    }
    // Per run: interval multiplier and interval truth.
    let mut ks = Vec::with_capacity(runs.len());
    let mut truths = Vec::with_capacity(runs.len());
    for (s, labels) in runs {
        let g = &s.geometry;
        if interval_ms == 0 || g.frame_skip_ms % interval_ms != 0 {
            return Err(Error::InvalidConfig(format!(
                "frame skip {}ms not divisible by interval {}ms",
                g.frame_skip_ms, interval_ms
            )));
        }
        let k = (g.frame_skip_ms / interval_ms) as usize;
        let n_intervals = g.n_frames * k;
        truths.push(interval_labels(labels, g, interval_ms, n_intervals)?);
        ks.push(k);
    }
    let pos: usize = truths
        .iter()
        .map(|t| t.iter().filter(|&&y| y).count())
        .sum();
    let neg: usize = truths.iter().map(Vec::len).sum::<usize>() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "sweep needs at least one positive and one negative interval".into(),
        ));
    }

    // Distinct thresholds over all runs, descending, with sentinels.
    let mut thresholds: Vec<f64> = runs
        .iter()
        .flat_map(|(s, _)| s.scores.iter().map(|v| v.as_f64()))
        .collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    thresholds.insert(0, f64::INFINITY);
    thresholds.push(f64::NEG_INFINITY);

    let mut rows = Vec::with_capacity(widths.len());
    for &width in widths {
        if width % 2 == 0 || width == 0 {
            return Err(Error::InvalidConfig(format!("filter width must be odd, got {width}")));
        }
        let mut points = Vec::with_capacity(thresholds.len());
        for &theta in &thresholds {
            let mut c = Confusion { tp: 0, fp: 0, pos, neg };
            for ((s, _), (truth, &k)) in runs.iter().zip(truths.iter().zip(&ks)) {
                let bits: Vec<bool> = s.scores.iter().map(|v| v.as_f64() >= theta).collect();
                let filtered = median_filter_bits(&bits, width)?;
                for (n, &bit) in filtered.iter().enumerate() {
                    if !bit {
                        continue;
                    }
                    for &y in truth.iter().skip(n * k).take(k) {
                        if y {
                            c.tp += 1;
                        } else {
                            c.fp += 1;
                        }
                    }
                }
            }
            points.push(c.point(theta));
        }
        rows.push(SweepRow {
            width,
            auc: auc(&points),
            ap: average_precision(&points),
        });
    }
    Ok(rows)
}

/// CSV rows (threshold, tpr, fpr, precision) for a curve.
pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("threshold,tpr,fpr,precision\n");
    for p in curve {
        out.push_str(&format!("{},{},{},{}\n", p.threshold, p.tpr, p.fpr, p.precision));
    }
    out
}

/// CSV rows (width, auc, ap) for a sweep table.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("width,auc,ap\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.width, r.auc, r.ap));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iv(scores: Vec<f64>, labels: Vec<bool>) -> IntervalScores<f64> {
        IntervalScores::new(10, scores, labels).unwrap()
    }

    /// Brute-force pair-counting AUC oracle (ties count half).
    fn auc_oracle(iv: &IntervalScores<f64>) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in iv.labels.iter().enumerate() {
            if !yi {
                continue;
            }
            for (j, &yj) in iv.labels.iter().enumerate() {
                if yj {
                    continue;
                }
                pairs += 1.0;
                if iv.scores[i] > iv.scores[j] {
                    wins += 1.0;
                } else if iv.scores[i] == iv.scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    /// Exhaustive threshold-enumeration AP oracle.
    fn ap_oracle(iv: &IntervalScores<f64>) -> f64 {
        let mut thresholds: Vec<f64> = iv.scores.clone();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let pos = iv.labels.iter().filter(|&&y| y).count() as f64;
        let mut prev_recall = 0.0;
        let mut ap = 0.0;
        for &t in &thresholds {
            let mut tp = 0.0;
            let mut fp = 0.0;
            for (v, &y) in iv.scores.iter().zip(&iv.labels) {
                if *v >= t {
                    if y {
                        tp += 1.0;
                    } else {
                        fp += 1.0;
                    }
                }
            }
            let recall = tp / pos;
            let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 1.0 };
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        ap
    }

    #[test]
    fn worked_example() {
        let iv = iv(vec![0.9, 0.8, 0.3], vec![true, false, true]);
        let roc = roc_curve(&iv).unwrap();
        assert!((auc(&roc) - 0.5).abs() < 1e-12);
        let pr = pr_curve(&iv).unwrap();
        let want = 0.5 + 0.5 * (2.0 / 3.0);
        assert!((average_precision(&pr) - want).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_chance() {
        let perfect = iv(vec![1.0, 1.0, 0.0, 0.0], vec![true, true, false, false]);
        assert!((auc(&roc_curve(&perfect).unwrap()) - 1.0).abs() < 1e-12);
        assert!((average_precision(&pr_curve(&perfect).unwrap()) - 1.0).abs() < 1e-12);

        let constant = iv(vec![0.4; 10], {
            let mut l = vec![false; 10];
            l[0] = true;
            l[3] = true;
            l
        });
        assert!((auc(&roc_curve(&constant).unwrap()) - 0.5).abs() < 1e-12);
        // Single-point PR curve: AP equals prevalence.
        assert!((average_precision(&pr_curve(&constant).unwrap()) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn random_instances_match_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let n = rng.gen_range(2..=200);
            let mut scores: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        // Coarse grid forces plenty of ties.
                        (rng.gen_range(0..=4) as f64) / 4.0
                    } else {
                        rng.gen_range(0.0..1.0)
                    }
                })
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
                continue;
            }
            scores.iter_mut().for_each(|s| *s = (*s * 1e6).round() / 1e6);
            let iv = iv(scores, labels);
            let got_auc = auc(&roc_curve(&iv).unwrap());
            let got_ap = average_precision(&pr_curve(&iv).unwrap());
            assert!((got_auc - auc_oracle(&iv)).abs() < 1e-12);
            assert!((got_ap - ap_oracle(&iv)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_class_errors() {
        let all_pos = iv(vec![0.1, 0.9], vec![true, true]);
        assert!(matches!(roc_curve(&all_pos), Err(Error::UndefinedMetric(_))));
        assert!(pr_curve(&all_pos).is_ok());
        let all_neg = iv(vec![0.1, 0.9], vec![false, false]);
        assert!(matches!(roc_curve(&all_neg), Err(Error::UndefinedMetric(_))));
        assert!(matches!(pr_curve(&all_neg), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn coverage_purity_match_confusion_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 150;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let iv = iv(scores, labels);
        for p in roc_curve(&iv).unwrap() {
            let (tp, fp, _tn, fn_) = confusion_at(&iv, p.threshold);
            let pos = tp + fn_;
            assert!((p.tpr - tp as f64 / pos as f64).abs() < 1e-15);
            if tp + fp > 0 {
                assert!((p.precision - tp as f64 / (tp + fp) as f64).abs() < 1e-15);
            }
        }
    }

    fn geometry(skip: u32, len: u32, n: usize) -> FrameGeometry {
        FrameGeometry::new(len, skip, n).unwrap()
    }

    #[test]
    fn skip_tiling_counts() {
        // 20ms skip: two intervals per prediction.
        let g = geometry(20, 25, 3);
        let s = ScoreSequence::new(vec![0.1, 0.9, 0.2], g, "m").unwrap();
        let fl = FrameLabels::new(vec![false, true, false], g).unwrap();
        let iv = tile_to_intervals(&s, &fl).unwrap();
        assert_eq!(iv.len(), 6);
        assert_eq!(iv.scores, vec![0.1, 0.1, 0.9, 0.9, 0.2, 0.2]);
        assert_eq!(iv.labels, vec![false, false, true, true, false, false]);

        // 100ms skip: ten intervals per prediction.
        let g = geometry(100, 160, 2);
        let s = ScoreSequence::new(vec![0.7, 0.3], g, "m").unwrap();
        let fl = FrameLabels::new(vec![true, false], g).unwrap();
        let iv = tile_to_intervals(&s, &fl).unwrap();
        assert_eq!(iv.len(), 20);
        assert!(iv.scores[..10].iter().all(|&v| v == 0.7));
        assert!(iv.labels[..10].iter().all(|&y| y));
    }

    #[test]
    fn skip_tiling_accepts_interval_resolution_labels() {
        let g = geometry(20, 25, 3);
        let s = ScoreSequence::new(vec![0.1, 0.9, 0.2], g, "m").unwrap();
        // 10ms-resolution truth: 6 intervals, finer than the frame labels.
        let lg = geometry(10, 10, 6);
        let fl = FrameLabels::new(vec![false, true, true, true, false, false], lg).unwrap();
        let iv = tile_to_intervals(&s, &fl).unwrap();
        assert_eq!(iv.labels, vec![false, true, true, true, false, false]);
        assert_eq!(iv.scores, vec![0.1, 0.1, 0.9, 0.9, 0.2, 0.2]);
    }

    #[test]
    fn indivisible_geometry_rejected() {
        let g = geometry(25, 25, 2);
        let s = ScoreSequence::new(vec![0.5, 0.5], g, "m").unwrap();
        let fl = FrameLabels::new(vec![false, true], g).unwrap();
        assert!(matches!(
            tile_to_intervals(&s, &fl),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn frame_length_tiling_overlaps_and_drops_edges() {
        // Skip 100, length 160: 16 intervals per prediction, spans start at
        // n*100 - 30. The first prediction loses its 3 negative-time
        // intervals.
        let g = geometry(100, 160, 3);
        let s = ScoreSequence::new(vec![0.9, 0.5, 0.1], g, "m").unwrap();
        let lg = geometry(10, 10, 30);
        let fl = FrameLabels::new(vec![true; 30], lg).unwrap();
        let iv = tile_to_intervals_with(&s, &fl, 10, Tiling::FrameLength).unwrap();
        // Prediction 0: intervals [-30,130) -> 13 kept; 1: [70,230) -> 16; 2: [170,330) -> 13.
        assert_eq!(iv.len(), 13 + 16 + 13);
        // XLS-R-style 25ms frames are off the 10ms grid in this mode.
        let g = geometry(20, 25, 3);
        let s = ScoreSequence::new(vec![0.9, 0.5, 0.1], g, "m").unwrap();
        let lg = geometry(10, 10, 6);
        let fl = FrameLabels::new(vec![true; 6], lg).unwrap();
        assert!(tile_to_intervals_with(&s, &fl, 10, Tiling::FrameLength).is_err());
    }

    #[test]
    fn pick_perfect_detector() {
        let iv = iv(vec![0.9, 0.8, 0.1, 0.2], vec![true, true, false, false]);
        let curve = roc_curve(&iv).unwrap();
        for criterion in [
            Criterion::Coverage { target: 0.97 },
            Criterion::EqualErrorRate,
            Criterion::Purity { target: 0.90 },
        ] {
            let op = pick_threshold(&curve, criterion).unwrap();
            assert_eq!(op.achieved_coverage, 1.0, "{criterion:?}");
            assert_eq!(op.achieved_purity, 1.0, "{criterion:?}");
            assert!(op.threshold.is_finite());
        }
    }

    #[test]
    fn purity_unattainable_on_constant_scores() {
        let labels: Vec<bool> = (0..10).map(|i| i == 0).collect();
        let iv = iv(vec![0.5; 10], labels);
        let curve = roc_curve(&iv).unwrap();
        match pick_threshold(&curve, Criterion::Purity { target: 0.90 }) {
            Err(Error::UnattainableTarget { best_achievable, .. }) => {
                assert!((best_achievable - 0.1).abs() < 1e-12);
            }
            other => panic!("expected unattainable error, got {other:?}"),
        }
    }

    #[test]
    fn eer_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(5..100);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
                continue;
            }
            let iv = iv(scores, labels);
            let curve = roc_curve(&iv).unwrap();
            let op = pick_threshold(&curve, Criterion::EqualErrorRate).unwrap();
            let best = curve
                .iter()
                .filter(|p| p.threshold.is_finite())
                .map(|p| (p.fpr - (1.0 - p.tpr)).abs())
                .fold(f64::INFINITY, f64::min);
            let got = curve
                .iter()
                .find(|p| p.threshold == op.threshold)
                .map(|p| (p.fpr - (1.0 - p.tpr)).abs())
                .unwrap();
            assert!((got - best).abs() < 1e-15);
        }
    }

    #[test]
    fn coverage_pick_meets_target_on_its_curve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(5..100);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
                continue;
            }
            let iv = iv(scores, labels);
            let curve = roc_curve(&iv).unwrap();
            let op = pick_threshold(&curve, Criterion::Coverage { target: 0.97 }).unwrap();
            assert!(op.achieved_coverage >= 0.97);
        }
    }

    #[test]
    fn sweep_width_one_matches_unfiltered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 60;
        let g = geometry(100, 160, n);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let s = ScoreSequence::new(scores, g, "m").unwrap();
        let fl = FrameLabels::new(labels, g).unwrap();

        let rows = filtered_metric_sweep(&s, &fl, &[1], 10).unwrap();
        let iv = tile_to_intervals(&s, &fl).unwrap();
        let want_auc = auc(&roc_curve(&iv).unwrap());
        let want_ap = average_precision(&pr_curve(&iv).unwrap());
        assert!((rows[0].auc - want_auc).abs() < 1e-12);
        assert!((rows[0].ap - want_ap).abs() < 1e-12);
    }

    #[test]
    fn pooled_sweep_of_one_run_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 40;
        let g = geometry(20, 25, n);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.25)).collect();
        let s = ScoreSequence::new(scores, g, "m").unwrap();
        let fl = FrameLabels::new(labels, g).unwrap();
        let plain = filtered_metric_sweep(&s, &fl, &[1, 3, 5], 10).unwrap();
        let pooled = filtered_metric_sweep_pooled(&[(&s, &fl)], &[1, 3, 5], 10).unwrap();
        for (a, b) in plain.iter().zip(&pooled) {
            assert_eq!(a.width, b.width);
            assert_eq!(a.auc.to_bits(), b.auc.to_bits());
            assert_eq!(a.ap.to_bits(), b.ap.to_bits());
        }
    }

    #[test]
    fn pooled_width_one_matches_concatenated_intervals() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut runs = Vec::new();
        for n in [30usize, 50] {
            let g = geometry(10, 10, n);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            runs.push((
                ScoreSequence::new(scores, g, "m").unwrap(),
                FrameLabels::new(labels, g).unwrap(),
            ));
        }
        let refs: Vec<(&ScoreSequence<f64>, &FrameLabels)> =
            runs.iter().map(|(s, l)| (s, l)).collect();
        let rows = filtered_metric_sweep_pooled(&refs, &[1], 10).unwrap();
        let parts: Vec<IntervalScores<f64>> = runs
            .iter()
            .map(|(s, l)| tile_to_intervals(s, l).unwrap())
            .collect();
        let pooled = IntervalScores::concat(&parts).unwrap();
        assert!((rows[0].auc - auc(&roc_curve(&pooled).unwrap())).abs() < 1e-12);
        assert!((rows[0].ap - average_precision(&pr_curve(&pooled).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn pooled_filtering_respects_recording_boundaries() {
        // Run B opens with a one-frame event. Filtered per recording, edge
        // replication keeps it; filtered across a naive concatenation it
        // would sit in the interior and be erased.
        let g = geometry(10, 10, 3);
        let a = ScoreSequence::new(vec![0.1, 0.1, 0.1], g, "m").unwrap();
        let la = FrameLabels::new(vec![false; 3], g).unwrap();
        let b = ScoreSequence::new(vec![0.9, 0.1, 0.1], g, "m").unwrap();
        let lb = FrameLabels::new(vec![true, false, false], g).unwrap();
        let rows = filtered_metric_sweep_pooled(&[(&a, &la), (&b, &lb)], &[3], 10).unwrap();
        assert!((rows[0].ap - 1.0).abs() < 1e-12);

        let concat_g = geometry(10, 10, 6);
        let c = ScoreSequence::new(vec![0.1, 0.1, 0.1, 0.9, 0.1, 0.1], concat_g, "m").unwrap();
        let lc = FrameLabels::new(vec![false, false, false, true, false, false], concat_g).unwrap();
        let concat_rows = filtered_metric_sweep(&c, &lc, &[3], 10).unwrap();
        assert!((concat_rows[0].ap - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn filtering_suppresses_isolated_noise() {
        // Square-wave events of 5 frames plus isolated high-confidence
        // single-frame false alarms.
        let mut bits = vec![false; 60];
        for start in [10usize, 30, 45] {
            for b in bits[start..start + 5].iter_mut() {
                *b = true;
            }
        }
        let mut scores: Vec<f64> = bits.iter().map(|&b| if b { 0.95 } else { 0.05 }).collect();
        for i in [3usize, 22, 40, 55] {
            scores[i] = 0.97;
        }
        let g = geometry(100, 160, 60);
        let s = ScoreSequence::new(scores, g, "m").unwrap();
        let fl = FrameLabels::new(bits, g).unwrap();
        let rows = filtered_metric_sweep(&s, &fl, &[1, 3], 10).unwrap();
        assert!(
            rows[1].ap > rows[0].ap,
            "width 3 should beat width 1: {rows:?}"
        );
        assert!((rows[1].ap - 1.0).abs() < 1e-12);
        assert!(rows[0].ap < 1.0);
    }

    #[test]
    fn wide_filters_kill_short_events() {
        // Events of one or two frames at 100ms skip. Width 3 keeps the
        // two-frame events; wider filters erase everything, so AP falls
        // and then stays flat -- never increases past the event width.
        let mut labels = vec![false; 100];
        for i in [10usize, 30, 50, 70] {
            labels[i] = true; // 100ms events
        }
        for i in [20usize, 40, 60, 80] {
            labels[i] = true;
            labels[i + 1] = true; // 200ms events
        }
        let scores: Vec<f64> = labels.iter().map(|&y| if y { 0.9 } else { 0.1 }).collect();
        let g = geometry(100, 160, 100);
        let s = ScoreSequence::new(scores, g, "m").unwrap();
        let fl = FrameLabels::new(labels.clone(), g).unwrap();
        let rows = filtered_metric_sweep(&s, &fl, &[1, 3, 5, 7, 9], 10).unwrap();

        let prevalence = labels.iter().filter(|&&y| y).count() as f64 / labels.len() as f64;
        assert!((rows[0].ap - 1.0).abs() < 1e-12);
        // Width 3: the 8 two-frame event frames survive at full precision,
        // the rest of the recall is only reached once everything fires.
        let want_w3 = 8.0 / 12.0 + (4.0 / 12.0) * prevalence;
        assert!((rows[1].ap - want_w3).abs() < 1e-12, "{rows:?}");
        for r in &rows[2..] {
            assert!((r.ap - prevalence).abs() < 1e-12, "{rows:?}");
        }
        for w in rows.windows(2).skip(1) {
            assert!(w[1].ap <= w[0].ap + 1e-12);
        }
        assert!(rows[4].ap < rows[0].ap);
    }

    #[test]
    fn curve_csv_headers() {
        let iv = iv(vec![0.9, 0.1], vec![true, false]);
        let csv = curve_to_csv(&roc_curve(&iv).unwrap());
        assert!(csv.starts_with("threshold,tpr,fpr,precision\n"));
        let rows = filtered_metric_sweep(
            &ScoreSequence::new(vec![0.9, 0.1], geometry(10, 10, 2), "m").unwrap(),
            &FrameLabels::new(vec![true, false], geometry(10, 10, 2)).unwrap(),
            &[1],
            10,
        )
        .unwrap();
        assert!(sweep_to_csv(&rows).starts_with("width,auc,ap\n"));
    }
}

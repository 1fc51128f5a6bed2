use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timing of a sequence of frame-wise predictions.
///
/// A prediction at index `n` is centred on `t(n) = n*T + T/2` where `T` is
/// the frame skip, and owns the half-open interval `[n*T, (n+1)*T)` —
/// equivalently `[t(n) - T/2, t(n) + T/2)`. The frame length is the amount
/// of audio each prediction looked at and may exceed the skip (overlapping
/// analysis windows).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub frame_length_ms: u32,
    pub frame_skip_ms: u32,
    pub n_frames: usize,
}

impl FrameGeometry {
    pub fn new(frame_length_ms: u32, frame_skip_ms: u32, n_frames: usize) -> Result<Self> {
        if frame_skip_ms == 0 {
            return Err(Error::InvalidConfig("frame_skip_ms must be > 0".into()));
        }
        Ok(FrameGeometry {
            frame_length_ms,
            frame_skip_ms,
            n_frames,
        })
    }

    /// Owned interval `[n*T, (n+1)*T)` of prediction `n`, in milliseconds.
    #[inline]
    pub fn owned_interval_ms(&self, n: usize) -> (u64, u64) {
        let t = self.frame_skip_ms as u64;
        (n as u64 * t, (n as u64 + 1) * t)
    }

    /// Prediction centre `t(n) = n*T + T/2` in seconds.
    #[inline]
    pub fn center_seconds(&self, n: usize) -> f64 {
        let t = self.frame_skip_ms as f64;
        (n as f64 * t + t / 2.0) / 1000.0
    }

    /// Span of the analysis window of prediction `n`: `[t(n)-L/2, t(n)+L/2)`
    /// in milliseconds. May start before zero for early frames.
    #[inline]
    pub fn frame_span_ms(&self, n: usize) -> (i64, i64) {
        let center_2x = 2 * n as i64 * self.frame_skip_ms as i64 + self.frame_skip_ms as i64;
        let l = self.frame_length_ms as i64;
        ((center_2x - l) / 2, (center_2x + l) / 2)
    }

    /// Total duration owned by all predictions, `n_frames * T`, in ms.
    #[inline]
    pub fn total_ms(&self) -> u64 {
        self.n_frames as u64 * self.frame_skip_ms as u64
    }

    /// Geometry of a 10ms-style evaluation grid covering `duration_ms`,
    /// rounded up to whole intervals.
    pub fn interval_grid(interval_ms: u32, duration_ms: u64) -> Result<Self> {
        if interval_ms == 0 {
            return Err(Error::InvalidConfig("interval_ms must be > 0".into()));
        }
        let n = duration_ms.div_ceil(interval_ms as u64) as usize;
        FrameGeometry::new(interval_ms, interval_ms, n)
    }
}

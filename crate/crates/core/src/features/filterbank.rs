//! Triangular mel filterbank over FFT bin frequencies.
//!
//! Mel scale follows the Slaney convention: linear below 1 kHz, logarithmic
//! above. Each filter is a triangle between neighbouring mel points,
//! normalized to unit area so every row sums to exactly 1.

use crate::error::{Error, Result};

const F_SP: f64 = 200.0 / 3.0; // Hz per mel in the linear region
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP; // 15.0

pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / logstep()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * (logstep() * (mel - MIN_LOG_MEL)).exp()
    }
}

#[inline]
fn logstep() -> f64 {
    (6.4f64).ln() / 27.0
}

pub struct Filterbank {
    /// Row-major [n_mels x n_bins] triangle weights; rows sum to 1.
    pub weights: Vec<f64>,
    /// Peak frequency of each filter, strictly increasing.
    pub centers_hz: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
}

impl Filterbank {
    #[inline]
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }
}

pub fn build(n_mels: usize, n_fft: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Result<Filterbank> {
    let n_bins = n_fft / 2 + 1;
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * sample_rate as f64 / n_fft as f64)
        .collect();

    // n_mels + 2 points evenly spaced on the mel scale; filter i peaks at
    // point i+1 and falls to zero at points i and i+2.
    let (mel_lo, mel_hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let points_hz: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut weights = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (lo, mid, hi) = (points_hz[m], points_hz[m + 1], points_hz[m + 2]);
        let row = &mut weights[m * n_bins..(m + 1) * n_bins];
        let mut sum = 0.0;
        for (k, &f) in bin_hz.iter().enumerate() {
            let up = (f - lo) / (mid - lo);
            let down = (hi - f) / (hi - mid);
            let w = up.min(down).max(0.0);
            row[k] = w;
            sum += w;
        }
        if sum <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mel filter {m} has no FFT bin support (n_mels {n_mels}, n_fft {n_fft}); \
                 reduce n_mels or raise n_fft"
            )));
        }
        for w in row.iter_mut() {
            *w /= sum;
        }
    }

    Ok(Filterbank {
        weights,
        centers_hz: points_hz[1..=n_mels].to_vec(),
        n_mels,
        n_bins,
    })
}

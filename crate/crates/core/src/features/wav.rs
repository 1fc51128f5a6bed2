//! RIFF/WAVE reading and writing, channel mixdown, and sample-rate
//! conversion by windowed-sinc interpolation.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sample rate every loaded recording is converted to.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// Number of taps of the sinc resampling kernel.
const SINC_TAPS: usize = 64;

/// On-disk sample encoding of a WAV file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Pcm16,
    Float32,
}

/// Mono audio signal with amplitudes in `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Waveform<T> {
    samples: Vec<T>,
    sample_rate: u32,
    /// Encoding of the recording this waveform came from; clips cut from it
    /// are written back with the same encoding.
    pub source_encoding: WavEncoding,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be > 0".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("waveform contains non-finite samples".into()));
        }
        Ok(Waveform {
            samples,
            sample_rate,
            source_encoding: WavEncoding::default(),
        })
    }

    #[inline]
    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Duration in seconds, `len / sample_rate`.
    #[inline]
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    #[inline]
    pub fn duration_ms(&self) -> u64 {
        (self.duration_seconds() * 1000.0).round() as u64
    }

    /// Cut `[start_ms, end_ms)` to a new waveform. Boundaries are converted
    /// to the nearest sample; the range is clamped to the recording.
    pub fn slice_ms(&self, start_ms: u64, end_ms: u64) -> Waveform<T> {
        let to_sample = |ms: u64| {
            ((ms as f64 / 1000.0 * self.sample_rate as f64).round() as usize).min(self.samples.len())
        };
        let (a, b) = (to_sample(start_ms), to_sample(end_ms));
        Waveform {
            samples: self.samples[a..b.max(a)].to_vec(),
            sample_rate: self.sample_rate,
            source_encoding: self.source_encoding,
        }
    }
}

/// Load a RIFF/WAVE file (16-bit PCM or 32-bit IEEE float, any channel
/// count) as a mono waveform at [`CANONICAL_SAMPLE_RATE`]. Channels are
/// averaged; other sample rates are resampled with a windowed-sinc kernel.
pub fn load_wav<T: Scalar>(path: impl AsRef<Path>) -> Result<Waveform<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_wav(path, &bytes)?;

    let mono = mix_down(&parsed.samples, parsed.channels);
    let resampled = if parsed.sample_rate == CANONICAL_SAMPLE_RATE {
        mono
    } else {
        resample(&mono, parsed.sample_rate, CANONICAL_SAMPLE_RATE)
    };

    let mut w = Waveform::new(
        resampled.into_iter().map(T::cast).collect(),
        CANONICAL_SAMPLE_RATE,
    )?;
    w.source_encoding = parsed.encoding;
    Ok(w)
}

/// Write a waveform using the requested encoding.
pub fn write_wav<T: Scalar>(path: impl AsRef<Path>, w: &Waveform<T>, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let n = w.samples.len();
    let (bits, format_tag, bytes_per_sample) = match encoding {
        WavEncoding::Pcm16 => (16u16, 1u16, 2usize),
        WavEncoding::Float32 => (32u16, 3u16, 4usize),
    };
    let data_len = n * bytes_per_sample;
    let mut out = Vec::with_capacity(44 + data_len);

    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * bytes_per_sample as u32).to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    match encoding {
        WavEncoding::Pcm16 => {
            for &s in &w.samples {
                let v = (s.as_f64().clamp(-1.0, 1.0) * 32767.0).round() as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for &s in &w.samples {
                out.extend_from_slice(&(s.as_f64() as f32).to_le_bytes());
            }
        }
    }

    crate::containers::atomic_write(path, &out)
}

struct ParsedWav {
    samples: Vec<f64>, // interleaved
    channels: usize,
    sample_rate: u32,
    encoding: WavEncoding,
}

fn parse_wav(path: &Path, bytes: &[u8]) -> Result<ParsedWav> {
    let fmt_err = |reason: &str| Error::format(path, reason);
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(fmt_err("not a RIFF/WAVE file"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (tag, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(fmt_err("chunk extends past end of file"));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(fmt_err("fmt chunk too short"));
                }
                let mut tag = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                // WAVE_FORMAT_EXTENSIBLE carries the real tag in the subformat GUID.
                if tag == 0xFFFE {
                    if size < 26 {
                        return Err(fmt_err("extensible fmt chunk too short"));
                    }
                    tag = u16::from_le_bytes(body[24..26].try_into().unwrap());
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_start + size + (size & 1);
    }

    let (tag, channels, rate, bits) = fmt.ok_or_else(|| fmt_err("missing fmt chunk"))?;
    let data = data.ok_or_else(|| fmt_err("missing data chunk"))?;
    if channels == 0 {
        return Err(fmt_err("zero channels"));
    }
    if rate == 0 {
        return Err(fmt_err("zero sample rate"));
    }

    let unsupported = |reason: String| Error::Unsupported {
        path: path.to_path_buf(),
        reason,
    };
    let (samples, encoding) = match (tag, bits) {
        (1, 16) => {
            let n = data.len() / 2;
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                let s = i16::from_le_bytes(data[2 * i..2 * i + 2].try_into().unwrap());
                v.push(s as f64 / 32768.0);
            }
            (v, WavEncoding::Pcm16)
        }
        (3, 32) => {
            let n = data.len() / 4;
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                let s = f32::from_le_bytes(data[4 * i..4 * i + 4].try_into().unwrap());
                if !s.is_finite() {
                    return Err(fmt_err("non-finite float sample"));
                }
                v.push((s as f64).clamp(-1.0, 1.0));
            }
            (v, WavEncoding::Float32)
        }
        (tag, bits) => {
            return Err(unsupported(format!(
                "codec (format tag {tag}, {bits}-bit); expected 16-bit PCM or 32-bit float"
            )))
        }
    };

    Ok(ParsedWav {
        samples,
        channels: channels as usize,
        sample_rate: rate,
        encoding,
    })
}

/// Average interleaved channels into one.
fn mix_down(interleaved: &[f64], channels: usize) -> Vec<f64> {
    if channels == 1 {
        return interleaved.to_vec();
    }
    let frames = interleaved.len() / channels;
    (0..frames)
        .map(|f| {
            let frame = &interleaved[f * channels..(f + 1) * channels];
            frame.iter().sum::<f64>() / channels as f64
        })
        .collect()
}

/// Windowed-sinc sample-rate conversion with a Blackman-windowed kernel of
/// [`SINC_TAPS`] taps. The kernel cutoff tracks the lower of the two Nyquist
/// frequencies, so downsampling is anti-aliased. Output length is
/// `round(len * to / from)`, preserving duration within one output sample.
pub fn resample(input: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if from_rate == to_rate || input.is_empty() {
        return input.to_vec();
    }
    let ratio = to_rate as f64 / from_rate as f64;
    let n_out = (input.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0);
    let half = (SINC_TAPS / 2) as isize;

    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out {
        let t = m as f64 / ratio; // position in input samples
        let i0 = t.floor() as isize;
        let mut acc = 0.0;
        for k in (i0 - half + 1)..=(i0 + half) {
            if k < 0 || k as usize >= input.len() {
                continue;
            }
            let d = t - k as f64;
            acc += input[k as usize] * cutoff * sinc(cutoff * d) * blackman(d, half as f64);
        }
        out.push(acc);
    }
    out
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Blackman window over `|d| <= half`, zero outside.
#[inline]
fn blackman(d: f64, half: f64) -> f64 {
    if d.abs() >= half {
        return 0.0;
    }
    let x = std::f64::consts::PI * d / half;
    0.42 + 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, seconds: f64) -> Vec<f64> {
        let n = (rate as f64 * seconds) as usize;
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect()
    }

    /// Naive DFT magnitude at integer-Hz bins, used as an oracle.
    fn dft_peak_hz(x: &[f64], rate: u32) -> usize {
        let n = x.len();
        let mut best = (0usize, 0.0f64);
        for hz in 1..rate as usize / 2 {
            let w = 2.0 * std::f64::consts::PI * hz as f64 / rate as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &s) in x.iter().enumerate() {
                re += s * (w * i as f64).cos();
                im -= s * (w * i as f64).sin();
            }
            let mag = re * re + im * im;
            if mag > best.1 {
                best = (hz, mag);
            }
        }
        assert_eq!(n, x.len());
        best.0
    }

    #[test]
    fn silence_roundtrip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        let w = Waveform::<f64>::new(vec![0.0; 16_000], 16_000).unwrap();
        write_wav(&path, &w, WavEncoding::Pcm16).unwrap();
        let r = load_wav::<f64>(&path).unwrap();
        assert_eq!(r.len(), 16_000);
        assert!((r.duration_seconds() - 1.0).abs() < 1e-12);
        assert!(r.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn opposite_stereo_channels_cancel() {
        // Hand-build a stereo file with channels x and -x.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let x = sine(440.0, 16_000, 0.1);
        let mut data = Vec::new();
        for &s in &x {
            let v = (s * 16000.0) as i16;
            data.extend_from_slice(&v.to_le_bytes());
            data.extend_from_slice(&(-v).to_le_bytes());
        }
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&16_000u32.to_le_bytes());
        bytes.extend_from_slice(&64_000u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&(data.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&data);
        std::fs::write(&path, bytes).unwrap();

        let w = load_wav::<f64>(&path).unwrap();
        assert!(w.samples().iter().all(|&s| s.abs() < 1e-12));
    }

    #[test]
    fn upsample_440hz_tone_keeps_pitch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone8k.wav");
        let w = Waveform::<f64>::new(sine(440.0, 8_000, 1.0), 8_000).unwrap();
        write_wav(&path, &w, WavEncoding::Pcm16).unwrap();

        let r = load_wav::<f64>(&path).unwrap();
        assert_eq!(r.sample_rate(), 16_000);
        assert_eq!(r.len(), 16_000);
        let peak = dft_peak_hz(r.samples(), 16_000);
        assert!((peak as i64 - 440).unsigned_abs() <= 1, "peak at {peak} Hz");
    }

    #[test]
    fn downsample_preserves_duration_within_one_sample() {
        let x = sine(1000.0, 44_100, 0.73);
        let y = resample(&x, 44_100, 16_000);
        let expect = 0.73 * 16_000.0;
        assert!((y.len() as f64 - expect).abs() <= 1.0);
    }

    #[test]
    fn malformed_header_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"not a wave file at all").unwrap();
        match load_wav::<f64>(&path) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_codec_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alaw.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&36u32.to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&6u16.to_le_bytes()); // A-law
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8_000u32.to_le_bytes());
        bytes.extend_from_slice(&8_000u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        match load_wav::<f64>(&path) {
            Err(Error::Unsupported { .. }) => {}
            other => panic!("expected unsupported error, got {other:?}"),
        }
    }
}

//! Audio-side signal processing: intensity envelopes, Gaussian smoothing,
//! audio keyframes and the character-proportional speech duration model.

use std::path::Path;

use crate::error::{Error, Result};
use crate::motion::ScalarSeries;

/// Default analysis window for [`intensity`], in seconds.
pub const DEFAULT_INTENSITY_WINDOW: f64 = 0.025;
/// Default hop between analysis frames for [`intensity`], in seconds.
pub const DEFAULT_INTENSITY_HOP: f64 = 0.010;
/// Silence floor for the dBFS conversion.
pub const DBFS_FLOOR: f64 = -96.0;
/// Default speaking rate for [`estimate_duration`], words per minute.
pub const DEFAULT_WPM: f64 = 150.0;

/// Mono audio, samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Waveform> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(bad) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::invalid(format!(
                "sample {bad} is outside [-1, 1] or non-finite"
            )));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Copies out the samples between two timestamps (clamped to the signal).
    pub fn slice_seconds(&self, start: f64, end: f64) -> Result<Waveform> {
        let sr = self.sample_rate as f64;
        let a = ((start * sr).round().max(0.0) as usize).min(self.samples.len());
        let b = ((end * sr).round().max(0.0) as usize).min(self.samples.len());
        if b < a {
            return Err(Error::invalid(format!("slice end {end} precedes start {start}")));
        }
        Waveform::new(self.samples[a..b].to_vec(), self.sample_rate)
    }

    /// Parses a RIFF/WAVE file: PCM, 16-bit signed little-endian, mono or
    /// stereo. Stereo is downmixed by averaging; samples are scaled by
    /// 1/32768.
    pub fn from_wav_bytes(bytes: &[u8], origin: &str) -> Result<Waveform> {
        let fail = |msg: &str| Error::format(origin, msg);
        if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
            return Err(fail("not a RIFF/WAVE file"));
        }
        let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
        let mut data: Option<&[u8]> = None;
        let mut off = 12;
        while off + 8 <= bytes.len() {
            let id = &bytes[off..off + 4];
            let size = u32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap()) as usize;
            let body_end = off + 8 + size;
            if body_end > bytes.len() {
                return Err(fail("chunk extends past end of file"));
            }
            let body = &bytes[off + 8..body_end];
            match id {
                b"fmt " => {
                    if body.len() < 16 {
                        return Err(fail("fmt chunk too short"));
                    }
                    fmt = Some((
                        u16::from_le_bytes(body[0..2].try_into().unwrap()),
                        u16::from_le_bytes(body[2..4].try_into().unwrap()),
                        u32::from_le_bytes(body[4..8].try_into().unwrap()),
                        u16::from_le_bytes(body[14..16].try_into().unwrap()),
                    ));
                }
                b"data" => data = Some(body),
                _ => {}
            }
            off = body_end + (size & 1); // chunks are word-aligned
        }
        let (format, channels, rate, bits) = fmt.ok_or_else(|| fail("missing fmt chunk"))?;
        let data = data.ok_or_else(|| fail("missing data chunk"))?;
        if format != 1 {
            return Err(fail(&format!("unsupported audio format {format}, need PCM (1)")));
        }
        if bits != 16 {
            return Err(fail(&format!("unsupported bit depth {bits}, need 16")));
        }
        if channels != 1 && channels != 2 {
            return Err(fail(&format!("unsupported channel count {channels}, need 1 or 2")));
        }
        let block = channels as usize * 2;
        if data.len() % block != 0 {
            return Err(fail("data chunk is not a whole number of sample frames"));
        }
        let mut samples = Vec::with_capacity(data.len() / block);
        for frame in data.chunks_exact(block) {
            let mut acc = 0.0;
            for ch in frame.chunks_exact(2) {
                acc += i16::from_le_bytes([ch[0], ch[1]]) as f64;
            }
            samples.push(acc / channels as f64 / 32768.0);
        }
        Waveform::new(samples, rate)
    }

    pub fn load_wav(path: &Path) -> Result<Waveform> {
        let bytes = std::fs::read(path)?;
        Waveform::from_wav_bytes(&bytes, &path.display().to_string())
    }
}

/// Frame-wise RMS intensity in dBFS.
///
/// Frames start every `hop` seconds and span `win` seconds (the final frames
/// shrink at the signal edge). RMS is floored at the -96 dBFS silence level
/// before the log, so silence maps to exactly -96. The returned series is
/// sampled at `1 / hop`.
pub fn intensity(w: &Waveform, win: f64, hop: f64) -> Result<ScalarSeries> {
    if w.is_empty() {
        return Err(Error::invalid("cannot compute intensity of an empty waveform"));
    }
    if !(hop > 0.0 && win >= hop) {
        return Err(Error::invalid(format!(
            "need win >= hop > 0, got win={win} hop={hop}"
        )));
    }
    let sr = w.sample_rate() as f64;
    let win_n = ((win * sr).round() as usize).max(1);
    let hop_n = ((hop * sr).round() as usize).max(1);
    let floor = 10f64.powf(DBFS_FLOOR / 20.0);
    let samples = w.samples();
    let mut values = Vec::new();
    let mut start = 0;
    while start < samples.len() {
        let end = (start + win_n).min(samples.len());
        let frame = &samples[start..end];
        let mean_sq = frame.iter().map(|s| s * s).sum::<f64>() / frame.len() as f64;
        let rms = mean_sq.sqrt().max(floor);
        values.push(20.0 * rms.log10());
        start += hop_n;
    }
    ScalarSeries::new(values, sr / hop_n as f64)
}

/// Gaussian-smooths a series with a truncated, renormalized kernel.
///
/// `sigma` is in seconds and is converted to samples via the series rate. The
/// kernel is cut at three standard deviations; near the edges the in-range
/// taps are renormalized, so a constant series stays constant and the output
/// never leaves the input's value range. `sigma = 0` is the identity.
pub fn gaussian_filter(series: &ScalarSeries, sigma: f64) -> Result<ScalarSeries> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be non-negative, got {sigma}")));
    }
    let sigma_samples = sigma * series.rate();
    let radius = (3.0 * sigma_samples).ceil() as usize;
    if radius == 0 {
        return Ok(series.clone());
    }
    let denom = 2.0 * sigma_samples * sigma_samples;
    let kernel: Vec<f64> = (0..=radius)
        .map(|j| (-((j * j) as f64) / denom).exp())
        .collect();
    let v = series.values();
    let n = v.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        let mut weight = 0.0;
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        for t in lo..=hi {
            let w = kernel[i.abs_diff(t)];
            acc += w * v[t];
            weight += w;
        }
        out.push(acc / weight);
    }
    ScalarSeries::new(out, series.rate())
}

/// Knobs for [`audio_keyframes`]. Defaults match the intensity defaults plus
/// a 3 dB prominence gate above the series median.
#[derive(Debug, Clone)]
pub struct AudioKeyframeOptions {
    pub win: f64,
    pub hop: f64,
    /// Peaks quieter than `median + prominence_db` are discarded.
    pub prominence_db: f64,
}

impl Default for AudioKeyframeOptions {
    fn default() -> Self {
        AudioKeyframeOptions {
            win: DEFAULT_INTENSITY_WINDOW,
            hop: DEFAULT_INTENSITY_HOP,
            prominence_db: 3.0,
        }
    }
}

/// Times (seconds) of prominent intensity peaks.
///
/// Pipeline: intensity envelope, Gaussian smoothing with `sigma`, local-maxima
/// extraction, prominence gate, index-to-seconds conversion. Pure silence has
/// a flat envelope and therefore no keyframes.
pub fn audio_keyframes(
    w: &Waveform,
    sigma: f64,
    opts: &AudioKeyframeOptions,
) -> Result<Vec<f64>> {
    let env = intensity(w, opts.win, opts.hop)?;
    let smoothed = gaussian_filter(&env, sigma)?;
    let peaks = crate::motion::extract_keyframes(&smoothed, 0.0)?;
    let gate = median(smoothed.values()) + opts.prominence_db;
    Ok(peaks
        .into_iter()
        .filter(|&i| smoothed.values()[i] >= gate)
        .map(|i| i as f64 / smoothed.rate())
        .collect())
}

fn median(v: &[f64]) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("series values are finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Speech timing from text alone: total length plus one interval per word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTimings {
    pub total_seconds: f64,
    /// `(start, end)` per word; intervals tile `[0, total_seconds]` exactly.
    pub intervals: Vec<(f64, f64)>,
}

/// Estimates speech duration at a fixed words-per-minute rate.
///
/// The total is `words * 60 / wpm`; each word's share is proportional to
/// `max(1, character count)`, so longer words get proportionally more time.
pub fn estimate_duration(words: &[String], rate_wpm: f64) -> Result<WordTimings> {
    if words.is_empty() {
        return Err(Error::invalid("cannot estimate duration of an empty word list"));
    }
    if !(rate_wpm.is_finite() && rate_wpm > 0.0) {
        return Err(Error::invalid(format!("words-per-minute must be positive, got {rate_wpm}")));
    }
    let total = words.len() as f64 * 60.0 / rate_wpm;
    let weights: Vec<f64> = words
        .iter()
        .map(|w| w.chars().count().max(1) as f64)
        .collect();
    let weight_sum: f64 = weights.iter().sum();
    let mut intervals = Vec::with_capacity(words.len());
    let mut cum = 0.0;
    let mut start = 0.0;
    for w in &weights {
        cum += w;
        let end = total * (cum / weight_sum);
        intervals.push((start, end));
        start = end;
    }
    Ok(WordTimings { total_seconds: total, intervals })
}

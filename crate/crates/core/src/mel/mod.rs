//! Log-mel features and multi-microphone channel stacking.

mod cache;

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::tflab::Mic;

pub use cache::{read_feature_cache, write_feature_cache, CACHE_MAGIC};

pub const SAMPLE_RATE: u32 = 16_000;
pub const WINDOW: usize = 480;
pub const HOP: usize = 160;
pub const N_FFT: usize = 512;
pub const N_MELS: usize = 40;
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Frames produced for `len` samples; zero when shorter than a window.
pub fn frame_count(len: usize) -> usize {
    if len < WINDOW {
        0
    } else {
        1 + (len - WINDOW) / HOP
    }
}

/// Triangular filters with unit peaks, equally spaced on the mel scale from
/// 0 Hz to Nyquist. Neighbouring filters cross at half height.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    /// `N_MELS` rows of `N_FFT / 2 + 1` weights.
    weights: Vec<Vec<f64>>,
    /// Filter edges and centres in Hz, `N_MELS + 2` points.
    points: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let nyq = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyq);
        let mut points: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        // Pin the outer edge; the mel round trip is off by an ulp or two.
        points[n_mels + 1] = nyq;
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let weights = (0..n_mels)
            .map(|m| {
                let (lo, mid, hi) = (points[m], points[m + 1], points[m + 2]);
                (0..=n_fft / 2)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f <= lo || f >= hi {
                            0.0
                        } else if f <= mid {
                            (f - lo) / (mid - lo)
                        } else {
                            (hi - f) / (hi - mid)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { weights, points }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn centres(&self) -> &[f64] {
        &self.points[1..self.points.len() - 1]
    }

    /// Outer edges: the first filter's lower edge and the last one's upper.
    pub fn edges(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }
}

/// Channels x mel bins x frames, stored in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    bins: usize,
    frames: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, bins: usize, frames: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != channels * bins * frames {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {channels}x{bins}x{frames}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            channels,
            bins,
            frames,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.bins, self.frames]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, channel: usize, bin: usize, frame: usize) -> f64 {
        self.values[(channel * self.bins + bin) * self.frames + frame]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.bins * self.frames;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

/// Reusable extractor; the filterbank, window and FFT plan are shared
/// read-only.
#[derive(Clone)]
pub struct LogMel {
    filterbank: Arc<MelFilterbank>,
    window: Arc<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for LogMel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogMel").finish_non_exhaustive()
    }
}

impl Default for LogMel {
    fn default() -> Self {
        Self::new()
    }
}

impl LogMel {
    pub fn new() -> Self {
        // Periodic Hann window.
        let window = (0..WINDOW)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / WINDOW as f64).cos())
            .collect();
        Self {
            filterbank: Arc::new(MelFilterbank::new(N_MELS, N_FFT, SAMPLE_RATE)),
            window: Arc::new(window),
            fft: FftPlanner::new().plan_fft_forward(N_FFT),
        }
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn compute(&self, signal: &AudioBuffer) -> Result<FeatureMap> {
        if signal.sample_rate() != SAMPLE_RATE {
            return Err(Error::SampleRateMismatch(signal.sample_rate(), SAMPLE_RATE));
        }
        let x = signal.samples();
        let frames = frame_count(x.len());
        if frames == 0 {
            return Err(Error::TooShort {
                needed: WINDOW,
                got: x.len(),
            });
        }
        let mut values = vec![0.0; N_MELS * frames];
        let mut buf = vec![Complex64::new(0.0, 0.0); N_FFT];
        let mut power = vec![0.0; N_FFT / 2 + 1];
        for t in 0..frames {
            let frame = &x[t * HOP..t * HOP + WINDOW];
            for (b, (s, w)) in buf.iter_mut().zip(frame.iter().zip(self.window.iter())) {
                *b = Complex64::new(s * w, 0.0);
            }
            buf[WINDOW..].iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            self.fft.process(&mut buf);
            for (p, b) in power.iter_mut().zip(&buf) {
                *p = b.norm_sqr();
            }
            for (m, row) in self.filterbank.weights.iter().enumerate() {
                let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
                values[m * frames + t] = e.max(LOG_FLOOR).ln();
            }
        }
        FeatureMap::new(1, N_MELS, frames, values)
    }
}

fn shared() -> &'static LogMel {
    static EXTRACTOR: OnceLock<LogMel> = OnceLock::new();
    EXTRACTOR.get_or_init(LogMel::new)
}

/// Single-channel 40-bin log-mel map, 30 ms Hann frames every 10 ms.
pub fn log_mel(signal: &AudioBuffer) -> Result<FeatureMap> {
    shared().compute(signal)
}

/// Concatenates maps along the channel axis, in the given order.
pub fn stack_channels(maps: &[FeatureMap]) -> Result<FeatureMap> {
    let first = maps.first().ok_or(Error::EmptyOperand)?;
    let (bins, frames) = (first.bins, first.frames);
    let mut values = Vec::with_capacity(maps.iter().map(|m| m.values.len()).sum());
    for m in maps {
        if (m.bins, m.frames) != (bins, frames) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {bins}x{frames}",
                m.bins, m.frames
            )));
        }
        values.extend_from_slice(&m.values);
    }
    let channels = maps.iter().map(|m| m.channels).sum();
    FeatureMap::new(channels, bins, frames, values)
}

/// Stacks the requested microphones in canonical order (iec, front, rear).
pub fn stack_mics(per_mic: &BTreeMap<Mic, FeatureMap>, subset: &[Mic]) -> Result<FeatureMap> {
    let mut mics = subset.to_vec();
    mics.sort();
    mics.dedup();
    let maps = mics
        .iter()
        .map(|m| {
            per_mic
                .get(m)
                .cloned()
                .ok_or_else(|| Error::MissingAsset(format!("features for {m}")))
        })
        .collect::<Result<Vec<_>>>()?;
    stack_channels(&maps)
}

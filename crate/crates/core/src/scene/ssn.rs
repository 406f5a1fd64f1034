//! Speech-shaped noise.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Output RMS of [`make_ssn`]; absolute level is set later by the mixer.
const SSN_RMS: f64 = 0.1;

/// Long-term magnitude spectrum on a uniform grid from 0 Hz to Nyquist.
#[derive(Clone, Debug, PartialEq)]
pub struct LongTermSpectrum {
    magnitudes: Vec<f64>,
    sample_rate: u32,
}

impl LongTermSpectrum {
    pub fn new(magnitudes: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let ok = magnitudes.len() >= 2
            && magnitudes.iter().all(|m| m.is_finite() && *m >= 0.0)
            && magnitudes.iter().any(|m| *m > 0.0);
        if !ok || sample_rate < 16_000 {
            return Err(Error::DegenerateSpectrum);
        }
        Ok(Self {
            magnitudes,
            sample_rate,
        })
    }

    pub fn flat(bins: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![1.0; bins], sample_rate)
    }

    /// Welch estimate (Hann window, half overlap) pooled over `signals`.
    pub fn estimate(signals: &[AudioBuffer], n_fft: usize) -> Result<Self> {
        let first = signals.first().ok_or(Error::EmptyOperand)?;
        let sample_rate = first.sample_rate();
        let psd = welch_psd(signals.iter().map(|s| s.samples()), n_fft)?;
        Self::new(psd.into_iter().map(f64::sqrt).collect(), sample_rate)
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Linear interpolation at `freq` Hz.
    pub fn at(&self, freq: f64) -> f64 {
        let nyq = self.sample_rate as f64 / 2.0;
        let pos = (freq / nyq).clamp(0.0, 1.0) * (self.magnitudes.len() - 1) as f64;
        let i = (pos.floor() as usize).min(self.magnitudes.len() - 2);
        let frac = pos - i as f64;
        self.magnitudes[i] * (1.0 - frac) + self.magnitudes[i + 1] * frac
    }
}

/// Averaged one-sided power spectrum, `n_fft / 2 + 1` bins.
pub fn welch_psd<'a>(
    signals: impl IntoIterator<Item = &'a [f64]>,
    n_fft: usize,
) -> Result<Vec<f64>> {
    if n_fft < 4 {
        return Err(Error::InvalidArgument("n_fft too small".into()));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let window: Vec<f64> = (0..n_fft)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n_fft as f64).cos())
        .collect();
    let hop = n_fft / 2;
    let mut acc = vec![0.0; n_fft / 2 + 1];
    let mut segments = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for s in signals {
        let mut start = 0;
        while start + n_fft <= s.len() {
            for (b, (x, w)) in buf.iter_mut().zip(s[start..].iter().zip(&window)) {
                *b = Complex64::new(x * w, 0.0);
            }
            fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            segments += 1;
            start += hop;
        }
    }
    if segments == 0 {
        return Err(Error::TooShort {
            needed: n_fft,
            got: 0,
        });
    }
    Ok(acc.into_iter().map(|a| a / segments as f64).collect())
}

/// White Gaussian noise shaped to `reference` in the frequency domain.
///
/// The noise is drawn at FFT length and shaped circularly, so the result is
/// stationary with no filter transient; the first `length` samples are kept.
pub fn make_ssn<R: Rng + ?Sized>(
    reference: &LongTermSpectrum,
    length: usize,
    rng: &mut R,
) -> Result<AudioBuffer> {
    if length == 0 {
        return Err(Error::EmptyOperand);
    }
    let fs = reference.sample_rate() as f64;
    let n_fft = length.next_power_of_two().max(512);
    let mut buf: Vec<Complex64> = (0..n_fft)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n_fft).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = k.min(n_fft - k);
        *c *= reference.at(bin as f64 * fs / n_fft as f64);
    }
    planner.plan_fft_inverse(n_fft).process(&mut buf);
    let out: Vec<f64> = buf[..length].iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / length as f64).sqrt();
    if rms == 0.0 || !rms.is_finite() {
        return Err(Error::DegenerateSpectrum);
    }
    AudioBuffer::new(
        out.into_iter().map(|v| v * SSN_RMS / rms).collect(),
        reference.sample_rate(),
    )
}

//! Exponential sine sweep excitation and inverse-filter deconvolution.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{ImpulseResponse, IrKind};
use crate::audio::{convolve_fft, AudioBuffer};
use crate::error::{Error, Result};

/// Fade-in length as a fraction of the duration.
const FADE_IN_FRACTION: f64 = 0.01;
/// Fade-out in samples; kept short so the top of the band stays flat.
const FADE_OUT_SAMPLES: usize = 4;
const MAX_MODELLING_DELAY: usize = 8192;
/// Tikhonov floor relative to the peak sweep power.
const REGULARIZATION: f64 = 1e-6;
const LOW_ENERGY_RMS: f64 = 1e-9;

/// Exponential sweep together with its inverse filter.
#[derive(Clone, Debug)]
pub struct ExpSweep {
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
    pub sweep: AudioBuffer,
    pub inverse_filter: AudioBuffer,
}

impl ExpSweep {
    /// Instantaneous frequency (Hz) at time `t` seconds.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f_start * ((t / self.duration) * (self.f_end / self.f_start).ln()).exp()
    }
}

/// Builds `sin(2π f1 T/R (exp(tR/T) - 1))`, `R = ln(f2/f1)`, with a short
/// raised-cosine fade-in, plus its inverse filter.
///
/// The inverse is the time-reversed sweep with its amplitude compensated in
/// the frequency domain, `conj(S) B / (|S|^2 + eps)`, where `B` is unity
/// from DC to `f2` with a raised-cosine upper skirt. A modelling delay keeps the
/// non-causal part of the compensation; the filter is cut so that its last
/// sample is the zero-lag point of `sweep * inverse`.
pub fn generate_exp_sweep(
    f_start: f64,
    f_end: f64,
    duration: f64,
    sample_rate: u32,
) -> Result<ExpSweep> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(f_start > 0.0 && f_start < f_end && f_end <= nyquist) {
        return Err(Error::InvalidFrequencies(f_start, f_end));
    }
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument("sweep duration must be positive".into()));
    }
    let fs = sample_rate as f64;
    let n = (duration * fs).round() as usize;
    if n < 16 {
        return Err(Error::InvalidArgument("sweep too short".into()));
    }
    let rate = (f_end / f_start).ln();
    let fade_in = ((n as f64 * FADE_IN_FRACTION) as usize).max(1);
    let sweep: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let phase = 2.0 * PI * f_start * duration / rate * ((t * rate / duration).exp() - 1.0);
            phase.sin() * fade_gain(i, n, fade_in, FADE_OUT_SAMPLES)
        })
        .collect();
    let inverse = compensated_inverse(&sweep, fs, f_end);

    Ok(ExpSweep {
        f_start,
        f_end,
        duration,
        sweep: AudioBuffer::new(sweep, sample_rate)?,
        inverse_filter: AudioBuffer::new(inverse, sample_rate)?,
    })
}

fn fade_gain(i: usize, n: usize, fade_in: usize, fade_out: usize) -> f64 {
    let ramp = |k: usize, len: usize| 0.5 - 0.5 * (PI * k as f64 / len as f64).cos();
    if i < fade_in {
        ramp(i, fade_in)
    } else if i >= n - fade_out {
        ramp(n - 1 - i, fade_out)
    } else {
        1.0
    }
}

/// Target magnitude of `sweep * inverse`. The low end stays flat down to DC:
/// a band edge there would drop the IR's mean, which a short IR window then
/// smears across the lowest few hundred hertz. Bins the sweep barely excites
/// are held down by the regularisation instead.
fn band_target(f: f64, f_end: f64, nyquist: f64) -> f64 {
    // A sweep that reaches Nyquist keeps a flat top.
    if f_end >= 0.98 * nyquist {
        1.0
    } else {
        0.5 - 0.5 * (PI * ((f_end - f) / (0.1 * f_end)).clamp(0.0, 1.0)).cos()
    }
}

fn compensated_inverse(sweep: &[f64], fs: f64, f_end: f64) -> Vec<f64> {
    let len = sweep.len();
    let delay = (len / 4).clamp(1, MAX_MODELLING_DELAY);
    let n_fft = (2 * (len + 2 * delay)).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);

    let mut spec: Vec<Complex64> = sweep
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    fwd.process(&mut spec);
    let peak_power = spec.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    let eps = REGULARIZATION * peak_power;
    let nyquist = fs / 2.0;
    // Zero lag lands at `len - 1 + delay`.
    let shift = (len - 1 + delay) as f64;
    for (k, c) in spec.iter_mut().enumerate() {
        let bin = if k <= n_fft / 2 { k } else { n_fft - k };
        let f = bin as f64 * fs / n_fft as f64;
        let target = band_target(f, f_end, nyquist);
        let phase = -2.0 * PI * k as f64 * shift / n_fft as f64;
        let rot = Complex64::from_polar(1.0, phase);
        *c = c.conj() * target / (c.norm_sqr() + eps) * rot;
    }
    inv.process(&mut spec);
    let scale = 1.0 / n_fft as f64;
    spec[..len + delay].iter().map(|c| c.re * scale).collect()
}

/// Result of a sweep deconvolution.
#[derive(Clone, Debug)]
pub struct SweepEstimate {
    pub ir: ImpulseResponse,
    /// Set when the recording carries (almost) no energy.
    pub low_energy: bool,
}

/// Convolves `recording` with `inverse_filter` and keeps `ir_len` taps from
/// the zero-lag position, which is where the sweep's own deconvolution peaks.
pub fn deconvolve_sweep(
    recording: &AudioBuffer,
    inverse_filter: &AudioBuffer,
    ir_len: usize,
) -> Result<SweepEstimate> {
    if recording.sample_rate() != inverse_filter.sample_rate() {
        return Err(Error::SampleRateMismatch(
            recording.sample_rate(),
            inverse_filter.sample_rate(),
        ));
    }
    if ir_len == 0 {
        return Err(Error::InvalidArgument("ir_len must be positive".into()));
    }
    let full_len = recording.len() + inverse_filter.len() - 1;
    let zero_lag = inverse_filter.len() - 1;
    let available = full_len.saturating_sub(zero_lag);
    if ir_len > available {
        return Err(Error::IrTooLong {
            requested: ir_len,
            available,
        });
    }
    let full = convolve_fft(
        recording.samples(),
        inverse_filter.samples(),
        zero_lag + ir_len,
    )?;
    let taps = full[zero_lag..zero_lag + ir_len].to_vec();
    let rms = (recording.energy() / recording.len() as f64).sqrt();
    Ok(SweepEstimate {
        ir: ImpulseResponse::new(taps, recording.sample_rate(), IrKind::Hrtf)?,
        low_energy: rms < LOW_ENERGY_RMS,
    })
}

//! Least-mean-squares system identification of an own-voice response.

use super::{ImpulseResponse, IrKind};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

const NLMS_EPS: f64 = 1e-12;
const DIVERGENCE_NORM: f64 = 1e8;
const CHECK_EVERY: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmsConfig {
    pub taps: usize,
    pub step_size: f64,
    pub passes: usize,
    /// Divide the update by the regressor energy (NLMS).
    pub normalized: bool,
}

impl LmsConfig {
    pub fn new(taps: usize, step_size: f64, passes: usize) -> Self {
        Self {
            taps,
            step_size,
            passes,
            normalized: true,
        }
    }
}

impl Default for LmsConfig {
    fn default() -> Self {
        Self::new(256, 0.5, 2)
    }
}

/// Estimates `h` in `output = h * input` with normalized LMS.
pub fn estimate_ir_lms(
    input: &AudioBuffer,
    output: &AudioBuffer,
    taps: usize,
    step_size: f64,
    passes: usize,
) -> Result<ImpulseResponse> {
    estimate_ir_lms_with(input, output, &LmsConfig::new(taps, step_size, passes))
}

pub fn estimate_ir_lms_with(
    input: &AudioBuffer,
    output: &AudioBuffer,
    config: &LmsConfig,
) -> Result<ImpulseResponse> {
    if input.sample_rate() != output.sample_rate() {
        return Err(Error::SampleRateMismatch(
            input.sample_rate(),
            output.sample_rate(),
        ));
    }
    if input.len() != output.len() {
        return Err(Error::LengthMismatch(input.len(), output.len()));
    }
    if config.taps == 0 || config.passes == 0 {
        return Err(Error::InvalidArgument("taps and passes must be positive".into()));
    }
    let x = input.samples();
    let d = output.samples();
    let power = input.energy() / x.len().max(1) as f64;
    if x.is_empty() || power == 0.0 {
        return Err(Error::InsufficientExcitation);
    }
    let upper = if config.normalized {
        2.0
    } else {
        2.0 / (config.taps as f64 * power)
    };
    if !(config.step_size > 0.0 && config.step_size < upper) {
        return Err(Error::InvalidArgument(format!(
            "step size {} outside (0, {upper})",
            config.step_size
        )));
    }

    let m = config.taps;
    let mu = config.step_size;
    let mut w = vec![0.0f64; m];
    // Regressor held newest-first in a doubled ring so every window is a
    // contiguous slice.
    let mut ring = vec![0.0f64; 2 * m];
    for _ in 0..config.passes {
        ring.iter_mut().for_each(|v| *v = 0.0);
        let mut head = m;
        let mut reg_energy = 0.0f64;
        for (n, (&xn, &dn)) in x.iter().zip(d).enumerate() {
            head = if head == 0 { m - 1 } else { head - 1 };
            let leaving = ring[head];
            ring[head] = xn;
            ring[head + m] = xn;
            reg_energy += xn * xn - leaving * leaving;
            if n % CHECK_EVERY == 0 {
                reg_energy = ring[head..head + m].iter().map(|v| v * v).sum();
            }
            let window = &ring[head..head + m];
            let y: f64 = w.iter().zip(window).map(|(a, b)| a * b).sum();
            let e = dn - y;
            let gain = if config.normalized {
                mu * e / (NLMS_EPS + reg_energy.max(0.0))
            } else {
                mu * e
            };
            for (wk, xk) in w.iter_mut().zip(window) {
                *wk += gain * xk;
            }
            if n % CHECK_EVERY == 0 && diverged(&w) {
                return Err(Error::StepSizeTooLarge);
            }
        }
        if diverged(&w) {
            return Err(Error::StepSizeTooLarge);
        }
    }
    ImpulseResponse::new(w, input.sample_rate(), IrKind::OwnVoice)
}

fn diverged(w: &[f64]) -> bool {
    let norm_sq: f64 = w.iter().map(|v| v * v).sum();
    !norm_sq.is_finite() || norm_sq > DIVERGENCE_NORM * DIVERGENCE_NORM
}

//! Level measurement: plain RMS and ITU-T P.56 method B active speech level.

use super::{AudioBuffer, LevelDb};
use crate::error::{Error, Result};

/// Envelope smoothing time constant (s).
pub const ENVELOPE_TIME_CONSTANT: f64 = 0.03;
/// Hangover after the envelope drops below a threshold (s).
pub const HANGOVER: f64 = 0.2;
/// Margin between the active level and the activity threshold (dB).
pub const MARGIN_DB: f64 = 15.9;

// Thresholds are powers of two from 2^-LOW to 2^HIGH; spacing 6.02 dB.
const THRESH_LOW_EXP: i32 = 50;
const THRESH_HIGH_EXP: i32 = 4;

/// 10 log10 of the mean square. All-zero input gives [`LevelDb::SILENCE`].
pub fn rms_level_db(signal: &AudioBuffer) -> Result<LevelDb> {
    rms_level_db_slice(signal.samples())
}

pub fn rms_level_db_slice(samples: &[f64]) -> Result<LevelDb> {
    if samples.is_empty() {
        return Err(Error::EmptyOperand);
    }
    let ms = samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64;
    if ms == 0.0 {
        return Ok(LevelDb::SILENCE);
    }
    Ok(LevelDb::new(10.0 * ms.log10()))
}

/// Active speech level per P.56 method B.
///
/// A two-stage exponential envelope of |x| is compared against a ladder of
/// thresholds; each threshold accumulates an activity count (with hangover).
/// The level is the point where the activity-weighted level sits exactly
/// [`MARGIN_DB`] above the threshold, interpolated between ladder rungs.
pub fn active_speech_level(signal: &AudioBuffer) -> Result<LevelDb> {
    let fs = signal.sample_rate() as f64;
    let needed = (ENVELOPE_TIME_CONSTANT * fs).ceil() as usize;
    if signal.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: signal.len(),
        });
    }

    let g = (-1.0 / (fs * ENVELOPE_TIME_CONSTANT)).exp();
    let hang_max = (HANGOVER * fs).ceil() as u64;
    let thresholds: Vec<f64> = (-THRESH_LOW_EXP..=THRESH_HIGH_EXP)
        .map(|e| 2f64.powi(e))
        .collect();
    let mut activity = vec![0u64; thresholds.len()];
    // Hangover counters start exhausted so leading silence is not counted.
    let mut hang = vec![hang_max; thresholds.len()];

    let (mut p, mut q) = (0.0f64, 0.0f64);
    let mut sum_sq = 0.0f64;
    for &x in signal.samples() {
        sum_sq += x * x;
        p = g * p + (1.0 - g) * x.abs();
        q = g * q + (1.0 - g) * p;
        for ((c, a), h) in thresholds.iter().zip(&mut activity).zip(&mut hang) {
            if q >= *c {
                *a += 1;
                *h = 0;
            } else if *h < hang_max {
                *a += 1;
                *h += 1;
            }
        }
    }

    if sum_sq == 0.0 || activity[0] == 0 {
        return Ok(LevelDb::SILENCE);
    }

    let level_at = |j: usize| 10.0 * (sum_sq / activity[j] as f64).log10();
    let thresh_db = |j: usize| 20.0 * thresholds[j].log10();

    let mut prev: Option<(f64, f64)> = None;
    for j in 0..thresholds.len() {
        if activity[j] == 0 {
            break;
        }
        let a = level_at(j);
        let delta = a - thresh_db(j);
        if delta <= MARGIN_DB {
            return Ok(LevelDb::new(match prev {
                None => a,
                Some((a_prev, d_prev)) => {
                    let frac = (d_prev - MARGIN_DB) / (d_prev - delta);
                    a_prev + frac * (a - a_prev)
                }
            }));
        }
        prev = Some((a, delta));
    }
    // Margin never reached within the ladder: use the last active rung.
    Ok(LevelDb::new(prev.map(|(a, _)| a).unwrap_or(f64::NEG_INFINITY)))
}

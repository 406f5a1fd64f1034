//! Blind SNR estimate used to select clean recordings.

use serde::{Deserialize, Serialize};

use crate::audio::{AudioBuffer, LevelDb};
use crate::error::{Error, Result};

/// Frame-energy SNR estimator: the noise floor is the mean of the quietest
/// frames, speech is every frame well above it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimator {
    pub frame_secs: f64,
    /// Fraction of frames (lowest energies) averaged into the floor.
    pub floor_fraction: f64,
    /// A frame is active when its energy exceeds `activity_factor * floor`.
    pub activity_factor: f64,
    pub cap_db: f64,
}

impl Default for SnrEstimator {
    fn default() -> Self {
        Self {
            frame_secs: 0.03,
            floor_fraction: 0.1,
            activity_factor: 10.0,
            cap_db: 100.0,
        }
    }
}

impl SnrEstimator {
    pub fn estimate(&self, signal: &AudioBuffer) -> Result<LevelDb> {
        let fs = signal.sample_rate() as f64;
        let needed = (0.2 * fs).ceil() as usize;
        if signal.len() < needed {
            return Err(Error::TooShort {
                needed,
                got: signal.len(),
            });
        }
        let frame = ((self.frame_secs * fs).round() as usize).max(1);
        let mut energies: Vec<f64> = signal
            .samples()
            .chunks_exact(frame)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() / frame as f64)
            .collect();
        if energies.iter().all(|&e| e == 0.0) {
            return Ok(LevelDb::SILENCE);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mut sorted = energies.clone();
        sorted.sort_by(f64::total_cmp);
        let n_floor = ((sorted.len() as f64 * self.floor_fraction).ceil() as usize).max(1);
        let floor = mean(&sorted[..n_floor]);
        if floor == 0.0 {
            return Ok(LevelDb::new(self.cap_db));
        }
        energies.retain(|&e| e > self.activity_factor * floor);
        // Nothing clears the threshold: the recording is noise-like throughout.
        let active = if energies.is_empty() {
            mean(&sorted)
        } else {
            mean(&energies)
        };
        Ok(LevelDb::new((10.0 * (active / floor).log10()).min(self.cap_db)))
    }
}

/// [`SnrEstimator::estimate`] with default thresholds.
pub fn a_posteriori_snr(signal: &AudioBuffer) -> Result<LevelDb> {
    SnrEstimator::default().estimate(signal)
}

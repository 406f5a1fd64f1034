use std::fmt;

use crate::error::{Error, Result};

/// Canonical sample rate for every synthesis path.
pub const SAMPLE_RATE: u32 = 16_000;

/// Mono sample sequence at a fixed rate. Full scale is 1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    /// Builds a buffer at [`SAMPLE_RATE`].
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, SAMPLE_RATE)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
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

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Sample-wise sum; both buffers must agree on rate and length.
    pub fn add(&self, other: &AudioBuffer) -> Result<Self> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::SampleRateMismatch(self.sample_rate, other.sample_rate));
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch(self.len(), other.len()));
        }
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            sample_rate: self.sample_rate,
        })
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// A level in dB relative to full scale. Silence is `-inf`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LevelDb(f64);

impl LevelDb {
    pub const SILENCE: LevelDb = LevelDb(f64::NEG_INFINITY);

    pub fn new(db: f64) -> Self {
        LevelDb(db)
    }

    pub fn db(self) -> f64 {
        self.0
    }

    pub fn is_silence(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// The finite value, or [`Error::Silence`] for the sentinel.
    pub fn finite(self) -> Result<f64> {
        if self.is_silence() {
            Err(Error::Silence)
        } else {
            Ok(self.0)
        }
    }
}

impl fmt::Display for LevelDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_silence() {
            write!(f, "-inf dB")
        } else {
            write!(f, "{:.2} dB", self.0)
        }
    }
}

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::AudioBuffer;
use crate::bcresnet::{BcResNet, ModelConfig};
use crate::error::{Error, Result};
use crate::mel::{log_mel, stack_channels, SAMPLE_RATE};

pub const WARMUP_RUNS: usize = 5;
pub const MIN_TRIALS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct RtfMeasurement {
    /// Median of the per-trial ratios.
    pub median: f64,
    pub trials: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Real-time factor of feature extraction plus one forward pass on
/// `inputs` (one buffer per microphone), median over `trials` runs after
/// [`WARMUP_RUNS`] discarded runs.
pub fn measure_rtf(model: &BcResNet<f32>, inputs: &[AudioBuffer], trials: usize) -> Result<RtfMeasurement> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "rtf needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let first = inputs.first().ok_or(Error::EmptyOperand)?;
    if first.is_empty() || inputs.iter().any(|b| b.len() != first.len()) {
        return Err(Error::EmptyOperand);
    }
    if inputs.len() != model.config().in_channels {
        return Err(Error::ShapeMismatch(format!(
            "{} microphone inputs for a {}-channel model",
            inputs.len(),
            model.config().in_channels
        )));
    }
    let duration = first.duration_secs();
    let run = || -> Result<f64> {
        let start = Instant::now();
        let maps = inputs.iter().map(log_mel).collect::<Result<Vec<_>>>()?;
        let logits = model.predict(&stack_channels(&maps)?)?;
        std::hint::black_box(logits);
        Ok(start.elapsed().as_secs_f64())
    };
    for _ in 0..WARMUP_RUNS {
        run()?;
    }
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let secs = run()?;
        if secs <= 0.0 {
            return Err(Error::TimingResolution);
        }
        ratios.push(secs / duration);
    }
    Ok(RtfMeasurement {
        median: median(ratios.clone()),
        trials: ratios,
    })
}

/// RTF of a freshly initialized model on one second of noise per microphone.
pub fn measure_rtf_for(tau: f64, mic_count: usize, trials: usize, seed: u64) -> Result<RtfMeasurement> {
    let model = BcResNet::<f32>::new(ModelConfig::new(tau, mic_count), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = (0..mic_count)
        .map(|_| {
            let s = (0..SAMPLE_RATE as usize).map(|_| rng.random_range(-0.1..0.1)).collect();
            AudioBuffer::new(s, SAMPLE_RATE)
        })
        .collect::<Result<Vec<_>>>()?;
    measure_rtf(&model, &inputs, trials)
}

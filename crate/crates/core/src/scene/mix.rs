//! Own voice plus calibrated noise at every microphone.

use std::collections::BTreeMap;

use rand::Rng;

use super::scenario::{render_noise_at_mic, NoiseScenario};
use crate::audio::{active_speech_level, convolve, rms_level_db, AudioBuffer};
use crate::error::{Error, Result};
use crate::tflab::{perturb_tf, Loudspeaker, Mic, PerturbationParams, TransferFunctionSet};

/// Speech level assumed for items that carry no own voice (dB full scale).
pub const NOMINAL_SPEECH_LEVEL_DB: f64 = -26.0;

/// Gain that puts `noise_level_db` exactly `target_snr_db` below `speech_level_db`.
pub fn alpha_for_levels(speech_level_db: f64, noise_level_db: f64, target_snr_db: f64) -> f64 {
    10f64.powf((speech_level_db - noise_level_db - target_snr_db) / 20.0)
}

/// Noise gain from the front-mic active speech level and noise RMS level.
pub fn compute_alpha(
    front_clean: &AudioBuffer,
    front_noise: &AudioBuffer,
    target_snr_db: f64,
) -> Result<f64> {
    let speech = active_speech_level(front_clean)?.finite()?;
    let noise = rms_level_db(front_noise)?.finite()?;
    Ok(alpha_for_levels(speech, noise, target_snr_db))
}

/// Separable components of one rendered utterance.
///
/// The mixture at a mic is `clean + alpha * noise`; `alpha` is shared by all
/// mics and was calibrated at the front mic.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthesis {
    pub clean: BTreeMap<Mic, AudioBuffer>,
    /// Noise images before scaling.
    pub noise: BTreeMap<Mic, AudioBuffer>,
    pub alpha: f64,
}

impl Synthesis {
    pub fn mix(&self, mic: Mic) -> AudioBuffer {
        self.mix_with_alpha(mic, self.alpha)
    }

    pub fn mix_with_alpha(&self, mic: Mic, alpha: f64) -> AudioBuffer {
        let clean = &self.clean[&mic];
        let noise = &self.noise[&mic];
        let samples = clean
            .samples()
            .iter()
            .zip(noise.samples())
            .map(|(x, v)| x + alpha * v)
            .collect();
        AudioBuffer::new(samples, clean.sample_rate()).expect("finite components")
    }

    pub fn scaled_noise(&self, mic: Mic) -> AudioBuffer {
        self.noise[&mic].scaled(self.alpha)
    }

    pub fn mixes(&self) -> BTreeMap<Mic, AudioBuffer> {
        self.clean.keys().map(|&m| (m, self.mix(m))).collect()
    }
}

/// Renders `x` through the own-voice paths and adds the scenario's noise,
/// scaled so the front mic sits at `target_snr_db`.
///
/// With `perturb`, every response is perturbed once for this utterance
/// before use.
pub fn synthesize_utterance<R: Rng + ?Sized>(
    x: &AudioBuffer,
    tfs: &TransferFunctionSet,
    scenario: &NoiseScenario,
    target_snr_db: f64,
    perturb: Option<&PerturbationParams>,
    rng: &mut R,
) -> Result<Synthesis> {
    synthesize(Some(x), x.len(), tfs, scenario, target_snr_db, perturb, rng)
}

/// Noise-only item; the noise is scaled against [`NOMINAL_SPEECH_LEVEL_DB`].
pub fn synthesize_ambient<R: Rng + ?Sized>(
    length: usize,
    tfs: &TransferFunctionSet,
    scenario: &NoiseScenario,
    target_snr_db: f64,
    perturb: Option<&PerturbationParams>,
    rng: &mut R,
) -> Result<Synthesis> {
    synthesize(None, length, tfs, scenario, target_snr_db, perturb, rng)
}

fn synthesize<R: Rng + ?Sized>(
    x: Option<&AudioBuffer>,
    length: usize,
    tfs: &TransferFunctionSet,
    scenario: &NoiseScenario,
    target_snr_db: f64,
    perturb: Option<&PerturbationParams>,
    rng: &mut R,
) -> Result<Synthesis> {
    if let Some(x) = x {
        if x.sample_rate() != tfs.sample_rate() {
            return Err(Error::SampleRateMismatch(x.sample_rate(), tfs.sample_rate()));
        }
    }
    let perturbed;
    let tfs = match perturb {
        Some(params) => {
            perturbed = perturb_set(tfs, params, rng)?;
            &perturbed
        }
        None => tfs,
    };
    let mut clean = BTreeMap::new();
    let mut noise = BTreeMap::new();
    for mic in Mic::ALL {
        let c = match x {
            Some(x) => convolve(x, tfs.ovtf(mic)?.taps(), length)?,
            None => AudioBuffer::zeros(length, tfs.sample_rate()),
        };
        clean.insert(mic, c);
        noise.insert(mic, render_noise_at_mic(scenario, tfs, mic, length)?);
    }
    let alpha = match x {
        Some(_) => compute_alpha(&clean[&Mic::Front], &noise[&Mic::Front], target_snr_db)?,
        None => {
            let nl = rms_level_db(&noise[&Mic::Front])?.finite()?;
            alpha_for_levels(NOMINAL_SPEECH_LEVEL_DB, nl, target_snr_db)
        }
    };
    Ok(Synthesis {
        clean,
        noise,
        alpha,
    })
}

/// Perturbs every response of a set; draw order is own-voice paths by mic,
/// then head-related paths by loudspeaker and mic.
pub fn perturb_set<R: Rng + ?Sized>(
    tfs: &TransferFunctionSet,
    params: &PerturbationParams,
    rng: &mut R,
) -> Result<TransferFunctionSet> {
    let mut ovtf = BTreeMap::new();
    for mic in Mic::ALL {
        ovtf.insert(mic, perturb_tf(tfs.ovtf(mic)?, params, rng)?);
    }
    let mut hrtf = BTreeMap::new();
    for ls in Loudspeaker::all() {
        for mic in Mic::ALL {
            hrtf.insert((ls, mic), perturb_tf(tfs.hrtf(ls, mic)?, params, rng)?);
        }
    }
    TransferFunctionSet::new(tfs.subject_id(), ovtf, hrtf)
}

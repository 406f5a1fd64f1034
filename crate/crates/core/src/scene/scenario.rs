//! Point-source noise scenes and their rendering at a microphone.

use rand::seq::index::sample;
use rand::Rng;

use super::ssn::{make_ssn, LongTermSpectrum};
use super::NoiseType;
use crate::audio::{convolve_slices, AudioBuffer};
use crate::error::{Error, Result};
use crate::tflab::{Loudspeaker, Mic, TransferFunctionSet, NUM_LOUDSPEAKERS};

const BABBLE_PER_SEX: usize = 5;

/// Source material for one split. Splits must not share recordings.
#[derive(Clone, Debug)]
pub struct NoiseBank {
    pub female: Vec<AudioBuffer>,
    pub male: Vec<AudioBuffer>,
    /// Left/right channel pairs.
    pub music: Vec<(AudioBuffer, AudioBuffer)>,
    pub tv: Vec<AudioBuffer>,
    /// Reference for speech-shaped noise.
    pub speech_spectrum: LongTermSpectrum,
}

/// A noise segment and where it is played.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSource {
    pub signal: AudioBuffer,
    pub loudspeaker: Loudspeaker,
    /// Provenance, e.g. `female[3]@1200` or `ssn`.
    pub origin: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseScenario {
    pub noise_type: NoiseType,
    pub sources: Vec<NoiseSource>,
}

impl NoiseScenario {
    /// Checks the type-specific source count and distinct loudspeakers.
    pub fn validate(&self) -> Result<()> {
        let n = self.sources.len();
        let expected = match self.noise_type {
            NoiseType::Babble => 2 * BABBLE_PER_SEX,
            NoiseType::Music => 2,
            NoiseType::Ssn => NUM_LOUDSPEAKERS as usize,
            NoiseType::Interferer | NoiseType::Tv => 1,
        };
        if n != expected {
            return Err(Error::InvalidArgument(format!(
                "{} scenario needs {expected} sources, has {n}",
                self.noise_type
            )));
        }
        let mut seen = [false; NUM_LOUDSPEAKERS as usize + 1];
        for s in &self.sources {
            let slot = &mut seen[s.loudspeaker.index() as usize];
            if *slot {
                return Err(Error::InvalidArgument("loudspeaker used twice".into()));
            }
            *slot = true;
        }
        match self.noise_type {
            NoiseType::Music if self.sources[1].loudspeaker != self.sources[0].loudspeaker.adjacent() => {
                Err(Error::InvalidArgument("music channels must be adjacent".into()))
            }
            NoiseType::Tv if self.sources[0].loudspeaker != Loudspeaker::FRONT => {
                Err(Error::InvalidArgument("tv must play from the front".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn houses(&self) -> usize {
        self.sources.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioOptions {
    pub segment_len: usize,
    /// One SSN realisation on every loudspeaker instead of independent ones.
    pub shared_ssn: bool,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            segment_len: 16_000,
            shared_ssn: false,
        }
    }
}

/// Draws sources, loudspeakers and segment offsets for one utterance.
pub fn compose_scenario<R: Rng + ?Sized>(
    noise_type: NoiseType,
    bank: &NoiseBank,
    options: &ScenarioOptions,
    rng: &mut R,
) -> Result<NoiseScenario> {
    let len = options.segment_len;
    let ls = |i: usize| Loudspeaker::new(i as u8 + 1).expect("index in range");
    let random_ls = |rng: &mut R| ls(rng.random_range(0..NUM_LOUDSPEAKERS as usize));
    let sources = match noise_type {
        NoiseType::Babble => {
            let female = pick_distinct(&bank.female, BABBLE_PER_SEX, "female talkers", rng)?;
            let male = pick_distinct(&bank.male, BABBLE_PER_SEX, "male talkers", rng)?;
            let places = sample(rng, NUM_LOUDSPEAKERS as usize, 2 * BABBLE_PER_SEX);
            let talkers: Vec<_> = female
                .into_iter()
                .map(|i| ("female", &bank.female, i))
                .chain(male.into_iter().map(|i| ("male", &bank.male, i)))
                .collect();
            let mut out = Vec::with_capacity(talkers.len());
            for ((pool, signals, i), place) in talkers.into_iter().zip(places.iter()) {
                out.push(cut(&signals[i], format!("{pool}[{i}]"), ls(place), len, rng)?);
            }
            out
        }
        NoiseType::Music => {
            let i = pick_one(bank.music.len(), "music", rng)?;
            let (left, right) = &bank.music[i];
            let first = random_ls(rng);
            // Both channels share one offset so the pair stays aligned.
            let offset = random_offset(left.len().min(right.len()), len, "music", rng)?;
            vec![
                segment(left, format!("music[{i}].l@{offset}"), first, offset, len),
                segment(right, format!("music[{i}].r@{offset}"), first.adjacent(), offset, len),
            ]
        }
        NoiseType::Ssn => {
            let shared = if options.shared_ssn {
                Some(make_ssn(&bank.speech_spectrum, len, rng)?)
            } else {
                None
            };
            let mut out = Vec::with_capacity(NUM_LOUDSPEAKERS as usize);
            for l in Loudspeaker::all() {
                let signal = match &shared {
                    Some(s) => s.clone(),
                    None => make_ssn(&bank.speech_spectrum, len, rng)?,
                };
                out.push(NoiseSource {
                    signal,
                    loudspeaker: l,
                    origin: "ssn".into(),
                });
            }
            out
        }
        NoiseType::Interferer => {
            let (pool, signals) = if rng.random_bool(0.5) {
                ("female", &bank.female)
            } else {
                ("male", &bank.male)
            };
            let i = pick_one(signals.len(), pool, rng)?;
            let place = random_ls(rng);
            vec![cut(&signals[i], format!("{pool}[{i}]"), place, len, rng)?]
        }
        NoiseType::Tv => {
            let i = pick_one(bank.tv.len(), "tv", rng)?;
            vec![cut(&bank.tv[i], format!("tv[{i}]"), Loudspeaker::FRONT, len, rng)?]
        }
    };
    let scenario = NoiseScenario {
        noise_type,
        sources,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn pick_one<R: Rng + ?Sized>(available: usize, what: &str, rng: &mut R) -> Result<usize> {
    if available == 0 {
        return Err(Error::InsufficientMaterial(format!("no {what} recordings")));
    }
    Ok(rng.random_range(0..available))
}

fn pick_distinct<R: Rng + ?Sized>(
    pool: &[AudioBuffer],
    count: usize,
    what: &str,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if pool.len() < count {
        return Err(Error::InsufficientMaterial(format!(
            "need {count} {what}, bank has {}",
            pool.len()
        )));
    }
    Ok(sample(rng, pool.len(), count).into_vec())
}

fn random_offset<R: Rng + ?Sized>(available: usize, len: usize, what: &str, rng: &mut R) -> Result<usize> {
    if available < len {
        return Err(Error::InsufficientMaterial(format!(
            "{what} recording has {available} samples, need {len}"
        )));
    }
    Ok(rng.random_range(0..=available - len))
}

fn segment(
    signal: &AudioBuffer,
    origin: String,
    loudspeaker: Loudspeaker,
    offset: usize,
    len: usize,
) -> NoiseSource {
    let samples = signal.samples()[offset..offset + len].to_vec();
    NoiseSource {
        signal: AudioBuffer::new(samples, signal.sample_rate()).expect("slice of a valid buffer"),
        loudspeaker,
        origin,
    }
}

fn cut<R: Rng + ?Sized>(
    signal: &AudioBuffer,
    name: String,
    loudspeaker: Loudspeaker,
    len: usize,
    rng: &mut R,
) -> Result<NoiseSource> {
    let offset = random_offset(signal.len(), len, &name, rng)?;
    Ok(segment(signal, format!("{name}@{offset}"), loudspeaker, offset, len))
}

/// Unscaled noise image at `mic`: the sum of every source convolved with
/// its loudspeaker-to-mic response, truncated to `length`.
pub fn render_noise_at_mic(
    scenario: &NoiseScenario,
    tfs: &TransferFunctionSet,
    mic: Mic,
    length: usize,
) -> Result<AudioBuffer> {
    let mut acc = vec![0.0; length];
    for src in &scenario.sources {
        if src.signal.len() < length {
            return Err(Error::InsufficientMaterial(format!(
                "{} segment has {} samples, need {length}",
                src.origin,
                src.signal.len()
            )));
        }
        if src.signal.sample_rate() != tfs.sample_rate() {
            return Err(Error::SampleRateMismatch(src.signal.sample_rate(), tfs.sample_rate()));
        }
        let ir = tfs.hrtf(src.loudspeaker, mic)?;
        let image = convolve_slices(src.signal.samples(), ir.taps(), length)?;
        for (a, v) in acc.iter_mut().zip(image) {
            *a += v;
        }
    }
    AudioBuffer::new(acc, tfs.sample_rate())
}

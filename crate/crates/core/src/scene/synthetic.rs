//! Synthetic stand-ins for measured responses, recorded speech and noise.
//!
//! The transfer functions encode the physics that matters for the in-ear
//! microphone: its own-voice path is band-limited to 2.2 kHz while external
//! sound reaches it 20 dB down; the behind-the-ear paths are full-band.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::dataset::CleanUtterance;
use super::scenario::NoiseBank;
use super::ssn::LongTermSpectrum;
use super::ClassLabel;
use crate::audio::{active_speech_level, AudioBuffer, SAMPLE_RATE};
use crate::error::Result;
use crate::tflab::{ImpulseResponse, IrKind, Loudspeaker, Mic, TransferFunctionSet};

pub const IEC_CUTOFF_HZ: f64 = 2200.0;
pub const IEC_NOISE_ATTENUATION_DB: f64 = 20.0;
pub const SYNTH_IR_TAPS: usize = 64;
/// Target active speech level of generated utterances (dB full scale).
pub const SPEECH_LEVEL_DB: f64 = -26.0;

/// Windowed-sinc low-pass with unit DC gain.
pub fn lowpass_fir(cutoff_hz: f64, taps: usize, sample_rate: u32) -> Vec<f64> {
    let fc = cutoff_hz / sample_rate as f64;
    let mid = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let w = 0.54 - 0.46 * (2.0 * PI * i as f64 / (taps - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    h
}

/// Direct path at `delay` with gain `gain` plus a diffuse tail 25 dB down.
fn direct_with_tail<R: Rng>(delay: usize, gain: f64, taps: usize, rng: &mut R) -> Vec<f64> {
    let mut h = vec![0.0; taps];
    h[delay] = gain;
    let tail_gain = gain * 10f64.powf(-25.0 / 20.0);
    for (k, v) in h.iter_mut().enumerate().skip(delay + 1) {
        let decay = (-((k - delay) as f64) / 8.0).exp();
        *v += tail_gain * decay * rng.sample::<f64, _>(StandardNormal);
    }
    h
}

fn filter(h: &[f64], lp: &[f64], taps: usize) -> Vec<f64> {
    let mut out = vec![0.0; taps];
    for (i, &a) in h.iter().enumerate() {
        for (j, &b) in lp.iter().enumerate() {
            if i + j < taps {
                out[i + j] += a * b;
            }
        }
    }
    out
}

/// A complete transfer-function set for one synthetic subject.
pub fn synthetic_tf_set(subject_id: &str, seed: u64) -> Result<TransferFunctionSet> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let taps = SYNTH_IR_TAPS;
    let fs = SAMPLE_RATE;
    let lp = lowpass_fir(IEC_CUTOFF_HZ, 31, fs);
    let ir = |taps: Vec<f64>, kind| ImpulseResponse::new(taps, fs, kind);

    let mut ovtf = BTreeMap::new();
    let occlusion_gain = rng.random_range(1.2..1.6);
    let iec = filter(&direct_with_tail(1, occlusion_gain, taps, &mut rng), &lp, taps);
    ovtf.insert(Mic::Iec, ir(iec, IrKind::OwnVoice)?);
    let front_gain = rng.random_range(0.8..1.0);
    ovtf.insert(
        Mic::Front,
        ir(direct_with_tail(3, front_gain, taps, &mut rng), IrKind::OwnVoice)?,
    );
    ovtf.insert(
        Mic::Rear,
        ir(direct_with_tail(4, 0.9 * front_gain, taps, &mut rng), IrKind::OwnVoice)?,
    );

    let leak = 10f64.powf(-IEC_NOISE_ATTENUATION_DB / 20.0);
    let mut hrtf = BTreeMap::new();
    for ls in Loudspeaker::all() {
        let az = ls.azimuth_deg().to_radians();
        // Sources on the far side are shadowed by the head.
        let shadow = 0.75 + 0.25 * az.sin();
        let base = 6 + (3.0 * (1.0 - az.cos())).round() as usize;
        let rear_extra = (1.5 * (1.0 + az.cos())).round() as usize;
        let front = direct_with_tail(base, shadow, taps, &mut rng);
        let rear = direct_with_tail(base + rear_extra, shadow, taps, &mut rng);
        let iec: Vec<f64> = direct_with_tail(base + 1, shadow, taps, &mut rng)
            .into_iter()
            .map(|v| v * leak)
            .collect();
        hrtf.insert((ls, Mic::Front), ir(front, IrKind::Hrtf)?);
        hrtf.insert((ls, Mic::Rear), ir(rear, IrKind::Hrtf)?);
        hrtf.insert((ls, Mic::Iec), ir(iec, IrKind::Hrtf)?);
    }
    TransferFunctionSet::new(subject_id, ovtf, hrtf)
}

/// Vowel formants (Hz).
const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [660.0, 1720.0, 2410.0],
];

#[derive(Clone, Copy, Debug, PartialEq)]
enum Onset {
    None,
    /// Band of noise centred at the given frequency.
    Fricative(f64),
    Burst,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Syllable {
    onset: Onset,
    vowel: usize,
    /// Relative length.
    length: f64,
    /// Pitch glide over the vowel (ratio end/start).
    glide: f64,
}

/// Voice of one synthetic talker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Voice {
    pub f0: f64,
    pub formant_scale: f64,
    pub rate: f64,
}

impl Voice {
    pub fn random<R: Rng + ?Sized>(female: bool, rng: &mut R) -> Self {
        Self {
            f0: if female {
                rng.random_range(170.0..250.0)
            } else {
                rng.random_range(90.0..140.0)
            },
            formant_scale: if female {
                rng.random_range(1.05..1.18)
            } else {
                rng.random_range(0.9..1.02)
            },
            rate: rng.random_range(0.85..1.15),
        }
    }
}

fn random_syllable<R: Rng + ?Sized>(rng: &mut R) -> Syllable {
    let onset = match rng.random_range(0..3) {
        0 => Onset::None,
        1 => Onset::Fricative(rng.random_range(2500.0..6500.0)),
        _ => Onset::Burst,
    };
    Syllable {
        onset,
        vowel: rng.random_range(0..VOWELS.len()),
        length: rng.random_range(0.7..1.3),
        glide: rng.random_range(0.8..1.2),
    }
}

/// Fixed syllable pattern per keyword; the same for every talker.
fn keyword_pattern(keyword: usize) -> Vec<Syllable> {
    let mut rng = ChaCha20Rng::seed_from_u64(0x6b77_0000 + keyword as u64);
    let count = 1 + keyword % 2;
    (0..count).map(|_| random_syllable(&mut rng)).collect()
}

const SYLLABLE_SECS: f64 = 0.2;

fn render_syllables<R: Rng + ?Sized>(syllables: &[Syllable], voice: &Voice, rng: &mut R) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let mut out = Vec::new();
    for syl in syllables {
        let jitter = rng.random_range(0.93..1.07);
        let n_vowel = (SYLLABLE_SECS * syl.length * jitter / voice.rate * fs) as usize;
        match syl.onset {
            Onset::None => {}
            Onset::Fricative(centre) => {
                out.extend(noise_band(centre * voice.formant_scale, 0.06, 0.25, rng));
            }
            Onset::Burst => {
                out.extend(noise_band(1500.0, 0.012, 0.6, rng));
                out.extend(std::iter::repeat_n(0.0, (0.02 * fs) as usize));
            }
        }
        let formants = VOWELS[syl.vowel].map(|f| f * voice.formant_scale * rng.random_range(0.97..1.03));
        out.extend(vowel(&formants, voice.f0, syl.glide, n_vowel));
    }
    out
}

fn vowel(formants: &[f64; 3], f0: f64, glide: f64, n: usize) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let bandwidths = [90.0, 110.0, 160.0];
    let envelope = |f: f64| -> f64 {
        formants
            .iter()
            .zip(bandwidths)
            .map(|(fc, bw)| 1.0 / (1.0 + ((f - fc) / bw).powi(2)))
            .sum::<f64>()
            * (f0 / f.max(f0)).sqrt()
    };
    let max_harm = (4000.0 / (f0 * glide.max(1.0))).floor().max(1.0) as usize;
    let mut phase = 0.0f64;
    let ramp = (0.02 * fs) as usize;
    (0..n)
        .map(|i| {
            let pitch = f0 * glide.powf(i as f64 / n as f64);
            phase += 2.0 * PI * pitch / fs;
            let s: f64 = (1..=max_harm)
                .map(|k| envelope(k as f64 * pitch) * (k as f64 * phase).sin())
                .sum();
            let edge = i.min(n - 1 - i);
            let gain = if edge < ramp {
                0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            s * gain
        })
        .collect()
}

/// Noise through a two-pole resonator at `centre` Hz.
fn noise_band<R: Rng + ?Sized>(centre: f64, secs: f64, level: f64, rng: &mut R) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let n = (secs * fs) as usize;
    let r: f64 = 0.9;
    let theta = 2.0 * PI * centre / fs;
    let (a1, a2) = (2.0 * r * theta.cos(), -r * r);
    let (mut y1, mut y2) = (0.0, 0.0);
    (0..n)
        .map(|i| {
            let x: f64 = rng.sample(StandardNormal);
            let y = x + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = y;
            let env = (PI * i as f64 / n as f64).sin();
            level * 0.2 * y * env
        })
        .collect()
}

/// Places `word` at a random offset in a buffer of `len` samples and sets
/// its active level to `level_db`.
fn place<R: Rng + ?Sized>(word: Vec<f64>, len: usize, level_db: f64, rng: &mut R) -> Result<AudioBuffer> {
    let mut out = vec![0.0; len];
    let word = &word[..word.len().min(len)];
    let start = rng.random_range(0..=len - word.len());
    out[start..start + word.len()].copy_from_slice(word);
    let buf = AudioBuffer::new(out, SAMPLE_RATE)?;
    let asl = active_speech_level(&buf)?.finite()?;
    Ok(buf.scaled(10f64.powf((level_db - asl) / 20.0)))
}

/// One second of a synthetic talker saying `label`. Filler items are a fresh
/// random syllable string, keywords follow a fixed per-word pattern.
pub fn synthetic_word<R: Rng + ?Sized>(label: ClassLabel, voice: &Voice, rng: &mut R) -> Result<AudioBuffer> {
    let syllables = match label {
        ClassLabel::Keyword(k) => keyword_pattern(k as usize),
        _ => {
            let n = rng.random_range(1..=2);
            (0..n).map(|_| random_syllable(rng)).collect()
        }
    };
    let word = render_syllables(&syllables, voice, rng);
    let level = SPEECH_LEVEL_DB + rng.random_range(-3.0..3.0);
    place(word, SAMPLE_RATE as usize, level, rng)
}

/// Specification of a synthetic keyword corpus for one split.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub classes: Vec<ClassLabel>,
    pub per_class: usize,
    pub speakers: usize,
    pub seed: u64,
    /// Prefix of utterance and speaker ids; keeps splits disjoint.
    pub prefix: String,
}

/// Labelled utterances with speakers drawn round-robin. Ambient entries
/// carry silence, since they hold no own voice.
pub fn synthetic_corpus(spec: &CorpusSpec) -> Result<Vec<CleanUtterance>> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let voices: Vec<Voice> = (0..spec.speakers.max(1))
        .map(|s| Voice::random(s % 2 == 0, &mut rng))
        .collect();
    let mut out = Vec::with_capacity(spec.classes.len() * spec.per_class);
    for &label in &spec.classes {
        for i in 0..spec.per_class {
            let s = (i + label.index()) % voices.len();
            let audio = if label.has_speech() {
                synthetic_word(label, &voices[s], &mut rng)?
            } else {
                AudioBuffer::zeros(SAMPLE_RATE as usize, SAMPLE_RATE)
            };
            out.push(CleanUtterance {
                utt_id: format!("{}{}_{i:04}", spec.prefix, label.name()),
                label,
                speaker: format!("{}spk{s:03}", spec.prefix),
                audio,
            });
        }
    }
    Ok(out)
}

/// Continuous talker stream: random syllables separated by short pauses.
pub fn synthetic_talker<R: Rng + ?Sized>(female: bool, secs: f64, rng: &mut R) -> Result<AudioBuffer> {
    let voice = Voice::random(female, rng);
    let n = (secs * SAMPLE_RATE as f64) as usize;
    let mut out = Vec::with_capacity(n + SAMPLE_RATE as usize);
    while out.len() < n {
        let syllables: Vec<Syllable> = (0..rng.random_range(1..=3)).map(|_| random_syllable(rng)).collect();
        out.extend(render_syllables(&syllables, &voice, rng));
        let pause = rng.random_range(0.03..0.15) * SAMPLE_RATE as f64;
        out.extend(std::iter::repeat_n(0.0, pause as usize));
    }
    out.truncate(n);
    normalize(out)
}

fn normalize(samples: Vec<f64>) -> Result<AudioBuffer> {
    let buf = AudioBuffer::new(samples, SAMPLE_RATE)?;
    let asl = active_speech_level(&buf)?.finite()?;
    Ok(buf.scaled(10f64.powf((SPEECH_LEVEL_DB - asl) / 20.0)))
}

/// Stereo melody of decaying harmonic notes; the channels weight the
/// voices differently.
pub fn synthetic_music<R: Rng + ?Sized>(secs: f64, rng: &mut R) -> Result<(AudioBuffer, AudioBuffer)> {
    let fs = SAMPLE_RATE as f64;
    let n = (secs * fs) as usize;
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    let tempo = rng.random_range(0.15..0.4);
    for voice in 0..3 {
        let pan = rng.random_range(0.2..0.8);
        let base_midi = 45 + 12 * voice as i32;
        let mut t = 0usize;
        while t < n {
            let dur = (tempo * fs * rng.random_range(1..=3) as f64) as usize;
            let midi = base_midi + rng.random_range(0..12);
            let f = 440.0 * 2f64.powf((midi - 69) as f64 / 12.0);
            for i in 0..dur.min(n - t) {
                let tt = i as f64 / fs;
                let env = (-tt * 4.0).exp() * (1.0 - (-tt * 200.0).exp());
                let s: f64 = (1..=5)
                    .map(|k| (2.0 * PI * f * k as f64 * tt).sin() / k as f64)
                    .sum::<f64>()
                    * env;
                left[t + i] += pan * s;
                right[t + i] += (1.0 - pan) * s;
            }
            t += dur;
        }
    }
    Ok((normalize(left)?, normalize(right)?))
}

/// Alternating speech and music segments.
pub fn synthetic_tv<R: Rng + ?Sized>(secs: f64, rng: &mut R) -> Result<AudioBuffer> {
    let n = (secs * SAMPLE_RATE as f64) as usize;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let seg = rng.random_range(0.5..1.5);
        if rng.random_bool(0.6) {
            out.extend(synthetic_talker(rng.random_bool(0.5), seg, rng)?.into_samples());
        } else {
            out.extend(synthetic_music(seg, rng)?.0.into_samples());
        }
    }
    out.truncate(n);
    normalize(out)
}

/// Counts and durations of a synthetic noise bank.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BankSpec {
    pub talkers_per_sex: usize,
    pub music: usize,
    pub tv: usize,
    pub secs: f64,
    pub seed: u64,
}

impl Default for BankSpec {
    fn default() -> Self {
        Self {
            talkers_per_sex: 6,
            music: 3,
            tv: 3,
            secs: 4.0,
            seed: 0,
        }
    }
}

pub fn synthetic_noise_bank(spec: &BankSpec) -> Result<NoiseBank> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let female = (0..spec.talkers_per_sex)
        .map(|_| synthetic_talker(true, spec.secs, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let male = (0..spec.talkers_per_sex)
        .map(|_| synthetic_talker(false, spec.secs, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let music = (0..spec.music)
        .map(|_| synthetic_music(spec.secs, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let tv = (0..spec.tv)
        .map(|_| synthetic_tv(spec.secs, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let talkers: Vec<AudioBuffer> = female.iter().chain(&male).cloned().collect();
    let speech_spectrum = LongTermSpectrum::estimate(&talkers, 512)?;
    Ok(NoiseBank {
        female,
        male,
        music,
        tv,
        speech_spectrum,
    })
}

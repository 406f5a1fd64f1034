//! Readers for on-disk corpora, noise material and subject response sets.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::dataset::CleanUtterance;
use super::scenario::NoiseBank;
use super::ssn::LongTermSpectrum;
use super::{BySplit, ClassLabel};
use crate::audio::{read_wav, AudioBuffer};
use crate::error::{Error, Result};
use crate::tflab::TransferFunctionSet;

/// Length every item is padded or cut to (1 s at 16 kHz).
pub const ITEM_SAMPLES: usize = 16_000;

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingAsset(dir.display().to_string()));
    }
    let mut out = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

fn wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "wav"))
        .collect())
}

fn list_file(root: &Path, name: &str) -> Result<BTreeSet<String>> {
    let path = root.join(name);
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    Ok(fs::read_to_string(path)?
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn fit_length(audio: AudioBuffer, len: usize) -> Result<AudioBuffer> {
    let rate = audio.sample_rate();
    let mut s = audio.into_samples();
    s.resize(len, 0.0);
    AudioBuffer::new(s, rate)
}

/// Reads a Speech Commands style tree: `<word>/<speaker>_nohash_<n>.wav`,
/// split by `validation_list.txt` and `testing_list.txt`. Directories
/// starting with `_` are skipped.
pub fn load_speech_commands(root: impl AsRef<Path>) -> Result<BySplit<Vec<CleanUtterance>>> {
    let root = root.as_ref();
    let val = list_file(root, "validation_list.txt")?;
    let test = list_file(root, "testing_list.txt")?;
    let mut out: BySplit<Vec<CleanUtterance>> = BySplit::default();
    for dir in sorted_entries(root)? {
        let Some(word) = dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            continue;
        };
        if !dir.is_dir() || word.starts_with('_') {
            continue;
        }
        let label = ClassLabel::from_word(&word);
        for path in wavs(&dir)? {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let rel = format!("{word}/{stem}.wav");
            let speaker = stem.split("_nohash_").next().unwrap_or(stem).to_string();
            let utt = CleanUtterance {
                utt_id: format!("{word}_{stem}"),
                label,
                speaker,
                audio: fit_length(read_wav(&path)?, ITEM_SAMPLES)?,
            };
            let split = if val.contains(&rel) {
                &mut out.val
            } else if test.contains(&rel) {
                &mut out.test
            } else {
                &mut out.train
            };
            split.push(utt);
        }
    }
    Ok(out)
}

/// Reads `female/`, `male/`, `tv/` and `music/<name>_l.wav` + `<name>_r.wav`
/// from `dir`. The SSN reference is the long-term spectrum of all talkers.
pub fn load_noise_bank(dir: impl AsRef<Path>) -> Result<NoiseBank> {
    let dir = dir.as_ref();
    let read_all = |sub: &str| -> Result<Vec<AudioBuffer>> {
        wavs(&dir.join(sub))?.iter().map(read_wav).collect()
    };
    let female = read_all("female")?;
    let male = read_all("male")?;
    let tv = read_all("tv")?;
    let mut music = Vec::new();
    for left in wavs(&dir.join("music"))? {
        let name = left.to_string_lossy();
        if let Some(base) = name.strip_suffix("_l.wav") {
            let right = PathBuf::from(format!("{base}_r.wav"));
            music.push((read_wav(&left)?, read_wav(&right)?));
        }
    }
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

/// Writes a bank in the layout [`load_noise_bank`] reads.
pub fn save_noise_bank(bank: &NoiseBank, dir: impl AsRef<Path>) -> Result<()> {
    use crate::audio::{write_wav, BitDepth};
    let dir = dir.as_ref();
    for sub in ["female", "male", "tv", "music"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let put = |sub: &str, name: String, a: &AudioBuffer| write_wav(dir.join(sub).join(name), a, BitDepth::Float32);
    for (i, a) in bank.female.iter().enumerate() {
        put("female", format!("{i:03}.wav"), a)?;
    }
    for (i, a) in bank.male.iter().enumerate() {
        put("male", format!("{i:03}.wav"), a)?;
    }
    for (i, a) in bank.tv.iter().enumerate() {
        put("tv", format!("{i:03}.wav"), a)?;
    }
    for (i, (l, r)) in bank.music.iter().enumerate() {
        put("music", format!("{i:03}_l.wav"), l)?;
        put("music", format!("{i:03}_r.wav"), r)?;
    }
    Ok(())
}

/// Reads `<dir>/<split>/<subject>/` response sets, subjects sorted by name.
pub fn load_subjects(dir: impl AsRef<Path>) -> Result<BySplit<Vec<TransferFunctionSet>>> {
    let dir = dir.as_ref();
    let read = |split: &str| -> Result<Vec<TransferFunctionSet>> {
        sorted_entries(&dir.join(split))?
            .into_iter()
            .filter(|p| p.is_dir())
            .map(TransferFunctionSet::load)
            .collect()
    };
    Ok(BySplit {
        train: read("train")?,
        val: read("val")?,
        test: read("test")?,
    })
}

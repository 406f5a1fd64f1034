//! Dataset planning, rendering and the manifest.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mix::{synthesize_ambient, synthesize_utterance, Synthesis};
use super::scenario::{compose_scenario, NoiseBank, ScenarioOptions};
use super::snr::SnrEstimator;
use super::{BySplit, ClassLabel, NoiseType, Split};
use crate::audio::{write_wav, AudioBuffer, BitDepth};
use crate::error::{Error, Result};
use crate::tflab::{Mic, PerturbationParams, TransferFunctionSet};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// A clean, labelled recording from the mouth reference position.
#[derive(Clone, Debug, PartialEq)]
pub struct CleanUtterance {
    pub utt_id: String,
    pub label: ClassLabel,
    pub speaker: String,
    pub audio: AudioBuffer,
}

/// Flat key-value configuration of a dataset build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub train_snrs: Vec<f64>,
    pub test_snrs: Vec<f64>,
    /// One partition per entry; validation uses the same list.
    pub train_noises: Vec<NoiseType>,
    pub test_noises: Vec<NoiseType>,
    /// Perturb responses for training renders.
    pub perturb: bool,
    pub sigma_mult: f64,
    pub sigma_add: f64,
    pub shared_ssn: bool,
    pub clean_snr_threshold_db: f64,
    pub snr_floor_fraction: f64,
    pub snr_activity_factor: f64,
    pub float_wav: bool,
    pub corpus_dir: Option<PathBuf>,
    pub tf_dir: Option<PathBuf>,
    pub noise_dir: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_snrs: vec![-15.0, -5.0, 5.0, 15.0, 25.0],
            test_snrs: vec![-18.0, -9.0, 0.0, 9.0, 18.0],
            train_noises: NoiseType::SEEN.to_vec(),
            test_noises: NoiseType::ALL.to_vec(),
            perturb: true,
            sigma_mult: 0.1,
            sigma_add: 1e-5,
            shared_ssn: false,
            clean_snr_threshold_db: 40.0,
            snr_floor_fraction: 0.1,
            snr_activity_factor: 10.0,
            float_wav: true,
            corpus_dir: None,
            tf_dir: None,
            noise_dir: None,
        }
    }
}

impl DatasetConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_snrs.is_empty() || self.test_snrs.is_empty() {
            return Err(Error::Config("SNR grids must be non-empty".into()));
        }
        if self.train_snrs.iter().chain(&self.test_snrs).any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR grid values must be finite".into()));
        }
        if self.train_noises.is_empty() || self.test_noises.is_empty() {
            return Err(Error::Config("noise lists must be non-empty".into()));
        }
        if let Some(t) = self.train_noises.iter().find(|t| !t.is_seen()) {
            return Err(Error::Config(format!("{t} is reserved for testing")));
        }
        self.perturbation().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn snrs(&self, split: Split) -> &[f64] {
        match split {
            Split::Test => &self.test_snrs,
            _ => &self.train_snrs,
        }
    }

    pub fn noises(&self, split: Split) -> &[NoiseType] {
        match split {
            Split::Test => &self.test_noises,
            _ => &self.train_noises,
        }
    }

    pub fn perturbation(&self) -> PerturbationParams {
        PerturbationParams {
            sigma_mult: self.sigma_mult,
            sigma_add: self.sigma_add,
            ..Default::default()
        }
    }

    pub fn snr_estimator(&self) -> SnrEstimator {
        SnrEstimator {
            floor_fraction: self.snr_floor_fraction,
            activity_factor: self.snr_activity_factor,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicPaths {
    pub iec: String,
    pub front: String,
    pub rear: String,
}

impl MicPaths {
    pub fn get(&self, mic: Mic) -> &str {
        match mic {
            Mic::Iec => &self.iec,
            Mic::Front => &self.front,
            Mic::Rear => &self.rear,
        }
    }
}

/// One manifest line. Field order is the serialised order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utt_id: String,
    pub class_label: ClassLabel,
    pub gscd_speaker: String,
    pub ha_subject: String,
    pub set: Split,
    pub partition: u32,
    pub noise_type: NoiseType,
    pub target_snr_db: f64,
    /// Relative to the dataset root.
    pub paths: MicPaths,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// Per-render seed: a hash of the global seed and the record identity, so
/// renders do not depend on scheduling order.
pub fn utterance_seed(global_seed: u64, utt_id: &str, snr_db: f64, partition: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update((utt_id.len() as u64).to_le_bytes());
    h.update(utt_id.as_bytes());
    h.update(snr_db.to_bits().to_le_bytes());
    h.update(partition.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn snr_dir(snr: f64) -> String {
    format!("{snr}")
}

/// Everything a build reads.
#[derive(Clone, Copy, Debug)]
pub struct DatasetInputs<'a> {
    pub corpus: &'a BySplit<Vec<CleanUtterance>>,
    /// Three training subjects, one each for validation and test.
    pub subjects: &'a BySplit<Vec<TransferFunctionSet>>,
    pub banks: &'a BySplit<NoiseBank>,
}

impl DatasetInputs<'_> {
    fn check(&self) -> Result<()> {
        for split in Split::ALL {
            if self.subjects.get(split).is_empty() {
                return Err(Error::MissingAsset(format!("no {split} subject")));
            }
            if self.corpus.get(split).is_empty() {
                return Err(Error::MissingAsset(format!("empty {split} corpus")));
            }
        }
        Ok(())
    }

    fn subject(&self, split: Split, id: &str) -> Result<&TransferFunctionSet> {
        self.subjects
            .get(split)
            .iter()
            .find(|t| t.subject_id() == id)
            .ok_or_else(|| Error::MissingAsset(format!("subject {id}")))
    }
}

/// Lays out every record without rendering: partitions, SNR copies,
/// subjects, paths and seeds.
pub fn plan_dataset(config: &DatasetConfig, inputs: &DatasetInputs<'_>) -> Result<Vec<UtteranceRecord>> {
    config.validate()?;
    inputs.check()?;
    let mut records = Vec::new();
    for split in Split::ALL {
        let items = inputs.corpus.get(split);
        let subjects = inputs.subjects.get(split);
        let speaker_subject = assign_subjects(config.seed, items, subjects.len());
        let noises = config.noises(split);
        for (i, item) in items.iter().enumerate() {
            let partition = (i % noises.len()) as u32;
            let subject = subjects[speaker_subject[&item.speaker]].subject_id();
            for &snr in config.snrs(split) {
                let dir = format!("{split}/{partition}/{}", snr_dir(snr));
                let path = |m: Mic| format!("{dir}/{}_{m}.wav", item.utt_id);
                records.push(UtteranceRecord {
                    utt_id: item.utt_id.clone(),
                    class_label: item.label,
                    gscd_speaker: item.speaker.clone(),
                    ha_subject: subject.to_string(),
                    set: split,
                    partition,
                    noise_type: noises[partition as usize],
                    target_snr_db: snr,
                    paths: MicPaths {
                        iec: path(Mic::Iec),
                        front: path(Mic::Front),
                        rear: path(Mic::Rear),
                    },
                    seed: utterance_seed(config.seed, &item.utt_id, snr, partition),
                    alpha: None,
                });
            }
        }
    }
    Ok(records)
}

/// Binds each speaker to a subject index, uniformly at random.
fn assign_subjects(seed: u64, items: &[CleanUtterance], subjects: usize) -> HashMap<String, usize> {
    let speakers: BTreeSet<&str> = items.iter().map(|u| u.speaker.as_str()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(utterance_seed(seed, "speaker-subject", 0.0, 0));
    speakers
        .into_iter()
        .map(|s| (s.to_string(), rng.random_range(0..subjects)))
        .collect()
}

/// Recreates the waveforms of one record from its seed.
pub fn render_record(
    record: &UtteranceRecord,
    utterance: &CleanUtterance,
    tfs: &TransferFunctionSet,
    bank: &NoiseBank,
    config: &DatasetConfig,
) -> Result<Synthesis> {
    let mut rng = ChaCha20Rng::seed_from_u64(record.seed);
    let len = utterance.audio.len();
    let options = ScenarioOptions {
        segment_len: len,
        shared_ssn: config.shared_ssn,
    };
    let scenario = compose_scenario(record.noise_type, bank, &options, &mut rng)?;
    let params = config.perturbation();
    let perturb = (record.set == Split::Train && config.perturb).then_some(&params);
    if record.class_label.has_speech() {
        synthesize_utterance(&utterance.audio, tfs, &scenario, record.target_snr_db, perturb, &mut rng)
    } else {
        synthesize_ambient(len, tfs, &scenario, record.target_snr_db, perturb, &mut rng)
    }
}

/// Renders every planned record into `out_dir` and writes the manifest.
pub fn build_dataset(
    config: &DatasetConfig,
    inputs: &DatasetInputs<'_>,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<UtteranceRecord>> {
    let out_dir = out_dir.as_ref();
    let plan = plan_dataset(config, inputs)?;
    let lookup: BySplit<HashMap<&str, &CleanUtterance>> = BySplit {
        train: index(&inputs.corpus.train),
        val: index(&inputs.corpus.val),
        test: index(&inputs.corpus.test),
    };
    let depth = if config.float_wav {
        BitDepth::Float32
    } else {
        BitDepth::Pcm16
    };
    let records = plan
        .into_par_iter()
        .map(|mut record| {
            let utt = lookup.get(record.set)[record.utt_id.as_str()];
            let tfs = inputs.subject(record.set, &record.ha_subject)?;
            let synth = render_record(&record, utt, tfs, inputs.banks.get(record.set), config)?;
            for mic in Mic::ALL {
                let path = out_dir.join(record.paths.get(mic));
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                write_wav(&path, &synth.mix(mic), depth)?;
            }
            record.alpha = Some(synth.alpha);
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(out_dir.join(MANIFEST_FILE), &records)?;
    Ok(records)
}

fn index(items: &[CleanUtterance]) -> HashMap<&str, &CleanUtterance> {
    items.iter().map(|u| (u.utt_id.as_str(), u)).collect()
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[UtteranceRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        let line = serde_json::to_string(r).expect("record is serialisable");
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: format!("line {}: {e}", n + 1),
        })?);
    }
    Ok(out)
}

/// Keeps speech items whose blind SNR exceeds `threshold_db`; ambient
/// items pass through.
pub fn filter_clean(
    items: Vec<CleanUtterance>,
    estimator: &SnrEstimator,
    threshold_db: f64,
) -> Result<Vec<CleanUtterance>> {
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        if !item.label.has_speech() || estimator.estimate(&item.audio)?.db() > threshold_db {
            out.push(item);
        }
    }
    Ok(out)
}

/// Subsamples filler and tops up ambient items so both match the mean
/// keyword count. Added ambient items are silent placeholders.
pub fn balance_classes<R: Rng + ?Sized>(
    items: Vec<CleanUtterance>,
    prefix: &str,
    rng: &mut R,
) -> Result<Vec<CleanUtterance>> {
    let mut counts: BTreeMap<ClassLabel, usize> = BTreeMap::new();
    for u in &items {
        *counts.entry(u.label).or_default() += 1;
    }
    let keyword_total: usize = counts
        .iter()
        .filter(|(l, _)| matches!(l, ClassLabel::Keyword(_)))
        .map(|(_, c)| c)
        .sum();
    let keyword_classes = counts.keys().filter(|l| matches!(l, ClassLabel::Keyword(_))).count();
    if keyword_classes == 0 {
        return Err(Error::ClassCoverage("no keyword items".into()));
    }
    let target = (keyword_total as f64 / keyword_classes as f64).round() as usize;
    let len = items[0].audio.len();
    let rate = items[0].audio.sample_rate();

    let (filler, mut out): (Vec<_>, Vec<_>) = items.into_iter().partition(|u| u.label == ClassLabel::Filler);
    if filler.len() > target {
        let mut keep = sample(rng, filler.len(), target).into_vec();
        keep.sort_unstable();
        let mut filler = filler.into_iter().map(Some).collect::<Vec<_>>();
        out.extend(keep.into_iter().filter_map(|i| filler[i].take()));
    } else {
        out.extend(filler);
    }
    let ambient = counts.get(&ClassLabel::Ambient).copied().unwrap_or(0);
    for k in ambient..target {
        let id = format!("{prefix}ambient_{k:05}");
        out.push(CleanUtterance {
            utt_id: id.clone(),
            label: ClassLabel::Ambient,
            speaker: id,
            audio: AudioBuffer::zeros(len, rate),
        });
    }
    Ok(out)
}

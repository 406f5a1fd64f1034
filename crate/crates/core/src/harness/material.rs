use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::scene::synthetic::{
    synthetic_corpus, synthetic_noise_bank, synthetic_tf_set, BankSpec, CorpusSpec,
};
use crate::scene::{
    balance_classes, filter_clean, load_noise_bank, load_speech_commands, load_subjects, BySplit,
    ClassLabel, CleanUtterance, DatasetConfig, DatasetInputs, NoiseBank, Split,
};
use crate::tflab::TransferFunctionSet;

/// Source material for a dataset build, owned.
pub struct Material {
    pub corpus: BySplit<Vec<CleanUtterance>>,
    pub subjects: BySplit<Vec<TransferFunctionSet>>,
    pub banks: BySplit<NoiseBank>,
}

impl Material {
    pub fn inputs(&self) -> DatasetInputs<'_> {
        DatasetInputs {
            corpus: &self.corpus,
            subjects: &self.subjects,
            banks: &self.banks,
        }
    }
}

/// Size of a fully synthetic build.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthMaterial {
    pub classes: Vec<ClassLabel>,
    pub per_class: BySplit<usize>,
    pub speakers: usize,
    pub subjects: BySplit<usize>,
    pub bank_secs: f64,
}

impl Default for SynthMaterial {
    fn default() -> Self {
        Self {
            classes: ClassLabel::all().collect(),
            per_class: BySplit {
                train: 8,
                val: 2,
                test: 4,
            },
            speakers: 6,
            subjects: BySplit {
                train: 3,
                val: 1,
                test: 1,
            },
            bank_secs: 3.0,
        }
    }
}

/// Synthetic corpus, responses and noise banks, all derived from `seed`.
/// Splits use disjoint speakers, subjects and noise material.
pub fn synthetic_material(spec: &SynthMaterial, seed: u64) -> Result<Material> {
    let mut corpus = BySplit::<Vec<CleanUtterance>>::default();
    let mut subjects = BySplit::<Vec<TransferFunctionSet>>::default();
    let mut banks = Vec::with_capacity(3);
    let mut subject_no = 0u64;
    for (k, split) in Split::ALL.into_iter().enumerate() {
        let stream = seed.wrapping_mul(0x9e37_79b9).wrapping_add(k as u64);
        *corpus.get_mut(split) = synthetic_corpus(&CorpusSpec {
            classes: spec.classes.clone(),
            per_class: *spec.per_class.get(split),
            speakers: spec.speakers,
            seed: stream,
            prefix: format!("{split}_"),
        })?;
        for _ in 0..*spec.subjects.get(split) {
            subject_no += 1;
            let id = format!("subject{subject_no:02}");
            subjects.get_mut(split).push(synthetic_tf_set(&id, stream ^ (subject_no << 16))?);
        }
        banks.push(synthetic_noise_bank(&BankSpec {
            secs: spec.bank_secs,
            seed: stream ^ 0xba4c,
            ..Default::default()
        })?);
    }
    let mut banks = banks.into_iter();
    let mut next = || banks.next().expect("one bank per split");
    Ok(Material {
        corpus,
        subjects,
        banks: BySplit {
            train: next(),
            val: next(),
            test: next(),
        },
    })
}

/// Material read from the directories named in `config`: a speech-commands
/// tree (filtered for clean items and class-balanced), `<tf_dir>/<split>/<subject>`
/// response sets and `<noise_dir>/<split>` banks.
pub fn load_material(config: &DatasetConfig) -> Result<Material> {
    let need = |p: &Option<std::path::PathBuf>, what: &str| {
        p.clone().ok_or_else(|| Error::Config(format!("{what} is not set")))
    };
    let corpus_dir = need(&config.corpus_dir, "corpus_dir")?;
    let tf_dir = need(&config.tf_dir, "tf_dir")?;
    let noise_dir = need(&config.noise_dir, "noise_dir")?;
    let raw = load_speech_commands(corpus_dir)?;
    let estimator = config.snr_estimator();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut corpus = BySplit::<Vec<CleanUtterance>>::default();
    for split in Split::ALL {
        let clean = filter_clean(raw.get(split).clone(), &estimator, config.clean_snr_threshold_db)?;
        *corpus.get_mut(split) = balance_classes(clean, &format!("{split}_"), &mut rng)?;
    }
    let banks = BySplit {
        train: load_noise_bank(noise_dir.join("train"))?,
        val: load_noise_bank(noise_dir.join("val"))?,
        test: load_noise_bank(noise_dir.join("test"))?,
    };
    Ok(Material {
        corpus,
        subjects: load_subjects(tf_dir)?,
        banks,
    })
}

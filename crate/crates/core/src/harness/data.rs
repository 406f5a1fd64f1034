use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::mel::{log_mel, stack_mics, FeatureMap};
use crate::scene::synthetic::{synthetic_corpus, CorpusSpec};
use crate::scene::{ClassLabel, NoiseType, UtteranceRecord};
use crate::tflab::Mic;

/// One labelled input ready for the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub features: FeatureMap,
    pub label: usize,
    pub snr_db: f64,
    pub noise_type: Option<NoiseType>,
}

/// Reads the requested microphones of each record under `root` and computes
/// stacked log-Mel features. Output order follows `records`.
pub fn load_examples(root: &Path, records: &[UtteranceRecord], mics: &[Mic]) -> Result<Vec<Example>> {
    records
        .par_iter()
        .map(|r| {
            let mut per_mic = BTreeMap::new();
            for &mic in mics {
                let audio = read_wav(root.join(r.paths.get(mic)))?;
                per_mic.insert(mic, log_mel(&audio)?);
            }
            Ok(Example {
                features: stack_mics(&per_mic, mics)?,
                label: r.class_label.index(),
                snr_db: r.target_snr_db,
                noise_type: Some(r.noise_type),
            })
        })
        .collect()
}

/// Maps the labels present in `examples` onto `0..k` in ascending order and
/// returns the original label of each new index.
pub fn compact_labels(examples: &mut [Example]) -> Vec<usize> {
    let mut present: Vec<usize> = examples.iter().map(|e| e.label).collect();
    present.sort_unstable();
    present.dedup();
    for e in examples.iter_mut() {
        e.label = present.binary_search(&e.label).expect("label collected above");
    }
    present
}

/// Fails unless every class in `0..classes` appears and none lies outside.
pub fn check_class_coverage(examples: &[Example], classes: usize) -> Result<()> {
    let mut seen = vec![false; classes];
    for e in examples {
        *seen
            .get_mut(e.label)
            .ok_or_else(|| Error::ClassCoverage(format!("label {} >= {classes}", e.label)))? = true;
    }
    let missing: Vec<String> = seen
        .iter()
        .enumerate()
        .filter(|(_, &s)| !s)
        .map(|(i, _)| i.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::ClassCoverage(format!("no examples for classes {}", missing.join(", "))))
    }
}

/// Clean single-microphone examples of the first `classes` keywords from the
/// synthetic corpus, labelled `0..classes`, with an infinite SNR tag.
pub fn toy_examples(classes: usize, per_class: usize, speakers: usize, seed: u64) -> Result<Vec<Example>> {
    if classes == 0 || classes > crate::scene::KEYWORDS.len() {
        return Err(Error::InvalidArgument(format!("{classes} toy classes")));
    }
    let spec = CorpusSpec {
        classes: (0..classes as u8).map(ClassLabel::Keyword).collect(),
        per_class,
        speakers,
        seed,
        prefix: "toy_".into(),
    };
    synthetic_corpus(&spec)?
        .par_iter()
        .map(|u| {
            Ok(Example {
                features: log_mel(&u.audio)?,
                label: u.label.index(),
                snr_db: f64::INFINITY,
                noise_type: None,
            })
        })
        .collect()
}

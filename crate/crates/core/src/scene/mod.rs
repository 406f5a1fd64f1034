//! Noisy multi-microphone own-voice synthesis and dataset building.

mod dataset;
mod loaders;
mod mix;
mod scenario;
mod snr;
mod ssn;
pub mod synthetic;
mod taxonomy;

pub use dataset::{
    balance_classes, build_dataset, filter_clean, plan_dataset, read_manifest, render_record,
    utterance_seed, write_manifest, CleanUtterance, DatasetConfig, DatasetInputs, MicPaths,
    UtteranceRecord, MANIFEST_FILE,
};
pub use loaders::{load_noise_bank, load_speech_commands, load_subjects, save_noise_bank, ITEM_SAMPLES};
pub use mix::{
    alpha_for_levels, compute_alpha, perturb_set, synthesize_ambient, synthesize_utterance,
    Synthesis, NOMINAL_SPEECH_LEVEL_DB,
};
pub use scenario::{
    compose_scenario, render_noise_at_mic, NoiseBank, NoiseScenario, NoiseSource, ScenarioOptions,
};
pub use snr::{a_posteriori_snr, SnrEstimator};
pub use ssn::{make_ssn, welch_psd, LongTermSpectrum};
pub use taxonomy::{BySplit, ClassLabel, NoiseType, Split, KEYWORDS, NUM_CLASSES};

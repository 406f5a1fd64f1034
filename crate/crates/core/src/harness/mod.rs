//! Training, evaluation, confidence intervals and real-time-factor timing.

mod config;
mod data;
mod eval;
mod material;
mod rtf;
mod stats;
mod train;

pub use config::TrainConfig;
pub use data::{check_class_coverage, compact_labels, load_examples, toy_examples, Example};
pub use eval::{
    evaluate, predict_all, tabulate, AccuracyCell, AccuracyTable, CellSummary, EvalReport,
    NoiseGroup,
};
pub use material::{load_material, synthetic_material, Material, SynthMaterial};
pub use rtf::{measure_rtf, measure_rtf_for, RtfMeasurement, MIN_TRIALS, WARMUP_RUNS};
pub use stats::confidence_interval;
pub use train::{accuracy, train, write_log, LogKind, LogRecord, TrainOutcome};

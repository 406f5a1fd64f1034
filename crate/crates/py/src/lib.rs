//! Python bindings for the synthesis, feature and keyword-spotting pipeline.
//!
//! Signals cross the boundary as lists of floats at 16 kHz; feature maps as
//! nested `[channel][bin][frame]` lists.

use std::path::PathBuf;

use hakws_core::audio::{self, AudioBuffer};
use hakws_core::bcresnet::{self, BcResNet, ModelConfig};
use hakws_core::grad::{lr_at_epoch as core_lr_at_epoch, Checkpoint};
use hakws_core::harness::{self, SynthMaterial, TrainConfig};
use hakws_core::mel::{self, FeatureMap};
use hakws_core::scene::{self, read_manifest, DatasetConfig, Split, MANIFEST_FILE};
use hakws_core::tflab::{self, parse_mic_subset};
use hakws_core::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        e if e.exit_code() == 2 => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn buffer(samples: Vec<f64>) -> PyResult<AudioBuffer> {
    AudioBuffer::from_samples(samples).map_err(to_py)
}

fn nested(map: &FeatureMap) -> Vec<Vec<Vec<f64>>> {
    (0..map.channels())
        .map(|c| {
            map.channel(c)
                .chunks(map.frames())
                .map(<[f64]>::to_vec)
                .collect()
        })
        .collect()
}

fn flat(features: Vec<Vec<Vec<f64>>>) -> PyResult<FeatureMap> {
    let channels = features.len();
    let bins = features.first().map_or(0, Vec::len);
    let frames = features.first().and_then(|c| c.first()).map_or(0, Vec::len);
    let values: Vec<f64> = features.into_iter().flatten().flatten().collect();
    FeatureMap::new(channels, bins, frames, values).map_err(to_py)
}

/// Reads a WAV file; returns `(samples, sample_rate)`.
#[pyfunction]
fn read_wav(path: PathBuf) -> PyResult<(Vec<f64>, u32)> {
    let a = audio::read_wav(path).map_err(to_py)?;
    Ok((a.samples().to_vec(), a.sample_rate()))
}

/// Writes 32-bit float WAV at 16 kHz.
#[pyfunction]
fn write_wav(path: PathBuf, samples: Vec<f64>) -> PyResult<()> {
    audio::write_wav(path, &buffer(samples)?, audio::BitDepth::Float32).map_err(to_py)
}

/// Linear convolution truncated to `out_len` samples (full length by default).
#[pyfunction]
#[pyo3(signature = (signal, ir, out_len=None))]
fn convolve(signal: Vec<f64>, ir: Vec<f64>, out_len: Option<usize>) -> PyResult<Vec<f64>> {
    let n = out_len.unwrap_or((signal.len() + ir.len()).saturating_sub(1));
    audio::convolve_slices(&signal, &ir, n).map_err(to_py)
}

/// Active speech level in dB.
#[pyfunction]
fn active_speech_level(samples: Vec<f64>) -> PyResult<f64> {
    Ok(audio::active_speech_level(&buffer(samples)?).map_err(to_py)?.db())
}

/// 40-bin log-mel map of one 16 kHz signal, as `[1][40][frames]`.
#[pyfunction]
fn log_mel(samples: Vec<f64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
    Ok(nested(&mel::log_mel(&buffer(samples)?).map_err(to_py)?))
}

/// Exponential sweep and its inverse filter.
#[pyfunction]
#[pyo3(signature = (f_start=20.0, f_end=8000.0, duration=2.0))]
fn exp_sweep(f_start: f64, f_end: f64, duration: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = tflab::generate_exp_sweep(f_start, f_end, duration, audio::SAMPLE_RATE).map_err(to_py)?;
    Ok((s.sweep.samples().to_vec(), s.inverse_filter.samples().to_vec()))
}

#[pyfunction]
fn deconvolve_sweep(recording: Vec<f64>, inverse_filter: Vec<f64>, ir_len: usize) -> PyResult<Vec<f64>> {
    let est = tflab::deconvolve_sweep(&buffer(recording)?, &buffer(inverse_filter)?, ir_len).map_err(to_py)?;
    Ok(est.ir.taps().to_vec())
}

/// Normalized-LMS estimate of `h` in `output = h * input`.
#[pyfunction]
#[pyo3(signature = (input, output, taps=256, step_size=0.5, passes=2))]
fn estimate_ir_lms(input: Vec<f64>, output: Vec<f64>, taps: usize, step_size: f64, passes: usize) -> PyResult<Vec<f64>> {
    let ir = tflab::estimate_ir_lms(&buffer(input)?, &buffer(output)?, taps, step_size, passes).map_err(to_py)?;
    Ok(ir.taps().to_vec())
}

/// Mean and 95% Student-t halfwidth.
#[pyfunction]
fn confidence_interval(values: Vec<f64>) -> PyResult<(f64, f64)> {
    harness::confidence_interval(&values).map_err(to_py)
}

/// Learning rate of the default schedule at a fractional epoch.
#[pyfunction]
fn lr_at_epoch(epoch: f64) -> PyResult<f64> {
    core_lr_at_epoch(epoch).map_err(to_py)
}

/// Real-time factor of a fresh model on 1 s of noise.
#[pyfunction]
#[pyo3(signature = (tau=3.0, mic_count=1, trials=20, seed=0))]
fn measure_rtf(tau: f64, mic_count: usize, trials: usize, seed: u64) -> PyResult<f64> {
    Ok(harness::measure_rtf_for(tau, mic_count, trials, seed).map_err(to_py)?.median)
}

/// Renders a synthetic dataset into `out_dir`; returns the number of renders.
/// `config_toml` overrides dataset settings (SNR grids, noise lists, ...).
#[pyfunction]
#[pyo3(signature = (out_dir, seed=0, per_class=8, config_toml=None))]
fn synth(out_dir: PathBuf, seed: u64, per_class: usize, config_toml: Option<&str>) -> PyResult<usize> {
    let mut config = match config_toml {
        Some(t) => DatasetConfig::from_toml(t).map_err(to_py)?,
        None => DatasetConfig::default(),
    };
    config.seed = seed;
    let mut spec = SynthMaterial::default();
    spec.per_class.train = per_class;
    spec.per_class.val = per_class.div_ceil(4);
    spec.per_class.test = per_class.div_ceil(2);
    let material = harness::synthetic_material(&spec, seed).map_err(to_py)?;
    let records = scene::build_dataset(&config, &material.inputs(), &out_dir).map_err(to_py)?;
    Ok(records.len())
}

/// BC-ResNet keyword classifier.
#[pyclass(name = "BcResNet")]
struct PyBcResNet {
    inner: BcResNet<f32>,
}

#[pymethods]
impl PyBcResNet {
    #[new]
    #[pyo3(signature = (tau=3.0, in_channels=1, num_classes=12, seed=0))]
    fn new(tau: f64, in_channels: usize, num_classes: usize, seed: u64) -> PyResult<Self> {
        let config = ModelConfig {
            num_classes,
            ..ModelConfig::new(tau, in_channels)
        };
        Ok(Self {
            inner: BcResNet::new(config, seed).map_err(to_py)?,
        })
    }

    fn count_params(&self) -> usize {
        self.inner.count_params()
    }

    /// Logits for one `[channel][40][frames]` feature map.
    fn predict(&self, features: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<f32>> {
        self.inner.predict(&flat(features)?).map_err(to_py)
    }

    /// Layer table for a `[1, C, 40, frames]` input.
    #[pyo3(signature = (frames=98))]
    fn summary(&self, frames: usize) -> PyResult<String> {
        let c = self.inner.config().in_channels;
        let x = hakws_core::grad::Tensor::zeros(&[1, c, 40, frames]);
        Ok(bcresnet::format_summary(&self.inner.summary(&x).map_err(to_py)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        Checkpoint::capture(&self.inner).save(&path).map_err(to_py)
    }

    fn load(&mut self, path: PathBuf) -> PyResult<()> {
        Checkpoint::load(&path)
            .and_then(|c| c.restore(&mut self.inner))
            .map_err(to_py)
    }
}

/// Trains one seed on a rendered dataset and returns the best-validation
/// model together with its validation accuracy.
#[pyfunction]
#[pyo3(signature = (dataset_dir, config_toml="", seed=0))]
fn train(dataset_dir: PathBuf, config_toml: &str, seed: u64) -> PyResult<(PyBcResNet, Option<f64>)> {
    let config = TrainConfig::from_toml(config_toml).map_err(to_py)?;
    let records = read_manifest(dataset_dir.join(MANIFEST_FILE)).map_err(to_py)?;
    let load = |split: Split| {
        let subset: Vec<_> = records.iter().filter(|r| r.set == split).cloned().collect();
        harness::load_examples(&dataset_dir, &subset, &config.mics)
    };
    let train_set = load(Split::Train).map_err(to_py)?;
    let val_set = load(Split::Val).map_err(to_py)?;
    let mut out = harness::train(&config, seed, &train_set, &val_set).map_err(to_py)?;
    out.best.restore(&mut out.model).map_err(to_py)?;
    Ok((PyBcResNet { inner: out.model }, out.best_val_acc))
}

/// Test-split accuracy (percent) of `model` on a rendered dataset.
#[pyfunction]
#[pyo3(signature = (model, dataset_dir, mics="i"))]
fn evaluate(model: &PyBcResNet, dataset_dir: PathBuf, mics: &str) -> PyResult<Option<f64>> {
    let mics = parse_mic_subset(mics).map_err(to_py)?;
    let records = read_manifest(dataset_dir.join(MANIFEST_FILE)).map_err(to_py)?;
    let test: Vec<_> = records.into_iter().filter(|r| r.set == Split::Test).collect();
    let examples = harness::load_examples(&dataset_dir, &test, &mics).map_err(to_py)?;
    let mut snrs: Vec<f64> = examples.iter().map(|e| e.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    Ok(harness::evaluate(&model.inner, &examples, &snrs).map_err(to_py)?.overall())
}

#[pymodule]
fn hakws(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBcResNet>()?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(convolve, m)?)?;
    m.add_function(wrap_pyfunction!(active_speech_level, m)?)?;
    m.add_function(wrap_pyfunction!(log_mel, m)?)?;
    m.add_function(wrap_pyfunction!(exp_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(deconvolve_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_ir_lms, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(lr_at_epoch, m)?)?;
    m.add_function(wrap_pyfunction!(measure_rtf, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add("NUM_CLASSES", scene::NUM_CLASSES)?;
    Ok(())
}

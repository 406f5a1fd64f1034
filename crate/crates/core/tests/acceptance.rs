//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs every criterion and exits 0 so that a criterion that is out of
//! reach at desk scale is reported rather than hidden. `ACCEPTANCE_STRICT=1`
//! turns any failure into a non-zero exit; `ACCEPTANCE_ONLY=1,7` selects
//! criteria by number.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{central_difference, check_gradients, random_tensor, rel_error};
use hakws_core::audio::{active_speech_level, convolve_fft, convolve_slices, rms_level_db, AudioBuffer};
use hakws_core::bcresnet::{BcResNet, ModelConfig, SUPPORTED_TAUS};
use hakws_core::grad::{
    build, lr_at_epoch, softmax_cross_entropy, zero_grad, BatchNorm, Conv2d,
    Conv2dConfig, Dropout2d, LayerSpec, Module, PoolAxis, Sequential, Sgd, SubSpectralNorm, Tensor,
};
use hakws_core::harness::{
    accuracy, confidence_interval, evaluate, load_examples, measure_rtf_for, synthetic_material,
    toy_examples, train, Example, SynthMaterial, TrainConfig,
};
use hakws_core::mel::FeatureMap;
use hakws_core::scene::synthetic::{synthetic_noise_bank, synthetic_tf_set, synthetic_word, BankSpec, Voice};
use hakws_core::scene::{
    build_dataset, compose_scenario, synthesize_utterance, BySplit, ClassLabel, DatasetConfig,
    NoiseType, ScenarioOptions, Split, MANIFEST_FILE,
};
use hakws_core::tflab::{
    deconvolve_sweep, estimate_ir_lms, generate_exp_sweep, perturb_tf, ImpulseResponse, IrKind, Mic,
    PerturbationParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Outcome of one criterion: pass flag and a one-line account.
type Verdict = (bool, String);

const GRAD_TOL: f64 = 1e-4;
const GRAD_INSTANCES: u64 = 20;

fn parameter_anchors() -> Verdict {
    let count = |tau: f64, c: usize| {
        BcResNet::<f32>::new(ModelConfig::new(tau, c), 0)
            .unwrap()
            .count_params()
    };
    let published = [54_168, 55_368, 56_568];
    let got: Vec<usize> = (1..=3).map(|c| count(3.0, c)).collect();
    let mut ok = got == published;
    let mut laws = Vec::new();
    for tau in SUPPORTED_TAUS {
        let want = (25.0 * 16.0 * tau) as usize;
        let counts: Vec<usize> = (1..=3).map(|c| count(tau, c)).collect();
        let holds = counts.windows(2).all(|w| w[1] - w[0] == want);
        ok &= holds;
        laws.push(format!("tau {tau}: {}", if holds { "ok" } else { "broken" }));
    }
    (ok, format!("tau=3 counts {got:?}; stem delta {}", laws.join(", ")))
}

fn pick<T: Copy>(rng: &mut impl Rng, opts: &[T]) -> T {
    opts[rng.random_range(0..opts.len())]
}

type Instance = (Box<dyn Module<f64>>, Tensor<f64>);

fn layer_instances() -> Vec<(&'static str, Box<dyn Fn(u64) -> Instance>)> {
    let b = |spec: LayerSpec, rng: &mut ChaCha8Rng| build::<f64, _>("l", spec, rng).unwrap();
    vec![
        (
            "conv2d",
            Box::new(move |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let cfg = Conv2dConfig::dense(
                    rng.random_range(1..=3),
                    rng.random_range(1..=3),
                    (pick(&mut rng, &[1, 3, 5]), pick(&mut rng, &[1, 3])),
                )
                .stride((rng.random_range(1..=2), rng.random_range(1..=2)))
                .padding((rng.random_range(0..=2), rng.random_range(0..=1)))
                .dilation((rng.random_range(1..=2), 1))
                .bias(rng.random_bool(0.5));
                let x = random_tensor(&[2, cfg.in_channels, 10, 6], &mut rng);
                (Box::new(Conv2d::new("c", cfg, &mut rng).unwrap()), x)
            }),
        ),
        (
            "pointwise",
            Box::new(move |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let (ci, co) = (rng.random_range(1..=4), rng.random_range(1..=4));
                let x = random_tensor(&[2, ci, 3, 5], &mut rng);
                let spec = LayerSpec::PointwiseConv {
                    in_channels: ci,
                    out_channels: co,
                };
                (b(spec, &mut rng), x)
            }),
        ),
        (
            "depthwise",
            Box::new(move |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let channels = rng.random_range(1..=3);
                let kernel = pick(&mut rng, &[(3, 1), (1, 3), (5, 5), (3, 3)]);
                let dil = rng.random_range(1..=3);
                let spec = LayerSpec::DepthwiseConv2d {
                    channels,
                    kernel,
                    stride: (rng.random_range(1..=2), 1),
                    padding: (kernel.0 / 2, (kernel.1 / 2) * dil),
                    dilation: (1, dil),
                };
                let x = random_tensor(&[2, channels, 10, 9], &mut rng);
                (b(spec, &mut rng), x)
            }),
        ),
        (
            "batch_norm",
            Box::new(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let c = rng.random_range(1..=3);
                let mut bn = BatchNorm::<f64>::new("bn", c);
                bn.gamma.value = random_tensor(&[c], &mut rng);
                bn.beta.value = random_tensor(&[c], &mut rng);
                let x = random_tensor(&[rng.random_range(2..=3), c, 3, 4], &mut rng);
                (Box::new(bn), x)
            }),
        ),
        (
            "subspectral_norm",
            Box::new(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let c = rng.random_range(1..=2);
                let x = random_tensor(&[2, c, 10, 3], &mut rng);
                (Box::new(SubSpectralNorm::<f64>::new("ssn", c, 5).unwrap()), x)
            }),
        ),
        (
            "relu",
            Box::new(move |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let x = random_tensor(&[2, 2, 3, 4], &mut rng);
                (b(LayerSpec::Relu, &mut rng), x)
            }),
        ),
        (
            "swish",
            Box::new(move |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let x = random_tensor(&[2, 2, 3, 4], &mut rng);
                (b(LayerSpec::Swish, &mut rng), x)
            }),
        ),
        (
            "frequency_pool",
            Box::new(move |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let x = random_tensor(&[2, 3, rng.random_range(1..=6), rng.random_range(1..=6)], &mut rng);
                (b(LayerSpec::AvgPool(PoolAxis::Frequency), &mut rng), x)
            }),
        ),
        (
            "global_pool",
            Box::new(move |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let x = random_tensor(&[2, 3, rng.random_range(1..=6), rng.random_range(1..=6)], &mut rng);
                (b(LayerSpec::AvgPool(PoolAxis::Global), &mut rng), x)
            }),
        ),
        (
            "dropout",
            Box::new(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let mut d = Dropout2d::<f64>::new(0.3, s).unwrap();
                d.frozen = true;
                (Box::new(d), random_tensor(&[3, 4, 2, 3], &mut rng))
            }),
        ),
        (
            "classifier_head",
            Box::new(move |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let c = rng.random_range(1..=6);
                let x = random_tensor(&[3, c, 1, 1], &mut rng);
                let spec = LayerSpec::ClassifierHead {
                    in_channels: c,
                    classes: 12,
                };
                (b(spec, &mut rng), x)
            }),
        ),
        (
            "composed_stack",
            Box::new(move |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let specs = [
                    LayerSpec::Conv2d(Conv2dConfig::dense(1, 4, (3, 3)).padding((1, 1))),
                    LayerSpec::SubSpectralNorm {
                        channels: 4,
                        sub_bands: 5,
                    },
                    LayerSpec::Swish,
                    LayerSpec::AvgPool(PoolAxis::Global),
                    LayerSpec::ClassifierHead {
                        in_channels: 4,
                        classes: 12,
                    },
                ];
                let layers = specs.iter().map(|&spec| b(spec, &mut rng)).collect();
                let x = random_tensor(&[2, 1, 10, 4], &mut rng);
                (Box::new(Sequential::new(layers)), x)
            }),
        ),
        (
            "bcresnet_tau1",
            Box::new(|s| {
                let mut m = BcResNet::<f64>::new(ModelConfig::new(1.0, 1), s).unwrap();
                m.freeze_dropout(true);
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
                (Box::new(m), random_tensor(&[2, 1, 40, 6], &mut rng))
            }),
        ),
    ]
}

fn gradient_suite() -> Verdict {
    let mut ok = true;
    let mut worst_overall = 0.0f64;
    let mut failures = Vec::new();
    let (mut skipped, mut probes) = (0, 0);
    for (name, make) in layer_instances() {
        for seed in 0..GRAD_INSTANCES {
            let (mut layer, x) = make(seed);
            // The full model has thousands of coordinates; probe a sample.
            let cap = (name == "bcresnet_tau1").then_some(8);
            let r = check_gradients(layer.as_mut(), &x, seed, cap);
            skipped += r.skipped;
            probes += r.skipped + r.checked;
            worst_overall = worst_overall.max(r.worst);
            if r.worst > GRAD_TOL || r.checked == 0 {
                ok = false;
                failures.push(format!("{name}#{seed} {:.1e} in {}", r.worst, r.worst_tensor));
            }
        }
    }
    // Softmax cross-entropy against central differences on the logits.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..GRAD_INSTANCES {
        let logits: Vec<f64> = (0..12).map(|_| rng.random_range(-5.0..5.0)).collect();
        let label = rng.random_range(0..12);
        let (_, analytic) = softmax_cross_entropy(&logits, label).unwrap();
        let numeric: Vec<f64> = (0..12)
            .map(|i| {
                central_difference(|d| {
                    let mut z = logits.clone();
                    z[i] += d;
                    softmax_cross_entropy(&z, label).unwrap().0
                })
            })
            .collect();
        let e = rel_error(&analytic, &numeric);
        worst_overall = worst_overall.max(e);
        if e > GRAD_TOL {
            ok = false;
            failures.push(format!("cross_entropy#{seed} {e:.1e}"));
        }
    }
    // A high kink-crossing rate would hide errors rather than reveal them.
    let skip_ok = skipped * 5 <= probes;
    ok &= skip_ok;
    (
        ok,
        format!(
            "14 kinds x {GRAD_INSTANCES} instances, worst rel error {worst_overall:.2e}, \
             {skipped}/{probes} probes skipped at kinks{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join(", "))
            }
        ),
    )
}

fn snr_round_trip() -> Verdict {
    let grid = [-18.0, -15.0, -9.0, -5.0, 0.0, 5.0, 9.0, 15.0, 18.0, 25.0];
    let subjects: Vec<_> = (0..5).map(|s| synthetic_tf_set(&format!("s{s}"), 40 + s).unwrap()).collect();
    let bank = synthetic_noise_bank(&BankSpec {
        secs: 3.0,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let voice = Voice::random(rng.random_bool(0.5), &mut rng);
        let label = ClassLabel::Keyword(rng.random_range(0..10));
        let word = synthetic_word(label, &voice, &mut rng).unwrap();
        let noise = NoiseType::ALL[i % NoiseType::ALL.len()];
        let tfs = &subjects[rng.random_range(0..subjects.len())];
        let scenario = compose_scenario(noise, &bank, &ScenarioOptions::default(), &mut rng).unwrap();
        for &snr in &grid {
            let s = synthesize_utterance(&word, tfs, &scenario, snr, None, &mut rng).unwrap();
            let measured = active_speech_level(&s.clean[&Mic::Front]).unwrap().db()
                - rms_level_db(&s.scaled_noise(Mic::Front)).unwrap().db();
            worst = worst.max((measured - snr).abs());
        }
    }
    (
        worst <= 0.05,
        format!("100 utterances x 10 SNRs x 5 noise types, worst |error| {worst:.2e} dB"),
    )
}

/// Plain O(N M) convolution, truncated to `out_len`.
fn direct_sum(x: &[f64], h: &[f64], out_len: usize) -> Vec<f64> {
    (0..out_len)
        .map(|n| {
            let lo = n.saturating_sub(x.len() - 1);
            (lo..=n.min(h.len() - 1)).map(|k| h[k] * x[n - k]).sum()
        })
        .collect()
}

fn convolution_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=4000);
        let m = rng.random_range(1..=600);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let h: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let out_len = n + m - 1;
        let fast = convolve_fft(&x, &h, out_len).unwrap();
        worst = worst.max(rel_error(&fast, &direct_sum(&x, &h, out_len)));
    }
    (worst <= 1e-9, format!("100 random pairs, worst rel error {worst:.2e}"))
}

fn decaying_ir(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|k| rng.sample::<f64, _>(StandardNormal) * (-(k as f64) / (len as f64 / 4.0)).exp())
        .collect()
}

fn error_db(est: &[f64], truth: &[f64]) -> f64 {
    let n = est.len().max(truth.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let err: f64 = (0..n).map(|i| (at(est, i) - at(truth, i)).powi(2)).sum();
    let energy: f64 = truth.iter().map(|v| v * v).sum();
    10.0 * (err / energy).log10()
}

/// Spectral error over `[lo, hi]` Hz, where an exponential sweep carries energy.
fn in_band_error_db(est: &[f64], truth: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let n_fft = 4096;
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let spec = |v: &[f64]| {
        let mut buf: Vec<Complex64> = (0..n_fft)
            .map(|i| Complex64::new(v.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        fft.process(&mut buf);
        buf
    };
    let (a, b) = (spec(est), spec(truth));
    let k0 = (lo / fs * n_fft as f64).ceil() as usize;
    let k1 = (hi / fs * n_fft as f64).floor() as usize;
    let err: f64 = (k0..=k1).map(|k| (a[k] - b[k]).norm_sqr()).sum();
    let energy: f64 = (k0..=k1).map(|k| b[k].norm_sqr()).sum();
    10.0 * (err / energy).log10()
}

fn tf_round_trips() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut lms_worst = f64::NEG_INFINITY;
    let lens = [1, 7, 32, 64, 100, 128];
    for (i, &len) in lens.iter().enumerate() {
        let x: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let h = decaying_ir(len, 300 + i as u64);
        let y = convolve_slices(&x, &h, x.len()).unwrap();
        let est = estimate_ir_lms(
            &AudioBuffer::from_samples(x).unwrap(),
            &AudioBuffer::from_samples(y).unwrap(),
            len,
            0.5,
            1,
        )
        .unwrap();
        lms_worst = lms_worst.max(error_db(est.taps(), &h));
    }
    let sweep = generate_exp_sweep(20.0, 8000.0, 2.0, 16_000).unwrap();
    let mut sweep_worst = f64::NEG_INFINITY;
    for seed in 0..4 {
        let h = decaying_ir(128, 900 + seed);
        let rec = convolve_slices(sweep.sweep.samples(), &h, sweep.sweep.len() + h.len() - 1).unwrap();
        let est = deconvolve_sweep(&AudioBuffer::from_samples(rec).unwrap(), &sweep.inverse_filter, 128).unwrap();
        sweep_worst = sweep_worst.max(in_band_error_db(est.ir.taps(), &h, 16_000.0, 100.0, 7000.0));
    }
    (
        lms_worst <= -40.0 && sweep_worst <= -40.0,
        format!(
            "LMS worst {lms_worst:.1} dB over lengths {lens:?}; sweep worst {sweep_worst:.1} dB in 100-7000 Hz"
        ),
    )
}

fn perturbation_statistics() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let taps: Vec<f64> = (0..512).map(|_| rng.sample(StandardNormal)).collect();
    let ir = ImpulseResponse::new(taps, 16_000, IrKind::Hrtf).unwrap();
    let zero = PerturbationParams {
        sigma_mult: 0.0,
        sigma_add: 0.0,
        ..Default::default()
    };
    let identical = perturb_tf(&ir, &zero, &mut rng).unwrap().taps() == ir.taps();

    let draws = 100_000;
    let moments = |v: &[f64], centre: f64| {
        let n = v.len() as f64;
        let mean = v.iter().map(|x| x - centre).sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - centre - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (mean, sd)
    };
    let ones = ImpulseResponse::new(vec![1.0; draws], 16_000, IrKind::OwnVoice).unwrap();
    let gain_only = PerturbationParams {
        sigma_add: 0.0,
        ..Default::default()
    };
    let g = perturb_tf(&ones, &gain_only, &mut rng).unwrap();
    let (gm, gs) = moments(g.taps(), 1.0);
    let zeros = ImpulseResponse::new(vec![0.0; draws], 16_000, IrKind::Hrtf).unwrap();
    let a = perturb_tf(&zeros, &PerturbationParams::default(), &mut rng).unwrap();
    let (am, asd) = moments(a.taps(), 0.0);
    let within = |mean: f64, sd: f64, sigma: f64| mean.abs() <= 0.02 * sigma && (sd - sigma).abs() <= 0.02 * sigma;
    (
        identical && within(gm, gs, 0.1) && within(am, asd, 1e-5),
        format!(
            "zero-sigma identical: {identical}; gain mean {gm:.2e} sd {gs:.5}; offset mean {am:.2e} sd {asd:.3e}"
        ),
    )
}

fn overfit_sanity() -> Verdict {
    let mut data = toy_examples(3, 67, 10, 7).unwrap();
    data.truncate(200);
    let config = TrainConfig {
        tau: 1.0,
        classes: 3,
        seeds: vec![0],
        ..Default::default()
    };
    let start = Instant::now();
    let out = train(&config, 0, &data, &[]).unwrap();
    let acc = accuracy(&out.model, &data).unwrap();
    let losses = out.epoch_losses();
    // Smoothed over 10-epoch windows the loss should not rise.
    let smoothed: Vec<f64> = losses.chunks(10).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    let rises: Vec<String> = smoothed
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(i, w)| format!("epochs {}-{}: {:.2e}->{:.2e}", 10 * i, 10 * i + 19, w[0], w[1]))
        .collect();
    (
        acc >= 99.0,
        format!(
            "train accuracy {acc:.1}% after {} epochs in {:.0} s, final loss {:.2e}; \
             10-epoch smoothed loss rises: {}",
            losses.len(),
            start.elapsed().as_secs_f64(),
            losses.last().copied().unwrap_or(f64::NAN),
            if rises.is_empty() { "none".to_string() } else { rises.join(", ") }
        ),
    )
}

/// Keeps the listed channels of a stacked feature map.
fn select_channels(examples: &[Example], channels: &[usize]) -> Vec<Example> {
    examples
        .iter()
        .map(|e| {
            let f = &e.features;
            let values = channels.iter().flat_map(|&c| f.channel(c).iter().copied()).collect();
            Example {
                features: FeatureMap::new(channels.len(), f.bins(), f.frames(), values).unwrap(),
                ..e.clone()
            }
        })
        .collect()
}

fn trend_reproduction() -> Verdict {
    let classes: Vec<ClassLabel> = (0..3).map(ClassLabel::Keyword).collect();
    let spec = SynthMaterial {
        classes,
        per_class: BySplit {
            train: 30,
            val: 6,
            test: 20,
        },
        speakers: 8,
        ..Default::default()
    };
    let material = synthetic_material(&spec, 11).unwrap();
    let lowest = -18.0;
    let data_config = DatasetConfig {
        seed: 11,
        test_snrs: vec![lowest],
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let records = build_dataset(&data_config, &material.inputs(), dir.path()).unwrap();
    let split = |s: Split| {
        let subset: Vec<_> = records.iter().filter(|r| r.set == s).cloned().collect();
        load_examples(dir.path(), &subset, &[Mic::Iec, Mic::Front]).unwrap()
    };
    let (train_all, val_all, test_all) = (split(Split::Train), split(Split::Val), split(Split::Test));

    let mut means = BTreeMap::new();
    for (name, mics, channels) in [
        ("iec", vec![Mic::Iec], vec![0]),
        ("front", vec![Mic::Front], vec![1]),
        ("iec+front", vec![Mic::Iec, Mic::Front], vec![0, 1]),
    ] {
        let (tr, va, te) = (
            select_channels(&train_all, &channels),
            select_channels(&val_all, &channels),
            select_channels(&test_all, &channels),
        );
        let config = TrainConfig {
            epochs: 20,
            warmup_epochs: 1.0,
            tau: 1.0,
            classes: 3,
            mics,
            seeds: vec![0, 1, 2],
            ..Default::default()
        };
        let mut accs = Vec::new();
        for &seed in &config.seeds {
            let mut out = train(&config, seed, &tr, &va).unwrap();
            out.best.restore(&mut out.model).unwrap();
            let table = evaluate(&out.model, &te, &[lowest]).unwrap();
            accs.push(table.snr_accuracy(lowest).unwrap());
        }
        means.insert(name, (accs.iter().sum::<f64>() / accs.len() as f64, accs));
    }
    let (iec, front, both) = (means["iec"].0, means["front"].0, means["iec+front"].0);
    let detail = means
        .iter()
        .map(|(k, (m, a))| format!("{k} {m:.1}% {a:.1?}"))
        .collect::<Vec<_>>()
        .join("; ");
    (
        iec > front && both >= iec,
        format!("accuracy at {lowest} dB over 3 seeds: {detail}"),
    )
}

fn schedule_and_optimizer() -> Verdict {
    let lr = |e: f64| lr_at_epoch(e).unwrap();
    let anchors = lr(0.0) == 0.0 && lr(5.0) == 0.1 && lr(200.0) == 0.0;
    let (left, right) = (lr(5.0 - 1e-9), lr(5.0 + 1e-9));
    let continuous = (left - 0.1).abs() < 1e-9 && (right - 0.1).abs() < 1e-9;

    // One scalar weight under constant gradient: two momentum steps move it
    // by -lr g (1 + (1 + m)).
    let (w0, g, step, m) = (0.7, 0.3, 0.05, 0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut conv = Conv2d::<f64>::new("w", Conv2dConfig::pointwise(1, 1), &mut rng).unwrap();
    conv.weight.value.data_mut()[0] = w0;
    let mut opt = Sgd::new(m, 0.0);
    for _ in 0..2 {
        zero_grad(&mut conv);
        conv.weight.grad.data_mut()[0] = g;
        opt.step(&mut conv, step).unwrap();
    }
    let moved = conv.weight.value.data()[0] - w0;
    let closed = -step * g * (1.0 + (1.0 + m));
    let two_step = (moved - closed).abs() <= 1e-12;
    (
        anchors && continuous && two_step,
        format!(
            "lr(0)={} lr(5)={} lr(200)={}; around 5: {left:.12} / {right:.12}; two-step error {:.1e}",
            lr(0.0),
            lr(5.0),
            lr(200.0),
            (moved - closed).abs()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn real_time_factor() -> Verdict {
    // Rounds alternate the mic counts so that drift in machine load hits all
    // three alike; each count reports the median of its round medians.
    let rounds = 7;
    let mut per_mic = vec![Vec::with_capacity(rounds); 3];
    for _ in 0..rounds {
        for (m, samples) in per_mic.iter_mut().enumerate() {
            samples.push(measure_rtf_for(3.0, m + 1, 21, 5).unwrap().median);
        }
    }
    let rtf: Vec<f64> = per_mic.into_iter().map(median).collect();
    let below = rtf[0] < 1.0;
    let monotone = rtf.windows(2).all(|w| w[1] >= w[0]);
    (
        below && monotone,
        format!(
            "tau=3 RTF for 1/2/3 mics: {:.4} / {:.4} / {:.4} (median of {rounds} interleaved rounds)",
            rtf[0], rtf[1], rtf[2]
        ),
    )
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn synth_determinism() -> Verdict {
    let scratch = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: usize| {
        let out = scratch.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_hakws"))
            .args(["synth", "--seed", "5", "--per-class", "2", "--out"])
            .arg(&out)
            .env("RAYON_NUM_THREADS", threads.to_string())
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        tree_bytes(&out)
    };
    let first = run("a", 1);
    let second = run("b", 1);
    let threaded = run("c", 4);
    let has_manifest = first.contains_key(MANIFEST_FILE);
    let waves = first.keys().filter(|k| k.ends_with(".wav")).count();
    (
        has_manifest && waves > 0 && first == second && first == threaded,
        format!(
            "{} files ({waves} waveforms); repeat identical: {}; 1 vs 4 threads identical: {}",
            first.len(),
            first == second,
            first == threaded
        ),
    )
}

fn ci_arithmetic() -> Verdict {
    // Two-sided 95% Student t quantile for 4 degrees of freedom, from tables.
    let t_975_df4 = 2.776_445;
    let oracle = t_975_df4 * 2.5f64.sqrt() / 5f64.sqrt();
    let (mean, half) = confidence_interval(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let (_, flat) = confidence_interval(&[50.0; 5]).unwrap();
    (
        mean == 3.0 && (half - 1.963).abs() <= 0.001 && (half - oracle).abs() <= 1e-5 && flat == 0.0,
        format!("[1..5] -> {mean} ± {half:.5} (oracle {oracle:.5}); zero variance -> ± {flat}"),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Verdict); 12] = [
        (1, "parameter anchors", parameter_anchors),
        (2, "gradient suite", gradient_suite),
        (3, "SNR round-trip", snr_round_trip),
        (4, "convolution oracle", convolution_oracle),
        (5, "TF-lab round-trips", tf_round_trips),
        (6, "perturbation identity and statistics", perturbation_statistics),
        (7, "overfit sanity", overfit_sanity),
        (8, "qualitative trend", trend_reproduction),
        (9, "schedule and optimizer", schedule_and_optimizer),
        (10, "real-time factor", real_time_factor),
        (11, "synth determinism", synth_determinism),
        (12, "CI arithmetic", ci_arithmetic),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {id:>2} {name} ({:.1} s): {detail}",
            start.elapsed().as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        if strict {
            std::process::exit(1);
        }
    }
}

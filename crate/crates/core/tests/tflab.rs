use hakws_core::audio::{convolve_slices, AudioBuffer};
use hakws_core::tflab::{
    deconvolve_sweep, estimate_ir_lms, generate_exp_sweep, perturb_tf, ImpulseResponse, IrKind,
    PerturbationParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Decaying random IR, the kind of response a short acoustic path gives.
fn random_ir(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|k| rng.sample::<f64, _>(StandardNormal) * (-(k as f64) / (len as f64 / 4.0)).exp())
        .collect()
}

fn rel_error_db(est: &[f64], truth: &[f64]) -> f64 {
    let n = est.len().max(truth.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let err: f64 = (0..n).map(|i| (get(est, i) - get(truth, i)).powi(2)).sum();
    let energy: f64 = truth.iter().map(|v| v * v).sum();
    10.0 * (err / energy).log10()
}

fn spectrum(v: &[f64], n_fft: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = v
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    buf
}

/// Relative spectral error restricted to `[lo, hi]` Hz.
fn in_band_error_db(est: &[f64], truth: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let n_fft = 4096;
    let a = spectrum(est, n_fft);
    let b = spectrum(truth, n_fft);
    let k0 = (lo / fs * n_fft as f64).ceil() as usize;
    let k1 = (hi / fs * n_fft as f64).floor() as usize;
    let err: f64 = (k0..=k1).map(|k| (a[k] - b[k]).norm_sqr()).sum();
    let energy: f64 = (k0..=k1).map(|k| b[k].norm_sqr()).sum();
    10.0 * (err / energy).log10()
}

#[test]
fn lms_recovers_random_64_tap_ir() {
    let x = white(100_000, 11);
    let h = random_ir(64, 12);
    let y = convolve_slices(&x, &h, x.len()).unwrap();
    let est = estimate_ir_lms(
        &AudioBuffer::from_samples(x).unwrap(),
        &AudioBuffer::from_samples(y).unwrap(),
        64,
        0.5,
        1,
    )
    .unwrap();
    let err = rel_error_db(est.taps(), &h);
    assert!(err <= -40.0, "lms error {err} dB");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn lms_round_trip_property(len in 1usize..=128, seed in any::<u64>()) {
        let x = white(100_000, seed ^ 0x5a5a);
        let h = random_ir(len, seed);
        let y = convolve_slices(&x, &h, x.len()).unwrap();
        let est = estimate_ir_lms(
            &AudioBuffer::from_samples(x).unwrap(),
            &AudioBuffer::from_samples(y).unwrap(),
            len,
            0.5,
            1,
        ).unwrap();
        prop_assert!(rel_error_db(est.taps(), &h) <= -40.0);
    }
}

#[test]
fn sweep_self_deconvolution_peak_to_sidelobe() {
    let s = generate_exp_sweep(20.0, 8000.0, 2.0, 16_000).unwrap();
    let full = convolve_slices(
        s.sweep.samples(),
        s.inverse_filter.samples(),
        s.sweep.len() + s.inverse_filter.len() - 1,
    )
    .unwrap();
    let (peak_idx, peak) = full
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.abs()))
        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    assert_eq!(peak_idx, s.inverse_filter.len() - 1);
    // Sidelobes: everything farther than 8 samples from the main lobe.
    let side = full
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(peak_idx) > 8)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    let psr = 20.0 * (peak / side).log10();
    assert!(psr >= 40.0, "peak-to-sidelobe {psr} dB");
}

#[test]
fn sweep_recovers_known_128_tap_ir_in_band() {
    let s = generate_exp_sweep(20.0, 8000.0, 2.0, 16_000).unwrap();
    let h = random_ir(128, 77);
    let rec = convolve_slices(s.sweep.samples(), &h, s.sweep.len() + h.len() - 1).unwrap();
    let est = deconvolve_sweep(&AudioBuffer::from_samples(rec).unwrap(), &s.inverse_filter, 128)
        .unwrap();
    let err = in_band_error_db(est.ir.taps(), &h, 16_000.0, 100.0, 7000.0);
    assert!(err <= -40.0, "in-band error {err} dB");
}

#[test]
fn sweep_identity_path_is_unit_impulse() {
    let s = generate_exp_sweep(20.0, 8000.0, 2.0, 16_000).unwrap();
    let est = deconvolve_sweep(&s.sweep, &s.inverse_filter, 32).unwrap();
    let taps = est.ir.taps();
    assert!((taps[0] - 1.0).abs() < 0.01, "main tap {}", taps[0]);
    let rest = taps[1..].iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(rest < 0.01, "largest residual tap {rest}");
}

#[test]
fn perturbation_gain_statistics() {
    let ir = ImpulseResponse::new(vec![1.0; 100_000], 16_000, IrKind::OwnVoice).unwrap();
    let params = PerturbationParams {
        sigma_add: 0.0,
        ..Default::default()
    };
    let out = perturb_tf(&ir, &params, &mut ChaCha20Rng::seed_from_u64(2024)).unwrap();
    let n = out.len() as f64;
    let mean = out.taps().iter().sum::<f64>() / n;
    let sd = (out.taps().iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() / n).sqrt();
    assert!((mean - 1.0).abs() <= 0.002, "mean {mean}");
    assert!((sd - 0.1).abs() <= 0.002, "sd {sd}");
}

#[test]
fn perturbation_offset_statistics() {
    let ir = ImpulseResponse::new(vec![0.0; 100_000], 16_000, IrKind::Hrtf).unwrap();
    let out = perturb_tf(
        &ir,
        &PerturbationParams::default(),
        &mut ChaCha20Rng::seed_from_u64(7),
    )
    .unwrap();
    let n = out.len() as f64;
    let sd = (out.taps().iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    assert!((sd - 1e-5).abs() <= 0.02 * 1e-5, "sd {sd}");
}

use std::collections::BTreeMap;
use std::f64::consts::PI;

use hakws_core::audio::AudioBuffer;
use hakws_core::mel::{
    log_mel, read_feature_cache, stack_channels, stack_mics, write_feature_cache, FeatureMap, LogMel,
    LOG_FLOOR, N_MELS,
};
use hakws_core::tflab::Mic;
use hakws_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

fn noise(n: usize, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    AudioBuffer::new((0..n).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect(), 16_000).unwrap()
}

#[test]
fn one_second_gives_98_frames() {
    let f = log_mel(&noise(16_000, 1)).unwrap();
    assert_eq!(f.shape(), [1, 40, 1 + (16_000 - 480) / 160]);
    assert_eq!(f.frames(), 98);
}

#[test]
fn silence_sits_on_the_floor() {
    let f = log_mel(&AudioBuffer::zeros(16_000, 16_000)).unwrap();
    let floor = LOG_FLOOR.ln();
    assert!(f.values().iter().all(|&v| v == floor));
}

#[test]
fn tone_peaks_in_the_filter_around_it() {
    // Oracle: HTK mel points from 0 to 8 kHz; the filter whose triangle is
    // highest at 1 kHz.
    let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(8000.0);
    let pts: Vec<f64> = (0..42).map(|i| hz(top * i as f64 / 41.0)).collect();
    let tri = |m: usize, f: f64| {
        let (l, c, r) = (pts[m], pts[m + 1], pts[m + 2]);
        if f <= l || f >= r {
            0.0
        } else if f <= c {
            (f - l) / (c - l)
        } else {
            (r - f) / (r - c)
        }
    };
    let expected = (0..40).max_by(|&a, &b| tri(a, 1000.0).total_cmp(&tri(b, 1000.0))).unwrap();

    let x: Vec<f64> = (0..16_000).map(|i| 0.5 * (2.0 * PI * 1000.0 * i as f64 / 16_000.0).sin()).collect();
    let f = log_mel(&AudioBuffer::new(x, 16_000).unwrap()).unwrap();
    for t in 0..f.frames() {
        let arg = (0..N_MELS).max_by(|&a, &b| f.get(0, a, t).total_cmp(&f.get(0, b, t))).unwrap();
        assert_eq!(arg, expected, "frame {t}");
    }
}

#[test]
fn filterbank_shape() {
    let ex = LogMel::new();
    let fb = ex.filterbank();
    assert_eq!(fb.weights().len(), 40);
    assert_eq!(fb.edges(), (0.0, 8000.0));
    assert!(fb.centres().windows(2).all(|w| w[0] < w[1]));
    for row in fb.weights() {
        assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
        // Rises then falls: a single run of non-zero weights.
        let nz: Vec<usize> = row.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, _)| i).collect();
        assert!(!nz.is_empty());
        assert_eq!(nz.len(), nz[nz.len() - 1] - nz[0] + 1);
    }
    // Adjacent filters overlap.
    for m in 0..39 {
        let overlap = fb.weights()[m].iter().zip(&fb.weights()[m + 1]).any(|(a, b)| *a > 0.0 && *b > 0.0);
        assert!(overlap, "filters {m} and {}", m + 1);
    }
}

#[test]
fn stacking() {
    let a = log_mel(&noise(16_000, 1)).unwrap();
    let b = log_mel(&noise(16_000, 2)).unwrap();
    assert_eq!(stack_channels(std::slice::from_ref(&a)).unwrap(), a);
    let ab = stack_channels(&[a.clone(), b.clone()]).unwrap();
    assert_eq!(ab.channels(), 2);
    assert_eq!(ab.channel(0), a.values());
    assert_eq!(ab.channel(1), b.values());

    let short = log_mel(&noise(15_840, 3)).unwrap();
    assert_eq!(short.frames(), 97);
    let err = stack_channels(&[a.clone(), short]).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch(_)));
    assert!(err.to_string().starts_with("shape mismatch"));

    let per_mic: BTreeMap<Mic, FeatureMap> = [(Mic::Iec, a.clone()), (Mic::Front, b.clone())].into();
    let fi = stack_mics(&per_mic, &[Mic::Front, Mic::Iec]).unwrap();
    assert_eq!(fi, ab);
}

#[test]
fn cache_round_trip() {
    let a = log_mel(&noise(16_000, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.bin");
    write_feature_cache(&p, &a).unwrap();
    assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 + 4 * 40 * 98);
    let back = read_feature_cache(&p).unwrap();
    let want: Vec<f64> = a.values().iter().map(|&v| v as f32 as f64).collect();
    assert_eq!(back.values(), &want[..]);
    std::fs::write(&p, b"nope").unwrap();
    assert!(read_feature_cache(&p).is_err());
}

#[test]
fn deterministic() {
    let x = noise(16_000, 5);
    assert_eq!(log_mel(&x).unwrap(), log_mel(&x).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn scale_covariance(seed in any::<u64>(), c in 0.01f64..100.0) {
        let x = noise(4000, seed);
        let a = log_mel(&x).unwrap();
        let b = log_mel(&x.scaled(c)).unwrap();
        let floor = LOG_FLOOR.ln();
        for (u, v) in a.values().iter().zip(b.values()) {
            if *u > floor + 1.0 && *v > floor + 1.0 {
                prop_assert!((v - u - 2.0 * c.ln()).abs() < 1e-9);
            }
        }
    }
}

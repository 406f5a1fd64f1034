use std::collections::BTreeMap;
use std::f64::consts::PI;

use hakws_core::audio::{active_speech_level, rms_level_db, AudioBuffer};
use hakws_core::scene::synthetic::{synthetic_noise_bank, synthetic_tf_set, synthetic_word, BankSpec, Voice};
use hakws_core::scene::{
    a_posteriori_snr, balance_classes, compose_scenario, make_ssn, plan_dataset, render_noise_at_mic,
    synthesize_utterance, BySplit, ClassLabel, CleanUtterance, DatasetConfig, DatasetInputs,
    LongTermSpectrum, NoiseBank, NoiseScenario, NoiseSource, NoiseType, ScenarioOptions, Split,
};
use hakws_core::tflab::{ImpulseResponse, IrKind, Loudspeaker, Mic, TransferFunctionSet};
use hakws_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

const FS: u32 = 16_000;

fn gaussian(n: usize, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn buf(v: Vec<f64>) -> AudioBuffer {
    AudioBuffer::new(v, FS).unwrap()
}

fn identity_tfs() -> TransferFunctionSet {
    let unit = |kind| ImpulseResponse::unit_impulse(FS, kind);
    let ovtf = Mic::ALL.into_iter().map(|m| (m, unit(IrKind::OwnVoice))).collect();
    let hrtf = Loudspeaker::all()
        .flat_map(|l| Mic::ALL.into_iter().map(move |m| ((l, m), unit(IrKind::Hrtf))))
        .collect();
    TransferFunctionSet::new("identity", ovtf, hrtf).unwrap()
}

fn random_tfs(seed: u64, taps: usize) -> TransferFunctionSet {
    let mut s = seed;
    let mut ir = |kind| {
        s += 1;
        ImpulseResponse::new(gaussian(taps, 0.3, s), FS, kind).unwrap()
    };
    let ovtf = Mic::ALL.into_iter().map(|m| (m, ir(IrKind::OwnVoice))).collect();
    let mut hrtf = BTreeMap::new();
    for l in Loudspeaker::all() {
        for m in Mic::ALL {
            hrtf.insert((l, m), ir(IrKind::Hrtf));
        }
    }
    TransferFunctionSet::new("random", ovtf, hrtf).unwrap()
}

fn bank() -> NoiseBank {
    synthetic_noise_bank(&BankSpec {
        secs: 2.0,
        seed: 5,
        ..Default::default()
    })
    .unwrap()
}

fn word(seed: u64) -> AudioBuffer {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let voice = Voice::random(seed % 2 == 0, &mut rng);
    synthetic_word(ClassLabel::Keyword((seed % 10) as u8), &voice, &mut rng).unwrap()
}

#[test]
fn snr_of_tone_burst_over_noise() {
    // Tone of power 1 (0 dB) over the middle half, white noise of power 0.01.
    let n = 32_000;
    let mut s = gaussian(n, 0.1, 1);
    for (i, v) in s.iter_mut().enumerate().take(24_000).skip(8_000) {
        *v += 2f64.sqrt() * (2.0 * PI * 440.0 * i as f64 / FS as f64).sin();
    }
    let oracle = 10.0 * ((1.0 + 0.01) / 0.01f64).log10();
    let snr = a_posteriori_snr(&buf(s)).unwrap().db();
    assert!((snr - oracle).abs() <= 1.0, "snr {snr}, oracle {oracle}");
}

#[test]
fn snr_of_stationary_noise_is_near_zero() {
    let snr = a_posteriori_snr(&buf(gaussian(32_000, 0.1, 2))).unwrap().db();
    assert!(snr.abs() <= 1.0, "snr {snr}");
}

#[test]
fn scenario_cardinalities() {
    let bank = bank();
    let opts = ScenarioOptions::default();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..20 {
        let babble = compose_scenario(NoiseType::Babble, &bank, &opts, &mut rng).unwrap();
        assert_eq!(babble.houses(), 10);
        let places: std::collections::BTreeSet<_> = babble.sources.iter().map(|s| s.loudspeaker).collect();
        assert_eq!(places.len(), 10);
        let females = babble.sources.iter().filter(|s| s.origin.starts_with("female")).count();
        assert_eq!(females, 5);

        let tv = compose_scenario(NoiseType::Tv, &bank, &opts, &mut rng).unwrap();
        assert_eq!(tv.houses(), 1);
        assert_eq!(tv.sources[0].loudspeaker, Loudspeaker::FRONT);
        assert_eq!(tv.sources[0].loudspeaker.azimuth_deg(), 0.0);

        let music = compose_scenario(NoiseType::Music, &bank, &opts, &mut rng).unwrap();
        assert_eq!(music.sources[1].loudspeaker, music.sources[0].loudspeaker.adjacent());

        let inter = compose_scenario(NoiseType::Interferer, &bank, &opts, &mut rng).unwrap();
        assert_eq!(inter.houses(), 1);
    }
    let ssn = compose_scenario(NoiseType::Ssn, &bank, &opts, &mut rng).unwrap();
    assert_eq!(ssn.houses(), 16);
    let occupied: Vec<u8> = ssn.sources.iter().map(|s| s.loudspeaker.index()).collect();
    assert_eq!(occupied, (1..=16).collect::<Vec<_>>());
    assert_ne!(ssn.sources[0].signal, ssn.sources[1].signal);

    let shared = ScenarioOptions {
        shared_ssn: true,
        ..opts
    };
    let ssn = compose_scenario(NoiseType::Ssn, &bank, &shared, &mut rng).unwrap();
    assert_eq!(ssn.sources[0].signal, ssn.sources[15].signal);
}

#[test]
fn interferer_picks_both_sexes() {
    let bank = bank();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let female = (0..400)
        .filter(|_| {
            compose_scenario(NoiseType::Interferer, &bank, &ScenarioOptions::default(), &mut rng)
                .unwrap()
                .sources[0]
                .origin
                .starts_with("female")
        })
        .count();
    assert!((160..=240).contains(&female), "female picks {female}");
}

#[test]
fn thin_bank_is_rejected() {
    let mut bank = bank();
    bank.female.truncate(4);
    let err = compose_scenario(NoiseType::Babble, &bank, &ScenarioOptions::default(), &mut ChaCha20Rng::seed_from_u64(0));
    assert!(matches!(err, Err(Error::InsufficientMaterial(_))));
    bank.tv.clear();
    let err = compose_scenario(NoiseType::Tv, &bank, &ScenarioOptions::default(), &mut ChaCha20Rng::seed_from_u64(0));
    assert!(matches!(err, Err(Error::InsufficientMaterial(_))));
}

fn source(signal: Vec<f64>, ls: u8) -> NoiseSource {
    NoiseSource {
        signal: buf(signal),
        loudspeaker: Loudspeaker::new(ls).unwrap(),
        origin: "test".into(),
    }
}

#[test]
fn identity_render_and_superposition() {
    let tfs = identity_tfs();
    let nu = gaussian(1000, 0.1, 7);
    let one = NoiseScenario {
        noise_type: NoiseType::Tv,
        sources: vec![source(nu.clone(), 1)],
    };
    let out = render_noise_at_mic(&one, &tfs, Mic::Front, 1000).unwrap();
    assert_eq!(out.samples(), &nu[..]);

    let two = NoiseScenario {
        noise_type: NoiseType::Music,
        sources: vec![source(nu.clone(), 1), source(nu.clone(), 2)],
    };
    let out = render_noise_at_mic(&two, &tfs, Mic::Rear, 1000).unwrap();
    for (o, v) in out.samples().iter().zip(&nu) {
        assert_eq!(*o, 2.0 * v);
    }
}

#[test]
fn render_matches_direct_convolution_oracle() {
    let tfs = random_tfs(11, 200);
    let bank = bank();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let len = 4000;
    let opts = ScenarioOptions {
        segment_len: len,
        shared_ssn: false,
    };
    for ty in NoiseType::ALL {
        let sc = compose_scenario(ty, &bank, &opts, &mut rng).unwrap();
        for mic in Mic::ALL {
            let got = render_noise_at_mic(&sc, &tfs, mic, len).unwrap();
            let mut want = vec![0.0; len];
            for src in &sc.sources {
                let h = tfs.hrtf(src.loudspeaker, mic).unwrap().taps();
                let x = src.signal.samples();
                for (n, w) in want.iter_mut().enumerate() {
                    for (k, hk) in h.iter().enumerate().take(n + 1) {
                        *w += hk * x[n - k];
                    }
                }
            }
            let err = got.samples().iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm = want.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err / norm <= 1e-9, "{ty} {mic}: {}", err / norm);
        }
    }
}

#[test]
fn missing_hrtf_is_an_error() {
    let tfs = identity_tfs();
    let sc = NoiseScenario {
        noise_type: NoiseType::Tv,
        sources: vec![source(vec![0.1; 100], 1)],
    };
    assert!(matches!(
        render_noise_at_mic(&sc, &tfs, Mic::Front, 200),
        Err(Error::InsufficientMaterial(_))
    ));
}

#[test]
fn alpha_gives_unit_gain_at_equal_levels() {
    // Constant signals: ASL and RMS level are both 20 log10(a).
    let a = 10f64.powf(-26.0 / 20.0);
    let clean = buf(vec![a; 16_000]);
    let noise = buf(gaussian(16_000, 1.0, 3));
    let nl = rms_level_db(&noise).unwrap().db();
    let noise = noise.scaled(10f64.powf((-26.0 - nl) / 20.0));
    let asl = active_speech_level(&clean).unwrap().db();
    let alpha = hakws_core::scene::compute_alpha(&clean, &noise, asl - (-26.0)).unwrap();
    assert!((alpha - 1.0).abs() < 1e-9, "alpha {alpha}");
    let remeasured = asl - rms_level_db(&noise.scaled(alpha)).unwrap().db();
    assert!((remeasured - (asl + 26.0)).abs() <= 0.05);
}

#[test]
fn synthesis_degenerate_cases() {
    let tfs = identity_tfs();
    let x = word(1);
    let nu = gaussian(x.len(), 0.05, 9);
    let sc = NoiseScenario {
        noise_type: NoiseType::Tv,
        sources: vec![source(nu.clone(), 1)],
    };
    let asl = active_speech_level(&x).unwrap().db();
    let nl = rms_level_db(&buf(nu.clone())).unwrap().db();
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let s = synthesize_utterance(&x, &tfs, &sc, asl - nl, None, &mut rng).unwrap();
    assert!((s.alpha - 1.0).abs() < 1e-12);
    for mic in Mic::ALL {
        assert_eq!(s.clean[&mic], x);
        let silent = s.mix_with_alpha(mic, 0.0);
        assert_eq!(silent, s.clean[&mic]);
        let y = s.mix_with_alpha(mic, 1.0);
        for ((yv, xv), nv) in y.samples().iter().zip(x.samples()).zip(&nu) {
            assert_eq!(*yv, xv + nv);
        }
    }
}

#[test]
fn snr_round_trip_over_grid() {
    let tfs = synthetic_tf_set("s0", 1).unwrap();
    let bank = bank();
    let grid = [-18.0, -15.0, -9.0, -5.0, 0.0, 5.0, 9.0, 15.0, 18.0, 25.0];
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    for (i, ty) in NoiseType::ALL.into_iter().enumerate() {
        let x = word(i as u64);
        let sc = compose_scenario(ty, &bank, &ScenarioOptions::default(), &mut rng).unwrap();
        for &snr in &grid {
            let s = synthesize_utterance(&x, &tfs, &sc, snr, None, &mut rng).unwrap();
            let measured = active_speech_level(&s.clean[&Mic::Front]).unwrap().db()
                - rms_level_db(&s.scaled_noise(Mic::Front)).unwrap().db();
            assert!((measured - snr).abs() <= 0.05, "{ty} {snr}: {measured}");
            for mic in Mic::ALL {
                let y = s.mix(mic);
                let resid: Vec<f64> = y.samples().iter().zip(s.clean[&mic].samples()).map(|(a, b)| a - b).collect();
                let want = s.scaled_noise(mic);
                for (r, w) in resid.iter().zip(want.samples()) {
                    assert!((r - w).abs() <= 1e-12 * (1.0 + w.abs()));
                }
            }
        }
    }
}

#[test]
fn perturbation_changes_renders_only_when_enabled() {
    let tfs = synthetic_tf_set("s0", 1).unwrap();
    let bank = bank();
    let x = word(3);
    let sc = compose_scenario(NoiseType::Babble, &bank, &ScenarioOptions::default(), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let render = |perturb: bool, seed: u64| {
        let params = Default::default();
        synthesize_utterance(&x, &tfs, &sc, 0.0, perturb.then_some(&params), &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    };
    assert_eq!(render(false, 1), render(false, 2));
    assert_eq!(render(true, 1), render(true, 1));
    assert_ne!(render(true, 1).mix(Mic::Front), render(true, 2).mix(Mic::Front));
}

/// Plain averaged periodogram, Hann window, half overlap.
fn psd_oracle(x: &[f64], n_fft: usize) -> Vec<f64> {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut acc = vec![0.0; n_fft / 2 + 1];
    let mut count = 0.0;
    let mut start = 0;
    while start + n_fft <= x.len() {
        let mut b: Vec<Complex64> = (0..n_fft)
            .map(|i| {
                let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n_fft as f64).cos();
                Complex64::new(x[start + i] * w, 0.0)
            })
            .collect();
        fft.process(&mut b);
        for (a, c) in acc.iter_mut().zip(&b) {
            *a += c.norm_sqr();
        }
        count += 1.0;
        start += n_fft / 2;
    }
    acc.iter().map(|a| a / count).collect()
}

#[test]
fn ssn_from_flat_reference_is_white() {
    let flat = LongTermSpectrum::flat(257, FS).unwrap();
    let noise = make_ssn(&flat, 80_000, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let psd = psd_oracle(noise.samples(), 512);
    let inner = &psd[1..psd.len() - 1];
    let geo = (inner.iter().map(|p| p.ln()).sum::<f64>() / inner.len() as f64).exp();
    let arith = inner.iter().sum::<f64>() / inner.len() as f64;
    assert!(geo / arith > 0.9, "flatness {}", geo / arith);
}

#[test]
fn ssn_matches_speech_spectrum_per_third_octave() {
    let reference = bank().speech_spectrum;
    let noise = make_ssn(&reference, 80_000, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
    let n_fft = 1024;
    let psd = psd_oracle(noise.samples(), n_fft);
    let df = FS as f64 / n_fft as f64;
    let band = |lo: f64, hi: f64| -> (f64, f64) {
        let k0 = (lo / df).ceil() as usize;
        let k1 = (hi / df).floor() as usize;
        let got: f64 = psd[k0..=k1].iter().sum();
        let want: f64 = (k0..=k1).map(|k| reference.at(k as f64 * df).powi(2)).sum();
        (got, want)
    };
    let centres: Vec<f64> = (0..).map(|k| 125.0 * 2f64.powf(k as f64 / 3.0)).take_while(|&f| f < 6400.0).collect();
    let bands: Vec<(f64, f64)> = centres.iter().map(|&c| band(c / 2f64.powf(1.0 / 6.0), c * 2f64.powf(1.0 / 6.0))).collect();
    let total_got: f64 = bands.iter().map(|b| b.0).sum();
    let total_want: f64 = bands.iter().map(|b| b.1).sum();
    for (c, (g, w)) in centres.iter().zip(&bands) {
        let dev = 10.0 * ((g / total_got) / (w / total_want)).log10();
        assert!(dev.abs() <= 3.0, "band {c:.0} Hz deviates {dev:.2} dB");
    }
}

#[test]
fn ssn_realisations_are_uncorrelated() {
    let reference = bank().speech_spectrum;
    let a = make_ssn(&reference, 80_000, &mut ChaCha20Rng::seed_from_u64(10)).unwrap();
    let b = make_ssn(&reference, 80_000, &mut ChaCha20Rng::seed_from_u64(11)).unwrap();
    let n = (2 * a.len()).next_power_of_two();
    let spec = |v: &[f64]| {
        let mut s: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).chain(std::iter::repeat(Complex64::new(0.0, 0.0))).take(n).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut s);
        s
    };
    let (sa, sb) = (spec(a.samples()), spec(b.samples()));
    let mut cross: Vec<Complex64> = sa.iter().zip(&sb).map(|(x, y)| x.conj() * y).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut cross);
    let norm = (a.energy() * b.energy()).sqrt() * n as f64;
    let peak = cross.iter().map(|c| c.re.abs() / norm).fold(0.0, f64::max);
    assert!(peak < 0.05, "cross-correlation peak {peak}");
}

fn placeholder(id: String, label: ClassLabel, speaker: String) -> CleanUtterance {
    CleanUtterance {
        utt_id: id,
        label,
        speaker,
        audio: AudioBuffer::zeros(16_000, FS),
    }
}

fn corpus_of(n: usize, prefix: &str) -> Vec<CleanUtterance> {
    (0..n)
        .map(|i| placeholder(format!("{prefix}{i:04}"), ClassLabel::from_index(i % 12).unwrap(), format!("{prefix}spk{}", i % 17)))
        .collect()
}

#[test]
fn plan_partitions_and_grid() {
    let corpus = BySplit {
        train: corpus_of(30, "tr"),
        val: corpus_of(9, "va"),
        test: corpus_of(120, "te"),
    };
    let subjects = BySplit {
        train: vec![identity_tfs(), identity_tfs(), identity_tfs()],
        val: vec![identity_tfs()],
        test: vec![identity_tfs()],
    };
    let banks = BySplit {
        train: bank(),
        val: bank(),
        test: bank(),
    };
    let inputs = DatasetInputs {
        corpus: &corpus,
        subjects: &subjects,
        banks: &banks,
    };
    let plan = plan_dataset(&DatasetConfig::default(), &inputs).unwrap();
    let test: Vec<_> = plan.iter().filter(|r| r.set == Split::Test).collect();
    assert_eq!(test.len(), 600);
    for p in 0..5u32 {
        let in_part = test.iter().filter(|r| r.partition == p).count();
        assert_eq!(in_part, 24 * 5);
    }
    let types: std::collections::BTreeSet<_> = test.iter().map(|r| r.noise_type).collect();
    assert_eq!(types.len(), 5);
    assert!(test.iter().all(|r| [-18.0, -9.0, 0.0, 9.0, 18.0].contains(&r.target_snr_db)));
    let train: Vec<_> = plan.iter().filter(|r| r.set == Split::Train).collect();
    assert_eq!(train.len(), 30 * 5);
    assert!(train.iter().all(|r| r.noise_type.is_seen()));
    assert!(train.iter().all(|r| [-15.0, -5.0, 5.0, 15.0, 25.0].contains(&r.target_snr_db)));
    // A speaker always maps to the same subject.
    let mut bound = BTreeMap::new();
    for r in &train {
        assert_eq!(bound.entry(&r.gscd_speaker).or_insert(&r.ha_subject), &&r.ha_subject);
    }
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.txt");
    hakws_core::scene::write_manifest(&manifest, &plan).unwrap();
    assert_eq!(hakws_core::scene::read_manifest(&manifest).unwrap(), plan);
}

#[test]
fn balancing_gscd_like_counts() {
    // Keyword counts with a modest spread and a filler pool eight times larger.
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut items = Vec::new();
    for k in 0..10u8 {
        for i in 0..rng.random_range(230..=260) {
            items.push(placeholder(format!("k{k}_{i}"), ClassLabel::Keyword(k), format!("s{i}")));
        }
    }
    for i in 0..2000 {
        items.push(placeholder(format!("f{i}"), ClassLabel::Filler, format!("s{i}")));
    }
    let out = balance_classes(items, "tr_", &mut rng).unwrap();
    let mut counts = [0usize; 12];
    for u in &out {
        counts[u.label.index()] += 1;
    }
    let max = *counts.iter().max().unwrap() as f64;
    let min = *counts.iter().min().unwrap() as f64;
    assert!(max / min <= 1.3, "counts {counts:?}");
    assert!(out.iter().filter(|u| u.label == ClassLabel::Ambient).all(|u| u.audio.energy() == 0.0));
}

fn small_inputs() -> (BySplit<Vec<CleanUtterance>>, BySplit<Vec<TransferFunctionSet>>, BySplit<NoiseBank>) {
    use hakws_core::scene::synthetic::{synthetic_corpus, CorpusSpec};
    let classes = vec![ClassLabel::Keyword(0), ClassLabel::Keyword(1), ClassLabel::Ambient];
    let corpus = |per_class, seed, prefix: &str| {
        synthetic_corpus(&CorpusSpec {
            classes: classes.clone(),
            per_class,
            speakers: 4,
            seed,
            prefix: prefix.into(),
        })
        .unwrap()
    };
    let tfs = |id: &str, seed| synthetic_tf_set(id, seed).unwrap();
    let bank_for = |seed| {
        synthetic_noise_bank(&BankSpec {
            secs: 1.5,
            seed,
            ..Default::default()
        })
        .unwrap()
    };
    (
        BySplit {
            train: corpus(2, 1, "tr_"),
            val: corpus(1, 2, "va_"),
            test: corpus(2, 3, "te_"),
        },
        BySplit {
            train: vec![tfs("s1", 1), tfs("s2", 2), tfs("s3", 3)],
            val: vec![tfs("s4", 4)],
            test: vec![tfs("s5", 5)],
        },
        BySplit {
            train: bank_for(10),
            val: bank_for(11),
            test: bank_for(12),
        },
    )
}

fn tree_bytes(root: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
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

#[test]
fn build_is_reproducible_across_thread_counts() {
    use hakws_core::audio::read_wav;
    use hakws_core::scene::{render_record, MANIFEST_FILE};
    let (corpus, subjects, banks) = small_inputs();
    let inputs = DatasetInputs {
        corpus: &corpus,
        subjects: &subjects,
        banks: &banks,
    };
    let config = DatasetConfig {
        seed: 77,
        ..Default::default()
    };
    let run = |threads| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let records = pool.install(|| hakws_core::scene::build_dataset(&config, &inputs, dir.path())).unwrap();
        (dir, records)
    };
    let (dir_a, records) = run(1);
    let (dir_b, _) = run(3);
    let a = tree_bytes(dir_a.path());
    assert_eq!(a, tree_bytes(dir_b.path()));
    assert!(a.contains_key(MANIFEST_FILE));
    // 6 train + 3 val items at 5 SNRs, 6 test items at 5 SNRs.
    assert_eq!(records.len(), (6 + 3 + 6) * 5);
    assert_eq!(a.len(), 1 + 3 * records.len());

    // Every record re-renders from its seed to the stored waveforms.
    let find = |split: Split, id: &str| corpus.get(split).iter().find(|u| u.utt_id == id).unwrap();
    for r in &records {
        let tfs = subjects.get(r.set).iter().find(|t| t.subject_id() == r.ha_subject).unwrap();
        let synth = render_record(r, find(r.set, &r.utt_id), tfs, banks.get(r.set), &config).unwrap();
        assert_eq!(Some(synth.alpha), r.alpha);
        for mic in Mic::ALL {
            let stored = read_wav(dir_a.path().join(r.paths.get(mic))).unwrap();
            let want: Vec<f64> = synth.mix(mic).samples().iter().map(|&v| v as f32 as f64).collect();
            assert_eq!(stored.samples(), &want[..], "{} {mic}", r.utt_id);
        }
        if r.class_label == ClassLabel::Ambient {
            assert!(synth.clean.values().all(|c| c.energy() == 0.0));
        }
    }
}

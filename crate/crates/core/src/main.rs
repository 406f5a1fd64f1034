use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hakws_core::audio::{read_wav, write_wav, AudioBuffer, BitDepth};
use hakws_core::bcresnet::{format_summary, BcResNet};
use hakws_core::grad::Checkpoint;
use hakws_core::harness::{
    evaluate, load_examples, load_material, measure_rtf_for, synthetic_material, train, write_log,
    EvalReport, Example, SynthMaterial, TrainConfig,
};
use hakws_core::mel::{log_mel, stack_mics, write_feature_cache};
use hakws_core::scene::{build_dataset, read_manifest, DatasetConfig, Split, UtteranceRecord, MANIFEST_FILE};
use hakws_core::tflab::{deconvolve_sweep, estimate_ir_lms, generate_exp_sweep, parse_mic_subset, Mic};
use hakws_core::{Error, Result};

#[derive(Parser)]
#[command(name = "hakws", version, about = "Own-voice keyword spotting for hearing aids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Global seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Render a noisy multi-microphone dataset and its manifest.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Clean items per class in the train split of a synthetic build.
        #[arg(long, default_value_t = 8)]
        per_class: usize,
    },
    /// Compute stacked log-mel feature caches for a dataset.
    Features {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Microphone subset, e.g. "i", "i+f", "ifr".
        #[arg(long, default_value = "i")]
        mics: String,
    },
    /// Train one model per seed.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Train only this seed instead of the configured list.
        #[arg(long)]
        only_seed: bool,
    },
    /// Evaluate checkpoints on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, default_value = "model")]
        label: String,
    },
    /// Measure the real-time factor of a freshly initialised model.
    Rtf {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3.0)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        mic_count: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Estimate an impulse response from an excitation and a recording.
    EstimateTf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        recording: PathBuf,
        #[arg(long, default_value_t = 256)]
        taps: usize,
        #[arg(long, default_value_t = 0.5)]
        step_size: f64,
        #[arg(long, default_value_t = 2)]
        passes: usize,
    },
    /// Write an exponential sweep and its inverse, or deconvolve a recording.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20.0)]
        f_start: f64,
        #[arg(long, default_value_t = 8000.0)]
        f_end: f64,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        /// Deconvolve this recording instead of only writing the sweep.
        #[arg(long)]
        recording: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        ir_len: usize,
    },
    /// Print evaluation reports, or a layer summary of a model.
    Report {
        #[command(flatten)]
        common: Common,
        /// `report.json` files written by `eval`.
        #[arg(long, num_args = 0..)]
        reports: Vec<PathBuf>,
        /// Print the layer table of a model with this width multiplier.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 1)]
        mic_count: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { common, per_class } => synth(&common, per_class),
        Command::Features { common, dataset, mics } => features(&common, &dataset, &mics),
        Command::Train {
            common,
            dataset,
            only_seed,
        } => train_seeds(&common, dataset, only_seed),
        Command::Eval {
            common,
            dataset,
            checkpoint,
            label,
        } => eval(&common, dataset, &checkpoint, &label),
        Command::Rtf {
            common,
            tau,
            mic_count,
            trials,
        } => {
            let m = measure_rtf_for(tau, mic_count, trials, common.seed)?;
            println!("tau {tau} mics {mic_count}: RTF {:.4} (median of {})", m.median, m.trials.len());
            Ok(())
        }
        Command::EstimateTf {
            common,
            input,
            recording,
            taps,
            step_size,
            passes,
        } => {
            let ir = estimate_ir_lms(&read_wav(input)?, &read_wav(recording)?, taps, step_size, passes)?;
            fs::create_dir_all(&common.out)?;
            let path = common.out.join("ir.wav");
            write_wav(&path, &AudioBuffer::new(ir.taps().to_vec(), ir.sample_rate())?, BitDepth::Float32)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep {
            common,
            f_start,
            f_end,
            duration,
            recording,
            ir_len,
        } => {
            let s = generate_exp_sweep(f_start, f_end, duration, hakws_core::audio::SAMPLE_RATE)?;
            fs::create_dir_all(&common.out)?;
            write_wav(common.out.join("sweep.wav"), &s.sweep, BitDepth::Float32)?;
            write_wav(common.out.join("inverse.wav"), &s.inverse_filter, BitDepth::Float32)?;
            if let Some(rec) = recording {
                let est = deconvolve_sweep(&read_wav(rec)?, &s.inverse_filter, ir_len)?;
                if est.low_energy {
                    eprintln!("warning: recording carries almost no energy");
                }
                let ir = AudioBuffer::new(est.ir.taps().to_vec(), est.ir.sample_rate())?;
                write_wav(common.out.join("ir.wav"), &ir, BitDepth::Float32)?;
            }
            println!("wrote {}", common.out.display());
            Ok(())
        }
        Command::Report {
            common: _,
            reports,
            tau,
            mic_count,
        } => {
            for path in reports {
                let report: EvalReport = serde_json::from_str(&fs::read_to_string(path)?)
                    .map_err(|e| Error::Config(e.to_string()))?;
                println!("{}", report.to_text());
            }
            if let Some(tau) = tau {
                let model = BcResNet::<f32>::new(
                    hakws_core::bcresnet::ModelConfig::new(tau, mic_count),
                    0,
                )?;
                let x = hakws_core::grad::Tensor::zeros(&[1, mic_count, 40, 98]);
                print!("{}", format_summary(&model.summary(&x)?));
            }
            Ok(())
        }
    }
}

fn synth(common: &Common, per_class: usize) -> Result<()> {
    let mut config = match &common.config {
        Some(p) => DatasetConfig::load(p)?,
        None => DatasetConfig::default(),
    };
    config.seed = common.seed;
    let material = if config.corpus_dir.is_some() {
        load_material(&config)?
    } else {
        let mut spec = SynthMaterial::default();
        spec.per_class.train = per_class;
        spec.per_class.val = per_class.div_ceil(4);
        spec.per_class.test = per_class.div_ceil(2);
        synthetic_material(&spec, common.seed)?
    };
    let records = build_dataset(&config, &material.inputs(), &common.out)?;
    fs::write(common.out.join("dataset.toml"), config.to_toml())?;
    println!("{} renders in {}", records.len(), common.out.display());
    Ok(())
}

fn features(common: &Common, dataset: &Path, mics: &str) -> Result<()> {
    let mics = parse_mic_subset(mics)?;
    let records = read_manifest(dataset.join(MANIFEST_FILE))?;
    fs::create_dir_all(&common.out)?;
    let mut index = String::from("file\tutt_id\tset\tlabel\tnoise\tsnr_db\n");
    for (i, r) in records.iter().enumerate() {
        let per_mic = mics
            .iter()
            .map(|&m| Ok((m, log_mel(&read_wav(dataset.join(r.paths.get(m)))?)?)))
            .collect::<Result<_>>()?;
        let name = format!("{i:06}.mel");
        write_feature_cache(common.out.join(&name), &stack_mics(&per_mic, &mics)?)?;
        index.push_str(&format!(
            "{name}\t{}\t{}\t{}\t{}\t{}\n",
            r.utt_id, r.set, r.class_label, r.noise_type, r.target_snr_db
        ));
    }
    fs::write(common.out.join("features.tsv"), index)?;
    println!("{} feature maps in {}", records.len(), common.out.display());
    Ok(())
}

fn train_config(common: &Common) -> Result<TrainConfig> {
    match &common.config {
        Some(p) => TrainConfig::load(p),
        None => Ok(TrainConfig::default()),
    }
}

fn dataset_dir(config: &TrainConfig, flag: Option<PathBuf>) -> Result<PathBuf> {
    flag.or_else(|| config.dataset_dir.clone())
        .ok_or_else(|| Error::Config("no dataset directory given".into()))
}

fn split_examples(root: &Path, records: &[UtteranceRecord], split: Split, mics: &[Mic]) -> Result<Vec<Example>> {
    let subset: Vec<UtteranceRecord> = records.iter().filter(|r| r.set == split).cloned().collect();
    load_examples(root, &subset, mics)
}

fn train_seeds(common: &Common, dataset: Option<PathBuf>, only_seed: bool) -> Result<()> {
    let config = train_config(common)?;
    let root = dataset_dir(&config, dataset)?;
    let records = read_manifest(root.join(MANIFEST_FILE))?;
    let train_set = split_examples(&root, &records, Split::Train, &config.mics)?;
    let val_set = split_examples(&root, &records, Split::Val, &config.mics)?;
    let seeds = if only_seed { vec![common.seed] } else { config.seeds.clone() };
    for seed in seeds {
        let dir = common.out.join(format!("seed{seed}"));
        fs::create_dir_all(&dir)?;
        let outcome = train(&config, seed, &train_set, &val_set)?;
        let mut final_ckpt = Checkpoint::capture(&outcome.model);
        let mut best = outcome.best.clone();
        for ckpt in [&mut final_ckpt, &mut best] {
            ckpt.meta.insert("seed".into(), seed.to_string());
            ckpt.meta.insert("tau".into(), config.tau.to_string());
        }
        final_ckpt.save(&dir.join("final.ckpt"))?;
        best.save(&dir.join("best.ckpt"))?;
        write_log(&dir.join("train_log.jsonl"), &outcome.log)?;
        fs::write(dir.join("train.toml"), config.to_toml())?;
        println!(
            "seed {seed}: best epoch {} val acc {:?}",
            outcome.best_epoch, outcome.best_val_acc
        );
    }
    Ok(())
}

fn eval(common: &Common, dataset: Option<PathBuf>, checkpoints: &[PathBuf], label: &str) -> Result<()> {
    let config = train_config(common)?;
    let root = dataset_dir(&config, dataset)?;
    let records = read_manifest(root.join(MANIFEST_FILE))?;
    let test_set = split_examples(&root, &records, Split::Test, &config.mics)?;
    let mut snrs: Vec<f64> = test_set.iter().map(|e| e.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let mut tables = Vec::with_capacity(checkpoints.len());
    for path in checkpoints {
        let mut model = BcResNet::<f32>::new(config.model_config(), 0)?;
        Checkpoint::load(path)?.restore(&mut model)?;
        tables.push(evaluate(&model, &test_set, &snrs)?);
    }
    let report = EvalReport::from_tables(label, tables, None)?;
    fs::create_dir_all(&common.out)?;
    fs::write(common.out.join("report.txt"), report.to_text())?;
    fs::write(
        common.out.join("report.json"),
        serde_json::to_string_pretty(&report).expect("report is serialisable"),
    )?;
    print!("{}", report.to_text());
    Ok(())
}

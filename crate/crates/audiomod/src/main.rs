//! Command-line entry point: feature extraction, synthetic data generation,
//! training (with and without distillation), evaluation, and learning-rate
//! schedule preview.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use audiomod::checkpoint::{load_into_model, read_checkpoint};
use audiomod::config::RunConfig;
use audiomod::data::{extract_features_parallel, make_synthetic_dataset, FeatureCache, Manifest, Split};
use audiomod::error::{Error, Result};
use audiomod::model::build_model;
use audiomod::train::{evaluate, evaluate_parallel, lr_at, train, TrainOutcome};

#[derive(Parser)]
#[command(name = "audiomod", version, about = "Audio classification toolkit")]
struct Cli {
    /// Config file (flat `key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. --set train.warmup=gradual (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Worker threads for extraction and evaluation
    /// (env AUDIOMOD_THREADS is the fallback)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Manifest path (overrides the `manifest` config key)
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Output directory (overrides the `out_dir` config key)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract log-filterbank features for every manifest record
    Extract {
        /// Directory for the per-utterance feature files
        #[arg(long, value_name = "DIR")]
        features_out: PathBuf,
    },
    /// Generate the synthetic two-class corpus plus manifest
    GenData,
    /// Train a model from scratch
    Train,
    /// Train a student under a frozen teacher (trains the teacher first
    /// when no checkpoint is configured and --train-teacher is given)
    Distill {
        #[arg(long)]
        train_teacher: bool,
    },
    /// Report accuracy of a checkpoint on one split
    Eval {
        /// Checkpoint to load (default: <out_dir>/best.ckpt)
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Print the learning rate for every epoch of the configured schedule
    LrPreview,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} msg=\"{}\"", e.kind(), e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn resolve_threads(cli_threads: Option<usize>, cfg: &RunConfig) -> usize {
    cli_threads
        .or_else(|| std::env::var("AUDIOMOD_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| cfg.get_usize("threads"))
        .max(1)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref(), &cli.sets)?;
    if let Some(m) = &cli.manifest {
        cfg.set("manifest", &m.to_string_lossy())?;
    }
    if let Some(o) = &cli.out {
        cfg.set("out_dir", &o.to_string_lossy())?;
    }
    let threads = resolve_threads(cli.threads, &cfg);
    let out_dir = PathBuf::from(cfg.get("out_dir"));

    match cli.command {
        Command::Extract { features_out } => {
            let manifest = load_manifest(&cfg)?;
            let fbank = cfg.fbank_config()?;
            let n = extract_features_parallel(manifest.records(), &fbank, &features_out, threads)?;
            cfg.write_echo(&features_out)?;
            println!("extracted {n} feature files to {}", features_out.display());
        }
        Command::GenData => {
            let n = cfg.get_usize("data.n_per_class");
            let seed = cfg.get_u64("seed");
            let manifest = make_synthetic_dataset(n, &out_dir, seed)?;
            cfg.write_echo(&out_dir)?;
            println!(
                "wrote {} wavs and {} to {}",
                manifest.records().len(),
                out_dir.join("manifest.jsonl").display(),
                out_dir.display()
            );
        }
        Command::Train => {
            let manifest = load_manifest(&cfg)?;
            cfg.write_echo(&out_dir)?;
            let outcome = run_train(&cfg, &manifest, &out_dir, None)?;
            print_outcome("train", &outcome);
        }
        Command::Distill { train_teacher } => {
            let manifest = load_manifest(&cfg)?;
            cfg.write_echo(&out_dir)?;
            let teacher_ckpt = match cfg.get("train.kd_teacher") {
                "" if !train_teacher => {
                    return Err(Error::Config(
                        "distill needs train.kd_teacher or --train-teacher".into(),
                    ))
                }
                "" => {
                    // phase 1: same recipe minus distillation
                    let teacher_dir = out_dir.join("teacher");
                    let outcome = run_train_arch(&cfg, &manifest, &teacher_dir, true, None)?;
                    print_outcome("teacher", &outcome);
                    outcome.best_ckpt
                }
                path => {
                    let path = PathBuf::from(path);
                    if !path.exists() {
                        return Err(Error::Config(format!(
                            "train.kd_teacher={} does not exist",
                            path.display()
                        )));
                    }
                    path
                }
            };
            let student_dir = out_dir.join("student");
            let outcome = run_train(&cfg, &manifest, &student_dir, Some(&teacher_ckpt))?;
            print_outcome("student", &outcome);
        }
        Command::Eval { ckpt, split } => {
            let manifest = load_manifest(&cfg)?;
            let split = Split::parse(&split)?;
            let ckpt_path = ckpt.unwrap_or_else(|| out_dir.join("best.ckpt"));
            let model_cfg = cfg.model_config()?;
            let fbank = cfg.fbank_config()?;
            let batch_size = cfg.get_usize("train.batch_size");
            let raw = read_checkpoint(&ckpt_path)?;
            let records = manifest.split(split);
            let (loss, accuracy) = if threads > 1 {
                evaluate_parallel(&model_cfg, &raw, &records, &fbank, batch_size, threads)?
            } else {
                let model = build_model::<f32>(&model_cfg, 0)?;
                audiomod::checkpoint::apply_checkpoint(&model.named_params(), &raw)?;
                let mut cache = FeatureCache::new(fbank);
                let rec = evaluate(&model, &manifest, split, &mut cache, batch_size)?;
                (rec.loss, rec.accuracy)
            };
            println!(
                "{}",
                serde_json::json!({"split": split.as_str(), "accuracy": accuracy, "loss": loss})
            );
        }
        Command::LrPreview => {
            let plan = cfg.schedule_plan()?;
            for epoch in 0..cfg.get_usize("train.epochs") {
                println!("{epoch}\t{}", lr_at(epoch as f64, &plan));
            }
        }
    }
    Ok(())
}

fn load_manifest(cfg: &RunConfig) -> Result<Manifest> {
    let path = cfg.get("manifest");
    if path.is_empty() {
        return Err(Error::Config("no manifest configured (use --manifest or the manifest key)".into()));
    }
    Manifest::load(Path::new(path))
}

fn run_train(cfg: &RunConfig, manifest: &Manifest, out_dir: &Path, teacher_ckpt: Option<&Path>) -> Result<TrainOutcome> {
    run_train_arch(cfg, manifest, out_dir, false, teacher_ckpt)
}

/// Trains either the student (config arch) or the teacher (teacher arch,
/// same recipe minus distillation).
fn run_train_arch(
    cfg: &RunConfig,
    manifest: &Manifest,
    out_dir: &Path,
    as_teacher: bool,
    teacher_ckpt: Option<&Path>,
) -> Result<TrainOutcome> {
    let model_cfg = if as_teacher { cfg.teacher_model_config()? } else { cfg.model_config()? };
    let mut train_cfg = cfg.train_config(!as_teacher && teacher_ckpt.is_some())?;
    if let (Some(kd), Some(path)) = (train_cfg.kd.as_mut(), teacher_ckpt) {
        kd.teacher_ckpt = path.to_path_buf();
    }
    let seed = cfg.get_u64("seed");
    let model = build_model::<f32>(&model_cfg, seed)?;
    let teacher = match &train_cfg.kd {
        Some(kd) => {
            let tm = build_model::<f32>(&cfg.teacher_model_config()?, seed)?;
            load_into_model(&kd.teacher_ckpt, &tm.named_params())?;
            Some(tm)
        }
        None => None,
    };
    let mut cache = FeatureCache::new(cfg.fbank_config()?);
    train(&model, teacher.as_ref(), manifest, &mut cache, &train_cfg, out_dir)
}

fn print_outcome(tag: &str, outcome: &TrainOutcome) {
    println!(
        "{}",
        serde_json::json!({
            "phase": tag,
            "best_epoch": outcome.summary.best_epoch,
            "best_val_accuracy": outcome.summary.best_val_accuracy,
            "test_accuracy": outcome.summary.test_accuracy,
            "best_ckpt": outcome.best_ckpt.display().to_string(),
            "metrics": outcome.metrics_path.display().to_string(),
        })
    );
}

//! Training engine: losses, schedules, the Adam optimizer, and the
//! train/eval loops with JSON-lines metrics and checkpointing.

mod adam;
mod losses;
mod schedule;

pub use adam::Adam;
pub use losses::{ce_loss, kd_loss, label_smoothing_loss, total_loss, HardLoss};
pub use schedule::{lr_at, SchedulePlan, WarmupKind};

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::save_checkpoint;
use crate::data::{load_batch, plan_batches, Batch, FeatureCache, Manifest, ManifestRecord, Split};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::{no_grad, BnMode, Scalar, Tensor};

/// Knowledge-distillation settings; present only when a teacher is used.
#[derive(Debug, Clone)]
pub struct KdConfig {
    pub teacher_ckpt: PathBuf,
    pub temperature: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: SchedulePlan,
    pub label_smoothing_eps: f64,
    pub kd: Option<KdConfig>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 1024,
            schedule: SchedulePlan::default(),
            label_smoothing_eps: 0.0,
            kd: None,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("train.epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing_eps) {
            return Err(Error::Config("train.label_smoothing_eps must lie in [0, 1)".into()));
        }
        if let Some(kd) = &self.kd {
            if kd.temperature <= 0.0 {
                return Err(Error::Config("train.kd_t must be positive".into()));
            }
            if !(0.0..=1.0).contains(&kd.lambda) {
                return Err(Error::Config("train.kd_lambda must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn hard_loss(&self) -> HardLoss {
        if self.label_smoothing_eps > 0.0 {
            HardLoss::LabelSmoothing(self.label_smoothing_eps)
        } else {
            HardLoss::CrossEntropy
        }
    }
}

/// One metrics line: per-epoch loss/accuracy for one split.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Test accuracy of the best checkpoint, when the manifest has a test split.
    pub test_accuracy: Option<f64>,
}

pub struct TrainOutcome {
    pub summary: TrainSummary,
    pub best_ckpt: PathBuf,
    pub metrics_path: PathBuf,
}

fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let shape = logits.shape();
    let (n, k) = (shape[0], shape[1]);
    logits.with_data(|d| {
        (0..n)
            .map(|r| {
                let row = &d[r * k..(r + 1) * k];
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0
            })
            .collect()
    })
}

fn batch_stats<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> usize {
    argmax_rows(logits)
        .iter()
        .zip(labels)
        .filter(|(a, b)| a == b)
        .count()
}

struct MetricsWriter {
    file: std::io::BufWriter<std::fs::File>,
    path: PathBuf,
}

impl MetricsWriter {
    fn create(path: PathBuf) -> Result<Self> {
        Ok(MetricsWriter {
            file: std::io::BufWriter::new(std::fs::File::create(&path)?),
            path,
        })
    }

    fn line<S: Serialize>(&mut self, value: &S) -> Result<()> {
        serde_json::to_writer(&mut self.file, value).map_err(|e| Error::Data(e.to_string()))?;
        self.file.write_all(b"\n")?;
        self.file.flush()?;
        Ok(())
    }
}

/// Runs the configured number of epochs, writing `metrics.jsonl`,
/// `epoch_<n>.ckpt` and `best.ckpt` (by validation accuracy) into `out_dir`.
/// Fully deterministic for a given seed. A non-finite loss aborts with a
/// diagnostic record.
pub fn train<T: Scalar>(
    model: &Model<T>,
    teacher: Option<&Model<T>>,
    manifest: &Manifest,
    cache: &mut FeatureCache,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.kd.is_some() != teacher.is_some() {
        return Err(Error::Config(
            "knowledge distillation requires a teacher model (and a teacher requires kd settings)".into(),
        ));
    }
    let train_records = manifest.split(Split::Train);
    let val_records = manifest.split(Split::Val);
    if train_records.is_empty() || val_records.is_empty() {
        return Err(Error::Data("training requires nonempty train and val splits".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut metrics = MetricsWriter::create(out_dir.join("metrics.jsonl"))?;
    let params = model.trainable_params();
    let mut opt = Adam::new(&params);
    let hard = cfg.hard_loss();

    let mut best: Option<(usize, f64)> = None;
    let mut best_ckpt = out_dir.join("best.ckpt");
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch as f64, &cfg.schedule);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        let mut total = 0usize;
        for group in plan_batches(&train_records, cfg.batch_size, cfg.seed, epoch) {
            let batch = load_batch(&group, cache)?;
            let x = batch.to_tensor::<T>();
            let logits = model.forward_classify(&x, &batch.valid_t, BnMode::Train)?;
            let loss = match (&cfg.kd, teacher) {
                (Some(kd), Some(teacher)) => {
                    let teacher_logits =
                        no_grad(|| teacher.forward_classify(&x, &batch.valid_t, BnMode::Eval))?;
                    total_loss(&logits, &teacher_logits, &batch.labels, hard, kd.temperature, kd.lambda)?
                }
                _ => hard.compute(&logits, &batch.labels)?,
            };
            let loss_value = loss.item().to_f64();
            if !loss_value.is_finite() {
                metrics.line(&serde_json::json!({
                    "event": "nan_abort",
                    "epoch": epoch,
                    "batch_ids": batch.ids,
                }))?;
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}; aborting (see metrics file)"
                )));
            }
            model.zero_grads();
            loss.backward()?;
            opt.step(&params, lr);
            loss_sum += loss_value * batch.n as f64;
            correct += batch_stats(&logits, &batch.labels);
            total += batch.n;
        }
        metrics.line(&MetricsRecord {
            epoch,
            split: "train".into(),
            loss: loss_sum / total as f64,
            accuracy: correct as f64 / total as f64,
            lr,
        })?;

        let (val_loss, val_acc) = evaluate_records(model, &val_records, cache, cfg.batch_size)?;
        metrics.line(&MetricsRecord {
            epoch,
            split: "val".into(),
            loss: val_loss,
            accuracy: val_acc,
            lr,
        })?;

        let named = model.named_params();
        let ckpt = out_dir.join(format!("epoch_{epoch}.ckpt"));
        save_checkpoint(&ckpt, &named)?;
        write_sidecar(&ckpt, model)?;
        if best.map_or(true, |(_, acc)| val_acc > acc) {
            best = Some((epoch, val_acc));
            best_ckpt = out_dir.join("best.ckpt");
            save_checkpoint(&best_ckpt, &named)?;
            write_sidecar(&best_ckpt, model)?;
        }
    }
    let (best_epoch, best_val_accuracy) = best.expect("at least one epoch ran");

    // reload the winner and log its test accuracy so a later `eval` on
    // best.ckpt has a reference value in the metrics file
    let test_records = manifest.split(Split::Test);
    let test_accuracy = if test_records.is_empty() {
        None
    } else {
        crate::checkpoint::load_into_model(&best_ckpt, &model.named_params())?;
        let (test_loss, test_acc) = evaluate_records(model, &test_records, cache, cfg.batch_size)?;
        metrics.line(&MetricsRecord {
            epoch: best_epoch,
            split: "test".into(),
            loss: test_loss,
            accuracy: test_acc,
            lr: 0.0,
        })?;
        Some(test_acc)
    };

    let summary = TrainSummary { best_epoch, best_val_accuracy, test_accuracy };
    metrics.line(&summary)?;
    Ok(TrainOutcome { summary, best_ckpt, metrics_path: metrics.path })
}

/// Evaluation fanned out over `threads` chunks of the (duration-sorted)
/// record list. Each thread rebuilds the model from the checkpoint snapshot,
/// so no graph state crosses threads; merged totals are order-independent.
pub fn evaluate_parallel(
    model_cfg: &crate::model::ModelConfig,
    ckpt: &crate::checkpoint::RawCheckpoint,
    records: &[&ManifestRecord],
    fbank: &crate::audio::FbankConfig,
    batch_size: usize,
    threads: usize,
) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::Data("evaluation split is empty".into()));
    }
    let mut ordered: Vec<&ManifestRecord> = records.to_vec();
    ordered.sort_by(|a, b| {
        a.duration_s
            .partial_cmp(&b.duration_s)
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
    });
    let threads = threads.max(1).min(ordered.len());
    let chunk = ordered.len().div_ceil(threads);
    let partials: Vec<Result<(f64, usize, usize)>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for part in ordered.chunks(chunk) {
            handles.push(scope.spawn(move || -> Result<(f64, usize, usize)> {
                let model = crate::model::build_model::<f32>(model_cfg, 0)?;
                crate::checkpoint::apply_checkpoint(&model.named_params(), ckpt)?;
                let mut cache = FeatureCache::new(fbank.clone());
                let mut loss_sum = 0.0f64;
                let mut correct = 0usize;
                let mut total = 0usize;
                for group in part.chunks(batch_size) {
                    let batch = load_batch(group, &mut cache)?;
                    let (loss, ok) = eval_batch(&model, &batch)?;
                    loss_sum += loss * batch.n as f64;
                    correct += ok;
                    total += batch.n;
                }
                Ok((loss_sum, correct, total))
            }));
        }
        handles.into_iter().map(|h| h.join().expect("eval thread panicked")).collect()
    });
    let (mut loss_sum, mut correct, mut total) = (0.0f64, 0usize, 0usize);
    for p in partials {
        let (l, c, t) = p?;
        loss_sum += l;
        correct += c;
        total += t;
    }
    Ok((loss_sum / total as f64, correct as f64 / total as f64))
}

/// Model-config sidecar next to each checkpoint.
fn write_sidecar<T: Scalar>(ckpt: &Path, model: &Model<T>) -> Result<()> {
    let cfg = model.config();
    let text = format!(
        "model.arch = {}\nmodel.attention = {}\nmodel.attention_r = {}\nmodel.pooling = {}\nmodel.n_classes = {}\n",
        cfg.arch.as_str(),
        cfg.attention.as_str(),
        cfg.attention_r,
        cfg.pooling.as_str(),
        cfg.n_classes
    );
    std::fs::write(ckpt.with_extension("ckpt.meta"), text)?;
    Ok(())
}

/// Accuracy and mean cross-entropy over records, eval mode (running
/// statistics, graph-free).
pub fn evaluate_records<T: Scalar>(
    model: &Model<T>,
    records: &[&ManifestRecord],
    cache: &mut FeatureCache,
    batch_size: usize,
) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::Data("evaluation split is empty".into()));
    }
    // deterministic length-sorted order keeps padding small
    let mut ordered: Vec<&ManifestRecord> = records.to_vec();
    ordered.sort_by(|a, b| {
        a.duration_s
            .partial_cmp(&b.duration_s)
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
    });
    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    let mut total = 0usize;
    for group in ordered.chunks(batch_size) {
        let batch = load_batch(group, cache)?;
        let (loss, ok) = eval_batch(model, &batch)?;
        loss_sum += loss * batch.n as f64;
        correct += ok;
        total += batch.n;
    }
    Ok((loss_sum / total as f64, correct as f64 / total as f64))
}

fn eval_batch<T: Scalar>(model: &Model<T>, batch: &Batch) -> Result<(f64, usize)> {
    no_grad(|| {
        let x = batch.to_tensor::<T>();
        let logits = model.forward_classify(&x, &batch.valid_t, BnMode::Eval)?;
        let loss = ce_loss(&logits, &batch.labels)?.item().to_f64();
        Ok((loss, batch_stats(&logits, &batch.labels)))
    })
}

/// Evaluate one named split of a manifest.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    manifest: &Manifest,
    split: Split,
    cache: &mut FeatureCache,
    batch_size: usize,
) -> Result<MetricsRecord> {
    let records = manifest.split(split);
    let (loss, accuracy) = evaluate_records(model, &records, cache, batch_size)?;
    Ok(MetricsRecord {
        epoch: 0,
        split: split.as_str().into(),
        loss,
        accuracy,
        lr: 0.0,
    })
}

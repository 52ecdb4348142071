//! Run configuration: flat `key = value` text with dotted namespaces.
//! Resolution is layered — built-in defaults, then the file, then command
//! line `--set key=value` overrides — and the fully resolved table is echoed
//! into the output directory for provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::attention::AttentionKind;
use crate::audio::FbankConfig;
use crate::error::{Error, Result};
use crate::model::{Arch, ModelConfig};
use crate::pooling::PoolingKind;
use crate::train::{KdConfig, SchedulePlan, TrainConfig, WarmupKind};

#[derive(Debug, Clone, Copy)]
enum Kind {
    U64,
    Usize,
    F64,
    Str,
    Enum(&'static [&'static str]),
}

/// Every known key with its default and value kind. Defaults follow the
/// reference training recipe where one is stated: lr 0.1 divided by 10 every
/// 5 epochs, 20 epochs, batch 1024, resnet18 with average pooling, warmup
/// lr0 1e-5 over 5 epochs, KD T=10 lambda=0.5.
const SCHEMA: &[(&str, &str, Kind)] = &[
    ("seed", "42", Kind::U64),
    ("manifest", "", Kind::Str),
    ("out_dir", "runs/default", Kind::Str),
    ("threads", "1", Kind::Usize),
    ("audio.sample_rate", "16000", Kind::U64),
    ("audio.window_ms", "20", Kind::F64),
    ("audio.hop_ms", "10", Kind::F64),
    ("audio.n_mels", "80", Kind::Usize),
    ("audio.fft_size", "512", Kind::Usize),
    ("audio.fmin_hz", "0", Kind::F64),
    ("audio.fmax_hz", "8000", Kind::F64),
    ("model.arch", "resnet18", Kind::Enum(&["resnet18", "resnet50", "micro"])),
    ("model.attention", "none", Kind::Enum(&["none", "se", "cbam", "ca"])),
    ("model.attention_r", "16", Kind::Usize),
    ("model.pooling", "average", Kind::Enum(&["average", "attentive", "max"])),
    ("model.n_classes", "2", Kind::Usize),
    ("model.teacher_arch", "resnet50", Kind::Enum(&["resnet18", "resnet50", "micro"])),
    ("train.epochs", "20", Kind::Usize),
    ("train.batch_size", "1024", Kind::Usize),
    ("train.base_lr", "0.1", Kind::F64),
    ("train.decay_every", "5", Kind::Usize),
    ("train.warmup", "none", Kind::Enum(&["none", "constant", "gradual"])),
    ("train.warmup_lr0", "1e-5", Kind::F64),
    ("train.warmup_epochs", "5", Kind::Usize),
    ("train.label_smoothing_eps", "0", Kind::F64),
    ("train.kd_teacher", "", Kind::Str),
    ("train.kd_t", "10", Kind::F64),
    ("train.kd_lambda", "0.5", Kind::F64),
    ("data.n_per_class", "100", Kind::Usize),
];

fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(k, _, _)| *k == key).map(|&(_, _, kind)| kind)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: SCHEMA
                .iter()
                .map(|&(k, v, _)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl RunConfig {
    /// Defaults, then the optional file, then `--set key=value` overrides.
    pub fn resolve(file: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!(
                        "{}:{}: expected `key = value`, got `{raw}`",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                cfg.set(key.trim(), value.trim())?;
            }
        }
        for s in sets {
            let (key, value) = s.split_once('=').ok_or_else(|| {
                Error::Config(format!("--set expects key=value, got `{s}`"))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Validates the key and value, then stores the override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let kind = kind_of(key).ok_or_else(|| {
            Error::Config(format!("unknown config key `{key}`"))
        })?;
        match kind {
            Kind::U64 => {
                value.parse::<u64>().map_err(|_| bad(key, value, "an unsigned integer"))?;
            }
            Kind::Usize => {
                value.parse::<usize>().map_err(|_| bad(key, value, "an unsigned integer"))?;
            }
            Kind::F64 => {
                value.parse::<f64>().map_err(|_| bad(key, value, "a number"))?;
            }
            Kind::Str => {}
            Kind::Enum(allowed) => {
                if !allowed.contains(&value) {
                    return Err(Error::Config(format!(
                        "{key}={value} (allowed: {})",
                        allowed.join("|")
                    )));
                }
            }
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key {key} missing from schema"))
    }

    pub fn get_usize(&self, key: &str) -> usize {
        self.get(key).parse().expect("validated on set")
    }

    pub fn get_u64(&self, key: &str) -> u64 {
        self.get(key).parse().expect("validated on set")
    }

    pub fn get_f64(&self, key: &str) -> f64 {
        self.get(key).parse().expect("validated on set")
    }

    /// Sorted `key = value` lines; parsing the echo reproduces this config.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write_echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), self.echo())?;
        Ok(())
    }

    pub fn fbank_config(&self) -> Result<FbankConfig> {
        let cfg = FbankConfig {
            sample_rate_hz: self.get_u64("audio.sample_rate") as u32,
            window_ms: self.get_f64("audio.window_ms"),
            hop_ms: self.get_f64("audio.hop_ms"),
            n_mels: self.get_usize("audio.n_mels"),
            fft_size: self.get_usize("audio.fft_size"),
            fmin_hz: self.get_f64("audio.fmin_hz"),
            fmax_hz: self.get_f64("audio.fmax_hz"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            arch: Arch::parse(self.get("model.arch"))?,
            attention: AttentionKind::parse(self.get("model.attention"))?,
            attention_r: self.get_usize("model.attention_r"),
            pooling: PoolingKind::parse(self.get("model.pooling"))?,
            n_classes: self.get_usize("model.n_classes"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Teacher shares everything with the student except the architecture.
    pub fn teacher_model_config(&self) -> Result<ModelConfig> {
        Ok(ModelConfig {
            arch: Arch::parse(self.get("model.teacher_arch"))?,
            ..self.model_config()?
        })
    }

    pub fn schedule_plan(&self) -> Result<SchedulePlan> {
        let plan = SchedulePlan {
            base_lr: self.get_f64("train.base_lr"),
            warmup: WarmupKind::parse(self.get("train.warmup"))?,
            warmup_lr0: self.get_f64("train.warmup_lr0"),
            warmup_epochs: self.get_usize("train.warmup_epochs"),
            decay_every: self.get_usize("train.decay_every"),
        };
        if plan.base_lr <= 0.0 || plan.warmup_lr0 <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if plan.decay_every == 0 {
            return Err(Error::Config("train.decay_every must be positive".into()));
        }
        Ok(plan)
    }

    /// `with_kd` controls whether the kd settings are materialized (the
    /// distill command) or ignored (plain train).
    pub fn train_config(&self, with_kd: bool) -> Result<TrainConfig> {
        let kd = if with_kd {
            let teacher = self.get("train.kd_teacher");
            Some(KdConfig {
                teacher_ckpt: PathBuf::from(teacher),
                temperature: self.get_f64("train.kd_t"),
                lambda: self.get_f64("train.kd_lambda"),
            })
        } else {
            None
        };
        let cfg = TrainConfig {
            epochs: self.get_usize("train.epochs"),
            batch_size: self.get_usize("train.batch_size"),
            schedule: self.schedule_plan()?,
            label_smoothing_eps: self.get_f64("train.label_smoothing_eps"),
            kd,
            seed: self.get_u64("seed"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("{key}={value} is not {expected}"))
}

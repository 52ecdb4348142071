//! Learning-rate plan: step decay (divide by 10 every 5 epochs) with
//! optional constant or gradual warmup for the first 5 epochs. Warmup epochs
//! count toward the total budget; after warmup the decay clock restarts.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmupKind {
    None,
    Constant,
    Gradual,
}

impl WarmupKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(WarmupKind::None),
            "constant" => Ok(WarmupKind::Constant),
            "gradual" => Ok(WarmupKind::Gradual),
            other => Err(Error::Config(format!(
                "train.warmup={other} (allowed: none|constant|gradual)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            WarmupKind::None => "none",
            WarmupKind::Constant => "constant",
            WarmupKind::Gradual => "gradual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePlan {
    pub base_lr: f64,
    pub warmup: WarmupKind,
    pub warmup_lr0: f64,
    pub warmup_epochs: usize,
    pub decay_every: usize,
}

impl Default for SchedulePlan {
    fn default() -> Self {
        SchedulePlan {
            base_lr: 0.1,
            warmup: WarmupKind::None,
            warmup_lr0: 1e-5,
            warmup_epochs: 5,
            decay_every: 5,
        }
    }
}

fn step_decay(base_lr: f64, epochs_since_origin: f64, every: usize) -> f64 {
    let k = (epochs_since_origin / every as f64).floor() as i32;
    base_lr / 10f64.powi(k)
}

/// Learning rate at `epoch` (fractional values give the mid-epoch rate
/// during gradual warmup).
pub fn lr_at(epoch: f64, plan: &SchedulePlan) -> f64 {
    debug_assert!(epoch >= 0.0);
    let w = plan.warmup_epochs as f64;
    match plan.warmup {
        WarmupKind::None => step_decay(plan.base_lr, epoch, plan.decay_every),
        WarmupKind::Constant => {
            if epoch < w {
                plan.warmup_lr0
            } else {
                step_decay(plan.base_lr, epoch - w, plan.decay_every)
            }
        }
        WarmupKind::Gradual => {
            if epoch < w {
                plan.warmup_lr0 + (plan.base_lr - plan.warmup_lr0) * epoch / w
            } else {
                step_decay(plan.base_lr, epoch - w, plan.decay_every)
            }
        }
    }
}

//! Audio classification toolkit.
//!
//! Pipeline: log mel-filterbank features -> ResNet-style CNN backbone with
//! pluggable attention (SE / CBAM / coordinate) -> temporal pooling to an
//! utterance vector -> fully-connected classifier. Training supports label
//! smoothing, constant/gradual learning-rate warmup with step decay, and
//! knowledge distillation from a frozen teacher.

pub mod audio;
pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod layers;
pub mod model;
pub mod pooling;
pub mod data;
pub mod tensor;
pub mod train;
pub mod util;

pub use error::{Error, Result};

//! Temporal pooling: collapses frame-level features `N x d x T'` to one
//! utterance vector per item, honoring per-item valid lengths so padded
//! frames can never influence the result.

use crate::error::{Error, Result};
use crate::layers::{InitCtx, NamedParam, ParamKind};
use crate::tensor::{linear, Scalar, Tensor};

/// Large negative fill for masked positions; exp() underflows to exactly 0.
const MASK_NEG: f64 = -1e30;

/// Frame-level features with per-utterance valid frame counts.
pub struct FrameFeatures<T: Scalar> {
    pub values: Tensor<T>, // N x d x T'
    pub valid_len: Vec<usize>,
}

impl<T: Scalar> FrameFeatures<T> {
    pub fn new(values: Tensor<T>, valid_len: Vec<usize>) -> Result<Self> {
        let s = values.shape();
        if s.len() != 3 {
            return Err(Error::Shape(format!("frame features must be N x d x T', got {s:?}")));
        }
        if valid_len.len() != s[0] {
            return Err(Error::Shape("one valid length per batch item required".into()));
        }
        let t = s[2];
        if valid_len.iter().any(|&v| v == 0 || v > t) {
            return Err(Error::Shape(format!("valid lengths must lie in 1..={t}")));
        }
        Ok(FrameFeatures { values, valid_len })
    }

    fn dims(&self) -> (usize, usize, usize) {
        let s = self.values.shape();
        (s[0], s[1], s[2])
    }

    /// (keep, fill) mask pair shaped `N x 1 x T'`: keep is 1 on valid frames
    /// and 0 on padding; fill is 0 on valid frames and `MASK_NEG` on padding.
    fn masks(&self) -> (Tensor<T>, Tensor<T>) {
        let (n, _, t) = self.dims();
        let mut keep = vec![T::zero(); n * t];
        let mut fill = vec![T::zero(); n * t];
        for (i, &v) in self.valid_len.iter().enumerate() {
            for j in 0..t {
                if j < v {
                    keep[i * t + j] = T::one();
                } else {
                    fill[i * t + j] = T::from_f64(MASK_NEG);
                }
            }
        }
        (Tensor::new(&[n, 1, t], keep), Tensor::new(&[n, 1, t], fill))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolingKind {
    Average,
    Attentive,
    Max,
}

impl PoolingKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(PoolingKind::Average),
            "attentive" => Ok(PoolingKind::Attentive),
            "max" => Ok(PoolingKind::Max),
            other => Err(Error::Config(format!(
                "model.pooling={other} (allowed: average|attentive|max)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PoolingKind::Average => "average",
            PoolingKind::Attentive => "attentive",
            PoolingKind::Max => "max",
        }
    }
}

/// Additive scorer for attentive pooling: `e_t = v^T tanh(W h_t + b)`.
pub struct AttentiveParams<T: Scalar> {
    pub w: Tensor<T>, // d x d
    pub b: Tensor<T>, // d
    pub v: Tensor<T>, // 1 x d
}

impl<T: Scalar> AttentiveParams<T> {
    pub fn new(ctx: &InitCtx, name: &str, d: usize) -> Self {
        AttentiveParams {
            w: ctx.he_normal(&format!("{name}.w"), &[d, d], d),
            b: ctx.zeros(&[d]),
            v: ctx.he_normal(&format!("{name}.v"), &[1, d], d),
        }
    }
}

/// Mean over valid frames only.
pub fn average_pool_time<T: Scalar>(h: &FrameFeatures<T>) -> Tensor<T> {
    let (n, _, _) = h.dims();
    let (keep, _) = h.masks();
    let inv: Vec<T> = h
        .valid_len
        .iter()
        .map(|&v| T::one() / T::from_f64(v as f64))
        .collect();
    let inv = Tensor::new(&[n, 1], inv);
    h.values
        .mul(&keep)
        .expect("mask broadcasts")
        .sum_axis(2, false)
        .mul(&inv)
        .expect("per-row scale broadcasts")
}

/// Per-dimension max over valid frames; gradient goes to the earliest
/// argmax frame.
pub fn max_pool_time<T: Scalar>(h: &FrameFeatures<T>) -> Tensor<T> {
    let (keep, fill) = h.masks();
    h.values
        .mul(&keep)
        .expect("mask broadcasts")
        .add(&fill)
        .expect("mask broadcasts")
        .max_axis(2, false)
}

/// Softmax-weighted sum over valid frames with the additive scorer;
/// padded positions are excluded by masking before the softmax.
pub fn attentive_pool_time<T: Scalar>(h: &FrameFeatures<T>, p: &AttentiveParams<T>) -> Tensor<T> {
    let (n, d, t) = h.dims();
    let flat = h.values.permute(&[0, 2, 1]).reshape(&[n * t, d]);
    let scores = linear(&flat, &p.w, Some(&p.b))
        .expect("attentive dims fixed at construction")
        .tanh_t();
    let e = linear(&scores, &p.v, None)
        .expect("scorer is 1 x d")
        .reshape(&[n, 1, t]);
    let (keep, fill) = h.masks();
    let weights = e
        .mul(&keep)
        .expect("mask broadcasts")
        .add(&fill)
        .expect("mask broadcasts")
        .softmax(2); // N x 1 x T'
    h.values
        .mul(&weights)
        .expect("weights broadcast over d")
        .sum_axis(2, false)
}

/// A pooling head of the configured kind, owning the attentive scorer when
/// one is needed.
pub enum PoolingHead<T: Scalar> {
    Average,
    Max,
    Attentive(AttentiveParams<T>),
}

impl<T: Scalar> PoolingHead<T> {
    pub fn new(ctx: &InitCtx, name: &str, kind: PoolingKind, d: usize) -> Self {
        match kind {
            PoolingKind::Average => PoolingHead::Average,
            PoolingKind::Max => PoolingHead::Max,
            PoolingKind::Attentive => PoolingHead::Attentive(AttentiveParams::new(ctx, name, d)),
        }
    }

    pub fn kind(&self) -> PoolingKind {
        match self {
            PoolingHead::Average => PoolingKind::Average,
            PoolingHead::Max => PoolingKind::Max,
            PoolingHead::Attentive(_) => PoolingKind::Attentive,
        }
    }

    pub fn forward(&self, h: &FrameFeatures<T>) -> Tensor<T> {
        match self {
            PoolingHead::Average => average_pool_time(h),
            PoolingHead::Max => max_pool_time(h),
            PoolingHead::Attentive(p) => attentive_pool_time(h, p),
        }
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        if let PoolingHead::Attentive(p) = self {
            out.push(NamedParam {
                name: format!("{prefix}.w"),
                tensor: p.w.clone(),
                kind: ParamKind::Trainable,
            });
            out.push(NamedParam {
                name: format!("{prefix}.b"),
                tensor: p.b.clone(),
                kind: ParamKind::Trainable,
            });
            out.push(NamedParam {
                name: format!("{prefix}.v"),
                tensor: p.v.clone(),
                kind: ParamKind::Trainable,
            });
        }
    }
}

//! Model assembly: ResNet-style backbone over the `1 x T x F` feature
//! "image", frequency collapse to frame-level features, temporal pooling,
//! and the fully-connected classifier head.

use crate::attention::{Attention, AttentionKind};
use crate::error::{Error, Result};
use crate::layers::{BatchNorm2dLayer, Conv2dLayer, InitCtx, LinearLayer, NamedParam, ParamKind};
use crate::pooling::{FrameFeatures, PoolingHead, PoolingKind};
use crate::tensor::{pool2d, BnMode, PoolKind, Scalar, Tensor};

/// Backbone layouts. `micro` keeps the 4-stage structure at desk-scale
/// widths for tests and CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Resnet18,
    Resnet50,
    Micro,
}

impl Arch {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "resnet18" => Ok(Arch::Resnet18),
            "resnet50" => Ok(Arch::Resnet50),
            "micro" => Ok(Arch::Micro),
            other => Err(Error::Config(format!(
                "model.arch={other} (allowed: resnet18|resnet50|micro)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Arch::Resnet18 => "resnet18",
            Arch::Resnet50 => "resnet50",
            Arch::Micro => "micro",
        }
    }

    fn blocks_per_stage(&self) -> [usize; 4] {
        match self {
            Arch::Resnet18 => [2, 2, 2, 2],
            Arch::Resnet50 => [3, 4, 6, 3],
            Arch::Micro => [1, 1, 1, 1],
        }
    }

    fn stage_widths(&self) -> [usize; 4] {
        match self {
            Arch::Resnet18 | Arch::Resnet50 => [64, 128, 256, 512],
            Arch::Micro => [8, 16, 32, 64],
        }
    }

    fn expansion(&self) -> usize {
        match self {
            Arch::Resnet50 => 4,
            _ => 1,
        }
    }

    /// Embedding dimension after the backbone (final channel count).
    pub fn embed_dim(&self) -> usize {
        self.stage_widths()[3] * self.expansion()
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub arch: Arch,
    pub attention: AttentionKind,
    pub attention_r: usize,
    pub pooling: PoolingKind,
    pub n_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            arch: Arch::Resnet18,
            attention: AttentionKind::None,
            attention_r: 16,
            pooling: PoolingKind::Average,
            n_classes: 2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::Config("model.n_classes must be at least 2".into()));
        }
        if self.attention_r < 1 {
            return Err(Error::Config("model.attention_r must be at least 1".into()));
        }
        Ok(())
    }
}

struct BasicBlock<T: Scalar> {
    conv1: Conv2dLayer<T>,
    bn1: BatchNorm2dLayer<T>,
    conv2: Conv2dLayer<T>,
    bn2: BatchNorm2dLayer<T>,
    attention: Attention<T>,
    down: Option<(Conv2dLayer<T>, BatchNorm2dLayer<T>)>,
}

impl<T: Scalar> BasicBlock<T> {
    fn new(
        ctx: &InitCtx,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
        attn: AttentionKind,
        r: usize,
    ) -> Self {
        let down = (stride != 1 || in_ch != out_ch).then(|| {
            (
                Conv2dLayer::new(ctx, &format!("{name}.down.conv"), in_ch, out_ch, (1, 1), (stride, stride), (0, 0)),
                BatchNorm2dLayer::new(ctx, out_ch),
            )
        });
        BasicBlock {
            conv1: Conv2dLayer::new(ctx, &format!("{name}.conv1"), in_ch, out_ch, (3, 3), (stride, stride), (1, 1)),
            bn1: BatchNorm2dLayer::new(ctx, out_ch),
            conv2: Conv2dLayer::new(ctx, &format!("{name}.conv2"), out_ch, out_ch, (3, 3), (1, 1), (1, 1)),
            bn2: BatchNorm2dLayer::new(ctx, out_ch),
            attention: Attention::new(ctx, &format!("{name}.attn"), attn, out_ch, r),
            down,
        }
    }

    fn forward(&self, x: &Tensor<T>, mode: BnMode) -> Result<Tensor<T>> {
        let mut out = self.bn1.forward(&self.conv1.forward(x)?, mode)?.relu();
        out = self.bn2.forward(&self.conv2.forward(&out)?, mode)?;
        out = self.attention.forward(&out, mode);
        let skip = match &self.down {
            Some((conv, bn)) => bn.forward(&conv.forward(x)?, mode)?,
            None => x.clone(),
        };
        Ok(out.add(&skip)?.relu())
    }

    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        self.conv1.collect(&format!("{prefix}.conv1"), out);
        self.bn1.collect(&format!("{prefix}.bn1"), out);
        self.conv2.collect(&format!("{prefix}.conv2"), out);
        self.bn2.collect(&format!("{prefix}.bn2"), out);
        self.attention.collect(&format!("{prefix}.attn"), out);
        if let Some((conv, bn)) = &self.down {
            conv.collect(&format!("{prefix}.down.conv"), out);
            bn.collect(&format!("{prefix}.down.bn"), out);
        }
    }
}

struct BottleneckBlock<T: Scalar> {
    conv1: Conv2dLayer<T>,
    bn1: BatchNorm2dLayer<T>,
    conv2: Conv2dLayer<T>,
    bn2: BatchNorm2dLayer<T>,
    conv3: Conv2dLayer<T>,
    bn3: BatchNorm2dLayer<T>,
    attention: Attention<T>,
    down: Option<(Conv2dLayer<T>, BatchNorm2dLayer<T>)>,
}

impl<T: Scalar> BottleneckBlock<T> {
    fn new(
        ctx: &InitCtx,
        name: &str,
        in_ch: usize,
        width: usize,
        stride: usize,
        attn: AttentionKind,
        r: usize,
    ) -> Self {
        let out_ch = width * 4;
        let down = (stride != 1 || in_ch != out_ch).then(|| {
            (
                Conv2dLayer::new(ctx, &format!("{name}.down.conv"), in_ch, out_ch, (1, 1), (stride, stride), (0, 0)),
                BatchNorm2dLayer::new(ctx, out_ch),
            )
        });
        BottleneckBlock {
            conv1: Conv2dLayer::new(ctx, &format!("{name}.conv1"), in_ch, width, (1, 1), (1, 1), (0, 0)),
            bn1: BatchNorm2dLayer::new(ctx, width),
            conv2: Conv2dLayer::new(ctx, &format!("{name}.conv2"), width, width, (3, 3), (stride, stride), (1, 1)),
            bn2: BatchNorm2dLayer::new(ctx, width),
            conv3: Conv2dLayer::new(ctx, &format!("{name}.conv3"), width, out_ch, (1, 1), (1, 1), (0, 0)),
            bn3: BatchNorm2dLayer::new(ctx, out_ch),
            attention: Attention::new(ctx, &format!("{name}.attn"), attn, out_ch, r),
            down,
        }
    }

    fn forward(&self, x: &Tensor<T>, mode: BnMode) -> Result<Tensor<T>> {
        let mut out = self.bn1.forward(&self.conv1.forward(x)?, mode)?.relu();
        out = self.bn2.forward(&self.conv2.forward(&out)?, mode)?.relu();
        out = self.bn3.forward(&self.conv3.forward(&out)?, mode)?;
        out = self.attention.forward(&out, mode);
        let skip = match &self.down {
            Some((conv, bn)) => bn.forward(&conv.forward(x)?, mode)?,
            None => x.clone(),
        };
        Ok(out.add(&skip)?.relu())
    }

    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        self.conv1.collect(&format!("{prefix}.conv1"), out);
        self.bn1.collect(&format!("{prefix}.bn1"), out);
        self.conv2.collect(&format!("{prefix}.conv2"), out);
        self.bn2.collect(&format!("{prefix}.bn2"), out);
        self.conv3.collect(&format!("{prefix}.conv3"), out);
        self.bn3.collect(&format!("{prefix}.bn3"), out);
        self.attention.collect(&format!("{prefix}.attn"), out);
        if let Some((conv, bn)) = &self.down {
            conv.collect(&format!("{prefix}.down.conv"), out);
            bn.collect(&format!("{prefix}.down.bn"), out);
        }
    }
}

enum Block<T: Scalar> {
    Basic(BasicBlock<T>),
    Bottleneck(BottleneckBlock<T>),
}

impl<T: Scalar> Block<T> {
    fn forward(&self, x: &Tensor<T>, mode: BnMode) -> Result<Tensor<T>> {
        match self {
            Block::Basic(b) => b.forward(x, mode),
            Block::Bottleneck(b) => b.forward(x, mode),
        }
    }

    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        match self {
            Block::Basic(b) => b.collect(prefix, out),
            Block::Bottleneck(b) => b.collect(prefix, out),
        }
    }
}

/// The assembled classifier.
pub struct Model<T: Scalar> {
    cfg: ModelConfig,
    stem_conv: Conv2dLayer<T>,
    stem_bn: BatchNorm2dLayer<T>,
    stages: Vec<Vec<Block<T>>>,
    pool: PoolingHead<T>,
    fc: LinearLayer<T>,
}

/// Minimum time frames the stem and four stages can reduce by 32x.
pub const MIN_FRAMES: usize = 32;

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Builds a model with deterministic, seed-keyed initialization: the same
/// seed always produces bit-identical parameters per element type.
pub fn build_model<T: Scalar>(cfg: &ModelConfig, seed: u64) -> Result<Model<T>> {
    cfg.validate()?;
    let ctx = InitCtx::new(seed);
    let widths = cfg.arch.stage_widths();
    let blocks = cfg.arch.blocks_per_stage();
    let expansion = cfg.arch.expansion();

    let stem_conv = Conv2dLayer::new(&ctx, "stem.conv", 1, widths[0], (7, 7), (2, 2), (3, 3));
    let stem_bn = BatchNorm2dLayer::new(&ctx, widths[0]);

    let mut stages = Vec::with_capacity(4);
    let mut in_ch = widths[0];
    for (s, (&width, &n_blocks)) in widths.iter().zip(blocks.iter()).enumerate() {
        let mut stage = Vec::with_capacity(n_blocks);
        for b in 0..n_blocks {
            let stride = if s > 0 && b == 0 { 2 } else { 1 };
            let name = format!("stage{}.block{}", s + 1, b);
            let block = match cfg.arch {
                Arch::Resnet50 => {
                    let blk = BottleneckBlock::new(&ctx, &name, in_ch, width, stride, cfg.attention, cfg.attention_r);
                    in_ch = width * expansion;
                    Block::Bottleneck(blk)
                }
                _ => {
                    let blk = BasicBlock::new(&ctx, &name, in_ch, width, stride, cfg.attention, cfg.attention_r);
                    in_ch = width;
                    Block::Basic(blk)
                }
            };
            stage.push(block);
        }
        stages.push(stage);
    }

    let d = cfg.arch.embed_dim();
    let pool = PoolingHead::new(&ctx, "pool", cfg.pooling, d);
    let fc = LinearLayer::new(&ctx, "fc", d, cfg.n_classes, true);

    Ok(Model { cfg: cfg.clone(), stem_conv, stem_bn, stages, pool, fc })
}

impl<T: Scalar> Model<T> {
    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn embed_dim(&self) -> usize {
        self.cfg.arch.embed_dim()
    }

    /// All named tensors in a stable order: trainable parameters and
    /// batch-norm running statistics.
    pub fn named_params(&self) -> Vec<NamedParam<T>> {
        let mut out = Vec::new();
        self.stem_conv.collect("stem.conv", &mut out);
        self.stem_bn.collect("stem.bn", &mut out);
        for (s, stage) in self.stages.iter().enumerate() {
            for (b, block) in stage.iter().enumerate() {
                block.collect(&format!("stage{}.block{}", s + 1, b), &mut out);
            }
        }
        self.pool.collect("pool", &mut out);
        self.fc.collect("fc", &mut out);
        out
    }

    pub fn trainable_params(&self) -> Vec<NamedParam<T>> {
        self.named_params()
            .into_iter()
            .filter(|p| p.kind == ParamKind::Trainable)
            .collect()
    }

    /// Total trainable element count.
    pub fn param_count(&self) -> usize {
        self.trainable_params().iter().map(|p| p.tensor.numel()).sum()
    }

    pub fn zero_grads(&self) {
        for p in self.trainable_params() {
            p.tensor.zero_grad();
        }
    }

    /// Valid frame count after the backbone's five stride-2 reductions.
    pub fn reduce_len(valid_t: usize) -> usize {
        let mut v = valid_t;
        for _ in 0..5 {
            v = ceil_div(v, 2);
        }
        v.max(1)
    }

    /// Runs the backbone on a `N x 1 x T x F` batch and collapses the
    /// frequency axis, producing `N x d x T'` frame features with valid
    /// lengths reduced by ceil division at every stride-2 stage.
    ///
    /// Padded frames are zeroed before the stem so padding contents can
    /// never reach the output (the batcher pads with zeros already; this
    /// enforces the contract for arbitrary input).
    pub fn forward_features(&self, x: &Tensor<T>, valid_t: &[usize], mode: BnMode) -> Result<FrameFeatures<T>> {
        let s = x.shape().to_vec();
        if s.len() != 4 || s[1] != 1 {
            return Err(Error::Shape(format!("expected N x 1 x T x F input, got {s:?}")));
        }
        let (n, t) = (s[0], s[2]);
        if valid_t.len() != n {
            return Err(Error::Shape("one valid length per batch item required".into()));
        }
        if t < MIN_FRAMES {
            return Err(Error::Shape(format!(
                "need at least {MIN_FRAMES} frames, got {t}"
            )));
        }
        let mut h = if valid_t.iter().any(|&v| v < t) {
            let mut mask = vec![T::zero(); n * t];
            for (i, &v) in valid_t.iter().enumerate() {
                for j in 0..v.min(t) {
                    mask[i * t + j] = T::one();
                }
            }
            x.mul(&Tensor::new(&[n, 1, t, 1], mask))?
        } else {
            x.clone()
        };

        h = self.stem_bn.forward(&self.stem_conv.forward(&h)?, mode)?.relu();
        h = pool2d(&h, PoolKind::Max, (3, 3), (2, 2), (1, 1))?;
        for stage in &self.stages {
            for block in stage {
                h = block.forward(&h, mode)?;
            }
        }
        // collapse frequency: N x d x T' x F' -> N x d x T'
        let frames = h.mean_axis(3, false);
        let reduced: Vec<usize> = valid_t.iter().map(|&v| Self::reduce_len(v)).collect();
        FrameFeatures::new(frames, reduced)
    }

    /// Full forward pass to logits (no softmax; losses own normalization).
    pub fn forward_classify(&self, x: &Tensor<T>, valid_t: &[usize], mode: BnMode) -> Result<Tensor<T>> {
        let features = self.forward_features(x, valid_t, mode)?;
        let utt = self.pool.forward(&features);
        self.fc.forward(&utt)
    }
}

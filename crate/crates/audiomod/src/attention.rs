//! Channel/spatial attention blocks: squeeze-and-excitation, CBAM, and
//! coordinate attention. Each is a shape-preserving transform on
//! `N x C x H x W` feature maps that multiplies the input by learned gates
//! in (0, 1).

use crate::error::{Error, Result};
use crate::layers::{BatchNorm2dLayer, Conv2dLayer, InitCtx, NamedParam, ParamKind};
use crate::tensor::{BnMode, Scalar, Tensor};

/// Which attention block to insert in each residual block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionKind {
    None,
    Se,
    Cbam,
    Ca,
}

impl AttentionKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttentionKind::None),
            "se" => Ok(AttentionKind::Se),
            "cbam" => Ok(AttentionKind::Cbam),
            "ca" => Ok(AttentionKind::Ca),
            other => Err(Error::Config(format!(
                "model.attention={other} (allowed: none|se|cbam|ca)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AttentionKind::None => "none",
            AttentionKind::Se => "se",
            AttentionKind::Cbam => "cbam",
            AttentionKind::Ca => "ca",
        }
    }
}

fn reduced_channels(c: usize, r: usize) -> usize {
    (c / r).max(1)
}

/// Squeeze-and-excitation: global average pool to a channel descriptor, a
/// two-layer bottleneck MLP, sigmoid gates applied channel-wise.
pub struct SeBlock<T: Scalar> {
    pub w1: Tensor<T>, // C/r x C
    pub w2: Tensor<T>, // C x C/r
}

impl<T: Scalar> SeBlock<T> {
    pub fn new(ctx: &InitCtx, name: &str, channels: usize, r: usize) -> Self {
        let cr = reduced_channels(channels, r);
        SeBlock {
            w1: ctx.he_normal(&format!("{name}.w1"), &[cr, channels], channels),
            w2: ctx.he_normal(&format!("{name}.w2"), &[channels, cr], cr),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (n, c) = (x.shape()[0], x.shape()[1]);
        let z = x.mean_axis(3, false).mean_axis(2, false); // N x C
        let hidden = crate::tensor::linear(&z, &self.w1, None)
            .expect("SE dims fixed at construction")
            .relu();
        let s = crate::tensor::linear(&hidden, &self.w2, None)
            .expect("SE dims fixed at construction")
            .sigmoid();
        x.mul(&s.reshape(&[n, c, 1, 1])).expect("gate broadcasts")
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        out.push(NamedParam {
            name: format!("{prefix}.w1"),
            tensor: self.w1.clone(),
            kind: ParamKind::Trainable,
        });
        out.push(NamedParam {
            name: format!("{prefix}.w2"),
            tensor: self.w2.clone(),
            kind: ParamKind::Trainable,
        });
    }
}

/// CBAM: a channel gate from a shared MLP over average- and max-pooled
/// channel descriptors, then a spatial gate from a 7x7 convolution over the
/// concatenated spatial average/max maps of the channel-gated features.
pub struct CbamBlock<T: Scalar> {
    pub w0: Tensor<T>,            // C/r x C
    pub w1: Tensor<T>,            // C x C/r
    pub spatial: Conv2dLayer<T>,  // 1 x 2 x 7 x 7, padding 3
}

impl<T: Scalar> CbamBlock<T> {
    pub fn new(ctx: &InitCtx, name: &str, channels: usize, r: usize) -> Self {
        let cr = reduced_channels(channels, r);
        CbamBlock {
            w0: ctx.he_normal(&format!("{name}.w0"), &[cr, channels], channels),
            w1: ctx.he_normal(&format!("{name}.w1"), &[channels, cr], cr),
            spatial: Conv2dLayer::new(ctx, &format!("{name}.spatial"), 2, 1, (7, 7), (1, 1), (3, 3)),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (n, c) = (x.shape()[0], x.shape()[1]);
        let mlp = |d: &Tensor<T>| {
            let h = crate::tensor::linear(d, &self.w0, None).expect("CBAM dims fixed");
            crate::tensor::linear(&h, &self.w1, None).expect("CBAM dims fixed")
        };
        let avg = x.mean_axis(3, false).mean_axis(2, false);
        let mx = x.max_axis(3, false).max_axis(2, false);
        let gate_c = mlp(&avg).add(&mlp(&mx)).expect("same shape").sigmoid(); // N x C
        let xp = x.mul(&gate_c.reshape(&[n, c, 1, 1])).expect("gate broadcasts");

        let s_avg = xp.mean_axis(1, true); // N x 1 x H x W
        let s_max = xp.max_axis(1, true);
        let stacked = Tensor::concat(&[s_avg, s_max], 1).expect("same spatial dims");
        let gate_s = self.spatial.forward(&stacked).expect("7x7 pad 3 preserves dims").sigmoid();
        xp.mul(&gate_s).expect("gate broadcasts")
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        out.push(NamedParam {
            name: format!("{prefix}.w0"),
            tensor: self.w0.clone(),
            kind: ParamKind::Trainable,
        });
        out.push(NamedParam {
            name: format!("{prefix}.w1"),
            tensor: self.w1.clone(),
            kind: ParamKind::Trainable,
        });
        self.spatial.collect(&format!("{prefix}.spatial"), out);
    }
}

/// Coordinate attention: directional average pooling along height and width,
/// a shared 1x1 bottleneck with batch norm + ReLU, then separate 1x1
/// convolutions producing per-row and per-column sigmoid gates.
pub struct CaBlock<T: Scalar> {
    pub fuse: Conv2dLayer<T>,   // C/r x C x 1 x 1
    pub bn: BatchNorm2dLayer<T>,
    pub gate_h: Conv2dLayer<T>, // C x C/r x 1 x 1
    pub gate_w: Conv2dLayer<T>, // C x C/r x 1 x 1
}

impl<T: Scalar> CaBlock<T> {
    pub fn new(ctx: &InitCtx, name: &str, channels: usize, r: usize) -> Self {
        let cr = reduced_channels(channels, r);
        CaBlock {
            fuse: Conv2dLayer::new(ctx, &format!("{name}.fuse"), channels, cr, (1, 1), (1, 1), (0, 0)),
            bn: BatchNorm2dLayer::new(ctx, cr),
            gate_h: Conv2dLayer::new(ctx, &format!("{name}.gate_h"), cr, channels, (1, 1), (1, 1), (0, 0)),
            gate_w: Conv2dLayer::new(ctx, &format!("{name}.gate_w"), cr, channels, (1, 1), (1, 1), (0, 0)),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, mode: BnMode) -> Tensor<T> {
        let s = x.shape();
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let zh = x.mean_axis(3, false).reshape(&[n, c, h, 1]); // mean over width
        let zw = x.mean_axis(2, false).reshape(&[n, c, w, 1]); // mean over height
        let fused = Tensor::concat(&[zh, zw], 2).expect("same channel dims");
        let u = self
            .bn
            .forward(&self.fuse.forward(&fused).expect("1x1 conv"), mode)
            .expect("bn dims fixed")
            .relu();
        let uh = u.slice_axis(2, 0, h);
        let uw = u.slice_axis(2, h, h + w);
        let sh = self.gate_h.forward(&uh).expect("1x1 conv").sigmoid(); // N x C x H x 1
        let sw = self
            .gate_w
            .forward(&uw)
            .expect("1x1 conv")
            .sigmoid()
            .permute(&[0, 1, 3, 2]); // N x C x 1 x W
        x.mul(&sh).expect("row gate broadcasts").mul(&sw).expect("col gate broadcasts")
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        self.fuse.collect(&format!("{prefix}.fuse"), out);
        self.bn.collect(&format!("{prefix}.bn"), out);
        self.gate_h.collect(&format!("{prefix}.gate_h"), out);
        self.gate_w.collect(&format!("{prefix}.gate_w"), out);
    }
}

/// A block instance of whichever kind the model config selected.
pub enum Attention<T: Scalar> {
    None,
    Se(SeBlock<T>),
    Cbam(CbamBlock<T>),
    Ca(CaBlock<T>),
}

impl<T: Scalar> Attention<T> {
    pub fn new(ctx: &InitCtx, name: &str, kind: AttentionKind, channels: usize, r: usize) -> Self {
        match kind {
            AttentionKind::None => Attention::None,
            AttentionKind::Se => Attention::Se(SeBlock::new(ctx, name, channels, r)),
            AttentionKind::Cbam => Attention::Cbam(CbamBlock::new(ctx, name, channels, r)),
            AttentionKind::Ca => Attention::Ca(CaBlock::new(ctx, name, channels, r)),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, mode: BnMode) -> Tensor<T> {
        match self {
            Attention::None => x.clone(),
            Attention::Se(b) => b.forward(x),
            Attention::Cbam(b) => b.forward(x),
            Attention::Ca(b) => b.forward(x, mode),
        }
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        match self {
            Attention::None => {}
            Attention::Se(b) => b.collect(prefix, out),
            Attention::Cbam(b) => b.collect(prefix, out),
            Attention::Ca(b) => b.collect(prefix, out),
        }
    }
}

//! Layer structs over the tensor primitives, plus deterministic
//! parameter initialization.
//!
//! Every parameter's values are drawn from an RNG keyed by (seed, parameter
//! name), so adding or removing a block never shifts the initialization of
//! unrelated parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{batch_norm2d, conv2d, linear, BnMode, Scalar, Tensor};
use crate::util::{fnv1a, splitmix};

/// Initialization context: one seed, per-parameter RNG streams.
#[derive(Debug, Clone, Copy)]
pub struct InitCtx {
    seed: u64,
}

impl InitCtx {
    pub fn new(seed: u64) -> Self {
        InitCtx { seed }
    }

    fn rng(&self, name: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix(self.seed ^ fnv1a(name.as_bytes())))
    }

    /// He-normal draw: zero-mean Gaussian with std `sqrt(2 / fan_in)`.
    pub fn he_normal<T: Scalar>(&self, name: &str, shape: &[usize], fan_in: usize) -> Tensor<T> {
        let mut rng = self.rng(name);
        let std = (2.0 / fan_in as f64).sqrt();
        let n = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        while data.len() < n {
            // Box-Muller from two uniform draws
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen::<f64>();
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = 2.0 * std::f64::consts::PI * u2;
            data.push(T::from_f64(r * theta.cos() * std));
            if data.len() < n {
                data.push(T::from_f64(r * theta.sin() * std));
            }
        }
        Tensor::param(shape, data)
    }

    pub fn zeros<T: Scalar>(&self, shape: &[usize]) -> Tensor<T> {
        Tensor::param(shape, vec![T::zero(); shape.iter().product()])
    }

    pub fn ones<T: Scalar>(&self, shape: &[usize]) -> Tensor<T> {
        Tensor::param(shape, vec![T::one(); shape.iter().product()])
    }
}

/// Whether a named tensor is optimized or carried along (running statistics).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    Buffer,
}

pub struct NamedParam<T: Scalar> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub kind: ParamKind,
}

/// Bias-free 2-D convolution layer.
pub struct Conv2dLayer<T: Scalar> {
    pub w: Tensor<T>,
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl<T: Scalar> Conv2dLayer<T> {
    pub fn new(
        ctx: &InitCtx,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Self {
        let fan_in = in_ch * kernel.0 * kernel.1;
        Conv2dLayer {
            w: ctx.he_normal(&format!("{name}.w"), &[out_ch, in_ch, kernel.0, kernel.1], fan_in),
            stride,
            padding,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(x, &self.w, self.stride, self.padding)
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        out.push(NamedParam {
            name: format!("{prefix}.w"),
            tensor: self.w.clone(),
            kind: ParamKind::Trainable,
        });
    }
}

/// Per-channel batch normalization with running statistics.
pub struct BatchNorm2dLayer<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub eps: T,
    pub momentum: T,
}

impl<T: Scalar> BatchNorm2dLayer<T> {
    pub fn new(ctx: &InitCtx, channels: usize) -> Self {
        BatchNorm2dLayer {
            gamma: ctx.ones(&[channels]),
            beta: ctx.zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            eps: T::from_f64(1e-5),
            momentum: T::from_f64(0.1),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, mode: BnMode) -> Result<Tensor<T>> {
        batch_norm2d(
            x,
            &self.gamma,
            &self.beta,
            &self.running_mean,
            &self.running_var,
            mode,
            self.eps,
            self.momentum,
        )
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        out.push(NamedParam {
            name: format!("{prefix}.gamma"),
            tensor: self.gamma.clone(),
            kind: ParamKind::Trainable,
        });
        out.push(NamedParam {
            name: format!("{prefix}.beta"),
            tensor: self.beta.clone(),
            kind: ParamKind::Trainable,
        });
        out.push(NamedParam {
            name: format!("{prefix}.running_mean"),
            tensor: self.running_mean.clone(),
            kind: ParamKind::Buffer,
        });
        out.push(NamedParam {
            name: format!("{prefix}.running_var"),
            tensor: self.running_var.clone(),
            kind: ParamKind::Buffer,
        });
    }
}

/// Fully-connected layer `x . w^T + b`.
pub struct LinearLayer<T: Scalar> {
    pub w: Tensor<T>,
    pub b: Option<Tensor<T>>,
}

impl<T: Scalar> LinearLayer<T> {
    pub fn new(ctx: &InitCtx, name: &str, in_dim: usize, out_dim: usize, bias: bool) -> Self {
        LinearLayer {
            w: ctx.he_normal(&format!("{name}.w"), &[out_dim, in_dim], in_dim),
            b: bias.then(|| ctx.zeros(&[out_dim])),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        linear(x, &self.w, self.b.as_ref())
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam<T>>) {
        out.push(NamedParam {
            name: format!("{prefix}.w"),
            tensor: self.w.clone(),
            kind: ParamKind::Trainable,
        });
        if let Some(b) = &self.b {
            out.push(NamedParam {
                name: format!("{prefix}.b"),
                tensor: b.clone(),
                kind: ParamKind::Trainable,
            });
        }
    }
}

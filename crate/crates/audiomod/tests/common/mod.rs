//! Independent oracles for the integration suites: naive O(n^2) DFT, 6-loop
//! convolution, windowed pooling, equation-literal attention blocks, loop
//! pooling, and a reference Adam update. None of these share code with the
//! library paths they check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// |DFT_k|^2 by direct summation, k = 0..=n/2.
pub fn naive_power_spectrum(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (t, &v) in frame.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// Spectral centroid in Hz of a whole signal, averaged over 512-sample
/// hops, using the naive DFT only.
pub fn spectral_centroid(samples: &[f32], sample_rate: u32, max_frames: usize) -> f64 {
    let n = 512usize;
    let hop = (samples.len().saturating_sub(n)) / max_frames.max(1) + n;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut start = 0usize;
    while start + n <= samples.len() {
        let frame: Vec<f64> = samples[start..start + n].iter().map(|&v| f64::from(v)).collect();
        let spec = naive_power_spectrum(&frame);
        for (k, &p) in spec.iter().enumerate() {
            num += k as f64 * f64::from(sample_rate) / n as f64 * p;
            den += p;
        }
        start += hop;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Plain 6-loop convolution, `x[N,C,H,W] * w[F,C,kh,kw]`, zero padding.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv2d(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    wt: &[f64],
    f: usize,
    kh: usize,
    kw: usize,
    stride: (usize, usize),
    pad: (usize, usize),
) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * pad.0 - kh) / stride.0 + 1;
    let ow = (w + 2 * pad.1 - kw) / stride.1 + 1;
    let mut out = vec![0.0f64; n * f * oh * ow];
    for b in 0..n {
        for of in 0..f {
            for oi in 0..oh {
                for oj in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let ih = (oi * stride.0 + ki) as isize - pad.0 as isize;
                                let iw = (oj * stride.1 + kj) as isize - pad.1 as isize;
                                if ih < 0 || ih >= h as isize || iw < 0 || iw >= w as isize {
                                    continue;
                                }
                                let xv = x[((b * c + ic) * h + ih as usize) * w + iw as usize];
                                let wv = wt[((of * c + ic) * kh + ki) * kw + kj];
                                acc += xv * wv;
                            }
                        }
                    }
                    out[((b * f + of) * oh + oi) * ow + oj] = acc;
                }
            }
        }
    }
    (out, oh, ow)
}

/// Windowed max/avg pooling by direct loops (avg includes zero pad cells).
#[allow(clippy::too_many_arguments)]
pub fn naive_pool2d(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    max: bool,
    kernel: (usize, usize),
    stride: (usize, usize),
    pad: (usize, usize),
) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * pad.0 - kernel.0) / stride.0 + 1;
    let ow = (w + 2 * pad.1 - kernel.1) / stride.1 + 1;
    let mut out = vec![0.0f64; n * c * oh * ow];
    for bc in 0..n * c {
        for oi in 0..oh {
            for oj in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut sum = 0.0;
                for ki in 0..kernel.0 {
                    for kj in 0..kernel.1 {
                        let ih = (oi * stride.0 + ki) as isize - pad.0 as isize;
                        let iw = (oj * stride.1 + kj) as isize - pad.1 as isize;
                        if ih < 0 || ih >= h as isize || iw < 0 || iw >= w as isize {
                            continue;
                        }
                        let v = x[(bc * h + ih as usize) * w + iw as usize];
                        best = best.max(v);
                        sum += v;
                    }
                }
                out[(bc * oh + oi) * ow + oj] =
                    if max { best } else { sum / (kernel.0 * kernel.1) as f64 };
            }
        }
    }
    (out, oh, ow)
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Matrix-vector product `m[rows x cols] . v`.
fn matvec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| (0..cols).map(|c| m[r * cols + c] * v[c]).sum())
        .collect()
}

/// Squeeze-and-excitation, written directly from its three defining
/// equations: channel means, the two-layer gate, channel-wise rescaling.
#[allow(clippy::too_many_arguments)]
pub fn se_oracle(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    w1: &[f64], // cr x c
    w2: &[f64], // c x cr
    cr: usize,
) -> Vec<f64> {
    let plane = h * w;
    let mut out = vec![0.0; x.len()];
    for b in 0..n {
        // z_c = (1 / (W*H)) sum_ij X_c(i, j)
        let z: Vec<f64> = (0..c)
            .map(|ch| x[(b * c + ch) * plane..(b * c + ch + 1) * plane].iter().sum::<f64>() / plane as f64)
            .collect();
        // s = sigmoid(W2 relu(W1 z))
        let hidden: Vec<f64> = matvec(w1, cr, c, &z).iter().map(|&v| v.max(0.0)).collect();
        let s: Vec<f64> = matvec(w2, c, cr, &hidden).iter().map(|&v| sigmoid(v)).collect();
        // X-hat = X . s, channel-wise
        for ch in 0..c {
            for i in 0..plane {
                out[(b * c + ch) * plane + i] = x[(b * c + ch) * plane + i] * s[ch];
            }
        }
    }
    out
}

/// CBAM channel gate then spatial gate, from the displayed formulas:
/// `F_c = sigmoid(W1(W0(avg)) + W1(W0(max)))`, `x' = F_c . x`,
/// `F_s = sigmoid(Conv7x7([avg_s(x'), max_s(x')]))`, output `x' . F_s`.
#[allow(clippy::too_many_arguments)]
pub fn cbam_oracle(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    w0: &[f64], // cr x c
    w1: &[f64], // c x cr
    cr: usize,
    conv7: &[f64], // 1 x 2 x 7 x 7
) -> Vec<f64> {
    let plane = h * w;
    let mut out = vec![0.0; x.len()];
    for b in 0..n {
        let item = &x[b * c * plane..(b + 1) * c * plane];
        let avg: Vec<f64> = (0..c)
            .map(|ch| item[ch * plane..(ch + 1) * plane].iter().sum::<f64>() / plane as f64)
            .collect();
        let mx: Vec<f64> = (0..c)
            .map(|ch| item[ch * plane..(ch + 1) * plane].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
            .collect();
        let mlp = |d: &[f64]| matvec(w1, c, cr, &matvec(w0, cr, c, d));
        let (ga, gm) = (mlp(&avg), mlp(&mx));
        let gate_c: Vec<f64> = ga.iter().zip(&gm).map(|(&a, &m)| sigmoid(a + m)).collect();

        let xp: Vec<f64> = (0..c * plane)
            .map(|i| item[i] * gate_c[i / plane])
            .collect();

        // spatial avg/max over channels, stacked into 2 input planes
        let mut stacked = vec![0.0; 2 * plane];
        for i in 0..plane {
            let mut s = 0.0;
            let mut m = f64::NEG_INFINITY;
            for ch in 0..c {
                let v = xp[ch * plane + i];
                s += v;
                m = m.max(v);
            }
            stacked[i] = s / c as f64;
            stacked[plane + i] = m;
        }
        let (conv_out, _, _) = naive_conv2d(&stacked, 1, 2, h, w, conv7, 1, 7, 7, (1, 1), (3, 3));
        for ch in 0..c {
            for i in 0..plane {
                out[b * c * plane + ch * plane + i] = xp[ch * plane + i] * sigmoid(conv_out[i]);
            }
        }
    }
    out
}

/// Coordinate attention from its displayed formulas, eval-mode batch norm
/// (affine from the provided running statistics) as the nonlinear layer's
/// normalization.
#[allow(clippy::too_many_arguments)]
pub fn ca_oracle(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    fuse: &[f64],   // cr x c (1x1 conv weights)
    gate_h: &[f64], // c x cr
    gate_w: &[f64], // c x cr
    cr: usize,
    bn_gamma: &[f64],
    bn_beta: &[f64],
    bn_mean: &[f64],
    bn_var: &[f64],
) -> Vec<f64> {
    let plane = h * w;
    let mut out = vec![0.0; x.len()];
    for b in 0..n {
        let item = &x[b * c * plane..(b + 1) * c * plane];
        // z^h_c(i): mean over width at height i; z^w_c(j): mean over height
        let mut zcat = vec![0.0; c * (h + w)]; // per channel: H entries then W entries
        for ch in 0..c {
            for i in 0..h {
                zcat[ch * (h + w) + i] =
                    (0..w).map(|j| item[ch * plane + i * w + j]).sum::<f64>() / w as f64;
            }
            for j in 0..w {
                zcat[ch * (h + w) + h + j] =
                    (0..h).map(|i| item[ch * plane + i * w + j]).sum::<f64>() / h as f64;
            }
        }
        // u = relu(bn(conv1x1(cat))) at reduced channels over length H+W
        let mut u = vec![0.0; cr * (h + w)];
        for rc in 0..cr {
            let istd = 1.0 / (bn_var[rc] + 1e-5).sqrt();
            for p in 0..h + w {
                let conv: f64 = (0..c).map(|ch| fuse[rc * c + ch] * zcat[ch * (h + w) + p]).sum();
                let bn = bn_gamma[rc] * (conv - bn_mean[rc]) * istd + bn_beta[rc];
                u[rc * (h + w) + p] = bn.max(0.0);
            }
        }
        // s^h = sigmoid(conv1x1(u^h)), s^w = sigmoid(conv1x1(u^w))
        let mut sh = vec![0.0; c * h];
        let mut sw = vec![0.0; c * w];
        for ch in 0..c {
            for i in 0..h {
                let v: f64 = (0..cr).map(|rc| gate_h[ch * cr + rc] * u[rc * (h + w) + i]).sum();
                sh[ch * h + i] = sigmoid(v);
            }
            for j in 0..w {
                let v: f64 = (0..cr).map(|rc| gate_w[ch * cr + rc] * u[rc * (h + w) + h + j]).sum();
                sw[ch * w + j] = sigmoid(v);
            }
        }
        // x-hat_c(i, j) = x_c(i, j) * s^h_c(i) * s^w_c(j)
        for ch in 0..c {
            for i in 0..h {
                for j in 0..w {
                    out[b * c * plane + ch * plane + i * w + j] =
                        item[ch * plane + i * w + j] * sh[ch * h + i] * sw[ch * w + j];
                }
            }
        }
    }
    out
}

/// Loop oracles for the three pooling heads over `N x d x T` with valid
/// lengths.
pub fn average_pool_oracle(h: &[f64], n: usize, d: usize, t: usize, valid: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; n * d];
    for b in 0..n {
        for dim in 0..d {
            let mut s = 0.0;
            for frame in 0..valid[b] {
                s += h[(b * d + dim) * t + frame];
            }
            out[b * d + dim] = s / valid[b] as f64;
        }
    }
    out
}

pub fn max_pool_oracle(h: &[f64], n: usize, d: usize, t: usize, valid: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; n * d];
    for b in 0..n {
        for dim in 0..d {
            out[b * d + dim] = (0..valid[b])
                .map(|frame| h[(b * d + dim) * t + frame])
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    out
}

/// `e_t = v^T tanh(W h_t + b)`, softmax over valid frames, weighted sum.
#[allow(clippy::too_many_arguments)]
pub fn attentive_pool_oracle(
    h: &[f64],
    n: usize,
    d: usize,
    t: usize,
    valid: &[usize],
    w: &[f64], // d x d
    bias: &[f64],
    v: &[f64], // d
) -> Vec<f64> {
    let mut out = vec![0.0; n * d];
    for b in 0..n {
        let frame = |tt: usize| -> Vec<f64> { (0..d).map(|dim| h[(b * d + dim) * t + tt]).collect() };
        let scores: Vec<f64> = (0..valid[b])
            .map(|tt| {
                let ht = frame(tt);
                (0..d)
                    .map(|r| {
                        let wh: f64 = (0..d).map(|cc| w[r * d + cc] * ht[cc]).sum();
                        v[r] * (wh + bias[r]).tanh()
                    })
                    .sum()
            })
            .collect();
        let m = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let exps: Vec<f64> = scores.iter().map(|&e| (e - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        for tt in 0..valid[b] {
            let a = exps[tt] / z;
            for dim in 0..d {
                out[b * d + dim] += a * h[(b * d + dim) * t + tt];
            }
        }
    }
    out
}

/// Reference Adam update, written independently from the optimizer.
pub struct ReferenceAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl ReferenceAdam {
    pub fn new(n: usize) -> Self {
        ReferenceAdam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
        for i in 0..w.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = self.m[i] / (1.0 - b1.powi(self.t as i32));
            let vh = self.v[i] / (1.0 - b2.powi(self.t as i32));
            w[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-12))
        .fold(0.0, f64::max)
}

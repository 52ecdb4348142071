//! Network primitives: fully-connected, 2-D convolution, batch norm, pooling.
//!
//! Convolution and the fully-connected layer lower to GEMM (im2col for the
//! convolution); the naive loop definitions they must agree with live in the
//! test suite as independent oracles.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[allow(clippy::too_many_arguments)]
fn gemm_rsc<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    rsa: isize,
    csa: isize,
    b: &[T],
    rsb: isize,
    csb: isize,
    beta: T,
    c: &mut [T],
    rsc: isize,
) {
    unsafe {
        T::gemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            1,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    rsa: isize,
    csa: isize,
    b: &[T],
    rsb: isize,
    csb: isize,
    beta: T,
    c: &mut [T],
) {
    debug_assert!(c.len() >= m * n);
    gemm_rsc(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, n as isize);
}

/// `x[N x I] . w[O x I]^T (+ b[O])`.
pub fn linear<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let (xs, ws) = (x.shape().to_vec(), w.shape().to_vec());
    if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
        return Err(Error::Shape(format!(
            "linear: x {xs:?} incompatible with w {ws:?}"
        )));
    }
    let (n, i, o) = (xs[0], xs[1], ws[0]);
    if let Some(bias) = b {
        if bias.shape() != [o] {
            return Err(Error::Shape(format!(
                "linear: bias {:?} does not match out dim {o}",
                bias.shape()
            )));
        }
    }
    let mut out = vec![T::zero(); n * o];
    x.with_data(|xd| {
        w.with_data(|wd| {
            // y = x . w^T : treat w^T as a k x n matrix with strides (1, I)
            gemm(n, i, o, T::one(), xd, i as isize, 1, wd, 1, i as isize, T::zero(), &mut out);
        })
    });
    if let Some(bias) = b {
        bias.with_data(|bd| {
            for row in out.chunks_mut(o) {
                for (v, &bv) in row.iter_mut().zip(bd) {
                    *v = *v + bv;
                }
            }
        });
    }
    let (px, pw) = (x.clone(), w.clone());
    let pb = b.cloned();
    let mut parents = vec![x.clone(), w.clone()];
    if let Some(bias) = b {
        parents.push(bias.clone());
    }
    Ok(Tensor::from_op(vec![n, o], out, parents, move |g| {
        if px.requires_grad() {
            let mut gx = vec![T::zero(); n * i];
            pw.with_data(|wd| {
                gemm(n, o, i, T::one(), g, o as isize, 1, wd, i as isize, 1, T::zero(), &mut gx);
            });
            px.accumulate_grad(&gx);
        }
        if pw.requires_grad() {
            let mut gw = vec![T::zero(); o * i];
            px.with_data(|xd| {
                // dW = dy^T . x : dy^T is o x n with strides (1, O)
                gemm(o, n, i, T::one(), g, 1, o as isize, xd, i as isize, 1, T::zero(), &mut gw);
            });
            pw.accumulate_grad(&gw);
        }
        if let Some(bias) = &pb {
            if bias.requires_grad() {
                let mut gb = vec![T::zero(); o];
                for row in g.chunks(o) {
                    for (acc, &gv) in gb.iter_mut().zip(row) {
                        *acc = *acc + gv;
                    }
                }
                bias.accumulate_grad(&gb);
            }
        }
    }))
}

struct ConvDims {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<ConvDims> {
    let xs = x.shape();
    let ws = w.shape();
    if xs.len() != 4 || ws.len() != 4 {
        return Err(Error::Shape(format!("conv2d: need 4-D input and kernel, got {xs:?}, {ws:?}")));
    }
    if xs[1] != ws[1] {
        return Err(Error::Shape(format!(
            "conv2d: input channels {} != kernel channels {}",
            xs[1], ws[1]
        )));
    }
    let (sh, sw) = stride;
    let (ph, pw) = padding;
    assert!(sh >= 1 && sw >= 1 && ws[2] >= 1 && ws[3] >= 1);
    let padded_h = xs[2] + 2 * ph;
    let padded_w = xs[3] + 2 * pw;
    if padded_h < ws[2] || padded_w < ws[3] {
        return Err(Error::Shape(format!(
            "conv2d: kernel {}x{} does not fit padded input {padded_h}x{padded_w}",
            ws[2], ws[3]
        )));
    }
    let oh = (padded_h - ws[2]) / sh + 1;
    let ow = (padded_w - ws[3]) / sw + 1;
    Ok(ConvDims {
        n: xs[0],
        c: xs[1],
        h: xs[2],
        w: xs[3],
        f: ws[0],
        kh: ws[2],
        kw: ws[3],
        sh,
        sw,
        ph,
        pw,
        oh,
        ow,
    })
}

/// Unpacks one sample into the shared column buffer. Rows span the whole
/// sample group (`row_stride` columns); this sample occupies `col_off..`.
fn im2col<T: Scalar>(x: &[T], d: &ConvDims, cols: &mut [T], row_stride: usize, col_off: usize) {
    let mut row = 0usize;
    for c in 0..d.c {
        let chan = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ki in 0..d.kh {
            for kj in 0..d.kw {
                let dst = &mut cols[row * row_stride + col_off..row * row_stride + col_off + d.oh * d.ow];
                for oi in 0..d.oh {
                    let out_row = &mut dst[oi * d.ow..(oi + 1) * d.ow];
                    let ih = (oi * d.sh + ki) as isize - d.ph as isize;
                    if ih < 0 || ih >= d.h as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src_row = &chan[ih as usize * d.w..(ih as usize + 1) * d.w];
                    if d.sw == 1 {
                        // contiguous source span; copy it and zero the pad fringes
                        let oj_lo = d.pw.saturating_sub(kj).min(d.ow);
                        let oj_hi = (d.w + d.pw - kj).min(d.ow).max(oj_lo);
                        out_row[..oj_lo].fill(T::zero());
                        let src_lo = oj_lo + kj - d.pw;
                        out_row[oj_lo..oj_hi].copy_from_slice(&src_row[src_lo..src_lo + (oj_hi - oj_lo)]);
                        out_row[oj_hi..].fill(T::zero());
                    } else {
                        for (oj, v) in out_row.iter_mut().enumerate() {
                            let iw = (oj * d.sw + kj) as isize - d.pw as isize;
                            *v = if iw < 0 || iw >= d.w as isize {
                                T::zero()
                            } else {
                                src_row[iw as usize]
                            };
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-add of one sample's column gradients back to input positions.
fn col2im_add<T: Scalar>(cols: &[T], d: &ConvDims, x_grad: &mut [T], row_stride: usize, col_off: usize) {
    let mut row = 0usize;
    for c in 0..d.c {
        let base = c * d.h * d.w;
        for ki in 0..d.kh {
            for kj in 0..d.kw {
                let src = &cols[row * row_stride + col_off..row * row_stride + col_off + d.oh * d.ow];
                for oi in 0..d.oh {
                    let ih = (oi * d.sh + ki) as isize - d.ph as isize;
                    if ih < 0 || ih >= d.h as isize {
                        continue;
                    }
                    let src_row = &src[oi * d.ow..(oi + 1) * d.ow];
                    let dst_row = base + ih as usize * d.w;
                    if d.sw == 1 {
                        let oj_lo = d.pw.saturating_sub(kj).min(d.ow);
                        let oj_hi = (d.w + d.pw - kj).min(d.ow).max(oj_lo);
                        let dst_lo = dst_row + oj_lo + kj - d.pw;
                        for (g, &s) in x_grad[dst_lo..dst_lo + (oj_hi - oj_lo)]
                            .iter_mut()
                            .zip(&src_row[oj_lo..oj_hi])
                        {
                            *g = *g + s;
                        }
                    } else {
                        for (oj, &s) in src_row.iter().enumerate() {
                            let iw = (oj * d.sw + kj) as isize - d.pw as isize;
                            if iw >= 0 && iw < d.w as isize {
                                let p = dst_row + iw as usize;
                                x_grad[p] = x_grad[p] + s;
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Samples folded into one GEMM call; bounds the column-buffer size while
/// amortizing the GEMM's packing work over a wide right-hand side.
const CONV_GROUP: usize = 8;

/// Zero-padded 2-D convolution, `x[N x C x H x W] * w[F x C x kh x kw]`.
///
/// im2col plus grouped batch GEMM; gradients run the same lowering in
/// reverse (dW via dy x cols^T, dX via w^T x dy scattered back).
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<Tensor<T>> {
    let d = conv_dims(x, w, stride, padding)?;
    let ckk = d.c * d.kh * d.kw;
    let spatial = d.oh * d.ow;
    let in_plane = d.c * d.h * d.w;
    let out_plane = d.f * spatial;
    let group = CONV_GROUP.min(d.n);
    let row_stride = group * spatial;

    let mut out = vec![T::zero(); d.n * out_plane];
    T::with_conv_scratch(|scratch| {
        scratch.reserve(ckk * row_stride, d.f * row_stride, 0);
        let (cols, cbuf) = (&mut scratch.cols, &mut scratch.out);
        x.with_data(|xd| {
        w.with_data(|wd| {
            for g0 in (0..d.n).step_by(group) {
                let gn = group.min(d.n - g0);
                let ncols = gn * spatial;
                for b in 0..gn {
                    im2col(
                        &xd[(g0 + b) * in_plane..(g0 + b + 1) * in_plane],
                        &d,
                        cols,
                        row_stride,
                        b * spatial,
                    );
                }
                gemm_rsc(
                    d.f,
                    ckk,
                    ncols,
                    T::one(),
                    wd,
                    ckk as isize,
                    1,
                    cols,
                    row_stride as isize,
                    1,
                    T::zero(),
                    cbuf,
                    ncols as isize,
                );
                // scatter F-major group output to N-major layout
                for b in 0..gn {
                    for f in 0..d.f {
                        let src = &cbuf[f * ncols + b * spatial..f * ncols + (b + 1) * spatial];
                        out[(g0 + b) * out_plane + f * spatial..(g0 + b) * out_plane + (f + 1) * spatial]
                            .copy_from_slice(src);
                    }
                }
            }
        })
        });
    });

    let (px, pw) = (x.clone(), w.clone());
    Ok(Tensor::from_op(
        vec![d.n, d.f, d.oh, d.ow],
        out,
        vec![x.clone(), w.clone()],
        move |g| {
            let need_w = pw.requires_grad();
            let need_x = px.requires_grad();
            if !need_w && !need_x {
                return;
            }
            let mut gw = if need_w { vec![T::zero(); d.f * ckk] } else { Vec::new() };
            let mut gx = if need_x { vec![T::zero(); d.n * in_plane] } else { Vec::new() };
            T::with_conv_scratch(|scratch| {
            scratch.reserve(ckk * row_stride, 0, d.f * row_stride);
            let (cols, dy_t) = (&mut scratch.cols, &mut scratch.dy);
            for g0 in (0..d.n).step_by(group) {
                let gn = group.min(d.n - g0);
                let ncols = gn * spatial;
                // gather dy into F-major layout for this group
                for b in 0..gn {
                    for f in 0..d.f {
                        let src = &g[(g0 + b) * out_plane + f * spatial..(g0 + b) * out_plane + (f + 1) * spatial];
                        dy_t[f * ncols + b * spatial..f * ncols + (b + 1) * spatial].copy_from_slice(src);
                    }
                }
                if need_w {
                    px.with_data(|xd| {
                        for b in 0..gn {
                            im2col(
                                &xd[(g0 + b) * in_plane..(g0 + b + 1) * in_plane],
                                &d,
                                cols,
                                row_stride,
                                b * spatial,
                            );
                        }
                    });
                    gemm_rsc(
                        d.f,
                        ncols,
                        ckk,
                        T::one(),
                        dy_t,
                        ncols as isize,
                        1,
                        cols,
                        1,
                        row_stride as isize,
                        T::one(),
                        &mut gw,
                        ckk as isize,
                    );
                }
                if need_x {
                    pw.with_data(|wd| {
                        gemm_rsc(
                            ckk,
                            d.f,
                            ncols,
                            T::one(),
                            wd,
                            1,
                            ckk as isize,
                            dy_t,
                            ncols as isize,
                            1,
                            T::zero(),
                            cols,
                            row_stride as isize,
                        );
                    });
                    for b in 0..gn {
                        col2im_add(
                            cols,
                            &d,
                            &mut gx[(g0 + b) * in_plane..(g0 + b + 1) * in_plane],
                            row_stride,
                            b * spatial,
                        );
                    }
                }
            }
            });
            if need_w {
                pw.accumulate_grad_owned(gw);
            }
            if need_x {
                px.accumulate_grad_owned(gx);
            }
        },
    ))
}

/// Batch-norm mode: batch statistics (train) or running statistics (eval).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

/// Per-channel batch normalization over `N x C x H x W`.
///
/// Train mode normalizes with batch statistics and folds them into
/// `running_mean`/`running_var` (plain tensors, not graph nodes) with the
/// given momentum; eval mode reads the running statistics only.
#[allow(clippy::too_many_arguments)]
pub fn batch_norm2d<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    mode: BnMode,
    eps: T,
    momentum: T,
) -> Result<Tensor<T>> {
    let xs = x.shape().to_vec();
    if xs.len() != 4 {
        return Err(Error::Shape(format!("batch_norm2d: need 4-D input, got {xs:?}")));
    }
    let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::Shape("batch_norm2d: gamma/beta must be per-channel".into()));
    }
    let m = n * h * w;
    assert!(m >= 1, "batch_norm2d needs at least one element per channel");
    let plane = h * w;

    let (mean, istd) = match mode {
        BnMode::Train => {
            let mf = T::from_f64(m as f64);
            let mut sum = vec![T::zero(); c];
            x.with_data(|xd| {
                for bc in 0..n * c {
                    let mut s = T::zero();
                    for &v in &xd[bc * plane..(bc + 1) * plane] {
                        s = s + v;
                    }
                    sum[bc % c] = sum[bc % c] + s;
                }
            });
            let mean: Vec<T> = sum.iter().map(|&s| s / mf).collect();
            // second pass around the mean avoids cancellation for channels
            // far from zero (the log-floor input features)
            let mut sq = vec![T::zero(); c];
            x.with_data(|xd| {
                for bc in 0..n * c {
                    let mu = mean[bc % c];
                    let mut s = T::zero();
                    for &v in &xd[bc * plane..(bc + 1) * plane] {
                        let d = v - mu;
                        s = s + d * d;
                    }
                    sq[bc % c] = sq[bc % c] + s;
                }
            });
            let var: Vec<T> = sq.iter().map(|&s| s / mf).collect();
            // running stats use the unbiased variance estimate when possible
            let unbiased = if m > 1 {
                T::from_f64(m as f64 / (m as f64 - 1.0))
            } else {
                T::one()
            };
            running_mean.update_data(|rm| {
                for ch in 0..c {
                    rm[ch] = (T::one() - momentum) * rm[ch] + momentum * mean[ch];
                }
            });
            running_var.update_data(|rv| {
                for ch in 0..c {
                    rv[ch] = (T::one() - momentum) * rv[ch] + momentum * var[ch] * unbiased;
                }
            });
            let istd: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
            (mean, istd)
        }
        BnMode::Eval => {
            let mean = running_mean.to_vec();
            let istd: Vec<T> = running_var
                .to_vec()
                .iter()
                .map(|&v| T::one() / (v + eps).sqrt())
                .collect();
            (mean, istd)
        }
    };

    let gd = gamma.to_vec();
    let bd = beta.to_vec();
    // y = x * scale + shift with per-channel constants
    let scale: Vec<T> = gd.iter().zip(&istd).map(|(&g, &s)| g * s).collect();
    let shift: Vec<T> = bd
        .iter()
        .zip(&scale)
        .zip(&mean)
        .map(|((&b, &k), &mu)| b - mu * k)
        .collect();
    let mut out = vec![T::zero(); n * c * plane];
    x.with_data(|xd| {
        for bc in 0..n * c {
            let (k, s) = (scale[bc % c], shift[bc % c]);
            for (o, &v) in out[bc * plane..(bc + 1) * plane]
                .iter_mut()
                .zip(&xd[bc * plane..(bc + 1) * plane])
            {
                *o = v * k + s;
            }
        }
    });

    let (px, pg, pb) = (x.clone(), gamma.clone(), beta.clone());
    Ok(Tensor::from_op(
        xs,
        out,
        vec![x.clone(), gamma.clone(), beta.clone()],
        move |g| {
            // x-hat is recomputed from the captured statistics
            let mut dgamma = vec![T::zero(); c];
            let mut dbeta = vec![T::zero(); c];
            px.with_data(|xd| {
                for bc in 0..n * c {
                    let ch = bc % c;
                    let (mut dg, mut db) = (T::zero(), T::zero());
                    for (&gi, &xi) in g[bc * plane..(bc + 1) * plane]
                        .iter()
                        .zip(&xd[bc * plane..(bc + 1) * plane])
                    {
                        dg = dg + gi * (xi - mean[ch]) * istd[ch];
                        db = db + gi;
                    }
                    dgamma[ch] = dgamma[ch] + dg;
                    dbeta[ch] = dbeta[ch] + db;
                }
            });
            if px.requires_grad() {
                let mut gx = vec![T::zero(); g.len()];
                match mode {
                    BnMode::Train => {
                        let mf = T::from_f64(m as f64);
                        px.with_data(|xd| {
                            for bc in 0..n * c {
                                let ch = bc % c;
                                let k = gd[ch] * istd[ch] / mf;
                                for i in bc * plane..(bc + 1) * plane {
                                    let xh = (xd[i] - mean[ch]) * istd[ch];
                                    gx[i] = k * (mf * g[i] - dbeta[ch] - xh * dgamma[ch]);
                                }
                            }
                        });
                    }
                    BnMode::Eval => {
                        for bc in 0..n * c {
                            let k = gd[bc % c] * istd[bc % c];
                            for i in bc * plane..(bc + 1) * plane {
                                gx[i] = k * g[i];
                            }
                        }
                    }
                }
                px.accumulate_grad(&gx);
            }
            if pg.requires_grad() {
                pg.accumulate_grad(&dgamma);
            }
            if pb.requires_grad() {
                pb.accumulate_grad(&dbeta);
            }
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

/// Windowed max/average pooling over `N x C x H x W`.
///
/// Max ignores padding cells and routes its gradient to the first maximum in
/// row-major window order; average divides by the full kernel area with
/// zero-valued padding cells included.
pub fn pool2d<T: Scalar>(
    x: &Tensor<T>,
    kind: PoolKind,
    kernel: (usize, usize),
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<Tensor<T>> {
    let xs = x.shape().to_vec();
    if xs.len() != 4 {
        return Err(Error::Shape(format!("pool2d: need 4-D input, got {xs:?}")));
    }
    let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (kh, kw) = kernel;
    let (sh, sw) = stride;
    let (ph, pw) = padding;
    if h + 2 * ph < kh || w + 2 * pw < kw {
        return Err(Error::Shape(format!(
            "pool2d: kernel {kh}x{kw} does not fit padded input {}x{}",
            h + 2 * ph,
            w + 2 * pw
        )));
    }
    let oh = (h + 2 * ph - kh) / sh + 1;
    let ow = (w + 2 * pw - kw) / sw + 1;
    let plane = h * w;
    let out_plane = oh * ow;
    let xd = x.to_vec();
    let mut out = vec![T::zero(); n * c * out_plane];
    let mut arg = vec![0usize; if kind == PoolKind::Max { n * c * out_plane } else { 0 }];
    let area = T::from_f64((kh * kw) as f64);
    for bc in 0..n * c {
        let chan = &xd[bc * plane..(bc + 1) * plane];
        for oi in 0..oh {
            for oj in 0..ow {
                let o = bc * out_plane + oi * ow + oj;
                match kind {
                    PoolKind::Max => {
                        let mut best = T::neg_infinity();
                        let mut best_pos = 0usize;
                        for ki in 0..kh {
                            let ih = (oi * sh + ki) as isize - ph as isize;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            for kj in 0..kw {
                                let iw = (oj * sw + kj) as isize - pw as isize;
                                if iw < 0 || iw >= w as isize {
                                    continue;
                                }
                                let p = ih as usize * w + iw as usize;
                                if chan[p] > best {
                                    best = chan[p];
                                    best_pos = p;
                                }
                            }
                        }
                        out[o] = best;
                        arg[o] = best_pos;
                    }
                    PoolKind::Avg => {
                        let mut s = T::zero();
                        for ki in 0..kh {
                            let ih = (oi * sh + ki) as isize - ph as isize;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            for kj in 0..kw {
                                let iw = (oj * sw + kj) as isize - pw as isize;
                                if iw < 0 || iw >= w as isize {
                                    continue;
                                }
                                s = s + chan[ih as usize * w + iw as usize];
                            }
                        }
                        out[o] = s / area;
                    }
                }
            }
        }
    }
    let px = x.clone();
    Ok(Tensor::from_op(
        vec![n, c, oh, ow],
        out,
        vec![x.clone()],
        move |g| {
            if !px.requires_grad() {
                return;
            }
            let mut gx = vec![T::zero(); n * c * plane];
            match kind {
                PoolKind::Max => {
                    for bc in 0..n * c {
                        for o in 0..out_plane {
                            let p = bc * plane + arg[bc * out_plane + o];
                            gx[p] = gx[p] + g[bc * out_plane + o];
                        }
                    }
                }
                PoolKind::Avg => {
                    for bc in 0..n * c {
                        for oi in 0..oh {
                            for oj in 0..ow {
                                let gv = g[bc * out_plane + oi * ow + oj] / area;
                                for ki in 0..kh {
                                    let ih = (oi * sh + ki) as isize - ph as isize;
                                    if ih < 0 || ih >= h as isize {
                                        continue;
                                    }
                                    for kj in 0..kw {
                                        let iw = (oj * sw + kj) as isize - pw as isize;
                                        if iw < 0 || iw >= w as isize {
                                            continue;
                                        }
                                        let p = bc * plane + ih as usize * w + iw as usize;
                                        gx[p] = gx[p] + gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            px.accumulate_grad(&gx);
        },
    ))
}

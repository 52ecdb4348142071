//! Elementwise, broadcast, reduction and shape-manipulation primitives.
//!
//! Broadcasting follows trailing-dimension rules: shapes are aligned at the
//! last axis and a dimension of 1 (or a missing leading dimension) stretches.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Broadcast result shape of `a` and `b`, or a shape error.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let nd = a.len().max(b.len());
    let mut out = vec![0usize; nd];
    for d in 0..nd {
        let da = if d < nd - a.len() { 1 } else { a[d - (nd - a.len())] };
        let db = if d < nd - b.len() { 1 } else { b[d - (nd - b.len())] };
        out[d] = if da == db {
            da
        } else if da == 1 {
            db
        } else if db == 1 {
            da
        } else {
            return Err(Error::Shape(format!(
                "cannot broadcast {a:?} with {b:?} (dim {d}: {da} vs {db})"
            )));
        };
    }
    Ok(out)
}

/// Per-output-dimension element strides for an operand, 0 where it broadcasts.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<isize> {
    let nd = out.len();
    let offset = nd - shape.len();
    // natural row-major strides of the operand
    let mut nat = vec![0isize; shape.len()];
    let mut acc = 1isize;
    for d in (0..shape.len()).rev() {
        nat[d] = acc;
        acc *= shape[d] as isize;
    }
    let mut s = vec![0isize; nd];
    for d in 0..nd {
        if d >= offset && shape[d - offset] != 1 {
            s[d] = nat[d - offset];
        }
    }
    s
}

/// Walks the output index space once, yielding (out_flat, a_offset, b_offset).
fn zip_broadcast(out_shape: &[usize], sa: &[isize], sb: &[isize], mut f: impl FnMut(usize, usize, usize)) {
    let numel: usize = out_shape.iter().product();
    if numel == 0 {
        return;
    }
    let nd = out_shape.len();
    let mut idx = vec![0usize; nd];
    let (mut oa, mut ob) = (0isize, 0isize);
    for flat in 0..numel {
        f(flat, oa as usize, ob as usize);
        for d in (0..nd).rev() {
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
            oa -= sa[d] * out_shape[d] as isize;
            ob -= sb[d] * out_shape[d] as isize;
        }
    }
}

/// Splits a shape at `axis` into (outer, len, inner) extents.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, len, inner)
}

enum BinOp {
    Add,
    Mul,
}

impl<T: Scalar> Tensor<T> {
    fn binary(&self, other: &Tensor<T>, op: BinOp) -> Result<Tensor<T>> {
        if self.shape() == other.shape() {
            return Ok(self.binary_same_shape(other, op));
        }
        let out_shape = broadcast_shape(self.shape(), other.shape())?;
        let sa = broadcast_strides(self.shape(), &out_shape);
        let sb = broadcast_strides(other.shape(), &out_shape);
        let mut out = vec![T::zero(); out_shape.iter().product()];
        self.with_data(|a| {
            other.with_data(|b| match op {
                BinOp::Add => zip_broadcast(&out_shape, &sa, &sb, |o, ia, ib| out[o] = a[ia] + b[ib]),
                BinOp::Mul => zip_broadcast(&out_shape, &sa, &sb, |o, ia, ib| out[o] = a[ia] * b[ib]),
            })
        });
        let (pa, pb) = (self.clone(), other.clone());
        let shape_c = out_shape.clone();
        Ok(Tensor::from_op(out_shape, out, vec![self.clone(), other.clone()], move |g| {
            let mut ga = vec![T::zero(); pa.numel()];
            let mut gb = vec![T::zero(); pb.numel()];
            match op {
                BinOp::Add => zip_broadcast(&shape_c, &sa, &sb, |o, ia, ib| {
                    ga[ia] = ga[ia] + g[o];
                    gb[ib] = gb[ib] + g[o];
                }),
                BinOp::Mul => {
                    pa.with_data(|av| {
                        pb.with_data(|bv| {
                            zip_broadcast(&shape_c, &sa, &sb, |o, ia, ib| {
                                ga[ia] = ga[ia] + g[o] * bv[ib];
                                gb[ib] = gb[ib] + g[o] * av[ia];
                            });
                        })
                    });
                }
            }
            if pa.requires_grad() {
                pa.accumulate_grad(&ga);
            }
            if pb.requires_grad() {
                pb.accumulate_grad(&gb);
            }
        }))
    }

    /// Equal shapes skip the stride walk entirely.
    fn binary_same_shape(&self, other: &Tensor<T>, op: BinOp) -> Tensor<T> {
        let out: Vec<T> = self.with_data(|a| {
            other.with_data(|b| match op {
                BinOp::Add => a.iter().zip(b).map(|(&x, &y)| x + y).collect(),
                BinOp::Mul => a.iter().zip(b).map(|(&x, &y)| x * y).collect(),
            })
        });
        let (pa, pb) = (self.clone(), other.clone());
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            vec![self.clone(), other.clone()],
            move |g| match op {
                BinOp::Add => {
                    if pa.requires_grad() {
                        pa.accumulate_grad(g);
                    }
                    if pb.requires_grad() {
                        pb.accumulate_grad(g);
                    }
                }
                BinOp::Mul => {
                    if pa.requires_grad() {
                        let contrib: Vec<T> =
                            pb.with_data(|bv| g.iter().zip(bv).map(|(&gi, &b)| gi * b).collect());
                        pa.accumulate_grad(&contrib);
                    }
                    if pb.requires_grad() {
                        let contrib: Vec<T> =
                            pa.with_data(|av| g.iter().zip(av).map(|(&gi, &a)| gi * a).collect());
                        pb.accumulate_grad(&contrib);
                    }
                }
            },
        )
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, BinOp::Add)
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, BinOp::Mul)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.add(&other.scale(-T::one()))
    }

    fn unary(&self, fwd: impl Fn(T) -> T, dydx: impl Fn(T, T) -> T + 'static) -> Tensor<T> {
        let y: Vec<T> = self.with_data(|d| d.iter().map(|&v| fwd(v)).collect());
        let y_saved = y.clone();
        let p = self.clone();
        Tensor::from_op(self.shape().to_vec(), y, vec![self.clone()], move |g| {
            if !p.requires_grad() {
                return;
            }
            let contrib: Vec<T> = p.with_data(|xv| {
                g.iter()
                    .zip(xv.iter().zip(y_saved.iter()))
                    .map(|(&gi, (&xi, &yi))| gi * dydx(xi, yi))
                    .collect()
            });
            p.accumulate_grad(&contrib);
        })
    }

    pub fn relu(&self) -> Tensor<T> {
        let y: Vec<T> = self.with_data(|d| {
            d.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
        });
        let p = self.clone();
        Tensor::from_op(self.shape().to_vec(), y, vec![self.clone()], move |g| {
            if !p.requires_grad() {
                return;
            }
            let contrib: Vec<T> = p.with_data(|xv| {
                g.iter()
                    .zip(xv)
                    .map(|(&gi, &xi)| if xi > T::zero() { gi } else { T::zero() })
                    .collect()
            });
            p.accumulate_grad_owned(contrib);
        })
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.unary(
            |v| T::one() / (T::one() + (-v).exp()),
            |_, y| y * (T::one() - y),
        )
    }

    pub fn tanh_t(&self) -> Tensor<T> {
        self.unary(|v| v.tanh(), |_, y| T::one() - y * y)
    }

    pub fn exp_t(&self) -> Tensor<T> {
        self.unary(|v| v.exp(), |_, y| y)
    }

    pub fn ln_t(&self) -> Tensor<T> {
        self.unary(|v| v.ln(), |x, _| T::one() / x)
    }

    pub fn scale(&self, c: T) -> Tensor<T> {
        self.unary(move |v| v * c, move |_, _| c)
    }

    pub fn add_scalar(&self, c: T) -> Tensor<T> {
        self.unary(move |v| v + c, |_, _| T::one())
    }

    /// Sum along one axis.
    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Tensor<T> {
        let (outer, len, inner) = axis_split(self.shape(), axis);
        let mut out = vec![T::zero(); outer * inner];
        self.with_data(|x| {
            for o in 0..outer {
                for l in 0..len {
                    let base = (o * len + l) * inner;
                    for i in 0..inner {
                        out[o * inner + i] = out[o * inner + i] + x[base + i];
                    }
                }
            }
        });
        let out_shape = reduced_shape(self.shape(), axis, keepdim);
        let p = self.clone();
        Tensor::from_op(out_shape, out, vec![self.clone()], move |g| {
            if !p.requires_grad() {
                return;
            }
            let mut contrib = vec![T::zero(); outer * len * inner];
            for o in 0..outer {
                for l in 0..len {
                    let base = (o * len + l) * inner;
                    for i in 0..inner {
                        contrib[base + i] = g[o * inner + i];
                    }
                }
            }
            p.accumulate_grad(&contrib);
        })
    }

    /// Mean along one axis.
    pub fn mean_axis(&self, axis: usize, keepdim: bool) -> Tensor<T> {
        let len = self.shape()[axis];
        self.sum_axis(axis, keepdim)
            .scale(T::one() / T::from_f64(len as f64))
    }

    /// Max along one axis; the backward pass routes the gradient to the first
    /// maximum in scan order.
    pub fn max_axis(&self, axis: usize, keepdim: bool) -> Tensor<T> {
        let (outer, len, inner) = axis_split(self.shape(), axis);
        let mut out = vec![T::zero(); outer * inner];
        let mut arg = vec![0usize; outer * inner];
        self.with_data(|x| {
            for o in 0..outer {
                for i in 0..inner {
                    let mut best = x[o * len * inner + i];
                    let mut best_l = 0usize;
                    for l in 1..len {
                        let v = x[(o * len + l) * inner + i];
                        if v > best {
                            best = v;
                            best_l = l;
                        }
                    }
                    out[o * inner + i] = best;
                    arg[o * inner + i] = best_l;
                }
            }
        });
        let out_shape = reduced_shape(self.shape(), axis, keepdim);
        let p = self.clone();
        Tensor::from_op(out_shape, out, vec![self.clone()], move |g| {
            if !p.requires_grad() {
                return;
            }
            let mut contrib = vec![T::zero(); outer * len * inner];
            for o in 0..outer {
                for i in 0..inner {
                    let l = arg[o * inner + i];
                    contrib[(o * len + l) * inner + i] = g[o * inner + i];
                }
            }
            p.accumulate_grad(&contrib);
        })
    }

    pub fn sum_all(&self) -> Tensor<T> {
        let total: T = self.with_data(|d| d.iter().copied().sum());
        let p = self.clone();
        let n = self.numel();
        Tensor::from_op(vec![1], vec![total], vec![self.clone()], move |g| {
            if p.requires_grad() {
                p.accumulate_grad(&vec![g[0]; n]);
            }
        })
    }

    pub fn mean_all(&self) -> Tensor<T> {
        self.sum_all().scale(T::one() / T::from_f64(self.numel() as f64))
    }

    /// View with a new shape (same number of elements).
    pub fn reshape(&self, shape: &[usize]) -> Tensor<T> {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.numel(),
            "reshape {:?} -> {:?}",
            self.shape(),
            shape
        );
        let p = self.clone();
        Tensor::from_op(shape.to_vec(), self.to_vec(), vec![self.clone()], move |g| {
            if p.requires_grad() {
                p.accumulate_grad(g);
            }
        })
    }

    /// Reorders axes; `axes` is a permutation of `0..ndim`.
    pub fn permute(&self, axes: &[usize]) -> Tensor<T> {
        let nd = self.shape().len();
        assert_eq!(axes.len(), nd);
        let in_shape = self.shape().to_vec();
        let mut in_strides = vec![1usize; nd];
        for d in (0..nd.saturating_sub(1)).rev() {
            in_strides[d] = in_strides[d + 1] * in_shape[d + 1];
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
        let numel = self.numel();
        let mut out = vec![T::zero(); numel];
        self.with_data(|x| {
            let mut idx = vec![0usize; nd];
            let mut in_off = 0usize;
            for item in out.iter_mut().take(numel) {
                *item = x[in_off];
                for d in (0..nd).rev() {
                    idx[d] += 1;
                    in_off += in_strides[axes[d]];
                    if idx[d] < out_shape[d] {
                        break;
                    }
                    idx[d] = 0;
                    in_off -= in_strides[axes[d]] * out_shape[d];
                }
            }
        });
        let mut inverse = vec![0usize; nd];
        for (d, &a) in axes.iter().enumerate() {
            inverse[a] = d;
        }
        let p = self.clone();
        let out_shape_c = out_shape.clone();
        Tensor::from_op(out_shape, out, vec![self.clone()], move |g| {
            if !p.requires_grad() {
                return;
            }
            // permute the gradient back with the inverse permutation
            let gt = Tensor::new(&out_shape_c, g.to_vec());
            let back = super::no_grad(|| gt.permute(&inverse));
            p.accumulate_grad(&back.to_vec());
        })
    }

    /// Concatenates tensors along `axis`; all other dims must agree.
    pub fn concat(parts: &[Tensor<T>], axis: usize) -> Result<Tensor<T>> {
        assert!(!parts.is_empty());
        let first = parts[0].shape().to_vec();
        let mut axis_total = 0usize;
        for p in parts {
            if p.shape().len() != first.len() {
                return Err(Error::Shape("concat rank mismatch".into()));
            }
            for (d, (&a, &b)) in first.iter().zip(p.shape()).enumerate() {
                if d != axis && a != b {
                    return Err(Error::Shape(format!(
                        "concat dim {d} mismatch: {a} vs {b}"
                    )));
                }
            }
            axis_total += p.shape()[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let (outer, _, inner) = axis_split(&out_shape, axis);
        let mut out = vec![T::zero(); out_shape.iter().product()];
        let mut offset = 0usize;
        for part in parts {
            let len = part.shape()[axis];
            part.with_data(|x| {
                for o in 0..outer {
                    for l in 0..len {
                        let src = (o * len + l) * inner;
                        let dst = (o * axis_total + offset + l) * inner;
                        out[dst..dst + inner].copy_from_slice(&x[src..src + inner]);
                    }
                }
            });
            offset += len;
        }
        let owned: Vec<Tensor<T>> = parts.to_vec();
        Ok(Tensor::from_op(out_shape, out, owned.clone(), move |g| {
            let mut offset = 0usize;
            for part in &owned {
                let len = part.shape()[axis];
                if part.requires_grad() {
                    let mut contrib = vec![T::zero(); part.numel()];
                    for o in 0..outer {
                        for l in 0..len {
                            let dst = (o * len + l) * inner;
                            let src = (o * axis_total + offset + l) * inner;
                            contrib[dst..dst + inner].copy_from_slice(&g[src..src + inner]);
                        }
                    }
                    part.accumulate_grad(&contrib);
                }
                offset += len;
            }
        }))
    }

    /// Contiguous sub-range `start..end` along `axis`.
    pub fn slice_axis(&self, axis: usize, start: usize, end: usize) -> Tensor<T> {
        let (outer, len, inner) = axis_split(self.shape(), axis);
        assert!(start < end && end <= len);
        let span = end - start;
        let mut out_shape = self.shape().to_vec();
        out_shape[axis] = span;
        let mut out = vec![T::zero(); outer * span * inner];
        self.with_data(|x| {
            for o in 0..outer {
                for l in 0..span {
                    let src = (o * len + start + l) * inner;
                    let dst = (o * span + l) * inner;
                    out[dst..dst + inner].copy_from_slice(&x[src..src + inner]);
                }
            }
        });
        let p = self.clone();
        Tensor::from_op(out_shape, out, vec![self.clone()], move |g| {
            if !p.requires_grad() {
                return;
            }
            let mut contrib = vec![T::zero(); outer * len * inner];
            for o in 0..outer {
                for l in 0..span {
                    let dst = (o * len + start + l) * inner;
                    let src = (o * span + l) * inner;
                    contrib[dst..dst + inner].copy_from_slice(&g[src..src + inner]);
                }
            }
            p.accumulate_grad(&contrib);
        })
    }

    /// Numerically stable softmax along `axis`: the per-slice max is
    /// subtracted before exponentiation, so |z| up to ~1e4 cannot overflow.
    pub fn softmax(&self, axis: usize) -> Tensor<T> {
        let (outer, len, inner) = axis_split(self.shape(), axis);
        let mut y = vec![T::zero(); self.numel()];
        self.with_data(|x| {
            for o in 0..outer {
                for i in 0..inner {
                    let at = |l: usize| (o * len + l) * inner + i;
                    let mut m = x[at(0)];
                    for l in 1..len {
                        if x[at(l)] > m {
                            m = x[at(l)];
                        }
                    }
                    let mut s = T::zero();
                    for l in 0..len {
                        let e = (x[at(l)] - m).exp();
                        y[at(l)] = e;
                        s = s + e;
                    }
                    for l in 0..len {
                        y[at(l)] = y[at(l)] / s;
                    }
                }
            }
        });
        let y_saved = y.clone();
        let p = self.clone();
        Tensor::from_op(self.shape().to_vec(), y, vec![self.clone()], move |g| {
            if !p.requires_grad() {
                return;
            }
            let mut contrib = vec![T::zero(); g.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |l: usize| (o * len + l) * inner + i;
                    let mut dot = T::zero();
                    for l in 0..len {
                        dot = dot + g[at(l)] * y_saved[at(l)];
                    }
                    for l in 0..len {
                        contrib[at(l)] = y_saved[at(l)] * (g[at(l)] - dot);
                    }
                }
            }
            p.accumulate_grad(&contrib);
        })
    }

    /// log(softmax) along `axis`, computed directly as `z - max - ln(sum exp)`.
    pub fn log_softmax(&self, axis: usize) -> Tensor<T> {
        let (outer, len, inner) = axis_split(self.shape(), axis);
        let mut y = vec![T::zero(); self.numel()];
        self.with_data(|x| {
            for o in 0..outer {
                for i in 0..inner {
                    let at = |l: usize| (o * len + l) * inner + i;
                    let mut m = x[at(0)];
                    for l in 1..len {
                        if x[at(l)] > m {
                            m = x[at(l)];
                        }
                    }
                    let mut s = T::zero();
                    for l in 0..len {
                        s = s + (x[at(l)] - m).exp();
                    }
                    let lse = m + s.ln();
                    for l in 0..len {
                        y[at(l)] = x[at(l)] - lse;
                    }
                }
            }
        });
        let y_saved = y.clone();
        let p = self.clone();
        Tensor::from_op(self.shape().to_vec(), y, vec![self.clone()], move |g| {
            if !p.requires_grad() {
                return;
            }
            let mut contrib = vec![T::zero(); g.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |l: usize| (o * len + l) * inner + i;
                    let mut gsum = T::zero();
                    for l in 0..len {
                        gsum = gsum + g[at(l)];
                    }
                    for l in 0..len {
                        contrib[at(l)] = g[at(l)] - y_saved[at(l)].exp() * gsum;
                    }
                }
            }
            p.accumulate_grad(&contrib);
        })
    }

    /// Picks one entry per row of an `N x K` tensor: `out[n] = self[n, idx[n]]`.
    pub fn select_classes(&self, idx: &[usize]) -> Result<Tensor<T>> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(Error::Shape(format!("select_classes expects N x K, got {shape:?}")));
        }
        let (n, k) = (shape[0], shape[1]);
        if idx.len() != n {
            return Err(Error::Shape("index count does not match batch size".into()));
        }
        for (row, &c) in idx.iter().enumerate() {
            if c >= k {
                return Err(Error::Data(format!("label {c} out of range [0, {k}) at row {row}")));
            }
        }
        let x = self.with_data(|d| d.to_vec());
        let out: Vec<T> = idx.iter().enumerate().map(|(r, &c)| x[r * k + c]).collect();
        let idx_saved = idx.to_vec();
        let p = self.clone();
        Ok(Tensor::from_op(vec![n], out, vec![self.clone()], move |g| {
            if !p.requires_grad() {
                return;
            }
            let mut contrib = vec![T::zero(); n * k];
            for (r, &c) in idx_saved.iter().enumerate() {
                contrib[r * k + c] = g[r];
            }
            p.accumulate_grad(&contrib);
        }))
    }
}

fn reduced_shape(shape: &[usize], axis: usize, keepdim: bool) -> Vec<usize> {
    let mut out = shape.to_vec();
    if keepdim {
        out[axis] = 1;
    } else {
        out.remove(axis);
    }
    if out.is_empty() {
        out.push(1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape, data.to_vec())
    }

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(t(&[3], &[-1.0, 0.0, 2.0]).relu().to_vec(), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(t(&[1], &[0.0]).sigmoid().item(), 0.5);
    }

    #[test]
    fn mul_broadcasts_rows() {
        let a = Tensor::<f64>::full(&[2, 3], 1.0);
        let b = t(&[1, 3], &[1.0, 2.0, 3.0]);
        let y = a.mul(&b).unwrap();
        assert_eq!(y.to_vec(), vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn incompatible_shapes_error() {
        let a = Tensor::<f64>::full(&[2, 3], 1.0);
        let b = Tensor::<f64>::full(&[2, 2], 1.0);
        assert!(matches!(a.add(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let y = t(&[2], &[0.0, 0.0]).softmax(0);
        assert_eq!(y.to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let y = t(&[2], &[1000.0, 0.0]).softmax(0).to_vec();
        assert!(y.iter().all(|v| v.is_finite()));
        assert!((y[0] - 1.0).abs() < 1e-12);
        assert!(y[1].abs() < 1e-12);
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        // exp(z_i)/sum exp(z_j) at z=[1,2,3], evaluated independently
        let y = t(&[3], &[1.0, 2.0, 3.0]).softmax(0).to_vec();
        let expect = [0.09003057317038046, 0.24472847105479764, 0.6652409557748219];
        for (a, b) in y.iter().zip(expect) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn max_axis_takes_first_argmax() {
        let x = Tensor::<f64>::param(&[4], vec![1.0, 3.0, 3.0, 2.0]);
        let y = x.max_axis(0, false);
        assert_eq!(y.item(), 3.0);
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2, 1], &[9.0, 8.0]);
        let c = Tensor::concat(&[a, b], 1).unwrap();
        assert_eq!(c.shape(), &[2, 3]);
        assert_eq!(c.to_vec(), vec![1.0, 2.0, 9.0, 3.0, 4.0, 8.0]);
        assert_eq!(c.slice_axis(1, 2, 3).to_vec(), vec![9.0, 8.0]);
    }

    #[test]
    fn permute_transposes() {
        let x = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = x.permute(&[1, 0]);
        assert_eq!(y.shape(), &[3, 2]);
        assert_eq!(y.to_vec(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }
}

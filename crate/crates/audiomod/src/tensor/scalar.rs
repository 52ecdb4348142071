//! Element type abstraction: f32 for training, f64 for gradient checks.

use std::cell::RefCell;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Reusable per-thread buffers for the convolution lowering. Contents are
/// garbage between calls; every user overwrites the region it reads.
pub struct ConvScratch<T> {
    pub cols: Vec<T>,
    pub out: Vec<T>,
    pub dy: Vec<T>,
}

impl<T: Copy + num_traits::Zero> ConvScratch<T> {
    fn new() -> Self {
        ConvScratch { cols: Vec::new(), out: Vec::new(), dy: Vec::new() }
    }

    pub fn reserve(&mut self, cols: usize, out: usize, dy: usize) {
        if self.cols.len() < cols {
            self.cols.resize(cols, T::zero());
        }
        if self.out.len() < out {
            self.out.resize(out, T::zero());
        }
        if self.dy.len() < dy {
            self.dy.resize(dy, T::zero());
        }
    }
}

thread_local! {
    static SCRATCH_F32: RefCell<ConvScratch<f32>> = RefCell::new(ConvScratch::new());
    static SCRATCH_F64: RefCell<ConvScratch<f64>> = RefCell::new(ConvScratch::new());
}

/// Floating-point element of a [`crate::tensor::Tensor`].
///
/// Training runs at `f32`; finite-difference verification needs `f64`, so all
/// network code is generic over this trait.
pub trait Scalar:
    num_traits::Float + Sum + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Runs `f` with this thread's convolution scratch buffers.
    fn with_conv_scratch<R>(f: impl FnOnce(&mut ConvScratch<Self>) -> R) -> R;

    /// General matrix multiply `C = alpha * A * B + beta * C` with explicit
    /// row/col strides, backed by `matrixmultiply`.
    ///
    /// # Safety
    /// Pointers must address `m x k`, `k x n` and `m x n` matrices under the
    /// given strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    fn with_conv_scratch<R>(f: impl FnOnce(&mut ConvScratch<Self>) -> R) -> R {
        SCRATCH_F32.with(|s| f(&mut s.borrow_mut()))
    }

    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f64 {
    fn with_conv_scratch<R>(f: impl FnOnce(&mut ConvScratch<Self>) -> R) -> R {
        SCRATCH_F64.with(|s| f(&mut s.borrow_mut()))
    }

    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

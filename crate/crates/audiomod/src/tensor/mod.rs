//! Minimal dense-tensor engine with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a reference-counted node in a dynamically built compute
//! graph. Every differentiable op records its parents and a backward closure
//! on the node it creates; [`Tensor::backward`] walks the graph in reverse
//! topological order, which is exactly the reverse of execution order. The
//! graph (the tape) lives on one thread for a forward+backward pass;
//! parallelism happens across independent passes.

mod gradcheck;
mod nn;
mod ops;
mod scalar;

pub use gradcheck::{gradient_check, gradient_check_sampled};
pub use nn::{batch_norm2d, conv2d, linear, pool2d, BnMode, PoolKind};
pub use scalar::Scalar;

use std::cell::{Cell, RefCell};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` with gradient recording disabled on this thread.
///
/// Forward passes inside the closure build no graph, so eval-mode inference
/// allocates nothing beyond the output tensors.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    GRAD_ENABLED.with(|g| {
        let prev = g.get();
        g.set(false);
        let out = f();
        g.set(prev);
        out
    })
}

pub(crate) fn grad_enabled() -> bool {
    GRAD_ENABLED.with(Cell::get)
}

type BackwardFn<T> = Box<dyn Fn(&[T])>;

struct Inner<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    grad: RefCell<Option<Vec<T>>>,
    requires_grad: bool,
    parents: Vec<Tensor<T>>,
    backward_fn: Option<BackwardFn<T>>,
}

/// N-dimensional row-major tensor with an optional gradient buffer.
pub struct Tensor<T: Scalar> {
    inner: Rc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor { inner: Rc::clone(&self.inner) }
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

impl<T: Scalar> Tensor<T> {
    /// Leaf tensor without gradient tracking.
    pub fn new(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape: shape.to_vec(),
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad: false,
                parents: Vec::new(),
                backward_fn: None,
            }),
        }
    }

    /// Leaf tensor that participates in gradient computation (a parameter).
    pub fn param(shape: &[usize], data: Vec<T>) -> Self {
        let t = Tensor::new(shape, data);
        // Rc was just created, so this uniquely owns the inner node.
        unsafe {
            let inner = Rc::as_ptr(&t.inner) as *mut Inner<T>;
            (*inner).requires_grad = true;
        }
        t
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::new(shape, vec![T::zero(); shape.iter().product()])
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Tensor::new(shape, vec![v; shape.iter().product()])
    }

    pub fn scalar(v: T) -> Self {
        Tensor::new(&[1], vec![v])
    }

    /// Internal constructor for op outputs. Records the backward step only
    /// when grad mode is on and some parent requires grad.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<T>,
        parents: Vec<Tensor<T>>,
        backward_fn: impl Fn(&[T]) + 'static,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let track = grad_enabled() && parents.iter().any(|p| p.inner.requires_grad);
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad: track,
                parents: if track { parents } else { Vec::new() },
                backward_fn: if track { Some(Box::new(backward_fn)) } else { None },
            }),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Copy of the flat row-major data.
    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    /// Single value of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape());
        self.inner.data.borrow()[0]
    }

    /// Runs `f` over the flat data without copying.
    pub fn with_data<R>(&self, f: impl FnOnce(&[T]) -> R) -> R {
        f(&self.inner.data.borrow())
    }

    /// Overwrites the flat data in place (optimizer updates, test poking).
    /// The caller must not do this to a node inside a live graph it still
    /// intends to backpropagate through.
    pub fn set_data(&self, new: &[T]) {
        let mut d = self.inner.data.borrow_mut();
        assert_eq!(d.len(), new.len());
        d.copy_from_slice(new);
    }

    /// Applies `f` to the flat data in place.
    pub fn update_data(&self, f: impl FnOnce(&mut [T])) {
        f(&mut self.inner.data.borrow_mut());
    }

    /// Gradient buffer, or `None` if nothing has been accumulated.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    /// Gradient buffer, treating "never touched" as all-zero.
    pub fn grad_or_zeros(&self) -> Vec<T> {
        self.inner
            .grad
            .borrow()
            .clone()
            .unwrap_or_else(|| vec![T::zero(); self.numel()])
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, contrib: &[T]) {
        let mut g = self.inner.grad.borrow_mut();
        match g.as_mut() {
            Some(buf) => {
                for (b, c) in buf.iter_mut().zip(contrib) {
                    *b = *b + *c;
                }
            }
            None => *g = Some(contrib.to_vec()),
        }
    }

    /// Like `accumulate_grad` but takes ownership, avoiding a copy when this
    /// is the first contribution.
    pub(crate) fn accumulate_grad_owned(&self, contrib: Vec<T>) {
        let mut g = self.inner.grad.borrow_mut();
        match g.as_mut() {
            Some(buf) => {
                for (b, c) in buf.iter_mut().zip(&contrib) {
                    *b = *b + *c;
                }
            }
            None => *g = Some(contrib),
        }
    }

    /// Leaf copy of this tensor's current values, detached from the graph.
    pub fn detach(&self) -> Tensor<T> {
        Tensor::new(&self.inner.shape, self.to_vec())
    }

    /// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
    /// reachable tensor with `requires_grad` until explicitly zeroed.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        let order = self.topo_order();
        self.accumulate_grad(&[T::one()]);
        // Reverse topological order: every node's grad is complete before its
        // backward step runs.
        for node in order.iter().rev() {
            let Some(f) = node.inner.backward_fn.as_ref() else { continue };
            let g = match node.inner.grad.borrow().as_ref() {
                Some(g) => g.clone(),
                None => continue,
            };
            f(&g);
        }
        Ok(())
    }

    /// Iterative DFS post-order over grad-requiring ancestors.
    fn topo_order(&self) -> Vec<Tensor<T>> {
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut visited: std::collections::HashSet<u64> = std::collections::HashSet::new();
        // (node, next child index) stack
        let mut stack: Vec<(Tensor<T>, usize)> = Vec::new();
        if self.inner.requires_grad {
            visited.insert(self.inner.id);
            stack.push((self.clone(), 0));
        }
        while let Some((node, child)) = stack.pop() {
            if child < node.inner.parents.len() {
                let next = node.inner.parents[child].clone();
                stack.push((node, child + 1));
                if next.inner.requires_grad && visited.insert(next.inner.id) {
                    stack.push((next, 0));
                }
            } else {
                order.push(node);
            }
        }
        order
    }
}

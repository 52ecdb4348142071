//! Adam optimizer with bias correction (beta1=0.9, beta2=0.999, eps=1e-8).

use crate::layers::NamedParam;
use crate::tensor::Scalar;

struct Slot<T> {
    name: String,
    m: Vec<T>,
    v: Vec<T>,
}

pub struct Adam<T: Scalar> {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    slots: Vec<Slot<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &[NamedParam<T>]) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            slots: params
                .iter()
                .map(|p| Slot {
                    name: p.name.clone(),
                    m: vec![T::zero(); p.tensor.numel()],
                    v: vec![T::zero(); p.tensor.numel()],
                })
                .collect(),
        }
    }

    /// One update from the gradients currently stored on the parameters.
    /// Parameters whose gradient was never touched are treated as zero-grad.
    pub fn step(&mut self, params: &[NamedParam<T>], lr: f64) {
        assert_eq!(params.len(), self.slots.len(), "optimizer/parameter set mismatch");
        self.t += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let bc1 = T::from_f64(1.0 - self.beta1.powi(self.t as i32));
        let bc2 = T::from_f64(1.0 - self.beta2.powi(self.t as i32));
        let lr_t = T::from_f64(lr);
        let eps = T::from_f64(self.eps);
        for (slot, p) in self.slots.iter_mut().zip(params) {
            debug_assert_eq!(slot.name, p.name);
            let g = p.tensor.grad_or_zeros();
            p.tensor.update_data(|w| {
                for i in 0..w.len() {
                    slot.m[i] = b1 * slot.m[i] + (T::one() - b1) * g[i];
                    slot.v[i] = b2 * slot.v[i] + (T::one() - b2) * g[i] * g[i];
                    let m_hat = slot.m[i] / bc1;
                    let v_hat = slot.v[i] / bc2;
                    w[i] = w[i] - lr_t * m_hat / (v_hat.sqrt() + eps);
                }
            });
        }
    }
}

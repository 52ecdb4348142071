//! Classification losses: cross entropy, label smoothing, and the
//! temperature-scaled distillation loss.

use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// Mean over the batch of `-log softmax(z)[y]`.
pub fn ce_loss<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let picked = logits.log_softmax(1).select_classes(labels)?;
    Ok(picked.mean_all().scale(-T::one()))
}

/// Cross entropy against smoothed targets: the true class gets `1 - eps`,
/// every other class `eps / (K - 1)`. `eps = 0` reduces to plain cross
/// entropy exactly.
pub fn label_smoothing_loss<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
    eps: f64,
) -> Result<Tensor<T>> {
    let shape = logits.shape();
    let (n, k) = (shape[0], shape[1]);
    let off = T::from_f64(eps / (k as f64 - 1.0));
    let on = T::from_f64(1.0 - eps);
    let mut q = vec![off; n * k];
    for (row, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(crate::error::Error::Data(format!(
                "label {y} out of range [0, {k}) at row {row}"
            )));
        }
        q[row * k + y] = on;
    }
    let q = Tensor::new(&[n, k], q);
    let lsm = logits.log_softmax(1);
    Ok(q.mul(&lsm)?.sum_axis(1, false).mean_all().scale(-T::one()))
}

/// Distillation loss `T^2 * KL(softmax(z_t/T) || softmax(z_s/T))`, mean over
/// the batch. Teacher logits are detached; no gradient reaches them.
pub fn kd_loss<T: Scalar>(
    student_logits: &Tensor<T>,
    teacher_logits: &Tensor<T>,
    temperature: f64,
) -> Result<Tensor<T>> {
    assert!(temperature > 0.0, "temperature must be positive");
    let inv_t = T::from_f64(1.0 / temperature);
    let zt = teacher_logits.detach().scale(inv_t);
    let zs = student_logits.scale(inv_t);
    let p_t = zt.softmax(1);
    let log_p_t = zt.log_softmax(1);
    let log_p_s = zs.log_softmax(1);
    let kl = p_t.mul(&log_p_t.sub(&log_p_s)?)?.sum_axis(1, false);
    Ok(kl.mean_all().scale(T::from_f64(temperature * temperature)))
}

/// Which hard-label loss the training config selected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HardLoss {
    CrossEntropy,
    LabelSmoothing(f64),
}

impl HardLoss {
    pub fn compute<T: Scalar>(&self, logits: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
        match *self {
            HardLoss::CrossEntropy => ce_loss(logits, labels),
            HardLoss::LabelSmoothing(eps) => label_smoothing_loss(logits, labels, eps),
        }
    }
}

/// `lambda * L_hard + (1 - lambda) * L_KD`.
pub fn total_loss<T: Scalar>(
    student_logits: &Tensor<T>,
    teacher_logits: &Tensor<T>,
    labels: &[usize],
    hard: HardLoss,
    temperature: f64,
    lambda: f64,
) -> Result<Tensor<T>> {
    let l_hard = hard.compute(student_logits, labels)?;
    let l_kd = kd_loss(student_logits, teacher_logits, temperature)?;
    Ok(l_hard
        .scale(T::from_f64(lambda))
        .add(&l_kd.scale(T::from_f64(1.0 - lambda)))?)
}

//! Finite-difference verification of reverse-mode gradients.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{no_grad, Scalar, Tensor};

fn rel_err<T: Scalar>(a: T, n: T) -> T {
    let denom = a.abs().max(n.abs()).max(T::from_f64(1e-8));
    (a - n).abs() / denom
}

fn check_indices<T: Scalar>(
    f: &dyn Fn() -> Tensor<T>,
    x: &Tensor<T>,
    eps: T,
    indices: &[usize],
) -> T {
    x.zero_grad();
    let loss = f();
    assert_eq!(loss.numel(), 1, "gradient_check needs a scalar-valued function");
    loss.backward().expect("backward on checked function");
    let analytic = x.grad_or_zeros();

    let mut max_err = T::zero();
    for &i in indices {
        let orig = x.with_data(|d| d[i]);
        x.update_data(|d| d[i] = orig + eps);
        let fp = no_grad(|| f().item());
        x.update_data(|d| d[i] = orig - eps);
        let fm = no_grad(|| f().item());
        x.update_data(|d| d[i] = orig);
        let numeric = (fp - fm) / (T::from_f64(2.0) * eps);
        let e = rel_err(analytic[i], numeric);
        if e > max_err {
            max_err = e;
        }
    }
    max_err
}

/// Central-difference check of `d f / d x` against the recorded gradient,
/// element by element. Returns the max relative error with denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
///
/// `f` must be a deterministic scalar-valued function that reads `x`'s
/// current data; points where the function is not differentiable (ReLU kinks,
/// max-pool ties) are the caller's responsibility to avoid.
pub fn gradient_check<T: Scalar>(f: impl Fn() -> Tensor<T>, x: &Tensor<T>, eps: T) -> T {
    let indices: Vec<usize> = (0..x.numel()).collect();
    check_indices(&f, x, eps, &indices)
}

/// Same check over a random subset of at most `max_elems` coordinates, for
/// tensors too large to probe exhaustively.
pub fn gradient_check_sampled<T: Scalar>(
    f: impl Fn() -> Tensor<T>,
    x: &Tensor<T>,
    eps: T,
    max_elems: usize,
    seed: u64,
) -> T {
    let n = x.numel();
    if n <= max_elems {
        return gradient_check(f, x, eps);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = std::collections::BTreeSet::new();
    while picked.len() < max_elems {
        picked.insert(rng.gen_range(0..n));
    }
    let indices: Vec<usize> = picked.into_iter().collect();
    check_indices(&f, x, eps, &indices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_exact() {
        // f(x) = sum(x^2) at x=[1,2] -> grad [2,4]
        let x = Tensor::<f64>::param(&[2], vec![1.0, 2.0]);
        let err = gradient_check(|| x.mul(&x).unwrap().sum_all(), &x, 1e-5);
        assert!(err < 1e-8, "rel err {err}");
        let loss = {
            x.zero_grad();
            x.mul(&x).unwrap().sum_all()
        };
        loss.backward().unwrap();
        assert!((x.grad().unwrap()[0] - 2.0).abs() < 1e-12);
        assert!((x.grad().unwrap()[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_sum_checks_out() {
        let x = Tensor::<f64>::param(&[4], vec![0.3, -0.7, 1.2, 0.05]);
        let err = gradient_check(|| x.sigmoid().sum_all(), &x, 1e-5);
        assert!(err < 1e-6, "rel err {err}");
    }
}
